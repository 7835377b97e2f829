use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use contra_core::records::{record_lines, RolloutRecord};
use contra_core::trace::{load_ground_truth, GroundTruthTrace};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::CliError;

fn display(path: &Path) -> String {
    if path == Path::new("-") {
        "<stdin>".into()
    } else {
        path.display().to_string()
    }
}

pub fn read_input(path: &Path) -> Result<String, CliError> {
    let mut text = String::new();
    let res = if path == Path::new("-") {
        io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map(|_| ())
    };
    res.map_err(|source| CliError::Io {
        path: display(path),
        source,
    })?;
    Ok(text)
}

/// Records of a line-delimited file with the line each came from.
pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, CliError> {
    let text = read_input(path)?;
    record_lines(&text)
        .map(|(line, l)| {
            serde_json::from_str(l)
                .map(|r| (line, r))
                .map_err(|e| CliError::Record {
                    path: display(path),
                    line,
                    message: e.to_string(),
                })
        })
        .collect()
}

/// Reference traces in file order, indexed by id.
pub struct GroundTruths {
    pub traces: Vec<GroundTruthTrace>,
    by_id: HashMap<String, usize>,
}

impl GroundTruths {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = read_input(path)?;
        let mut traces = Vec::new();
        let mut by_id = HashMap::new();
        for (line, l) in record_lines(&text) {
            let err = |message: String| CliError::Record {
                path: display(path),
                line,
                message,
            };
            let gt = load_ground_truth(l).map_err(|e| err(e.to_string()))?;
            if by_id.insert(gt.id().to_string(), traces.len()).is_some() {
                return Err(err(format!("duplicate id {:?}", gt.id())));
            }
            traces.push(gt);
        }
        Ok(GroundTruths { traces, by_id })
    }

    pub fn get(&self, id: &str) -> Option<&GroundTruthTrace> {
        self.by_id.get(id).map(|&i| &self.traces[i])
    }
}

/// Each rollout paired with its reference trace.
pub fn load_pairs<'g>(
    gts: &'g GroundTruths,
    path: &Path,
) -> Result<Vec<(&'g GroundTruthTrace, RolloutRecord)>, CliError> {
    read_records::<RolloutRecord>(path)?
        .into_iter()
        .map(|(line, r)| match gts.get(&r.id) {
            Some(gt) => Ok((gt, r)),
            None => Err(CliError::Record {
                path: display(path),
                line,
                message: format!("no reference trace with id {:?}", r.id),
            }),
        })
        .collect()
}

pub fn check_distinct_inputs(a: &Path, b: &Path) -> Result<(), CliError> {
    if a == Path::new("-") && b == Path::new("-") {
        return Err(CliError::Usage(
            "only one input can be read from stdin".into(),
        ));
    }
    Ok(())
}

pub struct Output {
    path: String,
    inner: Box<dyn Write>,
}

impl Output {
    pub fn open(path: &Path) -> Result<Self, CliError> {
        let inner: Box<dyn Write> = if path == Path::new("-") {
            Box::new(BufWriter::new(io::stdout().lock()))
        } else {
            let f = File::create(path).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
            Box::new(BufWriter::new(f))
        };
        Ok(Output {
            path: if path == Path::new("-") {
                "<stdout>".into()
            } else {
                path.display().to_string()
            },
            inner,
        })
    }

    pub fn record<T: Serialize>(&mut self, r: &T) -> Result<(), CliError> {
        // the only serialization failure is a non-finite number
        let line = serde_json::to_string(r).map_err(|e| CliError::Invariant(e.to_string()))?;
        writeln!(self.inner, "{line}").map_err(|source| CliError::Io {
            path: self.path.clone(),
            source,
        })
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.inner.flush().map_err(|source| CliError::Io {
            path: self.path,
            source,
        })
    }
}
