//! Ground-truth executions and their line-delimited wire format.
//!
//! Line numbers are relative to the function signature, which is line 0.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::literal::{
    parse_literal, render_literal, values_equal, EqualityConfig, LiteralError, LiteralValue,
};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid literal in {field}: {source}")]
    Literal {
        field: String,
        #[source]
        source: LiteralError,
    },
    #[error("block {block} starts at line {found}, expected {expected}")]
    Contiguity {
        block: usize,
        expected: usize,
        found: usize,
    },
}

/// Local-variable state: variable name to value, in insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Locals(Vec<(String, LiteralValue)>);

impl Locals {
    pub fn new() -> Self {
        Locals(Vec::new())
    }

    /// Converts a mapping literal with string keys. Returns `None` for any
    /// other kind of value.
    pub fn from_literal(v: LiteralValue) -> Option<Self> {
        match v {
            LiteralValue::Map(entries) => entries
                .into_iter()
                .map(|(k, v)| match k {
                    LiteralValue::Text(name) => Some((name, v)),
                    _ => None,
                })
                .collect::<Option<Vec<_>>>()
                .map(Locals),
            _ => None,
        }
    }

    pub fn to_literal(&self) -> LiteralValue {
        LiteralValue::Map(
            self.0
                .iter()
                .map(|(k, v)| (LiteralValue::Text(k.clone()), v.clone()))
                .collect(),
        )
    }

    /// Sets a variable, keeping its position if it already exists.
    pub fn insert(&mut self, name: impl Into<String>, value: LiteralValue) {
        let name = name.into();
        match self.0.iter_mut().find(|(k, _)| *k == name) {
            Some(slot) => slot.1 = value,
            None => self.0.push((name, value)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&LiteralValue> {
        self.0.iter().find(|(k, _)| k == name).map(|(_, v)| v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &LiteralValue)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut LiteralValue> {
        self.0.iter_mut().map(|(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Same variable names and pairwise-equal values.
    pub fn equals(&self, other: &Locals, cfg: &EqualityConfig) -> bool {
        self.len() == other.len()
            && self
                .iter()
                .all(|(k, v)| other.get(k).is_some_and(|w| values_equal(v, w, cfg)))
    }

    pub fn render(&self) -> Result<String, LiteralError> {
        render_literal(&self.to_literal())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthBlock {
    /// 1-based.
    pub index: usize,
    pub line_start: usize,
    pub line_end: usize,
    pub code_lines: Vec<String>,
    pub post_state: Locals,
    pub weight: u64,
}

/// Input for [`GroundTruthTrace::new`]; index and line numbers are implied
/// by position for the first block and validated for the rest.
#[derive(Debug, Clone)]
pub struct BlockSpec {
    pub line_start: usize,
    pub line_end: usize,
    pub code_lines: Vec<String>,
    pub post_state: Locals,
    pub weight: u64,
}

/// A reference execution of one function on one input.
///
/// Construction validates every structural invariant, so a value of this
/// type always has at least two contiguous blocks starting with the
/// signature line, positive weights and finite literals.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthTrace {
    id: String,
    function_name: String,
    source: String,
    input: Vec<LiteralValue>,
    blocks: Vec<GroundTruthBlock>,
    return_value: LiteralValue,
    total_weight: u64,
}

impl GroundTruthTrace {
    pub fn new(
        id: impl Into<String>,
        function_name: impl Into<String>,
        source: impl Into<String>,
        input: Vec<LiteralValue>,
        blocks: Vec<BlockSpec>,
        return_value: LiteralValue,
    ) -> Result<Self, TraceError> {
        let function_name = function_name.into();
        let source = source.into();
        if !is_identifier(&function_name) {
            return Err(TraceError::Schema(format!(
                "function_name {function_name:?} is not an identifier"
            )));
        }
        if blocks.len() < 2 {
            return Err(TraceError::Schema(format!(
                "a trace needs at least 2 blocks, got {}",
                blocks.len()
            )));
        }

        let mut out = Vec::with_capacity(blocks.len());
        let mut next_line = 0;
        for (i, b) in blocks.into_iter().enumerate() {
            let index = i + 1;
            if b.line_start != next_line {
                return Err(TraceError::Contiguity {
                    block: index,
                    expected: next_line,
                    found: b.line_start,
                });
            }
            if b.line_end < b.line_start {
                return Err(TraceError::Schema(format!(
                    "block {index} ends before it starts"
                )));
            }
            if b.code_lines.len() != b.line_end - b.line_start + 1 {
                return Err(TraceError::Schema(format!(
                    "block {index} spans {} lines but lists {} code lines",
                    b.line_end - b.line_start + 1,
                    b.code_lines.len()
                )));
            }
            if b.weight == 0 {
                return Err(TraceError::Schema(format!("block {index} has weight 0")));
            }
            if let Err(source) = b.post_state.render() {
                return Err(TraceError::Literal {
                    field: format!("blocks[{i}].locals"),
                    source,
                });
            }
            next_line = b.line_end + 1;
            out.push(GroundTruthBlock {
                index,
                line_start: b.line_start,
                line_end: b.line_end,
                code_lines: b.code_lines,
                post_state: b.post_state,
                weight: b.weight,
            });
        }

        if out[0].line_end != 0 {
            return Err(TraceError::Schema(
                "block 1 must contain exactly the signature line".into(),
            ));
        }
        let signature = out[0].code_lines[0].trim_start();
        let expected_prefix = format!("def {function_name}(");
        if !signature.starts_with(&expected_prefix)
            && !signature.starts_with(&format!("async {expected_prefix}"))
        {
            return Err(TraceError::Schema(format!(
                "signature line {signature:?} does not define {function_name}"
            )));
        }

        let source_lines = source_lines(&source);
        let block_lines: Vec<&str> = out
            .iter()
            .flat_map(|b| b.code_lines.iter().map(String::as_str))
            .collect();
        if source_lines != block_lines {
            return Err(TraceError::Schema(
                "block code lines do not reproduce the function source".into(),
            ));
        }

        for (i, v) in input.iter().enumerate() {
            if let Err(source) = render_literal(v) {
                return Err(TraceError::Literal {
                    field: format!("input[{i}]"),
                    source,
                });
            }
        }
        if let Err(source) = render_literal(&return_value) {
            return Err(TraceError::Literal {
                field: "return".into(),
                source,
            });
        }

        let total_weight = out.iter().map(|b| b.weight).sum();
        Ok(GroundTruthTrace {
            id: id.into(),
            function_name,
            source,
            input,
            blocks: out,
            return_value,
            total_weight,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn function_name(&self) -> &str {
        &self.function_name
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn input(&self) -> &[LiteralValue] {
        &self.input
    }

    pub fn blocks(&self) -> &[GroundTruthBlock] {
        &self.blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn return_value(&self) -> &LiteralValue {
        &self.return_value
    }

    pub fn total_weight(&self) -> u64 {
        self.total_weight
    }

    /// `f(arg1, arg2)` with canonical argument renderings.
    pub fn call_text(&self) -> String {
        let args: Vec<String> = self
            .input
            .iter()
            .map(|v| render_literal(v).expect("validated at construction"))
            .collect();
        format!("{}({})", self.function_name, args.join(", "))
    }

    /// Same trace under a different id.
    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

fn source_lines(source: &str) -> Vec<&str> {
    let trimmed = source.strip_suffix('\n').unwrap_or(source);
    trimmed.split('\n').collect()
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthRecord {
    pub id: String,
    pub function_name: String,
    pub source: String,
    pub input: Vec<String>,
    pub blocks: Vec<GroundTruthBlockRecord>,
    #[serde(rename = "return")]
    pub return_value: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthBlockRecord {
    pub line_start: usize,
    pub line_end: usize,
    pub code: Vec<String>,
    pub locals: String,
    pub weight: u64,
}

fn literal_field(text: &str, field: String) -> Result<LiteralValue, TraceError> {
    parse_literal(text).map_err(|source| TraceError::Literal { field, source })
}

impl TryFrom<GroundTruthRecord> for GroundTruthTrace {
    type Error = TraceError;

    fn try_from(rec: GroundTruthRecord) -> Result<Self, TraceError> {
        let input = rec
            .input
            .iter()
            .enumerate()
            .map(|(i, t)| literal_field(t, format!("input[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let blocks = rec
            .blocks
            .into_iter()
            .enumerate()
            .map(|(i, b)| {
                let field = format!("blocks[{i}].locals");
                let locals = literal_field(&b.locals, field.clone())?;
                let post_state = Locals::from_literal(locals).ok_or_else(|| {
                    TraceError::Schema(format!("{field} is not a mapping with string keys"))
                })?;
                Ok(BlockSpec {
                    line_start: b.line_start,
                    line_end: b.line_end,
                    code_lines: b.code,
                    post_state,
                    weight: b.weight,
                })
            })
            .collect::<Result<Vec<_>, TraceError>>()?;
        let return_value = literal_field(&rec.return_value, "return".into())?;
        GroundTruthTrace::new(
            rec.id,
            rec.function_name,
            rec.source,
            input,
            blocks,
            return_value,
        )
    }
}

impl From<&GroundTruthTrace> for GroundTruthRecord {
    fn from(gt: &GroundTruthTrace) -> Self {
        let render = |v: &LiteralValue| render_literal(v).expect("validated at construction");
        GroundTruthRecord {
            id: gt.id.clone(),
            function_name: gt.function_name.clone(),
            source: gt.source.clone(),
            input: gt.input.iter().map(render).collect(),
            blocks: gt
                .blocks
                .iter()
                .map(|b| GroundTruthBlockRecord {
                    line_start: b.line_start,
                    line_end: b.line_end,
                    code: b.code_lines.clone(),
                    locals: render(&b.post_state.to_literal()),
                    weight: b.weight,
                })
                .collect(),
            return_value: render(&gt.return_value),
        }
    }
}

/// Parses one ground-truth record (a single JSON object).
pub fn load_ground_truth(record: &str) -> Result<GroundTruthTrace, TraceError> {
    let rec: GroundTruthRecord =
        serde_json::from_str(record).map_err(|e| TraceError::Schema(e.to_string()))?;
    GroundTruthTrace::try_from(rec)
}

/// Serializes a trace as one JSON line (no trailing newline).
pub fn dump_ground_truth(gt: &GroundTruthTrace) -> String {
    serde_json::to_string(&GroundTruthRecord::from(gt)).expect("record serialization is infallible")
}
