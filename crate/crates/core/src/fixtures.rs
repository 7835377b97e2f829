//! Golden cases shipped with the crate, and a generator of small synthetic
//! reference traces for statistical checks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::literal::LiteralValue;
use crate::records::RewardRecord;
use crate::trace::{load_ground_truth, BlockSpec, GroundTruthTrace, Locals, TraceError};

pub const GOLDEN_NAMES: [&str; 3] = ["case3_f14", "words_x", "partition_f"];

/// Seeds for the beam-sampling dominance check, one per line.
pub const DOMINANCE_SEEDS: &str = include_str!("../fixtures/dbs_seeds.txt");

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("unknown fixture {0:?}")]
    UnknownFixture(String),
    #[error("fixture {name}: {source}")]
    Trace {
        name: String,
        #[source]
        source: TraceError,
    },
    #[error("fixture {name}: bad expected record: {source}")]
    Expected {
        name: String,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone)]
pub struct GoldenCase {
    pub name: String,
    pub gt: GroundTruthTrace,
    pub gt_record: &'static str,
    pub rollout: &'static str,
    pub expected: RewardRecord,
}

fn raw(name: &str) -> Option<(&'static str, &'static str, &'static str)> {
    macro_rules! case {
        ($dir:literal) => {
            (
                include_str!(concat!("../fixtures/", $dir, "/gt.jsonl")),
                include_str!(concat!("../fixtures/", $dir, "/rollout.txt")),
                include_str!(concat!("../fixtures/", $dir, "/expected.jsonl")),
            )
        };
    }
    match name {
        "case3_f14" => Some(case!("case3_f14")),
        "words_x" => Some(case!("words_x")),
        "partition_f" => Some(case!("partition_f")),
        _ => None,
    }
}

pub fn load_golden(name: &str) -> Result<GoldenCase, FixtureError> {
    let (gt_record, rollout, expected) =
        raw(name).ok_or_else(|| FixtureError::UnknownFixture(name.to_string()))?;
    let gt = load_ground_truth(gt_record.trim_end()).map_err(|source| FixtureError::Trace {
        name: name.to_string(),
        source,
    })?;
    let expected =
        serde_json::from_str(expected.trim_end()).map_err(|source| FixtureError::Expected {
            name: name.to_string(),
            source,
        })?;
    Ok(GoldenCase {
        name: name.to_string(),
        gt,
        gt_record,
        rollout,
        expected,
    })
}

pub fn dominance_seeds() -> Vec<u64> {
    DOMINANCE_SEEDS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.parse().expect("seed file holds integers"))
        .collect()
}

const NEW_NAMES: [&str; 8] = ["c", "d", "e", "g", "h", "m", "p", "q"];

struct Program {
    lines: Vec<String>,
    vars: Vec<(String, i64)>,
    blocks: Vec<BlockSpec>,
}

impl Program {
    fn get(&self, name: &str) -> i64 {
        self.vars
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .expect("defined")
    }

    fn set(&mut self, name: &str, v: i64) {
        match self.vars.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = v,
            None => self.vars.push((name.to_string(), v)),
        }
    }

    fn state(&self) -> Locals {
        let mut l = Locals::new();
        for (n, v) in &self.vars {
            l.insert(n.clone(), LiteralValue::int(*v));
        }
        l
    }

    fn push_block(&mut self, lines: Vec<String>, weight: u64) {
        let line_start = self.lines.len();
        let line_end = line_start + lines.len() - 1;
        self.lines.extend(lines.iter().cloned());
        let post_state = self.state();
        self.blocks.push(BlockSpec {
            line_start,
            line_end,
            code_lines: lines,
            post_state,
            weight,
        });
    }

    fn pick_var(&self, rng: &mut ChaCha8Rng) -> String {
        self.vars
            .iter()
            .filter(|(n, _)| n != "i")
            .map(|(n, _)| n.clone())
            .collect::<Vec<_>>()
            .choose(rng)
            .expect("parameters exist")
            .clone()
    }
}

/// A small integer function with 3 to 7 blocks, executed to obtain its
/// reference states. Straight-line runs weigh 1, loops and plain
/// conditionals 2, conditionals with a boolean connective 3.
pub fn synthetic_trace(seed: u64) -> GroundTruthTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_params = rng.gen_range(1..=2);
    let params: Vec<&str> = ["a", "b"][..n_params].to_vec();
    let input: Vec<i64> = (0..n_params).map(|_| rng.gen_range(-20..=20)).collect();

    let mut prog = Program {
        lines: Vec::new(),
        vars: Vec::new(),
        blocks: Vec::new(),
    };
    for (p, v) in params.iter().zip(&input) {
        prog.set(p, *v);
    }
    prog.push_block(vec![format!("def f({}):", params.join(", "))], 1);

    let mut fresh = NEW_NAMES.iter();
    for _ in 0..rng.gen_range(1..=5) {
        match rng.gen_range(0..3) {
            0 => {
                let mut lines = Vec::new();
                for _ in 0..rng.gen_range(1..=2) {
                    let src = prog.pick_var(&mut rng);
                    let dst = match fresh.next() {
                        Some(n) if rng.gen_bool(0.7) => n.to_string(),
                        _ => prog.pick_var(&mut rng),
                    };
                    let k = rng.gen_range(1..=9);
                    let (op, v) = match rng.gen_range(0..3) {
                        0 => ("+", prog.get(&src) + k),
                        1 => ("-", prog.get(&src) - k),
                        _ => ("*", prog.get(&src) * k),
                    };
                    lines.push(format!("    {dst} = {src} {op} {k}"));
                    prog.set(&dst, v);
                }
                prog.push_block(lines, 1);
            }
            1 => {
                let v = prog.pick_var(&mut rng);
                let count = rng.gen_range(1..=4);
                let mut acc = prog.get(&v);
                for i in 0..count {
                    acc += i;
                }
                prog.set(&v, acc);
                prog.set("i", count - 1);
                prog.push_block(
                    vec![
                        format!("    for i in range({count}):"),
                        format!("        {v} += i"),
                    ],
                    2,
                );
            }
            _ => {
                let v = prog.pick_var(&mut rng);
                let c = rng.gen_range(-10..=10);
                let (header, taken, weight) = if rng.gen_bool(0.3) {
                    let w = prog.pick_var(&mut rng);
                    let c2 = rng.gen_range(-10..=10);
                    (
                        format!("    if {v} > {c} and {w} < {c2}:"),
                        prog.get(&v) > c && prog.get(&w) < c2,
                        3,
                    )
                } else {
                    (format!("    if {v} > {c}:"), prog.get(&v) > c, 2)
                };
                if taken {
                    let nv = prog.get(&v) - c;
                    prog.set(&v, nv);
                }
                prog.push_block(vec![header, format!("        {v} = {v} - {c}")], weight);
            }
        }
    }

    let r = prog.pick_var(&mut rng);
    let ret = prog.get(&r);
    prog.push_block(vec![format!("    return {r}")], 1);

    let source = prog.lines.join("\n");
    GroundTruthTrace::new(
        format!("synthetic-{seed}"),
        "f",
        source,
        input.into_iter().map(LiteralValue::int).collect(),
        prog.blocks,
        LiteralValue::int(ret),
    )
    .expect("generated traces are well formed")
}
