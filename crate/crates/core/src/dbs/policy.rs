//! Reference policies for exercising the sampler without a language model.

use std::collections::HashMap;
use std::str::FromStr;

use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{derive_seed, Continuation, Policy, PolicyError, Stream};
use crate::literal::{render_literal, LiteralValue};
use crate::trace::{GroundTruthTrace, Locals};

const PLACEHOLDER_THOUGHT: &str = "# THINKING";

const WORDS: [&str; 16] = [
    "the", "loop", "value", "then", "x", "returns", "[CODE]", "so", "=", "list", "]", "maybe",
    "[LINENO", "{'n':", "None", "until",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid policy: {0}")]
pub struct InvalidPolicy(pub String);

/// One scripted continuation, used at the given 1-based stage for the given
/// 0-based beam of a beam-sampling run.
#[derive(Debug, Clone, PartialEq, Eq, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub stage: usize,
    pub beam: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyKind {
    /// Emits the reference blocks verbatim with a placeholder thought.
    Oracle,
    /// Like the oracle, but each block's locals are corrupted with the given
    /// probability.
    Noisy(f64),
    /// Replays the script where it has an entry, otherwise acts as the oracle.
    Scripted(Vec<ScriptEntry>),
    /// Random words closed by `[/LOCALS]`; never finishes a trace.
    Gibberish,
}

impl FromStr for PolicyKind {
    type Err = InvalidPolicy;

    /// `oracle`, `noisy:P` or `gibberish`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(PolicyKind::Oracle),
            "gibberish" => Ok(PolicyKind::Gibberish),
            _ => {
                let p = s
                    .strip_prefix("noisy:")
                    .ok_or_else(|| InvalidPolicy(format!("unknown policy {s:?}")))?;
                let p: f64 = p
                    .parse()
                    .map_err(|_| InvalidPolicy(format!("bad probability {p:?}")))?;
                check_probability(p)?;
                Ok(PolicyKind::Noisy(p))
            }
        }
    }
}

fn check_probability(p: f64) -> Result<(), InvalidPolicy> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(InvalidPolicy(format!("probability {p} is outside [0, 1]")))
    }
}

#[derive(Debug, Clone)]
pub struct MockPolicy {
    kind: PolicyKind,
    gt: GroundTruthTrace,
    script: HashMap<u64, String>,
}

pub fn make_mock_policy(
    kind: PolicyKind,
    gt: &GroundTruthTrace,
    seed: u64,
) -> Result<MockPolicy, InvalidPolicy> {
    let mut script = HashMap::new();
    match &kind {
        PolicyKind::Noisy(p) => check_probability(*p)?,
        PolicyKind::Scripted(entries) => {
            for e in entries {
                if e.stage == 0 {
                    return Err(InvalidPolicy("script stages start at 1".into()));
                }
                script.insert(
                    derive_seed(seed, Stream::Dbs, e.stage, e.beam),
                    e.text.clone(),
                );
            }
        }
        PolicyKind::Oracle | PolicyKind::Gibberish => {}
    }
    Ok(MockPolicy {
        kind,
        gt: gt.clone(),
        script,
    })
}

fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

fn block_text(gt: &GroundTruthTrace, index: usize, locals: &Locals) -> String {
    let block = &gt.blocks()[index];
    let mut out = String::from("[CODE]\n");
    for (k, line) in block.code_lines.iter().enumerate() {
        out.push_str(&format!("[LINENO {}]    {}\n", block.line_start + k, line));
    }
    out.push_str("[/CODE]\n[THOUGHT]\n");
    out.push_str(PLACEHOLDER_THOUGHT);
    out.push_str("\n[/THOUGHT]\n[LOCALS]\n");
    out.push_str(&locals.render().expect("reference locals render"));
    out.push_str("\n[/LOCALS]\n");
    out
}

fn return_text(gt: &GroundTruthTrace) -> String {
    format!(
        "[RETURN]\nassert {} == {}\n[/RETURN]\n[/TRACE]\n",
        gt.call_text(),
        render_literal(gt.return_value()).expect("reference value renders")
    )
}

/// The complete trace the oracle policy produces.
pub fn oracle_trace(gt: &GroundTruthTrace) -> String {
    let states: Vec<Locals> = gt.blocks().iter().map(|b| b.post_state.clone()).collect();
    render_trace(gt, &states)
}

/// A well-formed, aligned trace for `gt` that reports `states` as the
/// block locals. Panics unless there is one state per block.
pub fn render_trace(gt: &GroundTruthTrace, states: &[Locals]) -> String {
    assert_eq!(states.len(), gt.block_count(), "one state per block");
    let mut out = String::from("[TRACE]\n");
    for (i, state) in states.iter().enumerate() {
        out.push_str(&block_text(gt, i, state));
    }
    out.push_str(&return_text(gt));
    out
}

/// Changes one value so that the state no longer equals the original:
/// the first integer gets +1, else a boolean flips, else a string grows,
/// else a float moves, else a new variable appears.
pub fn perturb(locals: &mut Locals) {
    fn first<'v>(
        v: &'v mut LiteralValue,
        pick: &dyn Fn(&LiteralValue) -> bool,
    ) -> Option<&'v mut LiteralValue> {
        if pick(v) {
            return Some(v);
        }
        match v {
            LiteralValue::List(xs) | LiteralValue::Tuple(xs) => {
                xs.iter_mut().find_map(|x| first(x, pick))
            }
            // set elements and mapping keys must stay distinct; leave them be
            LiteralValue::Map(entries) => entries.iter_mut().find_map(|(_, x)| first(x, pick)),
            _ => None,
        }
    }
    let picks: [&dyn Fn(&LiteralValue) -> bool; 4] = [
        &|v| matches!(v, LiteralValue::Int(_)),
        &|v| matches!(v, LiteralValue::Bool(_)),
        &|v| matches!(v, LiteralValue::Text(_)),
        &|v| matches!(v, LiteralValue::Float(_)),
    ];
    for pick in picks {
        let found = locals.values_mut().find_map(|v| first(v, pick));
        if let Some(v) = found {
            match v {
                LiteralValue::Int(i) => *i += BigInt::from(1),
                LiteralValue::Bool(b) => *b = !*b,
                LiteralValue::Text(s) => s.push('_'),
                LiteralValue::Float(f) => *f = if *f + 1.0 != *f { *f + 1.0 } else { *f / 2.0 },
                _ => unreachable!(),
            }
            return;
        }
    }
    let mut key = String::from("_noise");
    while locals.get(&key).is_some() {
        key.push('_');
    }
    locals.insert(key, LiteralValue::int(0));
}

impl MockPolicy {
    fn next_block(&self, partial: &str) -> usize {
        partial.lines().filter(|l| *l == "[/LOCALS]").count()
    }

    fn reference_step(&self, partial: &str, rng: Option<(&mut ChaCha8Rng, f64)>) -> String {
        let index = self.next_block(partial);
        if index >= self.gt.block_count() {
            return return_text(&self.gt);
        }
        let mut locals = self.gt.blocks()[index].post_state.clone();
        if let Some((rng, p)) = rng {
            if rng.gen_bool(p) {
                perturb(&mut locals);
            }
        }
        let body = block_text(&self.gt, index, &locals);
        if partial.is_empty() {
            format!("[TRACE]\n{body}")
        } else {
            body
        }
    }
}

impl Policy for MockPolicy {
    fn sample_continuation(
        &self,
        _prompt: &str,
        partial: &str,
        seed: u64,
    ) -> Result<Continuation, PolicyError> {
        let text = match &self.kind {
            PolicyKind::Oracle => self.reference_step(partial, None),
            PolicyKind::Noisy(p) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                self.reference_step(partial, Some((&mut rng, *p)))
            }
            PolicyKind::Scripted(_) => match self.script.get(&seed) {
                Some(t) => t.clone(),
                None => self.reference_step(partial, None),
            },
            PolicyKind::Gibberish => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let n = rng.gen_range(3..12);
                let words: Vec<&str> = (0..n)
                    .map(|_| *WORDS.choose(&mut rng).expect("non-empty vocabulary"))
                    .collect();
                format!("{}\n[/LOCALS]\n", words.join(" "))
            }
        };
        if text.is_empty() {
            return Err(PolicyError::Empty);
        }
        Ok(Continuation {
            length: word_count(&text),
            text,
        })
    }
}
