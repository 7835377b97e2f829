//! Dynamic beam sampling.
//!
//! Every stage extends each active partial trajectory by one block, scores
//! the prefix against the reference, retires finished entries, and hands the
//! whole remaining budget to the best-scoring survivors.

mod policy;

pub use policy::{
    make_mock_policy, oracle_trace, perturb, render_trace, InvalidPolicy, MockPolicy, PolicyKind,
    ScriptEntry,
};

use std::fmt;

use thiserror::Error;

use crate::grpo::mean_std;
use crate::literal::EqualityConfig;
use crate::parser::parse_partial;
use crate::reward::{incremental_process_units, units_to_score};
use crate::trace::GroundTruthTrace;

pub const DEFAULT_T_MAX: usize = 10;
pub const DEFAULT_L_MAX: usize = 4096;
pub const DEFAULT_N: usize = 8;

const CLOSE_TAG: &str = "[/TRACE]";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Continuation {
    pub text: String,
    /// In the policy's own length units.
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("policy produced no text")]
    Empty,
    #[error("policy failed: {0}")]
    Failed(String),
}

/// A sampler of one-block continuations. Must be deterministic for a fixed
/// `(prompt, partial, seed)`.
pub trait Policy {
    fn sample_continuation(
        &self,
        prompt: &str,
        partial: &str,
        seed: u64,
    ) -> Result<Continuation, PolicyError>;
}

impl<P: Policy + ?Sized> Policy for &P {
    fn sample_continuation(
        &self,
        prompt: &str,
        partial: &str,
        seed: u64,
    ) -> Result<Continuation, PolicyError> {
        (**self).sample_continuation(prompt, partial, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Regular,
    Dbs,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Regular => 0x5245_4755_4c41_5200,
            Stream::Dbs => 0x4442_5300_0000_0000,
        }
    }
}

fn splitmix64(z: u64) -> u64 {
    let z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    let z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one policy call. Depends only on its arguments, so candidates
/// within a stage can be expanded in any order.
pub fn derive_seed(base: u64, stream: Stream, stage: usize, beam: usize) -> u64 {
    let h = splitmix64(base ^ stream.tag());
    let h = splitmix64(h ^ stage as u64);
    splitmix64(h ^ beam as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    TraceClosed,
    LengthCap,
    StageCap,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::TraceClosed => "trace-closed",
            Termination::LengthCap => "length-cap",
            Termination::StageCap => "stage-cap",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BeamEntry {
    pub text: String,
    /// Exact numerator of the cumulative score.
    pub score_units: u64,
    pub stages: usize,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub text: String,
    pub score: f64,
    pub score_units: u64,
    pub termination: Termination,
    pub length: usize,
    pub stages: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DbsConfig {
    pub n: usize,
    pub t_max: usize,
    pub l_max: usize,
    pub seed: u64,
}

impl Default for DbsConfig {
    fn default() -> Self {
        DbsConfig {
            n: DEFAULT_N,
            t_max: DEFAULT_T_MAX,
            l_max: DEFAULT_L_MAX,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DbsError {
    #[error("{0} must be at least 1")]
    ZeroParameter(&'static str),
    #[error("the mixed budget must be a positive even number, got {0}")]
    OddBudget(usize),
}

impl DbsConfig {
    fn validate(&self) -> Result<(), DbsError> {
        if self.n == 0 {
            return Err(DbsError::ZeroParameter("n"));
        }
        if self.t_max == 0 {
            return Err(DbsError::ZeroParameter("t_max"));
        }
        if self.l_max == 0 {
            return Err(DbsError::ZeroParameter("l_max"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageStats {
    pub stage: usize,
    /// Entries extended in this stage.
    pub expanded: usize,
    /// Entries that terminated in this stage.
    pub finished: usize,
    /// Over all entries extended in this stage.
    pub mean: f64,
    pub std: f64,
    pub best: f64,
    /// Scores of the entries still running after this stage, by beam index.
    pub survivors: Vec<f64>,
    /// Score shared by every entry carried into the next stage.
    pub kept_score: Option<f64>,
    /// `(beam index, copies)` for each survivor kept for the next stage.
    pub allocation: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DbsRun {
    pub trajectories: Vec<Trajectory>,
    pub stages: Vec<StageStats>,
}

struct Sampler<'a, P: Policy> {
    policy: &'a P,
    prompt: &'a str,
    gt: &'a GroundTruthTrace,
    cfg: DbsConfig,
    eq: EqualityConfig,
}

enum Step {
    Continue(BeamEntry),
    Done(Trajectory),
}

impl<P: Policy> Sampler<'_, P> {
    fn finish(&self, e: BeamEntry, termination: Termination) -> Trajectory {
        Trajectory {
            score: units_to_score(e.score_units, self.gt.total_weight()),
            text: e.text,
            score_units: e.score_units,
            termination,
            length: e.length,
            stages: e.stages,
        }
    }

    fn extend(&self, entry: &BeamEntry, stage: usize, seed: u64) -> Step {
        let cont = match self
            .policy
            .sample_continuation(self.prompt, &entry.text, seed)
        {
            Ok(c) if !c.text.is_empty() => c,
            // the entry ends where it stands
            _ => {
                let mut e = entry.clone();
                e.stages = stage;
                return Step::Done(self.finish(e, Termination::StageCap));
            }
        };
        let text = format!("{}{}", entry.text, cont.text);
        let score_units = incremental_process_units(self.gt, &parse_partial(&text), &self.eq);
        let e = BeamEntry {
            text,
            score_units,
            stages: stage,
            length: entry.length.saturating_add(cont.length),
        };
        let termination = if e.text.contains(CLOSE_TAG) {
            Some(Termination::TraceClosed)
        } else if e.length >= self.cfg.l_max {
            Some(Termination::LengthCap)
        } else if stage >= self.cfg.t_max {
            Some(Termination::StageCap)
        } else {
            None
        };
        match termination {
            Some(t) => Step::Done(self.finish(e, t)),
            None => Step::Continue(e),
        }
    }
}

/// Runs `cfg.n` beams with budget reallocation after every stage.
pub fn dynamic_beam_sample<P: Policy>(
    policy: &P,
    prompt: &str,
    gt: &GroundTruthTrace,
    cfg: DbsConfig,
    eq: &EqualityConfig,
) -> Result<DbsRun, DbsError> {
    cfg.validate()?;
    let sampler = Sampler {
        policy,
        prompt,
        gt,
        cfg,
        eq: *eq,
    };
    let mut active = vec![BeamEntry::default(); cfg.n];
    let mut done = Vec::with_capacity(cfg.n);
    let mut stages = Vec::new();
    let mut stage = 0;

    while !active.is_empty() {
        stage += 1;
        let mut survivors: Vec<(usize, BeamEntry)> = Vec::new();
        let mut scores = Vec::with_capacity(active.len());
        let before = done.len();
        for (beam, entry) in active.iter().enumerate() {
            let seed = derive_seed(cfg.seed, Stream::Dbs, stage, beam);
            match sampler.extend(entry, stage, seed) {
                Step::Continue(e) => {
                    scores.push(units_to_score(e.score_units, gt.total_weight()));
                    survivors.push((beam, e));
                }
                Step::Done(t) => {
                    scores.push(t.score);
                    done.push(t);
                }
            }
        }

        let (mean, std) = mean_std(&scores);
        let best = scores.iter().copied().fold(0.0, f64::max);
        let mut stats = StageStats {
            stage,
            expanded: active.len(),
            finished: done.len() - before,
            mean,
            std,
            best,
            survivors: survivors
                .iter()
                .map(|(_, e)| units_to_score(e.score_units, gt.total_weight()))
                .collect(),
            kept_score: None,
            allocation: Vec::new(),
        };

        // survivors.len() == cfg.n - done.len(): the remaining budget
        let budget = survivors.len();
        active = Vec::with_capacity(budget);
        if let Some(top) = survivors.iter().map(|(_, e)| e.score_units).max() {
            stats.kept_score = Some(units_to_score(top, gt.total_weight()));
            let winners: Vec<&(usize, BeamEntry)> = survivors
                .iter()
                .filter(|(_, e)| e.score_units == top)
                .collect();
            let q = budget / winners.len();
            let r = budget % winners.len();
            for (rank, (beam, e)) in winners.into_iter().enumerate() {
                let copies = q + usize::from(rank < r);
                if copies > 0 {
                    stats.allocation.push((*beam, copies));
                }
                active.extend(std::iter::repeat_n(e, copies).cloned());
            }
        }
        stages.push(stats);
    }

    debug_assert_eq!(done.len(), cfg.n);
    Ok(DbsRun {
        trajectories: done,
        stages,
    })
}

/// `count` independent rollouts, each extended block by block until it
/// terminates, with no reallocation.
pub fn independent_sample<P: Policy>(
    policy: &P,
    prompt: &str,
    gt: &GroundTruthTrace,
    count: usize,
    cfg: DbsConfig,
    eq: &EqualityConfig,
) -> Result<Vec<Trajectory>, DbsError> {
    DbsConfig {
        n: count.max(1),
        ..cfg
    }
    .validate()?;
    let sampler = Sampler {
        policy,
        prompt,
        gt,
        cfg,
        eq: *eq,
    };
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut entry = BeamEntry::default();
        let mut stage = 0;
        loop {
            stage += 1;
            let seed = derive_seed(cfg.seed, Stream::Regular, stage, i);
            match sampler.extend(&entry, stage, seed) {
                Step::Continue(e) => entry = e,
                Step::Done(t) => {
                    out.push(t);
                    break;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Regular,
    Dbs,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Regular => "regular",
            Provenance::Dbs => "dbs",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedRun {
    /// Regular rollouts first, then the beam-sampled half.
    pub trajectories: Vec<(Provenance, Trajectory)>,
    pub dbs: DbsRun,
}

/// Splits an even budget between independent rollouts and beam sampling.
pub fn mixed_sample<P: Policy>(
    policy: &P,
    prompt: &str,
    gt: &GroundTruthTrace,
    n_total: usize,
    cfg: DbsConfig,
    eq: &EqualityConfig,
) -> Result<MixedRun, DbsError> {
    if n_total == 0 || n_total % 2 == 1 {
        return Err(DbsError::OddBudget(n_total));
    }
    let half = n_total / 2;
    let regular = independent_sample(policy, prompt, gt, half, cfg, eq)?;
    let dbs = dynamic_beam_sample(policy, prompt, gt, DbsConfig { n: half, ..cfg }, eq)?;
    let trajectories = regular
        .into_iter()
        .map(|t| (Provenance::Regular, t))
        .chain(
            dbs.trajectories
                .iter()
                .cloned()
                .map(|t| (Provenance::Dbs, t)),
        )
        .collect();
    Ok(MixedRun { trajectories, dbs })
}

/// Task prompt for a reference trace: the function and the call whose
/// value is to be predicted.
pub fn build_prompt(gt: &GroundTruthTrace) -> String {
    format!(
        "[PYTHON]\n{}\nassert {} == ??\n[/PYTHON]\n",
        gt.source().trim_end(),
        gt.call_text()
    )
}
