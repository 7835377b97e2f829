use std::collections::HashMap;
use std::path::Path;

use contra_core::dbs::{
    build_prompt, dynamic_beam_sample, make_mock_policy, mixed_sample, DbsConfig, PolicyKind,
    Provenance, ScriptEntry, StageStats, Trajectory,
};
use contra_core::grpo::{group_advantages, mean_std, RolloutGroup};
use contra_core::parser::check_format;
use contra_core::records::{DiagnosticRecord, Float17, RewardRecord};
use contra_core::reward::{rcs, score_text};
use serde::Serialize;

use crate::config::{CliError, Mode, RunConfig};
use crate::io::{check_distinct_inputs, load_pairs, read_records, GroundTruths, Output};

pub fn validate(cfg: &RunConfig, gt: &Path, rollouts: &Path) -> Result<(), CliError> {
    check_distinct_inputs(gt, rollouts)?;
    let gts = GroundTruths::load(gt)?;
    let pairs = load_pairs(&gts, rollouts)?;
    let mut out = Output::open(&cfg.output)?;
    for (gt, r) in pairs {
        let c = check_format(gt, &r.trace_text, &cfg.equality);
        out.record(&DiagnosticRecord::new(r.id, &c.diagnostic))?;
    }
    out.finish()
}

pub fn score(cfg: &RunConfig, gt: &Path, rollouts: &Path) -> Result<(), CliError> {
    check_distinct_inputs(gt, rollouts)?;
    let gts = GroundTruths::load(gt)?;
    let pairs = load_pairs(&gts, rollouts)?;
    let ceiling = 2.0 * cfg.alpha + 2.0;
    let mut out = Output::open(&cfg.output)?;
    for (gt, r) in pairs {
        let b = score_text(gt, &r.trace_text, cfg.alpha, &cfg.equality);
        if !(0.0..=ceiling).contains(&b.total) || (b.gate_open && b.r_proc != 2.0) {
            return Err(CliError::Invariant(format!(
                "{}: total {} with r_proc {} and gate {}",
                r.id, b.total, b.r_proc, b.gate_open
            )));
        }
        out.record(&RewardRecord::new(r.id, &b))?;
    }
    out.finish()
}

#[derive(Serialize)]
struct AdvantageRecord<'a> {
    id: &'a str,
    total: Float17,
    advantage: Float17,
}

pub fn advantage(cfg: &RunConfig, rewards: &Path) -> Result<(), CliError> {
    let records = read_records::<RewardRecord>(rewards)?;
    // group members keep their input positions
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    for (pos, (_, r)) in records.iter().enumerate() {
        let g = *by_id.entry(r.id.clone()).or_insert_with(|| {
            groups.push((r.id.clone(), Vec::new()));
            groups.len() - 1
        });
        groups[g].1.push(pos);
    }
    let mut advantages = vec![0.0; records.len()];
    for (id, members) in &groups {
        if members.len() != cfg.group_size {
            return Err(CliError::Usage(format!(
                "group {id:?} has {} reward records, expected {}",
                members.len(),
                cfg.group_size
            )));
        }
        let totals = members.iter().map(|&p| records[p].1.total.0).collect();
        let group = RolloutGroup::new(id.clone(), totals, cfg.epsilon)
            .map_err(|e| CliError::Usage(format!("group {id:?}: {e}")))?;
        let a = group_advantages(&group);
        let sum: f64 = a.iter().sum();
        if sum.is_nan() || sum.abs() > 1e-9 {
            return Err(CliError::Invariant(format!(
                "advantages of group {id:?} sum to {sum}"
            )));
        }
        for (&p, v) in members.iter().zip(a) {
            advantages[p] = v;
        }
    }
    let mut out = Output::open(&cfg.output)?;
    for ((_, r), a) in records.iter().zip(advantages) {
        out.record(&AdvantageRecord {
            id: &r.id,
            total: r.total,
            advantage: Float17(a),
        })?;
    }
    out.finish()
}

#[derive(Serialize)]
struct RcsRecord {
    id: String,
    rcs: Float17,
}

#[derive(Serialize)]
struct RcsSummary {
    mean: Option<Float17>,
    count: usize,
}

#[derive(Serialize)]
struct Summary<T> {
    summary: T,
}

pub fn rcs_cmd(cfg: &RunConfig, gt: &Path, rollouts: &Path) -> Result<(), CliError> {
    check_distinct_inputs(gt, rollouts)?;
    let gts = GroundTruths::load(gt)?;
    let pairs = load_pairs(&gts, rollouts)?;
    let mut out = Output::open(&cfg.output)?;
    let mut scores = Vec::with_capacity(pairs.len());
    for (gt, r) in pairs {
        let c = check_format(gt, &r.trace_text, &cfg.equality);
        let v = rcs(gt, c.parsed.as_ref(), &c.diagnostic, &cfg.equality);
        scores.push(v);
        out.record(&RcsRecord {
            id: r.id,
            rcs: Float17(v),
        })?;
    }
    let mean = (!scores.is_empty()).then(|| Float17(mean_std(&scores).0));
    out.record(&Summary {
        summary: RcsSummary {
            mean,
            count: scores.len(),
        },
    })?;
    out.finish()
}

fn parse_policy(spec: &str) -> Result<PolicyKind, CliError> {
    let Some(path) = spec.strip_prefix("scripted:") else {
        return spec
            .parse()
            .map_err(|e: contra_core::dbs::InvalidPolicy| CliError::Usage(e.to_string()));
    };
    let entries = read_records::<ScriptEntry>(Path::new(path))?;
    Ok(PolicyKind::Scripted(
        entries.into_iter().map(|(_, e)| e).collect(),
    ))
}

#[derive(Serialize)]
struct TrajectoryRecord<'a> {
    id: &'a str,
    provenance: &'static str,
    termination: &'static str,
    score: Float17,
    text: &'a str,
}

#[derive(Serialize)]
struct StageSummary {
    stage: usize,
    expanded: usize,
    finished: usize,
    mean: Float17,
    std: Float17,
    best: Float17,
}

impl From<&StageStats> for StageSummary {
    fn from(s: &StageStats) -> Self {
        StageSummary {
            stage: s.stage,
            expanded: s.expanded,
            finished: s.finished,
            mean: Float17(s.mean),
            std: Float17(s.std),
            best: Float17(s.best),
        }
    }
}

#[derive(Serialize)]
struct RunSummary<'a> {
    id: &'a str,
    mode: &'static str,
    trajectories: usize,
    mean: Float17,
    std: Float17,
    #[serde(skip_serializing_if = "Option::is_none")]
    regular_mean: Option<Float17>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dbs_mean: Option<Float17>,
    stages: Vec<StageSummary>,
}

fn scores<'t>(ts: impl Iterator<Item = &'t Trajectory>) -> Vec<f64> {
    ts.map(|t| t.score).collect()
}

pub fn dbs_run(cfg: &RunConfig, gt: &Path, policy: &str, mode: Mode) -> Result<(), CliError> {
    let kind = parse_policy(policy)?;
    let gts = GroundTruths::load(gt)?;
    let dcfg = DbsConfig {
        n: cfg.n,
        t_max: cfg.t_max,
        l_max: cfg.l_max,
        seed: cfg.seed,
    };
    let mut out = Output::open(&cfg.output)?;
    for gt in &gts.traces {
        let policy = make_mock_policy(kind.clone(), gt, cfg.seed)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let prompt = build_prompt(gt);
        let (trajectories, run) = match mode {
            Mode::Dbs => {
                let run = dynamic_beam_sample(&policy, &prompt, gt, dcfg, &cfg.equality)
                    .map_err(|e| CliError::Usage(e.to_string()))?;
                let ts = run
                    .trajectories
                    .iter()
                    .cloned()
                    .map(|t| (Provenance::Dbs, t))
                    .collect();
                (ts, run)
            }
            Mode::Mixed => {
                let m = mixed_sample(&policy, &prompt, gt, cfg.n, dcfg, &cfg.equality)
                    .map_err(|e| CliError::Usage(e.to_string()))?;
                (m.trajectories, m.dbs)
            }
        };
        let expected = cfg.n;
        if trajectories.len() != expected {
            return Err(CliError::Invariant(format!(
                "{}: {} trajectories for a budget of {expected}",
                gt.id(),
                trajectories.len()
            )));
        }
        for (prov, t) in &trajectories {
            if !(0.0..=2.0).contains(&t.score) {
                return Err(CliError::Invariant(format!(
                    "{}: trajectory score {}",
                    gt.id(),
                    t.score
                )));
            }
            out.record(&TrajectoryRecord {
                id: gt.id(),
                provenance: prov.as_str(),
                termination: t.termination.as_str(),
                score: Float17(t.score),
                text: &t.text,
            })?;
        }
        let all = scores(trajectories.iter().map(|(_, t)| t));
        let (mean, std) = mean_std(&all);
        let by = |p: Provenance| {
            let xs = scores(trajectories.iter().filter(|(q, _)| *q == p).map(|(_, t)| t));
            Float17(mean_std(&xs).0)
        };
        let (regular_mean, dbs_mean) = match mode {
            Mode::Dbs => (None, None),
            Mode::Mixed => (Some(by(Provenance::Regular)), Some(by(Provenance::Dbs))),
        };
        out.record(&Summary {
            summary: RunSummary {
                id: gt.id(),
                mode: match mode {
                    Mode::Dbs => "dbs",
                    Mode::Mixed => "mixed",
                },
                trajectories: trajectories.len(),
                mean: Float17(mean),
                std: Float17(std),
                regular_mean,
                dbs_mean,
                stages: run.stages.iter().map(StageSummary::from).collect(),
            },
        })?;
    }
    out.finish()
}
