//! Consistency rewards.
//!
//! The process reward is a weighted prefix score: block `t` contributes its
//! weight only if it and every earlier block match the reference. The outcome
//! reward counts only when the process reward is maximal, so a right answer
//! reached through a wrong trace earns nothing for the answer.

use crate::literal::{values_equal, EqualityConfig};
use crate::parser::{check_format, FormatDiagnostic, ParsedBlock, ParsedTrace, PartialTrace};
use crate::trace::{GroundTruthBlock, GroundTruthTrace};

pub const DEFAULT_ALPHA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RewardBreakdown {
    pub delta_fmt: bool,
    /// One entry per reference block.
    pub deltas: Vec<bool>,
    pub prefix_products: Vec<bool>,
    /// Σ w_t·Π δ_j, exact.
    pub weighted_prefix: u64,
    pub total_weight: u64,
    pub r_proc: f64,
    pub r_res: f64,
    pub gate_open: bool,
    pub alpha: f64,
    pub total: f64,
    pub diagnostic: FormatDiagnostic,
}

/// δ_t: same line range, same whitespace-stripped code, equal locals.
pub fn block_consistency(gt: &GroundTruthBlock, pb: &ParsedBlock, cfg: &EqualityConfig) -> bool {
    pb.line_range() == (gt.line_start, gt.line_end)
        && pb.code_lines.len() == gt.code_lines.len()
        && pb
            .code_lines
            .iter()
            .zip(&gt.code_lines)
            .all(|(c, s)| c.text.trim() == s.trim())
        && pb.locals.equals(&gt.post_state, cfg)
}

/// Per-reference-block consistency. Reference blocks with no counterpart in
/// `blocks` are inconsistent.
pub fn block_deltas(
    gt: &GroundTruthTrace,
    blocks: &[ParsedBlock],
    cfg: &EqualityConfig,
) -> Vec<bool> {
    gt.blocks()
        .iter()
        .enumerate()
        .map(|(i, gb)| {
            blocks
                .get(i)
                .is_some_and(|pb| block_consistency(gb, pb, cfg))
        })
        .collect()
}

fn prefix_products(deltas: &[bool]) -> Vec<bool> {
    deltas
        .iter()
        .scan(true, |acc, &d| {
            *acc &= d;
            Some(*acc)
        })
        .collect()
}

fn weighted_prefix(gt: &GroundTruthTrace, prefix: &[bool]) -> u64 {
    gt.blocks()
        .iter()
        .zip(prefix)
        .filter(|(_, &p)| p)
        .map(|(b, _)| b.weight)
        .sum()
}

/// `2·units/Σw` with a single rounding.
pub fn units_to_score(units: u64, total_weight: u64) -> f64 {
    (2 * units) as f64 / total_weight as f64
}

/// The process reward and the per-block consistency flags. Both are zero
/// when the format check failed; flags are still reported when the trace
/// parsed.
pub fn process_reward(
    gt: &GroundTruthTrace,
    pt: Option<&ParsedTrace>,
    diag: &FormatDiagnostic,
    cfg: &EqualityConfig,
) -> (f64, Vec<bool>) {
    let deltas = match pt {
        Some(pt) => block_deltas(gt, &pt.blocks, cfg),
        None => vec![false; gt.block_count()],
    };
    if !diag.passed() {
        return (0.0, deltas);
    }
    let units = weighted_prefix(gt, &prefix_products(&deltas));
    (units_to_score(units, gt.total_weight()), deltas)
}

/// 2 when the format holds and the predicted value equals the reference.
pub fn result_reward(
    gt: &GroundTruthTrace,
    pt: Option<&ParsedTrace>,
    diag: &FormatDiagnostic,
    cfg: &EqualityConfig,
) -> f64 {
    match pt {
        Some(pt)
            if diag.passed()
                && values_equal(&pt.return_assertion.predicted, gt.return_value(), cfg) =>
        {
            2.0
        }
        _ => 0.0,
    }
}

pub fn overall_reward(
    gt: &GroundTruthTrace,
    pt: Option<&ParsedTrace>,
    diag: &FormatDiagnostic,
    alpha: f64,
    cfg: &EqualityConfig,
) -> RewardBreakdown {
    assert!(
        alpha >= 0.0 && alpha.is_finite(),
        "alpha must be a finite non-negative number"
    );
    let delta_fmt = diag.passed();
    let deltas = match pt {
        Some(pt) => block_deltas(gt, &pt.blocks, cfg),
        None => vec![false; gt.block_count()],
    };
    let prefix = prefix_products(&deltas);
    let weighted_prefix = if delta_fmt {
        weighted_prefix(gt, &prefix)
    } else {
        0
    };
    let r_proc = units_to_score(weighted_prefix, gt.total_weight());
    let r_res = result_reward(gt, pt, diag, cfg);
    let gate_open = delta_fmt && deltas.iter().all(|&d| d);
    let total = alpha * r_proc + if gate_open { r_res } else { 0.0 };
    RewardBreakdown {
        delta_fmt,
        deltas,
        prefix_products: prefix,
        weighted_prefix,
        total_weight: gt.total_weight(),
        r_proc,
        r_res,
        gate_open,
        alpha,
        total,
        diagnostic: diag.clone(),
    }
}

/// Checks and scores raw trace text in one step.
pub fn score_text(
    gt: &GroundTruthTrace,
    text: &str,
    alpha: f64,
    cfg: &EqualityConfig,
) -> RewardBreakdown {
    let checked = check_format(gt, text, cfg);
    overall_reward(gt, checked.parsed.as_ref(), &checked.diagnostic, alpha, cfg)
}

/// Fraction of reference blocks completed before the first inconsistency.
pub fn rcs(
    gt: &GroundTruthTrace,
    pt: Option<&ParsedTrace>,
    diag: &FormatDiagnostic,
    cfg: &EqualityConfig,
) -> f64 {
    if !diag.passed() {
        return 0.0;
    }
    let Some(pt) = pt else { return 0.0 };
    let deltas = block_deltas(gt, &pt.blocks, cfg);
    let prefix = deltas.iter().take_while(|&&d| d).count();
    prefix as f64 / gt.block_count() as f64
}

/// Exact numerator of [`incremental_process_score`].
pub fn incremental_process_units(
    gt: &GroundTruthTrace,
    partial: &PartialTrace,
    cfg: &EqualityConfig,
) -> u64 {
    gt.blocks()
        .iter()
        .zip(&partial.blocks)
        .take_while(|(gb, pb)| block_consistency(gb, pb, cfg))
        .map(|(gb, _)| gb.weight)
        .sum()
}

/// Process score of a prefix, over the full-trace weight total, so scores
/// of successive prefixes add up to the final process reward.
pub fn incremental_process_score(
    gt: &GroundTruthTrace,
    partial: &PartialTrace,
    cfg: &EqualityConfig,
) -> f64 {
    units_to_score(
        incremental_process_units(gt, partial, cfg),
        gt.total_weight(),
    )
}
