#![allow(dead_code)]

use contra_core::dbs::{perturb, render_trace};
use contra_core::literal::LiteralValue;
use contra_core::trace::{GroundTruthTrace, Locals};
use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::Rng;

const TEXT_CHARS: [char; 16] = [
    'a', 'z', ' ', '\'', '"', '\\', '\n', '\t', '\u{1}', '\u{7f}', 'é', '中', '🎉', '\u{85}', '{',
    ']',
];

pub fn random_text<R: Rng>(rng: &mut R) -> String {
    let len = rng.gen_range(0..8);
    (0..len).map(|_| *TEXT_CHARS.choose(rng).unwrap()).collect()
}

pub fn random_float<R: Rng>(rng: &mut R) -> f64 {
    match rng.gen_range(0..4) {
        0 => [0.0, -0.0, 0.5, 1e16, 1e-5, 0.1, 5e-324, f64::MAX][rng.gen_range(0..8)],
        1 => rng.gen_range(-1000..1000) as f64 / 8.0,
        _ => loop {
            let f = f64::from_bits(rng.gen());
            if f.is_finite() {
                break f;
            }
        },
    }
}

pub fn random_int<R: Rng>(rng: &mut R) -> BigInt {
    match rng.gen_range(0..3) {
        0 => BigInt::from(rng.gen_range(-10..10)),
        1 => BigInt::from(rng.gen::<i64>()),
        _ => BigInt::from(rng.gen::<i128>()) * BigInt::from(rng.gen::<u64>()),
    }
}

fn scalar<R: Rng>(rng: &mut R) -> LiteralValue {
    match rng.gen_range(0..5) {
        0 => LiteralValue::None,
        1 => LiteralValue::Bool(rng.gen()),
        2 => LiteralValue::Int(random_int(rng)),
        3 => LiteralValue::Float(random_float(rng)),
        _ => LiteralValue::Text(random_text(rng)),
    }
}

/// Scalars or tuples of hashable values.
pub fn random_hashable<R: Rng>(rng: &mut R, depth: usize) -> LiteralValue {
    if depth == 0 || rng.gen_bool(0.7) {
        return scalar(rng);
    }
    let n = rng.gen_range(0..3);
    LiteralValue::Tuple((0..n).map(|_| random_hashable(rng, depth - 1)).collect())
}

/// Any literal with nesting depth at most `depth`.
pub fn random_literal<R: Rng>(rng: &mut R, depth: usize) -> LiteralValue {
    if depth == 0 || rng.gen_bool(0.35) {
        return scalar(rng);
    }
    let n = rng.gen_range(0..4);
    match rng.gen_range(0..4) {
        0 => LiteralValue::List((0..n).map(|_| random_literal(rng, depth - 1)).collect()),
        1 => LiteralValue::Tuple((0..n).map(|_| random_literal(rng, depth - 1)).collect()),
        2 => LiteralValue::set((0..n).map(|_| random_hashable(rng, depth - 1)).collect()),
        _ => LiteralValue::mapping(
            (0..n)
                .map(|_| {
                    (
                        random_hashable(rng, depth - 1),
                        random_literal(rng, depth - 1),
                    )
                })
                .collect(),
        ),
    }
}

/// A rendered trace for `gt` whose locals are wrong from `first_bad` on
/// (0-based), or fully correct for `None`. Later blocks may or may not be
/// wrong too.
pub fn corrupted_trace<R: Rng>(
    gt: &GroundTruthTrace,
    first_bad: Option<usize>,
    rng: &mut R,
) -> String {
    let states: Vec<Locals> = gt
        .blocks()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let mut s = b.post_state.clone();
            let bad = match first_bad {
                Some(k) if i == k => true,
                Some(k) if i > k => rng.gen_bool(0.5),
                _ => false,
            };
            if bad {
                perturb(&mut s);
            }
            s
        })
        .collect();
    render_trace(gt, &states)
}

/// Lines of `text` that hold at least one trace tag (code lines excluded).
pub fn tag_line_indices(text: &str) -> Vec<usize> {
    text.split('\n')
        .enumerate()
        .filter(|(_, l)| l.starts_with('[') && !l.starts_with("[LINENO"))
        .map(|(i, _)| i)
        .collect()
}

pub fn replace_line(text: &str, index: usize, new: &str) -> String {
    let mut lines: Vec<&str> = text.split('\n').collect();
    lines[index] = new;
    lines.join("\n")
}

pub fn swap_lines(text: &str, a: usize, b: usize) -> String {
    let mut lines: Vec<&str> = text.split('\n').collect();
    lines.swap(a, b);
    lines.join("\n")
}

/// Single-tag mutations of a valid trace: case change, added leading or
/// trailing space, and swapping a tag line with its neighbour.
pub fn tag_mutations(text: &str) -> Vec<(String, String)> {
    let lines: Vec<&str> = text.split('\n').collect();
    let mut out = Vec::new();
    for i in tag_line_indices(text) {
        let l = lines[i];
        out.push((
            format!("lowercase line {}", i + 1),
            replace_line(text, i, &l.to_lowercase()),
        ));
        out.push((
            format!("leading space line {}", i + 1),
            replace_line(text, i, &format!(" {l}")),
        ));
        out.push((
            format!("trailing space line {}", i + 1),
            replace_line(text, i, &format!("{l} ")),
        ));
        if i + 1 < lines.len() && !lines[i + 1].trim().is_empty() && lines[i + 1] != l {
            out.push((
                format!("swap lines {} and {}", i + 1, i + 2),
                swap_lines(text, i, i + 1),
            ));
        }
    }
    out
}
