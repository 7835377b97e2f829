//! Literal values of the traced subject language (Python).
//!
//! Local-variable states, call arguments and return values in a trace are
//! written as pure literals: `None`, booleans, arbitrary-precision integers,
//! binary64 floats, strings, lists, tuples, sets and dicts. This module parses
//! them without evaluating anything, renders them canonically and compares
//! them with the subject language's equality rules.

mod parse;
mod render;

pub use parse::{parse_literal, parse_literal_with, ParseOptions, DEFAULT_MAX_DEPTH};
pub use render::{render_float, render_literal};

use num_bigint::BigInt;
use num_traits::{FromPrimitive, ToPrimitive};
use thiserror::Error;

/// A literal value.
///
/// `Set` and `Map` hold pairwise-distinct elements and keys under
/// [`values_equal`]; build them through [`LiteralValue::set`] and
/// [`LiteralValue::mapping`] when the input may contain duplicates.
#[derive(Clone, Debug, PartialEq)]
pub enum LiteralValue {
    None,
    Bool(bool),
    Int(BigInt),
    Float(f64),
    Text(String),
    List(Vec<LiteralValue>),
    Tuple(Vec<LiteralValue>),
    Set(Vec<LiteralValue>),
    /// Entries in insertion order.
    Map(Vec<(LiteralValue, LiteralValue)>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LiteralError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unsafe expression at offset {offset}: {what}")]
    UnsafeExpression { offset: usize, what: String },
    #[error("nesting depth exceeds the limit of {limit}")]
    DepthExceeded { limit: usize },
    #[error("non-finite float")]
    NonFiniteFloat,
    #[error("unsupported literal: {0}")]
    Unsupported(String),
    #[error("unhashable {0} used as a set element or mapping key")]
    Unhashable(&'static str),
}

/// Controls float comparison in [`values_equal`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EqualityConfig {
    /// Relative tolerance for float comparisons. Zero means exact.
    pub rel_tol: f64,
}

impl EqualityConfig {
    pub const EXACT: EqualityConfig = EqualityConfig { rel_tol: 0.0 };

    pub fn with_rel_tol(rel_tol: f64) -> Self {
        EqualityConfig { rel_tol }
    }
}

impl LiteralValue {
    pub fn int(v: i64) -> Self {
        LiteralValue::Int(BigInt::from(v))
    }

    pub fn text(s: impl Into<String>) -> Self {
        LiteralValue::Text(s.into())
    }

    /// Builds a set, keeping the first of any group of equal elements.
    pub fn set(elements: Vec<LiteralValue>) -> Self {
        let mut out: Vec<LiteralValue> = Vec::with_capacity(elements.len());
        for e in elements {
            if !out
                .iter()
                .any(|x| values_equal(x, &e, &EqualityConfig::EXACT))
            {
                out.push(e);
            }
        }
        LiteralValue::Set(out)
    }

    /// Builds a mapping with dict-display semantics: a repeated key keeps its
    /// first position and takes the last value.
    pub fn mapping(entries: Vec<(LiteralValue, LiteralValue)>) -> Self {
        let mut out: Vec<(LiteralValue, LiteralValue)> = Vec::with_capacity(entries.len());
        for (k, v) in entries {
            match out
                .iter_mut()
                .find(|(x, _)| values_equal(x, &k, &EqualityConfig::EXACT))
            {
                Some(slot) => slot.1 = v,
                None => out.push((k, v)),
            }
        }
        LiteralValue::Map(out)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LiteralValue::None => "none",
            LiteralValue::Bool(_) => "bool",
            LiteralValue::Int(_) => "int",
            LiteralValue::Float(_) => "float",
            LiteralValue::Text(_) => "str",
            LiteralValue::List(_) => "list",
            LiteralValue::Tuple(_) => "tuple",
            LiteralValue::Set(_) => "set",
            LiteralValue::Map(_) => "dict",
        }
    }

    /// Whether the value may be a set element or mapping key.
    pub fn is_hashable(&self) -> bool {
        match self {
            LiteralValue::List(_) | LiteralValue::Set(_) | LiteralValue::Map(_) => false,
            LiteralValue::Tuple(items) => items.iter().all(LiteralValue::is_hashable),
            _ => true,
        }
    }

    /// Nesting depth; scalars have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            LiteralValue::List(xs) | LiteralValue::Tuple(xs) | LiteralValue::Set(xs) => {
                1 + xs.iter().map(LiteralValue::depth).max().unwrap_or(0)
            }
            LiteralValue::Map(entries) => {
                1 + entries
                    .iter()
                    .map(|(k, v)| k.depth().max(v.depth()))
                    .max()
                    .unwrap_or(0)
            }
            _ => 0,
        }
    }
}

enum Numeric<'a> {
    Int(std::borrow::Cow<'a, BigInt>),
    Float(f64),
}

fn as_numeric(v: &LiteralValue) -> Option<Numeric<'_>> {
    use std::borrow::Cow;
    match v {
        // bool is an int subtype in the subject language
        LiteralValue::Bool(b) => Some(Numeric::Int(Cow::Owned(BigInt::from(u8::from(*b))))),
        LiteralValue::Int(i) => Some(Numeric::Int(Cow::Borrowed(i))),
        LiteralValue::Float(f) => Some(Numeric::Float(*f)),
        _ => None,
    }
}

fn floats_close(a: f64, b: f64, cfg: &EqualityConfig) -> bool {
    if a == b {
        return true;
    }
    cfg.rel_tol > 0.0 && (a - b).abs() <= cfg.rel_tol * a.abs().max(b.abs())
}

fn int_float_equal(i: &BigInt, f: f64, cfg: &EqualityConfig) -> bool {
    if cfg.rel_tol > 0.0 {
        return match i.to_f64() {
            Some(x) if x.is_finite() => floats_close(x, f, cfg),
            _ => false,
        };
    }
    if !f.is_finite() || f.fract() != 0.0 {
        return false;
    }
    BigInt::from_f64(f).is_some_and(|fi| &fi == i)
}

fn numeric_equal(a: &Numeric<'_>, b: &Numeric<'_>, cfg: &EqualityConfig) -> bool {
    match (a, b) {
        (Numeric::Int(x), Numeric::Int(y)) => x == y,
        (Numeric::Float(x), Numeric::Float(y)) => floats_close(*x, *y, cfg),
        (Numeric::Int(i), Numeric::Float(f)) | (Numeric::Float(f), Numeric::Int(i)) => {
            int_float_equal(i, *f, cfg)
        }
    }
}

/// Structural equality with the subject language's semantics.
///
/// Mappings and sets are unordered; `bool`, `int` and `float` compare
/// numerically across kinds; lists never equal tuples.
pub fn values_equal(a: &LiteralValue, b: &LiteralValue, cfg: &EqualityConfig) -> bool {
    use LiteralValue::*;
    if let (Some(x), Some(y)) = (as_numeric(a), as_numeric(b)) {
        return numeric_equal(&x, &y, cfg);
    }
    match (a, b) {
        (None, None) => true,
        (Text(x), Text(y)) => x == y,
        (List(xs), List(ys)) | (Tuple(xs), Tuple(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| values_equal(x, y, cfg))
        }
        (Set(xs), Set(ys)) => {
            xs.len() == ys.len()
                && xs
                    .iter()
                    .all(|x| ys.iter().any(|y| values_equal(x, y, cfg)))
        }
        (Map(xs), Map(ys)) => {
            xs.len() == ys.len()
                && xs.iter().all(|(k, v)| {
                    ys.iter()
                        .find(|(k2, _)| values_equal(k, k2, cfg))
                        .is_some_and(|(_, v2)| values_equal(v, v2, cfg))
                })
        }
        _ => false,
    }
}
