//! Line-delimited record types shared by the command-line tools and tests.

use serde::de::Error as _;
use serde::ser::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::parser::FormatDiagnostic;
use crate::reward::RewardBreakdown;

/// Formats like C's `%.17g`: enough significant digits to be loss-free,
/// with trailing zeros removed.
pub fn format_g17(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("`{:e}` always has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();

    if !(-4..17).contains(&exp) {
        let mut m = format!("{}.{}", &digits[..1], &digits[1..]);
        trim_fraction(&mut m);
        let esign = if exp < 0 { '-' } else { '+' };
        return format!("{sign}{m}e{esign}{:02}", exp.abs());
    }
    let mut out = if exp >= 0 {
        let point = exp as usize + 1;
        format!("{}.{}", &digits[..point], &digits[point..])
    } else {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    };
    trim_fraction(&mut out);
    format!("{sign}{out}")
}

fn trim_fraction(s: &mut String) {
    if s.contains('.') {
        let kept = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(kept);
    }
}

/// A float that serializes as a bare JSON number with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Float17(pub f64);

impl Serialize for Float17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(S::Error::custom("non-finite number in output record"));
        }
        let raw = RawValue::from_string(format_g17(self.0)).map_err(S::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Float17 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let x = f64::deserialize(d)?;
        if x.is_finite() {
            Ok(Float17(x))
        } else {
            Err(D::Error::custom("non-finite number"))
        }
    }
}

impl From<f64> for Float17 {
    fn from(x: f64) -> Self {
        Float17(x)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RolloutRecord {
    pub id: String,
    pub trace_text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RewardRecord {
    pub id: String,
    pub delta_fmt: u8,
    pub deltas: Vec<u8>,
    pub r_proc: Float17,
    pub r_res: Float17,
    pub gate: bool,
    pub total: Float17,
}

impl RewardRecord {
    pub fn new(id: impl Into<String>, b: &RewardBreakdown) -> Self {
        RewardRecord {
            id: id.into(),
            delta_fmt: u8::from(b.delta_fmt),
            deltas: b.deltas.iter().map(|&d| u8::from(d)).collect(),
            r_proc: Float17(b.r_proc),
            r_res: Float17(b.r_res),
            gate: b.gate_open,
            total: Float17(b.total),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DiagnosticRecord {
    pub id: String,
    pub verdict: u8,
    pub failure_code: Option<String>,
    pub block: Option<usize>,
    pub line: Option<usize>,
    pub message: Option<String>,
}

impl DiagnosticRecord {
    pub fn new(id: impl Into<String>, d: &FormatDiagnostic) -> Self {
        let f = d.failure.as_ref();
        DiagnosticRecord {
            id: id.into(),
            verdict: d.verdict(),
            failure_code: f.map(|f| f.code.as_str().to_string()),
            block: f.and_then(|f| f.location.block),
            line: f.map(|f| f.location.line),
            message: f.map(|f| f.message.clone()),
        }
    }
}

/// Non-blank lines of a line-delimited stream with their 1-based numbers.
pub fn record_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
}
