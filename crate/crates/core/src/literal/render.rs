use std::fmt::Write;

use super::{LiteralError, LiteralValue};

/// Renders the canonical wire form of a value.
///
/// Strings are single-quoted, floats use the shortest round-trip decimal in
/// the subject language's `repr` layout, mappings keep insertion order and
/// set elements are sorted by their own rendering.
pub fn render_literal(v: &LiteralValue) -> Result<String, LiteralError> {
    let mut out = String::new();
    render_into(v, &mut out)?;
    Ok(out)
}

fn render_into(v: &LiteralValue, out: &mut String) -> Result<(), LiteralError> {
    match v {
        LiteralValue::None => out.push_str("None"),
        LiteralValue::Bool(true) => out.push_str("True"),
        LiteralValue::Bool(false) => out.push_str("False"),
        LiteralValue::Int(i) => write!(out, "{i}").expect("writing to a String"),
        LiteralValue::Float(f) => out.push_str(&render_float(*f)?),
        LiteralValue::Text(s) => render_text(s, out),
        LiteralValue::List(items) => {
            out.push('[');
            render_items(items, out)?;
            out.push(']');
        }
        LiteralValue::Tuple(items) => {
            out.push('(');
            render_items(items, out)?;
            if items.len() == 1 {
                out.push(',');
            }
            out.push(')');
        }
        LiteralValue::Set(items) if items.is_empty() => out.push_str("set()"),
        LiteralValue::Set(items) => {
            let mut rendered = items
                .iter()
                .map(render_literal)
                .collect::<Result<Vec<_>, _>>()?;
            rendered.sort();
            out.push('{');
            out.push_str(&rendered.join(", "));
            out.push('}');
        }
        LiteralValue::Map(entries) => {
            out.push('{');
            for (i, (k, v)) in entries.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                render_into(k, out)?;
                out.push_str(": ");
                render_into(v, out)?;
            }
            out.push('}');
        }
    }
    Ok(())
}

fn render_items(items: &[LiteralValue], out: &mut String) -> Result<(), LiteralError> {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        render_into(item, out)?;
    }
    Ok(())
}

fn render_text(s: &str, out: &mut String) {
    out.push('\'');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 || c as u32 == 0x7f => {
                write!(out, "\\x{:02x}", c as u32).expect("writing to a String")
            }
            c if c.is_control() => {
                let cp = c as u32;
                if cp <= 0xff {
                    write!(out, "\\x{cp:02x}")
                } else if cp <= 0xffff {
                    write!(out, "\\u{cp:04x}")
                } else {
                    write!(out, "\\U{cp:08x}")
                }
                .expect("writing to a String")
            }
            c => out.push(c),
        }
    }
    out.push('\'');
}

/// Shortest round-trip decimal laid out like the subject language's float
/// `repr`: positional for decimal exponents in `[-4, 16)`, otherwise
/// scientific with a signed two-digit-minimum exponent.
pub fn render_float(f: f64) -> Result<String, LiteralError> {
    if !f.is_finite() {
        return Err(LiteralError::NonFiniteFloat);
    }
    // `{:e}` yields the shortest digits that round-trip, e.g. "-1.25e-7".
    // When two digit strings of that length both round-trip, the subject
    // language keeps the correctly rounded one, which exact-precision
    // formatting produces.
    let shortest = format!("{f:e}");
    let sig_digits = shortest
        .split('e')
        .next()
        .map_or(1, |m| m.chars().filter(char::is_ascii_digit).count());
    let rounded = format!("{:.*e}", sig_digits - 1, f);
    let sci = if rounded.parse::<f64>() == Ok(f) {
        rounded
    } else {
        shortest
    };
    let (mantissa, exp) = sci.split_once('e').expect("`{:e}` always has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();

    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if (-4..16).contains(&exp) {
        if exp >= 0 {
            let point = exp as usize + 1;
            if digits.len() <= point {
                out.push_str(&digits);
                out.push_str(&"0".repeat(point - digits.len()));
                out.push_str(".0");
            } else {
                out.push_str(&digits[..point]);
                out.push('.');
                out.push_str(&digits[point..]);
            }
        } else {
            out.push_str("0.");
            out.push_str(&"0".repeat((-exp - 1) as usize));
            out.push_str(&digits);
        }
    } else {
        out.push_str(&digits[..1]);
        if digits.len() > 1 {
            out.push('.');
            out.push_str(&digits[1..]);
        }
        let sign = if exp < 0 { '-' } else { '+' };
        write!(out, "e{sign}{:02}", exp.abs()).expect("writing to a String");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::literal::parse_literal;

    fn roundtrip(src: &str) -> String {
        render_literal(&parse_literal(src).unwrap()).unwrap()
    }

    #[test]
    fn renders_mapping_in_insertion_order() {
        assert_eq!(roundtrip("{'n': 14}"), "{'n': 14}");
        assert_eq!(roundtrip("{'x':16,'n':14}"), "{'x': 16, 'n': 14}");
    }

    #[test]
    fn renders_empty_containers() {
        assert_eq!(roundtrip("[]"), "[]");
        assert_eq!(roundtrip("()"), "()");
        assert_eq!(roundtrip("{}"), "{}");
        assert_eq!(roundtrip("set()"), "set()");
        assert_eq!(roundtrip("(1,)"), "(1,)");
    }

    #[test]
    fn sorts_set_elements_by_rendering() {
        assert_eq!(roundtrip("{2, 1}"), "{1, 2}");
        assert_eq!(roundtrip("{'b', 'a', 10, 9}"), "{'a', 'b', 10, 9}");
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn floats_match_repr_layout() {
        let cases = [
            (1.0, "1.0"),
            (-0.0, "-0.0"),
            (0.1, "0.1"),
            (0.8, "0.8"),
            (1e16, "1e+16"),
            (1.5e16, "1.5e+16"),
            (123456789012345.6, "123456789012345.6"),
            (1e15, "1000000000000000.0"),
            (0.0001, "0.0001"),
            (0.00001, "1e-05"),
            (1.5e-7, "1.5e-07"),
            (1e100, "1e+100"),
            (5e-324, "5e-324"),
            (f64::MAX, "1.7976931348623157e+308"),
            (0.30000000000000004, "0.30000000000000004"),
            // two shortest candidates; the correctly rounded one wins
            (1059438285926254.25, "1059438285926254.2"),
        ];
        for (v, want) in cases {
            assert_eq!(render_float(v).unwrap(), want, "{v:e}");
        }
    }

    #[test]
    fn rejects_non_finite_floats() {
        assert_eq!(render_float(f64::NAN), Err(LiteralError::NonFiniteFloat));
        assert_eq!(
            render_literal(&LiteralValue::List(vec![LiteralValue::Float(
                f64::INFINITY
            )])),
            Err(LiteralError::NonFiniteFloat)
        );
    }

    #[test]
    fn escapes_text() {
        assert_eq!(
            render_literal(&LiteralValue::text("it's a\\b\n\x01é")).unwrap(),
            r"'it\'s a\\b\n\x01é'"
        );
    }
}
