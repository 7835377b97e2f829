//! Strict grammar for block-level execution traces.
//!
//! ```text
//! [TRACE]
//! [CODE]
//! [LINENO 0]    def f(n):
//! [/CODE]
//! [THOUGHT] ... [/THOUGHT]
//! [LOCALS] {'n': 14} [/LOCALS]
//! ...
//! [RETURN]
//! assert f(14) == 15
//! [/RETURN]
//! [/TRACE]
//! ```
//!
//! Tags sit alone on their lines. THOUGHT, LOCALS and RETURN may instead be
//! written inline as `[TAG] content [/TAG]` on a single line. Blank lines are
//! allowed between sections but not inside a CODE section.

use std::fmt;

use crate::literal::{
    parse_literal, parse_literal_with, values_equal, EqualityConfig, LiteralValue, ParseOptions,
    DEFAULT_MAX_DEPTH,
};
use crate::trace::{is_identifier, GroundTruthTrace, Locals};

const TAGS: [&str; 10] = [
    "[TRACE]",
    "[/TRACE]",
    "[CODE]",
    "[/CODE]",
    "[THOUGHT]",
    "[/THOUGHT]",
    "[LOCALS]",
    "[/LOCALS]",
    "[RETURN]",
    "[/RETURN]",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FailureCode {
    MissingTag,
    TagNotAlone,
    SectionOrder,
    EmptySection,
    LineNoPattern,
    LineNoGap,
    BlockCountMismatch,
    BoundaryMismatch,
    CodeMismatch,
    LocalsNotMapping,
    ReturnNotAssertion,
    ReturnNotLiteral,
    CallMismatch,
    TrailingContent,
}

impl FailureCode {
    pub const ALL: [FailureCode; 14] = [
        FailureCode::MissingTag,
        FailureCode::TagNotAlone,
        FailureCode::SectionOrder,
        FailureCode::EmptySection,
        FailureCode::LineNoPattern,
        FailureCode::LineNoGap,
        FailureCode::BlockCountMismatch,
        FailureCode::BoundaryMismatch,
        FailureCode::CodeMismatch,
        FailureCode::LocalsNotMapping,
        FailureCode::ReturnNotAssertion,
        FailureCode::ReturnNotLiteral,
        FailureCode::CallMismatch,
        FailureCode::TrailingContent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureCode::MissingTag => "MissingTag",
            FailureCode::TagNotAlone => "TagNotAlone",
            FailureCode::SectionOrder => "SectionOrder",
            FailureCode::EmptySection => "EmptySection",
            FailureCode::LineNoPattern => "LineNoPattern",
            FailureCode::LineNoGap => "LineNoGap",
            FailureCode::BlockCountMismatch => "BlockCountMismatch",
            FailureCode::BoundaryMismatch => "BoundaryMismatch",
            FailureCode::CodeMismatch => "CodeMismatch",
            FailureCode::LocalsNotMapping => "LocalsNotMapping",
            FailureCode::ReturnNotAssertion => "ReturnNotAssertion",
            FailureCode::ReturnNotLiteral => "ReturnNotLiteral",
            FailureCode::CallMismatch => "CallMismatch",
            FailureCode::TrailingContent => "TrailingContent",
        }
    }
}

impl fmt::Display for FailureCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a failure was detected. `line` is 1-based in the trace text;
/// `block` is the 1-based block being read, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub block: Option<usize>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: FailureCode,
    pub location: Location,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at line {}", self.code, self.location.line)?;
        if let Some(b) = self.location.block {
            write!(f, " (block {b})")?;
        }
        write!(f, ": {}", self.message)
    }
}

/// Outcome of the format check. No failure means the verdict is 1.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FormatDiagnostic {
    pub failure: Option<Failure>,
}

impl FormatDiagnostic {
    pub fn pass() -> Self {
        FormatDiagnostic { failure: None }
    }

    pub fn fail(failure: Failure) -> Self {
        FormatDiagnostic {
            failure: Some(failure),
        }
    }

    pub fn verdict(&self) -> u8 {
        u8::from(self.failure.is_none())
    }

    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn code(&self) -> Option<FailureCode> {
        self.failure.as_ref().map(|f| f.code)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodeLine {
    pub lineno: usize,
    /// Everything after the four-space separator, including the source
    /// line's own indentation.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedBlock {
    /// 1-based.
    pub index: usize,
    /// Text line of the opening `[CODE]` tag.
    pub line: usize,
    pub code_lines: Vec<CodeLine>,
    pub thought: String,
    pub locals: Locals,
}

impl ParsedBlock {
    pub fn line_range(&self) -> (usize, usize) {
        let first = self.code_lines.first().map_or(0, |c| c.lineno);
        let last = self.code_lines.last().map_or(0, |c| c.lineno);
        (first, last)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnAssertion {
    /// The call as written, e.g. `f(14)`.
    pub call_text: String,
    pub function_name: String,
    pub arguments: Vec<LiteralValue>,
    pub predicted: LiteralValue,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTrace {
    pub blocks: Vec<ParsedBlock>,
    pub return_assertion: ReturnAssertion,
    pub raw_text: String,
}

/// A trace prefix read during stage-wise sampling.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PartialTrace {
    /// Blocks that parsed cleanly, in order, up to the first failure.
    pub blocks: Vec<ParsedBlock>,
    pub return_assertion: Option<ReturnAssertion>,
    /// `[/TRACE]` was reached.
    pub closed: bool,
    pub failure: Option<Failure>,
}

/// Parses a complete trace, reporting the first grammar violation.
pub fn parse_trace(text: &str) -> Result<ParsedTrace, FormatDiagnostic> {
    let scan = Scanner::new(text, false).run();
    if let Some(f) = scan.failure {
        return Err(FormatDiagnostic::fail(f));
    }
    let return_assertion = scan
        .return_assertion
        .expect("a clean full scan always has a return");
    Ok(ParsedTrace {
        blocks: scan.blocks,
        return_assertion,
        raw_text: text.to_string(),
    })
}

/// Parses a possibly unfinished trace. A missing return or closing tag is
/// not a failure; a malformed block is.
pub fn parse_partial(text: &str) -> PartialTrace {
    if text.trim().is_empty() {
        return PartialTrace::default();
    }
    Scanner::new(text, true).run()
}

/// Alignment with the reference execution: block count, line ranges,
/// whitespace-stripped code, and the asserted call.
pub fn validate_against(
    gt: &GroundTruthTrace,
    pt: &ParsedTrace,
    cfg: &EqualityConfig,
) -> FormatDiagnostic {
    let fail = |code, block, line, message: String| {
        FormatDiagnostic::fail(Failure {
            code,
            location: Location { block, line },
            message,
        })
    };
    if pt.blocks.len() != gt.block_count() {
        return fail(
            FailureCode::BlockCountMismatch,
            None,
            pt.return_assertion.line,
            format!(
                "trace has {} blocks, reference has {}",
                pt.blocks.len(),
                gt.block_count()
            ),
        );
    }
    for (pb, gb) in pt.blocks.iter().zip(gt.blocks()) {
        let (first, last) = pb.line_range();
        if (first, last) != (gb.line_start, gb.line_end) {
            return fail(
                FailureCode::BoundaryMismatch,
                Some(pb.index),
                pb.line,
                format!(
                    "block covers lines {first}-{last}, reference block covers {}-{}",
                    gb.line_start, gb.line_end
                ),
            );
        }
        for (k, (cl, src)) in pb.code_lines.iter().zip(&gb.code_lines).enumerate() {
            if cl.text.trim() != src.trim() {
                return fail(
                    FailureCode::CodeMismatch,
                    Some(pb.index),
                    pb.line + 1 + k,
                    format!(
                        "line {} reads {:?}, expected {:?}",
                        cl.lineno,
                        cl.text.trim(),
                        src.trim()
                    ),
                );
            }
        }
    }
    let ra = &pt.return_assertion;
    let args_match = ra.arguments.len() == gt.input().len()
        && ra
            .arguments
            .iter()
            .zip(gt.input())
            .all(|(a, b)| values_equal(a, b, cfg));
    if ra.function_name != gt.function_name() || !args_match {
        return fail(
            FailureCode::CallMismatch,
            None,
            ra.line,
            format!(
                "asserted call {} does not match {}",
                ra.call_text,
                gt.call_text()
            ),
        );
    }
    FormatDiagnostic::pass()
}

/// Grammar and alignment together.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedTrace {
    /// Present whenever the grammar check passed, even if alignment failed.
    pub parsed: Option<ParsedTrace>,
    pub diagnostic: FormatDiagnostic,
}

pub fn check_format(gt: &GroundTruthTrace, text: &str, cfg: &EqualityConfig) -> CheckedTrace {
    match parse_trace(text) {
        Ok(pt) => {
            let diagnostic = validate_against(gt, &pt, cfg);
            CheckedTrace {
                parsed: Some(pt),
                diagnostic,
            }
        }
        Err(diagnostic) => CheckedTrace {
            parsed: None,
            diagnostic,
        },
    }
}

/// Classifies a line that is not what the grammar expects here, if it
/// resembles a tag.
fn misplaced(line: &str) -> Option<FailureCode> {
    if TAGS.contains(&line) {
        return Some(FailureCode::SectionOrder);
    }
    let trimmed = line.trim();
    if TAGS.contains(&trimmed) {
        return Some(FailureCode::TagNotAlone);
    }
    let squashed: String = trimmed
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .to_ascii_uppercase();
    if TAGS.contains(&squashed.as_str()) {
        return Some(FailureCode::MissingTag);
    }
    None
}

struct Scanner<'a> {
    lines: Vec<&'a str>,
    pos: usize,
    partial: bool,
    next_lineno: usize,
    block: Option<usize>,
}

type Step<T> = Result<T, Failure>;

impl<'a> Scanner<'a> {
    fn new(text: &'a str, partial: bool) -> Self {
        Scanner {
            lines: text.split('\n').collect(),
            pos: 0,
            partial,
            next_lineno: 0,
            block: None,
        }
    }

    fn failure(&self, code: FailureCode, message: impl Into<String>) -> Failure {
        Failure {
            code,
            location: Location {
                block: self.block,
                line: self.pos.min(self.lines.len().saturating_sub(1)) + 1,
            },
            message: message.into(),
        }
    }

    fn current(&self) -> Option<&'a str> {
        self.lines.get(self.pos).copied()
    }

    fn skip_blank(&mut self) {
        while self.current().is_some_and(|l| l.trim().is_empty()) {
            self.pos += 1;
        }
    }

    fn run(mut self) -> PartialTrace {
        let mut out = PartialTrace::default();
        if let Err(f) = self.body(&mut out) {
            out.failure = Some(f);
        }
        out
    }

    fn body(&mut self, out: &mut PartialTrace) -> Step<()> {
        match self.current() {
            Some("[TRACE]") => self.pos += 1,
            Some(l) => {
                let code = match misplaced(l) {
                    Some(FailureCode::TagNotAlone) => FailureCode::TagNotAlone,
                    _ => FailureCode::MissingTag,
                };
                return Err(self.failure(code, "trace must begin with a [TRACE] line"));
            }
            None => unreachable!("split always yields one line"),
        }

        loop {
            self.skip_blank();
            let Some(line) = self.current() else {
                if self.partial {
                    return Ok(());
                }
                let what = if out.return_assertion.is_none() {
                    "[RETURN]"
                } else {
                    "[/TRACE]"
                };
                return Err(self.failure(FailureCode::MissingTag, format!("missing {what}")));
            };
            self.block = None;

            if line == "[CODE]" {
                if out.return_assertion.is_some() {
                    return Err(self.failure(FailureCode::SectionOrder, "block after [RETURN]"));
                }
                let block = self.block_section(out.blocks.len() + 1)?;
                out.blocks.push(block);
            } else if line == "[RETURN]" || is_inline(line, "RETURN") {
                if out.return_assertion.is_some() {
                    return Err(self.failure(FailureCode::SectionOrder, "second [RETURN]"));
                }
                if out.blocks.is_empty() {
                    return Err(
                        self.failure(FailureCode::SectionOrder, "[RETURN] before any block")
                    );
                }
                out.return_assertion = Some(self.return_section()?);
            } else if line == "[/TRACE]" {
                if out.return_assertion.is_none() {
                    return Err(self.failure(FailureCode::MissingTag, "missing [RETURN]"));
                }
                self.pos += 1;
                out.closed = true;
                self.skip_blank();
                if self.current().is_some() {
                    return Err(self.failure(FailureCode::TrailingContent, "text after [/TRACE]"));
                }
                return Ok(());
            } else {
                let code = misplaced(line).unwrap_or(FailureCode::SectionOrder);
                return Err(self.failure(code, format!("unexpected line {line:?} between blocks")));
            }
        }
    }

    /// Reaching the end of text inside a section.
    fn eof_in_section(&self, empty: bool, close: &str) -> Failure {
        if empty {
            self.failure(
                FailureCode::EmptySection,
                format!("text ends before {close}"),
            )
        } else {
            self.failure(
                FailureCode::SectionOrder,
                format!("text ends before {close}"),
            )
        }
    }

    fn block_section(&mut self, index: usize) -> Step<ParsedBlock> {
        self.block = Some(index);
        let open_line = self.pos + 1;
        self.pos += 1;

        let mut code_lines = Vec::new();
        loop {
            let Some(line) = self.current() else {
                return Err(self.eof_in_section(code_lines.is_empty(), "[/CODE]"));
            };
            if line == "[/CODE]" {
                self.pos += 1;
                break;
            }
            if let Some(code) = misplaced(line) {
                return Err(self.failure(code, format!("unexpected tag line {line:?} in [CODE]")));
            }
            let cl = self.code_line(line)?;
            code_lines.push(cl);
            self.pos += 1;
        }
        if code_lines.is_empty() {
            self.pos -= 1;
            return Err(self.failure(FailureCode::EmptySection, "empty [CODE] section"));
        }

        self.skip_blank();
        let thought = self.text_section("THOUGHT")?;
        self.skip_blank();
        let locals_text = self.text_section("LOCALS")?;
        let locals = parse_literal(&locals_text)
            .ok()
            .and_then(Locals::from_literal)
            .ok_or_else(|| {
                self.failure_at(
                    self.pos,
                    FailureCode::LocalsNotMapping,
                    "[LOCALS] is not a mapping literal with string keys",
                )
            })?;

        Ok(ParsedBlock {
            index,
            line: open_line,
            code_lines,
            thought,
            locals,
        })
    }

    fn failure_at(&self, line: usize, code: FailureCode, message: &str) -> Failure {
        Failure {
            code,
            location: Location {
                block: self.block,
                line,
            },
            message: message.to_string(),
        }
    }

    fn code_line(&mut self, line: &str) -> Step<CodeLine> {
        let pattern = |s: &Self| {
            s.failure(
                FailureCode::LineNoPattern,
                format!("{line:?} does not match \"[LINENO X]    <source>\""),
            )
        };
        let rest = line.strip_prefix("[LINENO ").ok_or_else(|| pattern(self))?;
        let close = rest.find(']').ok_or_else(|| pattern(self))?;
        let digits = &rest[..close];
        let canonical = !digits.is_empty()
            && digits.bytes().all(|b| b.is_ascii_digit())
            && (digits == "0" || !digits.starts_with('0'));
        if !canonical {
            return Err(pattern(self));
        }
        let lineno: usize = digits.parse().map_err(|_| pattern(self))?;
        let text = rest[close + 1..]
            .strip_prefix("    ")
            .filter(|t| !t.trim().is_empty())
            .ok_or_else(|| pattern(self))?;
        if lineno != self.next_lineno {
            return Err(self.failure(
                FailureCode::LineNoGap,
                format!(
                    "expected [LINENO {}], found [LINENO {lineno}]",
                    self.next_lineno
                ),
            ));
        }
        self.next_lineno += 1;
        Ok(CodeLine {
            lineno,
            text: text.to_string(),
        })
    }

    /// Reads a THOUGHT or LOCALS section in either form and returns its
    /// content. Leaves `pos` on the last line of the section.
    fn text_section(&mut self, name: &str) -> Step<String> {
        let open = format!("[{name}]");
        let close = format!("[/{name}]");
        let Some(line) = self.current() else {
            return Err(self.eof_in_section(true, &open));
        };

        if line == open {
            self.pos += 1;
            let mut content = Vec::new();
            loop {
                let Some(l) = self.current() else {
                    let empty = content.iter().all(|c: &&str| c.trim().is_empty());
                    return Err(self.eof_in_section(empty, &close));
                };
                if l == close {
                    break;
                }
                if let Some(code) = misplaced(l) {
                    return Err(self.failure(code, format!("unexpected tag line {l:?} in {open}")));
                }
                content.push(l);
                self.pos += 1;
            }
            let content = content.join("\n");
            if content.trim().is_empty() {
                return Err(
                    self.failure(FailureCode::EmptySection, format!("empty {open} section"))
                );
            }
            self.pos += 1;
            return Ok(content);
        }

        if let Some(inner) = inline_content(line, name) {
            if inner.trim().is_empty() {
                return Err(
                    self.failure(FailureCode::EmptySection, format!("empty {open} section"))
                );
            }
            self.pos += 1;
            return Ok(inner.to_string());
        }

        let code = match misplaced(line) {
            Some(code) => code,
            None if line.trim_start().starts_with(&open) => FailureCode::TagNotAlone,
            None => FailureCode::SectionOrder,
        };
        Err(self.failure(code, format!("expected {open}, found {line:?}")))
    }

    fn return_section(&mut self) -> Step<ReturnAssertion> {
        let line_no = self.pos + 1;
        let content = self.text_section("RETURN")?;
        parse_assertion(&content, line_no)
            .map_err(|(code, msg)| self.failure_at(line_no, code, &msg))
    }
}

fn is_inline(line: &str, name: &str) -> bool {
    inline_content(line, name).is_some()
}

/// Content of `[NAME] ... [/NAME]` written on one line.
fn inline_content<'l>(line: &'l str, name: &str) -> Option<&'l str> {
    let open = format!("[{name}]");
    let close = format!("[/{name}]");
    let inner = line
        .strip_prefix(open.as_str())?
        .strip_suffix(close.as_str())?;
    if inner.contains(&close) || inner.contains(&open) {
        return None;
    }
    Some(inner)
}

/// Byte offset of the first `==` outside strings and brackets.
fn top_level_eq(s: &str) -> Option<usize> {
    let b = s.as_bytes();
    let mut depth: i32 = 0;
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            q @ (b'\'' | b'"') => {
                let triple = b.len() >= i + 3 && b[i + 1] == q && b[i + 2] == q;
                let width = if triple { 3 } else { 1 };
                i += width;
                while i < b.len() {
                    if b[i] == b'\\' {
                        i += 2;
                        continue;
                    }
                    if b[i] == q
                        && (!triple || (b.len() >= i + 3 && b[i + 1] == q && b[i + 2] == q))
                    {
                        i += width;
                        break;
                    }
                    i += 1;
                }
                continue;
            }
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => depth -= 1,
            b'=' if depth == 0 && b.get(i + 1) == Some(&b'=') => {
                let prev = if i > 0 { b[i - 1] } else { b' ' };
                if !matches!(prev, b'=' | b'!' | b'<' | b'>') && b.get(i + 2) != Some(&b'=') {
                    return Some(i);
                }
            }
            _ => {}
        }
        i += 1;
    }
    None
}

fn parse_assertion(content: &str, line: usize) -> Result<ReturnAssertion, (FailureCode, String)> {
    let s = content.trim();
    let not_assert = |msg: &str| (FailureCode::ReturnNotAssertion, msg.to_string());
    let rest = s
        .strip_prefix("assert")
        .filter(|r| r.starts_with(char::is_whitespace))
        .ok_or_else(|| not_assert("return section is not an assert statement"))?;
    let eq = top_level_eq(rest).ok_or_else(|| not_assert("assertion has no top-level =="))?;
    let lhs = rest[..eq].trim();
    let rhs = rest[eq + 2..].trim();

    let open = lhs
        .find('(')
        .ok_or_else(|| not_assert("left side of == is not a call"))?;
    let function_name = lhs[..open].trim_end();
    if !is_identifier(function_name) || !lhs.ends_with(')') {
        return Err(not_assert("left side of == is not a call"));
    }
    let args_text = &lhs[open + 1..lhs.len() - 1];
    // wrapping in brackets adds one nesting level
    let opts = ParseOptions {
        max_depth: DEFAULT_MAX_DEPTH + 1,
    };
    let arguments = match parse_literal_with(&format!("[{args_text}]"), opts) {
        Ok(LiteralValue::List(items)) => items,
        _ => {
            return Err((
                FailureCode::ReturnNotLiteral,
                "call arguments are not literals".into(),
            ))
        }
    };
    let predicted = parse_literal(rhs).map_err(|e| {
        (
            FailureCode::ReturnNotLiteral,
            format!("right side of == is not a literal: {e}"),
        )
    })?;
    Ok(ReturnAssertion {
        call_text: lhs.to_string(),
        function_name: function_name.to_string(),
        arguments,
        predicted,
        line,
    })
}
