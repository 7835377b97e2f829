use num_bigint::BigInt;
use num_traits::Num;

use super::{LiteralError, LiteralValue};

pub const DEFAULT_MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    pub max_depth: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

/// Parses a single pure literal expression.
///
/// Only constants, numbers with an optional single sign, strings and
/// container displays are accepted, plus `set()` for the empty set. Names,
/// calls, attribute access, subscripts, operators and comprehensions are
/// reported as [`LiteralError::UnsafeExpression`].
pub fn parse_literal(text: &str) -> Result<LiteralValue, LiteralError> {
    parse_literal_with(text, ParseOptions::default())
}

pub fn parse_literal_with(text: &str, opts: ParseOptions) -> Result<LiteralValue, LiteralError> {
    let tokens = Lexer::new(text).tokenize()?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        max_depth: opts.max_depth,
    };
    let value = parser.value(0)?;
    match parser.peek() {
        Tok::Eof => Ok(value),
        _ => Err(parser.unexpected("end of input")),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(BigInt),
    Float(f64),
    Str(String),
    Name(String),
    /// One of `( ) [ ] { } , :`
    Punct(char),
    /// `+` or `-` when it may be a sign.
    Sign(char),
    /// Any other operator or attribute dot.
    Op(String),
    Eof,
}

struct Token {
    tok: Tok,
    offset: usize,
}

struct Lexer<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    i: usize,
}

fn syntax(offset: usize, message: impl Into<String>) -> LiteralError {
    LiteralError::Syntax {
        offset,
        message: message.into(),
    }
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            chars: src.char_indices().collect(),
            i: 0,
        }
    }

    fn offset(&self) -> usize {
        self.chars.get(self.i).map_or(self.src.len(), |c| c.0)
    }

    fn peek_char(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.i + ahead).map(|c| c.1)
    }

    fn tokenize(mut self) -> Result<Vec<Token>, LiteralError> {
        let mut out = Vec::new();
        loop {
            while self.peek_char(0).is_some_and(char::is_whitespace) {
                self.i += 1;
            }
            let offset = self.offset();
            let Some(c) = self.peek_char(0) else {
                out.push(Token {
                    tok: Tok::Eof,
                    offset,
                });
                return Ok(out);
            };
            let tok = match c {
                '(' | ')' | '[' | ']' | '{' | '}' | ',' | ':' => {
                    self.i += 1;
                    Tok::Punct(c)
                }
                '+' | '-' => {
                    self.i += 1;
                    if matches!(self.peek_char(0), Some('=')) {
                        self.i += 1;
                        Tok::Op(format!("{c}="))
                    } else {
                        Tok::Sign(c)
                    }
                }
                '.' if self.peek_char(1).is_some_and(|d| d.is_ascii_digit()) => self.number()?,
                '0'..='9' => self.number()?,
                '\'' | '"' => Tok::Str(self.string(false, offset)?),
                c if c.is_alphabetic() || c == '_' => self.name_or_prefixed_string(offset)?,
                '*' | '/' | '%' | '@' | '&' | '|' | '^' | '~' | '<' | '>' | '=' | '!' | '.' => {
                    let start = self.i;
                    while self
                        .peek_char(0)
                        .is_some_and(|d| "*/%@&|^~<>=!.".contains(d))
                    {
                        self.i += 1;
                    }
                    Tok::Op(self.chars[start..self.i].iter().map(|c| c.1).collect())
                }
                other => return Err(syntax(offset, format!("unexpected character {other:?}"))),
            };
            out.push(Token { tok, offset });
        }
    }

    fn name_or_prefixed_string(&mut self, offset: usize) -> Result<Tok, LiteralError> {
        let start = self.i;
        while self
            .peek_char(0)
            .is_some_and(|d| d.is_alphanumeric() || d == '_')
        {
            self.i += 1;
        }
        let name: String = self.chars[start..self.i].iter().map(|c| c.1).collect();
        if matches!(self.peek_char(0), Some('\'' | '"')) {
            let lower = name.to_ascii_lowercase();
            return match lower.as_str() {
                "r" => Ok(Tok::Str(self.string(true, offset)?)),
                "u" => Ok(Tok::Str(self.string(false, offset)?)),
                "b" | "br" | "rb" => Err(LiteralError::Unsupported("byte string".into())),
                "f" | "fr" | "rf" => Err(LiteralError::UnsafeExpression {
                    offset,
                    what: "formatted string".into(),
                }),
                _ => Err(syntax(offset, format!("invalid string prefix {name:?}"))),
            };
        }
        Ok(Tok::Name(name))
    }

    fn number(&mut self) -> Result<Tok, LiteralError> {
        let offset = self.offset();
        let start = self.i;
        let radix = match (self.peek_char(0), self.peek_char(1)) {
            (Some('0'), Some('x' | 'X')) => Some(16),
            (Some('0'), Some('o' | 'O')) => Some(8),
            (Some('0'), Some('b' | 'B')) => Some(2),
            _ => None,
        };
        if let Some(radix) = radix {
            self.i += 2;
            let digits_start = self.i;
            while self
                .peek_char(0)
                .is_some_and(|d| d.is_alphanumeric() || d == '_')
            {
                self.i += 1;
            }
            let raw: String = self.chars[digits_start..self.i]
                .iter()
                .map(|c| c.1)
                .collect();
            let digits = strip_underscores(&raw, offset)?;
            return BigInt::from_str_radix(&digits, radix)
                .map(Tok::Int)
                .map_err(|_| syntax(offset, "invalid integer literal"));
        }

        let mut is_float = false;
        while self
            .peek_char(0)
            .is_some_and(|d| d.is_ascii_digit() || d == '_')
        {
            self.i += 1;
        }
        if self.peek_char(0) == Some('.') {
            is_float = true;
            self.i += 1;
            while self
                .peek_char(0)
                .is_some_and(|d| d.is_ascii_digit() || d == '_')
            {
                self.i += 1;
            }
        }
        if matches!(self.peek_char(0), Some('e' | 'E')) {
            let save = self.i;
            self.i += 1;
            if matches!(self.peek_char(0), Some('+' | '-')) {
                self.i += 1;
            }
            if self.peek_char(0).is_some_and(|d| d.is_ascii_digit()) {
                is_float = true;
                while self
                    .peek_char(0)
                    .is_some_and(|d| d.is_ascii_digit() || d == '_')
                {
                    self.i += 1;
                }
            } else {
                self.i = save;
            }
        }
        if matches!(self.peek_char(0), Some('j' | 'J')) {
            return Err(LiteralError::Unsupported("complex number".into()));
        }
        if self
            .peek_char(0)
            .is_some_and(|d| d.is_alphanumeric() || d == '_')
        {
            return Err(syntax(self.offset(), "invalid numeric literal"));
        }
        let raw: String = self.chars[start..self.i].iter().map(|c| c.1).collect();
        let text = strip_underscores(&raw, offset)?;
        if is_float {
            let v: f64 = text
                .parse()
                .map_err(|_| syntax(offset, "invalid float literal"))?;
            if !v.is_finite() {
                return Err(LiteralError::NonFiniteFloat);
            }
            Ok(Tok::Float(v))
        } else {
            if text.len() > 1 && text.starts_with('0') && text.bytes().any(|b| b != b'0') {
                return Err(syntax(offset, "leading zeros in decimal integer"));
            }
            BigInt::from_str_radix(&text, 10)
                .map(Tok::Int)
                .map_err(|_| syntax(offset, "invalid integer literal"))
        }
    }

    fn string(&mut self, raw: bool, offset: usize) -> Result<String, LiteralError> {
        let quote = self.peek_char(0).expect("caller saw a quote");
        let triple = self.peek_char(1) == Some(quote) && self.peek_char(2) == Some(quote);
        self.i += if triple { 3 } else { 1 };
        let mut out = String::new();
        loop {
            let Some(c) = self.peek_char(0) else {
                return Err(syntax(offset, "unterminated string"));
            };
            if c == quote {
                if !triple {
                    self.i += 1;
                    return Ok(out);
                }
                if self.peek_char(1) == Some(quote) && self.peek_char(2) == Some(quote) {
                    self.i += 3;
                    return Ok(out);
                }
                out.push(c);
                self.i += 1;
                continue;
            }
            if c == '\n' && !triple {
                return Err(syntax(offset, "unterminated string"));
            }
            if c != '\\' {
                out.push(c);
                self.i += 1;
                continue;
            }
            let Some(next) = self.peek_char(1) else {
                return Err(syntax(offset, "unterminated string"));
            };
            if raw {
                out.push('\\');
                out.push(next);
                self.i += 2;
                continue;
            }
            self.i += 2;
            match next {
                '\n' => {}
                '\\' => out.push('\\'),
                '\'' => out.push('\''),
                '"' => out.push('"'),
                'n' => out.push('\n'),
                't' => out.push('\t'),
                'r' => out.push('\r'),
                'a' => out.push('\x07'),
                'b' => out.push('\x08'),
                'f' => out.push('\x0c'),
                'v' => out.push('\x0b'),
                'x' => out.push(self.hex_escape(2, offset)?),
                'u' => out.push(self.hex_escape(4, offset)?),
                'U' => out.push(self.hex_escape(8, offset)?),
                '0'..='7' => {
                    let mut value = next.to_digit(8).unwrap();
                    for _ in 0..2 {
                        match self.peek_char(0).and_then(|d| d.to_digit(8)) {
                            Some(d) => {
                                value = value * 8 + d;
                                self.i += 1;
                            }
                            None => break,
                        }
                    }
                    out.push(char::from_u32(value).expect("octal escape is below 0o777"));
                }
                'N' => return Err(LiteralError::Unsupported("named unicode escape".into())),
                other => {
                    // unknown escapes are kept verbatim
                    out.push('\\');
                    out.push(other);
                }
            }
        }
    }

    fn hex_escape(&mut self, width: usize, offset: usize) -> Result<char, LiteralError> {
        let mut value = 0u32;
        for _ in 0..width {
            let d = self
                .peek_char(0)
                .and_then(|d| d.to_digit(16))
                .ok_or_else(|| syntax(offset, "truncated hex escape"))?;
            value = value * 16 + d;
            self.i += 1;
        }
        char::from_u32(value).ok_or_else(|| syntax(offset, "invalid code point in escape"))
    }
}

fn strip_underscores(raw: &str, offset: usize) -> Result<String, LiteralError> {
    if raw.starts_with('_') || raw.ends_with('_') || raw.contains("__") {
        return Err(syntax(offset, "misplaced underscore in number"));
    }
    Ok(raw.replace('_', ""))
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    max_depth: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].offset
    }

    fn bump(&mut self) -> Tok {
        let tok = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    /// Error for a token that cannot appear here. Anything that would turn
    /// the input into a non-literal expression is classified as unsafe.
    fn unexpected(&self, expected: &str) -> LiteralError {
        let offset = self.offset();
        match self.peek() {
            Tok::Name(n) => LiteralError::UnsafeExpression {
                offset,
                what: format!("name {n:?}"),
            },
            Tok::Op(op) => LiteralError::UnsafeExpression {
                offset,
                what: if op.starts_with('.') {
                    "attribute access".into()
                } else {
                    format!("operator {op:?}")
                },
            },
            Tok::Sign(c) => LiteralError::UnsafeExpression {
                offset,
                what: format!("operator {c:?}"),
            },
            Tok::Punct('(') => LiteralError::UnsafeExpression {
                offset,
                what: "call".into(),
            },
            Tok::Punct('[') => LiteralError::UnsafeExpression {
                offset,
                what: "subscript".into(),
            },
            Tok::Eof => syntax(
                offset,
                format!("unexpected end of input, expected {expected}"),
            ),
            other => syntax(offset, format!("unexpected {other:?}, expected {expected}")),
        }
    }

    fn expect_punct(&mut self, c: char, expected: &str) -> Result<(), LiteralError> {
        if self.peek() == &Tok::Punct(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn enter(&self, depth: usize) -> Result<usize, LiteralError> {
        if depth + 1 > self.max_depth {
            Err(LiteralError::DepthExceeded {
                limit: self.max_depth,
            })
        } else {
            Ok(depth + 1)
        }
    }

    fn value(&mut self, depth: usize) -> Result<LiteralValue, LiteralError> {
        let offset = self.offset();
        match self.bump() {
            Tok::Int(i) => Ok(LiteralValue::Int(i)),
            Tok::Float(f) => Ok(LiteralValue::Float(f)),
            Tok::Sign(sign) => match self.bump() {
                Tok::Int(i) => Ok(LiteralValue::Int(if sign == '-' { -i } else { i })),
                Tok::Float(f) => Ok(LiteralValue::Float(if sign == '-' { -f } else { f })),
                _ => Err(LiteralError::UnsafeExpression {
                    offset,
                    what: "unary operator on a non-number".into(),
                }),
            },
            Tok::Str(s) => {
                let mut s = s;
                while let Tok::Str(more) = self.peek() {
                    s.push_str(more);
                    self.bump();
                }
                Ok(LiteralValue::Text(s))
            }
            Tok::Name(n) => match n.as_str() {
                "None" => Ok(LiteralValue::None),
                "True" => Ok(LiteralValue::Bool(true)),
                "False" => Ok(LiteralValue::Bool(false)),
                "set"
                    if self.peek() == &Tok::Punct('(')
                        && self.tokens.get(self.pos + 1).map(|t| &t.tok)
                            == Some(&Tok::Punct(')')) =>
                {
                    self.bump();
                    self.bump();
                    Ok(LiteralValue::Set(Vec::new()))
                }
                _ => Err(LiteralError::UnsafeExpression {
                    offset,
                    what: format!("name {n:?}"),
                }),
            },
            Tok::Punct('[') => {
                let depth = self.enter(depth)?;
                let items = self.sequence(']', depth)?;
                Ok(LiteralValue::List(items))
            }
            Tok::Punct('(') => {
                let depth = self.enter(depth)?;
                self.paren(depth)
            }
            Tok::Punct('{') => {
                let depth = self.enter(depth)?;
                self.brace(depth)
            }
            Tok::Eof => Err(syntax(offset, "expected a literal")),
            _ => {
                self.pos -= 1;
                Err(self.unexpected("a literal"))
            }
        }
    }

    /// Items up to `close`, allowing a trailing comma.
    fn sequence(&mut self, close: char, depth: usize) -> Result<Vec<LiteralValue>, LiteralError> {
        let mut items = Vec::new();
        loop {
            if self.peek() == &Tok::Punct(close) {
                self.bump();
                return Ok(items);
            }
            items.push(self.value(depth)?);
            if self.peek() == &Tok::Punct(',') {
                self.bump();
            } else if self.peek() != &Tok::Punct(close) {
                return Err(self.unexpected(&format!("',' or '{close}'")));
            }
        }
    }

    fn paren(&mut self, depth: usize) -> Result<LiteralValue, LiteralError> {
        if self.peek() == &Tok::Punct(')') {
            self.bump();
            return Ok(LiteralValue::Tuple(Vec::new()));
        }
        let first = self.value(depth)?;
        match self.peek() {
            Tok::Punct(')') => {
                self.bump();
                Ok(first)
            }
            Tok::Punct(',') => {
                self.bump();
                let mut items = vec![first];
                items.extend(self.sequence(')', depth)?);
                Ok(LiteralValue::Tuple(items))
            }
            _ => Err(self.unexpected("',' or ')'")),
        }
    }

    fn brace(&mut self, depth: usize) -> Result<LiteralValue, LiteralError> {
        if self.peek() == &Tok::Punct('}') {
            self.bump();
            return Ok(LiteralValue::Map(Vec::new()));
        }
        let first = self.value(depth)?;
        if self.peek() == &Tok::Punct(':') {
            self.bump();
            let v = self.value(depth)?;
            let mut entries = vec![(hashable(first)?, v)];
            loop {
                if self.peek() == &Tok::Punct(',') {
                    self.bump();
                } else if self.peek() != &Tok::Punct('}') {
                    return Err(self.unexpected("',' or '}'"));
                }
                if self.peek() == &Tok::Punct('}') {
                    self.bump();
                    break;
                }
                let k = self.value(depth)?;
                self.expect_punct(':', "':'")?;
                let v = self.value(depth)?;
                entries.push((hashable(k)?, v));
            }
            Ok(LiteralValue::mapping(entries))
        } else {
            let mut items = vec![hashable(first)?];
            match self.peek() {
                Tok::Punct(',') => {
                    self.bump();
                    for item in self.sequence('}', depth)? {
                        items.push(hashable(item)?);
                    }
                }
                Tok::Punct('}') => {
                    self.bump();
                }
                _ => return Err(self.unexpected("',' or '}'")),
            }
            Ok(LiteralValue::set(items))
        }
    }
}

fn hashable(v: LiteralValue) -> Result<LiteralValue, LiteralError> {
    if v.is_hashable() {
        Ok(v)
    } else {
        Err(LiteralError::Unhashable(v.kind_name()))
    }
}
