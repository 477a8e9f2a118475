//! Regex subset for rule patterns: concatenation, alternation, grouping,
//! character classes, `.`, `*`, `+`, `?`, and bounded `{m,n}`. No
//! backreferences or lookaround, which keeps matching linear-time.
//!
//! Expressions work over raw bytes, and `.` matches any byte.

use std::fmt::Write as _;

/// Largest allowed repetition bound; keeps compiled automata small.
pub const MAX_REPEAT: u32 = 1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegexExpr {
    Char(u8),
    AnyByte,
    /// `[...]` / `[^...]`; ranges kept in source order.
    Class {
        negated: bool,
        ranges: Vec<(u8, u8)>,
    },
    /// Two or more factors in sequence; factors are never `Concat`.
    Concat(Vec<RegexExpr>),
    /// Two or more branches; branches are never `Alt`.
    Alt(Vec<RegexExpr>),
    /// `max = None` means unbounded (`*`, `+`).
    Repeat {
        inner: Box<RegexExpr>,
        min: u32,
        max: Option<u32>,
    },
}

impl RegexExpr {
    /// True when the expression can match the empty string.
    pub fn nullable(&self) -> bool {
        match self {
            RegexExpr::Char(_) | RegexExpr::AnyByte | RegexExpr::Class { .. } => false,
            RegexExpr::Concat(parts) => parts.iter().all(|p| p.nullable()),
            RegexExpr::Alt(branches) => branches.iter().any(|b| b.nullable()),
            RegexExpr::Repeat { inner, min, .. } => *min == 0 || inner.nullable(),
        }
    }

    /// Structural reversal: matches exactly the reversed strings.
    pub fn reversed(&self) -> RegexExpr {
        match self {
            RegexExpr::Char(_) | RegexExpr::AnyByte | RegexExpr::Class { .. } => self.clone(),
            RegexExpr::Concat(parts) => {
                RegexExpr::Concat(parts.iter().rev().map(|p| p.reversed()).collect())
            }
            RegexExpr::Alt(branches) => {
                RegexExpr::Alt(branches.iter().map(|b| b.reversed()).collect())
            }
            RegexExpr::Repeat { inner, min, max } => RegexExpr::Repeat {
                inner: Box::new(inner.reversed()),
                min: *min,
                max: *max,
            },
        }
    }
}

/// Parse error inside a regex body; `offset` is relative to the start of the
/// body (between the slashes).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegexError {
    pub offset: usize,
    pub message: String,
}

const MAX_DEPTH: usize = 64;

struct RegexParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> RegexParser<'a> {
    fn err<T>(&self, at: usize, message: impl Into<String>) -> Result<T, RegexError> {
        Err(RegexError {
            offset: at,
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        Some(b)
    }

    fn parse_alt(&mut self, depth: usize) -> Result<RegexExpr, RegexError> {
        if depth > MAX_DEPTH {
            return self.err(self.pos, "regex nesting too deep");
        }
        let mut branches = vec![self.parse_concat(depth)?];
        while self.peek() == Some(b'|') {
            self.pos += 1;
            branches.push(self.parse_concat(depth)?);
        }
        Ok(if branches.len() == 1 {
            branches.pop().unwrap()
        } else {
            RegexExpr::Alt(branches)
        })
    }

    fn parse_concat(&mut self, depth: usize) -> Result<RegexExpr, RegexError> {
        let mut parts = Vec::new();
        loop {
            match self.peek() {
                None | Some(b'|') | Some(b')') => break,
                _ => parts.push(self.parse_repeat(depth)?),
            }
        }
        match parts.len() {
            0 => self.err(self.pos, "empty regex branch"),
            1 => Ok(parts.pop().unwrap()),
            _ => Ok(RegexExpr::Concat(parts)),
        }
    }

    fn parse_repeat(&mut self, depth: usize) -> Result<RegexExpr, RegexError> {
        let atom = self.parse_atom(depth)?;
        let (min, max) = match self.peek() {
            Some(b'*') => {
                self.pos += 1;
                (0, None)
            }
            Some(b'+') => {
                self.pos += 1;
                (1, None)
            }
            Some(b'?') => {
                self.pos += 1;
                (0, Some(1))
            }
            Some(b'{') => {
                let start = self.pos;
                self.pos += 1;
                let min = self.parse_bound(start)?;
                let max = if self.peek() == Some(b',') {
                    self.pos += 1;
                    self.parse_bound(start)?
                } else {
                    min
                };
                if self.bump() != Some(b'}') {
                    return self.err(start, "unterminated repetition bound");
                }
                if min > max {
                    return self.err(
                        start,
                        format!("repetition bound {{{min},{max}}} has min > max"),
                    );
                }
                (min, Some(max))
            }
            _ => return Ok(atom),
        };
        Ok(RegexExpr::Repeat {
            inner: Box::new(atom),
            min,
            max,
        })
    }

    fn parse_bound(&mut self, start: usize) -> Result<u32, RegexError> {
        let digits_at = self.pos;
        let mut value: u64 = 0;
        let mut any = false;
        while let Some(b @ b'0'..=b'9') = self.peek() {
            any = true;
            value = value * 10 + (b - b'0') as u64;
            if value > MAX_REPEAT as u64 {
                return self.err(start, format!("repetition bound exceeds {MAX_REPEAT}"));
            }
            self.pos += 1;
        }
        if !any {
            return self.err(digits_at, "expected repetition bound digits");
        }
        Ok(value as u32)
    }

    fn parse_atom(&mut self, depth: usize) -> Result<RegexExpr, RegexError> {
        let at = self.pos;
        match self.bump() {
            None => self.err(at, "unexpected end of regex"),
            Some(b'.') => Ok(RegexExpr::AnyByte),
            Some(b'(') => {
                let inner = self.parse_alt(depth + 1)?;
                if self.bump() != Some(b')') {
                    self.err(at, "unclosed group")
                } else {
                    Ok(inner)
                }
            }
            Some(b'[') => self.parse_class(at),
            Some(b'\\') => Ok(RegexExpr::Char(self.parse_escape(at)?)),
            Some(b @ (b'*' | b'+' | b'?' | b'{')) => self.err(
                at,
                format!("quantifier '{}' with nothing to repeat", b as char),
            ),
            Some(b @ (b')' | b']' | b'}' | b'|')) => {
                self.err(at, format!("unexpected '{}'", b as char))
            }
            Some(b) => Ok(RegexExpr::Char(b)),
        }
    }

    fn parse_class(&mut self, start: usize) -> Result<RegexExpr, RegexError> {
        let negated = if self.peek() == Some(b'^') {
            self.pos += 1;
            true
        } else {
            false
        };
        let mut ranges = Vec::new();
        loop {
            let at = self.pos;
            let lo = match self.bump() {
                None => return self.err(start, "unterminated character class"),
                Some(b']') => break,
                Some(b'\\') => self.parse_escape(at)?,
                Some(b @ (b'-' | b'^')) => {
                    return self.err(
                        at,
                        format!("'{}' must be escaped inside a class", b as char),
                    )
                }
                Some(b) => b,
            };
            if self.peek() == Some(b'-') && self.src.get(self.pos + 1) != Some(&b']') {
                self.pos += 1;
                let hi_at = self.pos;
                let hi = match self.bump() {
                    None => return self.err(start, "unterminated character class"),
                    Some(b'\\') => self.parse_escape(hi_at)?,
                    Some(b @ (b'-' | b'^')) => {
                        return self.err(
                            hi_at,
                            format!("'{}' must be escaped inside a class", b as char),
                        )
                    }
                    Some(b) => b,
                };
                if lo > hi {
                    return self.err(at, "class range has lo > hi");
                }
                ranges.push((lo, hi));
            } else {
                ranges.push((lo, lo));
            }
        }
        if ranges.is_empty() {
            return self.err(start, "empty character class");
        }
        Ok(RegexExpr::Class { negated, ranges })
    }

    fn parse_escape(&mut self, at: usize) -> Result<u8, RegexError> {
        match self.bump() {
            None => self.err(at, "dangling escape"),
            Some(b'n') => Ok(b'\n'),
            Some(b'r') => Ok(b'\r'),
            Some(b't') => Ok(b'\t'),
            Some(b'0') => Ok(0),
            Some(b'x') => {
                let hi = self.bump();
                let lo = self.bump();
                match (hi.and_then(hex_val), lo.and_then(hex_val)) {
                    (Some(h), Some(l)) => Ok(h << 4 | l),
                    _ => self.err(at, "\\x escape needs two hex digits"),
                }
            }
            // Any punctuation escapes to itself.
            Some(b) if !b.is_ascii_alphanumeric() => Ok(b),
            Some(b) => self.err(at, format!("unknown escape '\\{}'", b as char)),
        }
    }
}

fn hex_val(b: u8) -> Option<u8> {
    match b {
        b'0'..=b'9' => Some(b - b'0'),
        b'a'..=b'f' => Some(b - b'a' + 10),
        b'A'..=b'F' => Some(b - b'A' + 10),
        _ => None,
    }
}

/// Parses a regex body (the text between the slashes).
pub fn parse_regex(body: &[u8]) -> Result<RegexExpr, RegexError> {
    let mut p = RegexParser { src: body, pos: 0 };
    let expr = p.parse_alt(0)?;
    match p.peek() {
        None => Ok(expr),
        Some(b) => p.err(p.pos, format!("unexpected '{}'", b as char)),
    }
}

/// Renders an expression so that `parse_regex(render_regex(e)) == e`.
pub fn render_regex(expr: &RegexExpr) -> String {
    let mut out = String::new();
    render_into(expr, &mut out);
    out
}

fn render_into(expr: &RegexExpr, out: &mut String) {
    match expr {
        RegexExpr::Char(b) => render_char(*b, out),
        RegexExpr::AnyByte => out.push('.'),
        RegexExpr::Class { negated, ranges } => {
            out.push('[');
            if *negated {
                out.push('^');
            }
            for &(lo, hi) in ranges {
                render_class_char(lo, out);
                if lo != hi {
                    out.push('-');
                    render_class_char(hi, out);
                }
            }
            out.push(']');
        }
        RegexExpr::Concat(parts) => {
            for part in parts {
                if matches!(part, RegexExpr::Alt(_)) {
                    out.push('(');
                    render_into(part, out);
                    out.push(')');
                } else {
                    render_into(part, out);
                }
            }
        }
        RegexExpr::Alt(branches) => {
            for (i, branch) in branches.iter().enumerate() {
                if i > 0 {
                    out.push('|');
                }
                render_into(branch, out);
            }
        }
        RegexExpr::Repeat { inner, min, max } => {
            if matches!(
                **inner,
                RegexExpr::Char(_) | RegexExpr::AnyByte | RegexExpr::Class { .. }
            ) {
                render_into(inner, out);
            } else {
                out.push('(');
                render_into(inner, out);
                out.push(')');
            }
            match (min, max) {
                (0, None) => out.push('*'),
                (1, None) => out.push('+'),
                (0, Some(1)) => out.push('?'),
                (m, None) => {
                    // No direct syntax for {m,}; expand as X{m-1}X... never
                    // produced by the parser, but keep rendering total.
                    let _ = write!(out, "{{{m},{MAX_REPEAT}}}");
                }
                (m, Some(n)) if m == n => {
                    let _ = write!(out, "{{{m}}}");
                }
                (m, Some(n)) => {
                    let _ = write!(out, "{{{m},{n}}}");
                }
            }
        }
    }
}

fn render_char(b: u8, out: &mut String) {
    match b {
        b'\\' | b'/' | b'.' | b'*' | b'+' | b'?' | b'(' | b')' | b'[' | b']' | b'{' | b'}'
        | b'|' => {
            out.push('\\');
            out.push(b as char);
        }
        b'\n' => out.push_str("\\n"),
        b'\r' => out.push_str("\\r"),
        b'\t' => out.push_str("\\t"),
        0x20..=0x7e => out.push(b as char),
        _ => {
            let _ = write!(out, "\\x{b:02x}");
        }
    }
}

fn render_class_char(b: u8, out: &mut String) {
    match b {
        b'\\' | b'/' | b']' | b'^' | b'-' | b'[' => {
            out.push('\\');
            out.push(b as char);
        }
        b'\n' => out.push_str("\\n"),
        b'\r' => out.push_str("\\r"),
        b'\t' => out.push_str("\\t"),
        0x20..=0x7e => out.push(b as char),
        _ => {
            let _ = write!(out, "\\x{b:02x}");
        }
    }
}
