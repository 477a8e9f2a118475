//! Recursive-descent parser for the rule language.
//!
//! The grammar:
//!
//! ```text
//! rule NAME [: tag ...] {
//!     [meta: key = value ...]
//!     [strings: $id = pattern ...]
//!     condition: expr
//! }
//! ```
//!
//! `//` and `/* */` comments are allowed anywhere whitespace is; keywords are
//! case-sensitive. The parser is total: any input yields a `RuleSet` or a
//! `ParseError` carrying a 1-based line/column inside the offending token.

use std::collections::HashSet;

use crate::ctph;

use super::ast::*;
use super::regex::parse_regex;

/// Parse failure with a position pointing inside the offending token.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, col {col}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

const MAX_NESTING: usize = 64;
const MAX_JUMP: u32 = 256;

#[derive(Clone, Copy)]
struct Pos {
    pos: usize,
    line: u32,
    col: u32,
}

pub(super) struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Parser<'a> {
    pub(super) fn new(text: &'a str) -> Self {
        Parser {
            src: text.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn mark(&self) -> Pos {
        Pos {
            pos: self.pos,
            line: self.line,
            col: self.col,
        }
    }

    fn rewind(&mut self, p: Pos) {
        self.pos = p.pos;
        self.line = p.line;
        self.col = p.col;
    }

    fn err_at<T>(&self, p: Pos, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            line: p.line,
            col: p.col,
            message: message.into(),
        })
    }

    fn err_here<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        self.err_at(self.mark(), message)
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<u8> {
        self.src.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(b)
    }

    /// Skips whitespace and comments.
    fn skip_trivia(&mut self) -> Result<(), ParseError> {
        loop {
            match self.peek() {
                Some(b) if b.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'/') if self.peek_at(1) == Some(b'/') => {
                    while let Some(b) = self.peek() {
                        if b == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                Some(b'/') if self.peek_at(1) == Some(b'*') => {
                    let start = self.mark();
                    self.bump();
                    self.bump();
                    loop {
                        match self.peek() {
                            None => return self.err_at(start, "unterminated comment"),
                            Some(b'*') if self.peek_at(1) == Some(b'/') => {
                                self.bump();
                                self.bump();
                                break;
                            }
                            _ => {
                                self.bump();
                            }
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn at_eof(&mut self) -> Result<bool, ParseError> {
        self.skip_trivia()?;
        Ok(self.peek().is_none())
    }

    fn expect_byte(&mut self, want: u8) -> Result<(), ParseError> {
        self.skip_trivia()?;
        match self.peek() {
            Some(b) if b == want => {
                self.bump();
                Ok(())
            }
            Some(b) => self.err_here(format!(
                "expected '{}', found '{}'",
                want as char, b as char
            )),
            None => self.err_here(format!("expected '{}', found end of input", want as char)),
        }
    }

    fn is_ident_start(b: u8) -> bool {
        b.is_ascii_alphabetic() || b == b'_'
    }

    fn is_ident_byte(b: u8) -> bool {
        b.is_ascii_alphanumeric() || b == b'_'
    }

    /// Reads an identifier; the cursor must already be past trivia.
    fn read_ident_raw(&mut self) -> Option<String> {
        match self.peek() {
            Some(b) if Self::is_ident_start(b) => {}
            _ => return None,
        }
        let start = self.pos;
        while let Some(b) = self.peek() {
            if Self::is_ident_byte(b) {
                self.bump();
            } else {
                break;
            }
        }
        Some(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn read_ident(&mut self, what: &str) -> Result<(String, Pos), ParseError> {
        self.skip_trivia()?;
        let at = self.mark();
        match self.read_ident_raw() {
            Some(id) => Ok((id, at)),
            None => self.err_at(at, format!("expected {what}")),
        }
    }

    /// Looks at the next identifier without consuming anything.
    fn peek_ident(&mut self) -> Result<Option<String>, ParseError> {
        let save = self.mark();
        self.skip_trivia()?;
        let id = self.read_ident_raw();
        self.rewind(save);
        Ok(id)
    }

    /// Consumes the next identifier iff it equals `word`.
    fn eat_keyword(&mut self, word: &str) -> Result<bool, ParseError> {
        let save = self.mark();
        self.skip_trivia()?;
        if self.read_ident_raw().as_deref() == Some(word) {
            Ok(true)
        } else {
            self.rewind(save);
            Ok(false)
        }
    }

    /// Unsigned integer literal: decimal or 0x-prefixed hex, with optional
    /// KB/MB suffix (1024-based).
    fn read_int(&mut self) -> Result<(u64, Pos), ParseError> {
        self.skip_trivia()?;
        let at = self.mark();
        let mut value: u64 = 0;
        if self.peek() == Some(b'0') && matches!(self.peek_at(1), Some(b'x') | Some(b'X')) {
            self.bump();
            self.bump();
            let mut any = false;
            while let Some(b) = self.peek() {
                let digit = match b {
                    b'0'..=b'9' => b - b'0',
                    b'a'..=b'f' => b - b'a' + 10,
                    b'A'..=b'F' => b - b'A' + 10,
                    _ => break,
                };
                any = true;
                value = value
                    .checked_mul(16)
                    .and_then(|v| v.checked_add(digit as u64))
                    .ok_or(())
                    .or_else(|_| self.err_at(at, "integer literal too large"))?;
                self.bump();
            }
            if !any {
                return self.err_at(at, "expected hex digits after 0x");
            }
        } else {
            let mut any = false;
            while let Some(b @ b'0'..=b'9') = self.peek() {
                any = true;
                value = value
                    .checked_mul(10)
                    .and_then(|v| v.checked_add((b - b'0') as u64))
                    .ok_or(())
                    .or_else(|_| self.err_at(at, "integer literal too large"))?;
                self.bump();
            }
            if !any {
                return self.err_at(at, "expected integer");
            }
        }
        let multiplier: u64 = if self.peek() == Some(b'K') && self.peek_at(1) == Some(b'B') {
            self.bump();
            self.bump();
            1024
        } else if self.peek() == Some(b'M') && self.peek_at(1) == Some(b'B') {
            self.bump();
            self.bump();
            1024 * 1024
        } else {
            1
        };
        let value = value
            .checked_mul(multiplier)
            .ok_or(())
            .or_else(|_| self.err_at(at, "integer literal too large"))?;
        Ok((value, at))
    }

    /// Double-quoted string literal; returns raw bytes after unescaping.
    fn read_string_literal(&mut self) -> Result<(Vec<u8>, Pos), ParseError> {
        self.skip_trivia()?;
        let at = self.mark();
        if self.peek() != Some(b'"') {
            return self.err_at(at, "expected string literal");
        }
        self.bump();
        let mut out = Vec::new();
        loop {
            let ch_at = self.mark();
            match self.bump() {
                None => return self.err_at(at, "unterminated string literal"),
                Some(b'"') => break,
                Some(b'\n') => return self.err_at(at, "unterminated string literal"),
                Some(b'\\') => match self.bump() {
                    Some(b'"') => out.push(b'"'),
                    Some(b'\\') => out.push(b'\\'),
                    Some(b'n') => out.push(b'\n'),
                    Some(b'r') => out.push(b'\r'),
                    Some(b't') => out.push(b'\t'),
                    Some(b'0') => out.push(0),
                    Some(b'x') => {
                        let hi = self.bump().and_then(hex_val);
                        let lo = self.bump().and_then(hex_val);
                        match (hi, lo) {
                            (Some(h), Some(l)) => out.push(h << 4 | l),
                            _ => return self.err_at(ch_at, "\\x escape needs two hex digits"),
                        }
                    }
                    Some(b) => {
                        return self.err_at(ch_at, format!("unknown escape '\\{}'", b as char))
                    }
                    None => return self.err_at(at, "unterminated string literal"),
                },
                Some(b) if b < 0x20 => {
                    return self.err_at(ch_at, "raw control character in string; use an escape")
                }
                Some(b) => out.push(b),
            }
        }
        Ok((out, at))
    }

    // ---- rule structure ----

    pub(super) fn parse_ruleset(&mut self) -> Result<RuleSet, ParseError> {
        let mut rules: Vec<Rule> = Vec::new();
        let mut names: HashSet<String> = HashSet::new();
        while !self.at_eof()? {
            let at = self.mark();
            match self.read_ident_raw().as_deref() {
                Some("rule") => {}
                Some(other) => return self.err_at(at, format!("expected 'rule', found '{other}'")),
                None => return self.err_at(at, "expected 'rule'"),
            }
            let rule = self.parse_rule()?;
            if !names.insert(rule.name.clone()) {
                return self.err_at(at, format!("duplicate rule name '{}'", rule.name));
            }
            rules.push(rule);
        }
        Ok(RuleSet { rules })
    }

    fn parse_rule(&mut self) -> Result<Rule, ParseError> {
        let (name, _) = self.read_ident("rule name")?;
        let mut tags = Vec::new();
        self.skip_trivia()?;
        if self.peek() == Some(b':') {
            self.bump();
            loop {
                let (tag, _) = self.read_ident("tag")?;
                tags.push(tag);
                self.skip_trivia()?;
                if self.peek() == Some(b'{') {
                    break;
                }
            }
        }
        self.expect_byte(b'{')?;

        let mut meta = Vec::new();
        if self.eat_keyword("meta")? {
            self.expect_byte(b':')?;
            meta = self.parse_meta_entries()?;
        }

        let mut patterns: Vec<PatternDef> = Vec::new();
        if self.eat_keyword("strings")? {
            let section_at = self.mark();
            self.expect_byte(b':')?;
            let mut seen: HashSet<String> = HashSet::new();
            loop {
                self.skip_trivia()?;
                if self.peek() != Some(b'$') {
                    break;
                }
                let def_at = self.mark();
                let def = self.parse_pattern_def()?;
                if !seen.insert(def.id.clone()) {
                    return self.err_at(def_at, format!("duplicate pattern id '${}'", def.id));
                }
                patterns.push(def);
            }
            if patterns.is_empty() {
                return self.err_at(section_at, "strings section declares no patterns");
            }
        }

        let cond_at = self.mark();
        if !self.eat_keyword("condition")? {
            return self.err_at(cond_at, "expected 'condition' section");
        }
        self.expect_byte(b':')?;
        let declared: HashSet<String> = patterns.iter().map(|p| p.id.clone()).collect();
        let condition = self.parse_or(&declared, &patterns, 0)?;
        self.expect_byte(b'}')?;

        Ok(Rule {
            name,
            tags,
            meta,
            patterns,
            condition,
        })
    }

    fn parse_meta_entries(&mut self) -> Result<Vec<(String, MetaValue)>, ParseError> {
        let mut meta = Vec::new();
        loop {
            match self.peek_ident()?.as_deref() {
                None | Some("strings") | Some("condition") => break,
                Some(_) => {}
            }
            let (key, _) = self.read_ident("meta key")?;
            self.expect_byte(b'=')?;
            self.skip_trivia()?;
            let value_at = self.mark();
            let value = match self.peek() {
                Some(b'"') => {
                    let (bytes, at) = self.read_string_literal()?;
                    let s = String::from_utf8(bytes)
                        .or_else(|_| self.err_at(at, "meta string is not valid UTF-8"))?;
                    MetaValue::Str(s)
                }
                Some(b'-') => {
                    self.bump();
                    let (v, at) = self.read_int()?;
                    if v > i64::MAX as u64 {
                        return self.err_at(at, "integer literal too large");
                    }
                    MetaValue::Int(-(v as i64))
                }
                Some(b'0'..=b'9') => {
                    let (v, at) = self.read_int()?;
                    if v > i64::MAX as u64 {
                        return self.err_at(at, "integer literal too large");
                    }
                    MetaValue::Int(v as i64)
                }
                _ => {
                    if self.eat_keyword("true")? {
                        MetaValue::Bool(true)
                    } else if self.eat_keyword("false")? {
                        MetaValue::Bool(false)
                    } else {
                        return self.err_at(
                            value_at,
                            "expected meta value (string, integer, or boolean)",
                        );
                    }
                }
            };
            match (key.as_str(), &value) {
                ("severity", MetaValue::Str(s))
                    if s == "malicious" || s == "suspicious" || s == "info" => {}
                ("severity", _) => {
                    return self.err_at(
                        value_at,
                        "severity must be \"malicious\", \"suspicious\", or \"info\"",
                    )
                }
                ("family" | "description", MetaValue::Str(_)) => {}
                ("family" | "description", _) => {
                    return self.err_at(value_at, format!("{key} must be a string"))
                }
                _ => {}
            }
            meta.push((key, value));
        }
        Ok(meta)
    }

    fn parse_pattern_def(&mut self) -> Result<PatternDef, ParseError> {
        self.expect_byte(b'$')?;
        let at = self.mark();
        let id = match self.read_ident_raw() {
            Some(id) => id,
            None => return self.err_at(at, "expected pattern id after '$'"),
        };
        self.expect_byte(b'=')?;
        self.skip_trivia()?;
        let body_at = self.mark();
        let body = match self.peek() {
            Some(b'"') => {
                let (value, at) = self.read_string_literal()?;
                if value.is_empty() {
                    return self.err_at(at, "text pattern must not be empty");
                }
                let mut modifiers = TextModifiers::default();
                loop {
                    match self.peek_ident()?.as_deref() {
                        Some("nocase") => modifiers.nocase = true,
                        Some("ascii") => modifiers.ascii = true,
                        Some("wide") => modifiers.wide = true,
                        Some("fullword") => modifiers.fullword = true,
                        _ => break,
                    }
                    self.read_ident("modifier")?;
                }
                PatternBody::Text { value, modifiers }
            }
            Some(b'{') => {
                self.bump();
                let tokens = self.parse_hex_tokens(body_at)?;
                PatternBody::Hex { tokens }
            }
            Some(b'/') => {
                let (expr_src, slash_at) = self.read_regex_body()?;
                let expr = match parse_regex(&expr_src) {
                    Ok(e) => e,
                    Err(e) => {
                        return Err(ParseError {
                            line: slash_at.line,
                            col: slash_at.col + 1 + e.offset as u32,
                            message: format!("regex: {}", e.message),
                        })
                    }
                };
                let nocase = if self.peek_ident()?.as_deref() == Some("nocase") {
                    self.read_ident("modifier")?;
                    true
                } else {
                    false
                };
                PatternBody::Regex { expr, nocase }
            }
            _ => return self.err_at(body_at, "expected pattern: \"text\", { hex }, or /regex/"),
        };
        Ok(PatternDef { id, body })
    }

    fn parse_hex_tokens(&mut self, start: Pos) -> Result<Vec<HexToken>, ParseError> {
        let mut tokens = Vec::new();
        let mut last_jump_at: Option<Pos> = None;
        loop {
            self.skip_trivia()?;
            let at = self.mark();
            match self.peek() {
                None => return self.err_at(start, "unterminated hex pattern"),
                Some(b'}') => {
                    self.bump();
                    break;
                }
                Some(b'[') => {
                    self.bump();
                    if tokens.is_empty() {
                        return self.err_at(at, "jump at start of hex pattern");
                    }
                    if matches!(tokens.last(), Some(HexToken::Jump { .. })) {
                        return self.err_at(at, "consecutive jumps in hex pattern");
                    }
                    let (min, _) = self.read_int()?;
                    self.skip_trivia()?;
                    let max = if self.peek() == Some(b'-') {
                        self.bump();
                        let (max, _) = self.read_int()?;
                        max
                    } else {
                        min
                    };
                    self.expect_byte(b']')?;
                    if max > MAX_JUMP as u64 || min > max {
                        return self.err_at(
                            at,
                            format!("jump bounds must satisfy 0 <= min <= max <= {MAX_JUMP}"),
                        );
                    }
                    last_jump_at = Some(at);
                    tokens.push(HexToken::Jump {
                        min: min as u32,
                        max: max as u32,
                    });
                }
                Some(_) => {
                    let hi = self.read_nibble(at)?;
                    let lo = self.read_nibble(at)?;
                    let (mut value, mut mask) = (0u8, 0u8);
                    if let Some(h) = hi {
                        value |= h << 4;
                        mask |= 0xf0;
                    }
                    if let Some(l) = lo {
                        value |= l;
                        mask |= 0x0f;
                    }
                    tokens.push(HexToken::Byte { value, mask });
                }
            }
        }
        if tokens.is_empty() {
            return self.err_at(start, "empty hex pattern");
        }
        if matches!(tokens.last(), Some(HexToken::Jump { .. })) {
            return self.err_at(last_jump_at.unwrap_or(start), "jump at end of hex pattern");
        }
        if !tokens
            .iter()
            .any(|t| matches!(t, HexToken::Byte { mask: 0xff, .. }))
        {
            return self.err_at(start, "hex pattern needs at least one fully literal byte");
        }
        Ok(tokens)
    }

    /// One nibble of a hex token: a hex digit or '?'.
    fn read_nibble(&mut self, token_at: Pos) -> Result<Option<u8>, ParseError> {
        match self.peek() {
            Some(b'?') => {
                self.bump();
                Ok(None)
            }
            Some(b) => match hex_val(b) {
                Some(v) => {
                    self.bump();
                    Ok(Some(v))
                }
                None => self.err_at(
                    token_at,
                    format!("expected hex byte, '??', or jump, found '{}'", b as char),
                ),
            },
            None => self.err_at(token_at, "unterminated hex pattern"),
        }
    }

    /// Reads the raw bytes of `/.../`, honoring escapes; newlines are not
    /// allowed inside a regex.
    fn read_regex_body(&mut self) -> Result<(Vec<u8>, Pos), ParseError> {
        let at = self.mark();
        self.bump(); // opening '/'
        let mut body = Vec::new();
        loop {
            match self.bump() {
                None | Some(b'\n') => return self.err_at(at, "unterminated regex"),
                Some(b'/') => break,
                Some(b'\\') => {
                    body.push(b'\\');
                    match self.bump() {
                        None | Some(b'\n') => return self.err_at(at, "unterminated regex"),
                        Some(b) => body.push(b),
                    }
                }
                Some(b) => body.push(b),
            }
        }
        Ok((body, at))
    }

    // ---- conditions ----

    fn parse_or(
        &mut self,
        declared: &HashSet<String>,
        patterns: &[PatternDef],
        depth: usize,
    ) -> Result<ConditionExpr, ParseError> {
        if depth > MAX_NESTING {
            return self.err_here("condition nesting too deep");
        }
        let mut expr = self.parse_and(declared, patterns, depth)?;
        while self.eat_keyword("or")? {
            let rhs = self.parse_and(declared, patterns, depth)?;
            expr = ConditionExpr::Or(Box::new(expr), Box::new(rhs));
        }
        Ok(expr)
    }

    fn parse_and(
        &mut self,
        declared: &HashSet<String>,
        patterns: &[PatternDef],
        depth: usize,
    ) -> Result<ConditionExpr, ParseError> {
        let mut expr = self.parse_not(declared, patterns, depth)?;
        while self.eat_keyword("and")? {
            let rhs = self.parse_not(declared, patterns, depth)?;
            expr = ConditionExpr::And(Box::new(expr), Box::new(rhs));
        }
        Ok(expr)
    }

    fn parse_not(
        &mut self,
        declared: &HashSet<String>,
        patterns: &[PatternDef],
        depth: usize,
    ) -> Result<ConditionExpr, ParseError> {
        if depth > MAX_NESTING {
            return self.err_here("condition nesting too deep");
        }
        if self.eat_keyword("not")? {
            let inner = self.parse_not(declared, patterns, depth + 1)?;
            Ok(ConditionExpr::Not(Box::new(inner)))
        } else {
            self.parse_primary(declared, patterns, depth)
        }
    }

    fn parse_primary(
        &mut self,
        declared: &HashSet<String>,
        patterns: &[PatternDef],
        depth: usize,
    ) -> Result<ConditionExpr, ParseError> {
        self.skip_trivia()?;
        let at = self.mark();
        match self.peek() {
            Some(b'(') => {
                self.bump();
                let inner = self.parse_or(declared, patterns, depth + 1)?;
                self.expect_byte(b')')?;
                Ok(inner)
            }
            Some(b'$') => {
                self.bump();
                let id = match self.read_ident_raw() {
                    Some(id) => id,
                    None => return self.err_at(at, "expected pattern id after '$'"),
                };
                if !declared.contains(&id) {
                    return self.err_at(
                        at,
                        format!("condition references undefined pattern '${id}'"),
                    );
                }
                if self.eat_keyword("at")? {
                    let (offset, _) = self.read_int()?;
                    Ok(ConditionExpr::At { id, offset })
                } else {
                    Ok(ConditionExpr::StringRef(id))
                }
            }
            Some(b'#') => {
                self.bump();
                let id = match self.read_ident_raw() {
                    Some(id) => id,
                    None => return self.err_at(at, "expected pattern id after '#'"),
                };
                if !declared.contains(&id) {
                    return self.err_at(
                        at,
                        format!("condition references undefined pattern '#{id}'"),
                    );
                }
                let cmp = self.read_comparator()?;
                let (value, _) = self.read_int()?;
                Ok(ConditionExpr::CountCmp { id, cmp, value })
            }
            Some(b'0'..=b'9') => {
                let (value, _) = self.read_int()?;
                if self.eat_keyword("of")? {
                    let set = self.parse_pattern_set(declared, patterns)?;
                    Ok(ConditionExpr::Of {
                        quantifier: Quantifier::Count(value),
                        set,
                    })
                } else {
                    Ok(ConditionExpr::IntLit(value))
                }
            }
            _ => {
                let (word, word_at) = self.read_ident("condition expression")?;
                match word.as_str() {
                    "true" => Ok(ConditionExpr::BoolLit(true)),
                    "false" => Ok(ConditionExpr::BoolLit(false)),
                    "filesize" => {
                        let cmp = self.read_comparator()?;
                        let (value, _) = self.read_int()?;
                        Ok(ConditionExpr::Filesize { cmp, value })
                    }
                    "uint8" | "uint16" | "uint32" => {
                        let width = match word.as_str() {
                            "uint8" => UintWidth::U8,
                            "uint16" => UintWidth::U16,
                            _ => UintWidth::U32,
                        };
                        self.expect_byte(b'(')?;
                        let (offset, _) = self.read_int()?;
                        self.expect_byte(b')')?;
                        let cmp = self.read_comparator()?;
                        let (value, _) = self.read_int()?;
                        Ok(ConditionExpr::UintRead {
                            width,
                            offset,
                            cmp,
                            value,
                        })
                    }
                    "fuzzy_sim" => {
                        self.expect_byte(b'(')?;
                        let (sig_bytes, sig_at) = self.read_string_literal()?;
                        let sig_text = String::from_utf8_lossy(&sig_bytes);
                        let signature = ctph::parse_signature(&sig_text)
                            .or_else(|e| self.err_at(sig_at, format!("fuzzy_sim: {e}")))?;
                        self.expect_byte(b')')?;
                        let cmp = self.read_comparator()?;
                        let (value, value_at) = self.read_int()?;
                        if value > 100 {
                            return self
                                .err_at(value_at, "fuzzy_sim threshold must be in [0, 100]");
                        }
                        Ok(ConditionExpr::FuzzySim {
                            signature,
                            cmp,
                            value: value as u32,
                        })
                    }
                    "any" | "all" => {
                        let of_at = self.mark();
                        if !self.eat_keyword("of")? {
                            return self.err_at(of_at, format!("expected 'of' after '{word}'"));
                        }
                        let quantifier = if word == "any" {
                            Quantifier::Any
                        } else {
                            Quantifier::All
                        };
                        let set = self.parse_pattern_set(declared, patterns)?;
                        Ok(ConditionExpr::Of { quantifier, set })
                    }
                    other => self.err_at(word_at, format!("unexpected '{other}' in condition")),
                }
            }
        }
    }

    fn parse_pattern_set(
        &mut self,
        declared: &HashSet<String>,
        patterns: &[PatternDef],
    ) -> Result<PatternSet, ParseError> {
        self.skip_trivia()?;
        let at = self.mark();
        if self.eat_keyword("them")? {
            if patterns.is_empty() {
                return self.err_at(at, "'of them' in a rule that declares no patterns");
            }
            return Ok(PatternSet::Them);
        }
        if self.peek() != Some(b'(') {
            return self.err_at(at, "expected 'them' or '($prefix*)'");
        }
        self.bump();
        self.expect_byte(b'$')?;
        self.skip_trivia()?;
        let prefix = self.read_ident_raw().unwrap_or_default();
        self.expect_byte(b'*')?;
        self.expect_byte(b')')?;
        if !declared.iter().any(|id| id.starts_with(&prefix)) {
            return self.err_at(at, format!("no declared pattern matches '(${prefix}*)'"));
        }
        Ok(PatternSet::Glob(prefix))
    }

    fn read_comparator(&mut self) -> Result<Comparator, ParseError> {
        self.skip_trivia()?;
        let at = self.mark();
        let cmp = match (self.peek(), self.peek_at(1)) {
            (Some(b'='), Some(b'=')) => {
                self.bump();
                self.bump();
                Comparator::Eq
            }
            (Some(b'!'), Some(b'=')) => {
                self.bump();
                self.bump();
                Comparator::Ne
            }
            (Some(b'<'), Some(b'=')) => {
                self.bump();
                self.bump();
                Comparator::Le
            }
            (Some(b'>'), Some(b'=')) => {
                self.bump();
                self.bump();
                Comparator::Ge
            }
            (Some(b'<'), _) => {
                self.bump();
                Comparator::Lt
            }
            (Some(b'>'), _) => {
                self.bump();
                Comparator::Gt
            }
            _ => return self.err_at(at, "expected comparator (==, !=, <, <=, >, >=)"),
        };
        Ok(cmp)
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
