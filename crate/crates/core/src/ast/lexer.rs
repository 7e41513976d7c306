//! Tokenizer shared by the SELECT parser and the DDL reader.

use super::{FillType, ParseError};

#[derive(Debug, Clone, PartialEq)]
pub enum LexKind {
    /// Bare word; may be a keyword or an identifier depending on context.
    Word,
    /// Backtick, bracket or (in DDL) double-quoted identifier, unquoted text.
    QuotedIdent,
    /// String literal, unescaped. Double-quoted text is a string too, as in Spider.
    Str,
    Number,
    /// Operator or punctuation, stored verbatim.
    Symbol,
    Placeholder(FillType),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexToken {
    pub kind: LexKind,
    pub text: String,
    pub offset: usize,
}

impl LexToken {
    pub fn is_symbol(&self, s: &str) -> bool {
        self.kind == LexKind::Symbol && self.text == s
    }

    pub fn is_word(&self, w: &str) -> bool {
        self.kind == LexKind::Word && self.text.eq_ignore_ascii_case(w)
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            LexKind::Word | LexKind::Symbol => format!("`{}`", self.text),
            LexKind::QuotedIdent => format!("identifier `{}`", self.text),
            LexKind::Str => "string literal".to_string(),
            LexKind::Number => format!("number `{}`", self.text),
            LexKind::Placeholder(ft) => format!("placeholder {}", ft.marker()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexMode {
    /// Plain SQL: `[x]` is a bracket-quoted identifier.
    Sql,
    /// Template text: the five placeholder spellings are placeholders.
    Template,
    /// DDL: double quotes delimit identifiers, as SQLite reads them there.
    Ddl,
}

const SYMBOLS: &[&str] =
    &["<>", "<=", ">=", "!=", "==", "||", "=", "<", ">", "+", "-", "*", "/", "%", "(", ")", ",", ".", ";"];

pub fn tokenize(src: &str, mode: LexMode) -> Result<Vec<LexToken>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'-' && bytes.get(i + 1) == Some(&b'-') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            match src[i + 2..].find("*/") {
                Some(end) => i += end + 4,
                None => return Err(ParseError::new(i, "end of block comment", "end of input")),
            }
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$') {
                i += 1;
            }
            out.push(LexToken { kind: LexKind::Word, text: src[start..i].to_string(), offset: start });
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            i = scan_number(bytes, i);
            if i < bytes.len() && (bytes[i].is_ascii_alphabetic() || bytes[i] == b'_') {
                return Err(ParseError::new(i, "end of number", &format!("`{}`", bytes[i] as char)));
            }
            out.push(LexToken { kind: LexKind::Number, text: src[start..i].to_string(), offset: start });
            continue;
        }
        match c {
            b'\'' => {
                let (text, next) = scan_quoted(src, i, '\'', '\'')?;
                out.push(LexToken { kind: LexKind::Str, text, offset: start });
                i = next;
            }
            b'"' => {
                let (text, next) = scan_quoted(src, i, '"', '"')?;
                let kind = if mode == LexMode::Ddl { LexKind::QuotedIdent } else { LexKind::Str };
                out.push(LexToken { kind, text, offset: start });
                i = next;
            }
            b'`' => {
                let (text, next) = scan_quoted(src, i, '`', '`')?;
                out.push(LexToken { kind: LexKind::QuotedIdent, text, offset: start });
                i = next;
            }
            b'[' => {
                let end = src[i..].find(']').map(|e| i + e).ok_or_else(|| ParseError::new(i, "`]`", "end of input"))?;
                let inner = &src[i + 1..end];
                let kind = match (mode, FillType::from_marker_inner(inner)) {
                    (LexMode::Template, Some(ft)) => LexKind::Placeholder(ft),
                    _ => LexKind::QuotedIdent,
                };
                out.push(LexToken { kind, text: inner.to_string(), offset: start });
                i = end + 1;
            }
            _ => {
                let rest = &src[i..];
                let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) else {
                    let ch = rest.chars().next().unwrap_or('?');
                    return Err(ParseError::new(i, "a SQL token", &format!("`{ch}`")));
                };
                out.push(LexToken { kind: LexKind::Symbol, text: sym.to_string(), offset: start });
                i += sym.len();
            }
        }
    }
    Ok(out)
}

fn scan_number(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    i
}

/// Scans a quoted run starting at `start`, where a doubled `close` is an escape.
fn scan_quoted(src: &str, start: usize, open: char, close: char) -> Result<(String, usize), ParseError> {
    debug_assert!(src[start..].starts_with(open));
    let mut text = String::new();
    let mut chars = src[start + open.len_utf8()..].char_indices().peekable();
    while let Some((idx, ch)) = chars.next() {
        if ch == close {
            if chars.peek().map(|(_, c)| *c) == Some(close) {
                chars.next();
                text.push(close);
                continue;
            }
            return Ok((text, start + open.len_utf8() + idx + close.len_utf8()));
        }
        text.push(ch);
    }
    Err(ParseError::new(start, &format!("closing {close}"), "end of input"))
}

/// True when `text` lexes to exactly one numeric literal.
pub fn is_number_literal(text: &str) -> bool {
    matches!(tokenize(text, LexMode::Sql).as_deref(), Ok([t]) if t.kind == LexKind::Number && t.text == text)
}
