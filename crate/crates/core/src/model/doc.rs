//! Block-structured key/value documents.
//!
//! ```text
//! # comment
//! [kind id]
//! key = value tokens ...
//!   [[child]]
//!   key = ...
//! ```
//!
//! `[[child]]` sections attach to the closest preceding top-level section.
//! Values are token sequences; interpreting them is up to the caller.

use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ParseErrorKind {
    Syntax,
    DuplicateId,
    UnknownField,
}

impl ParseErrorKind {
    pub fn code(&self) -> &'static str {
        match self {
            ParseErrorKind::Syntax => "SYNTAX",
            ParseErrorKind::DuplicateId => "DUPLICATE_ID",
            ParseErrorKind::UnknownField => "UNKNOWN_FIELD",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: {}: {}",
            self.line,
            self.column,
            self.kind.code(),
            self.message
        )
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl Pos {
    pub fn error(self, kind: ParseErrorKind, message: impl Into<String>) -> ParseError {
        ParseError {
            kind,
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }

    pub fn syntax(self, message: impl Into<String>) -> ParseError {
        self.error(ParseErrorKind::Syntax, message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    Punct(char),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Number(s) => f.write_str(s),
            Tok::Str(s) => write!(f, "{s:?}"),
            Tok::Punct(c) => write!(f, "'{c}'"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub struct Entry {
    pub key: String,
    pub pos: Pos,
    pub value: Vec<Token>,
    /// Position just past the `=`; used for errors on empty values.
    pub value_pos: Pos,
}

impl Entry {
    pub fn cursor(&self) -> Cursor<'_> {
        Cursor {
            tokens: &self.value,
            idx: 0,
            end: self.value_pos,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Section {
    pub kind: String,
    pub id: Option<String>,
    pub pos: Pos,
    pub id_pos: Pos,
    pub entries: Vec<Entry>,
    pub children: Vec<Section>,
}

#[derive(Debug, Clone, Default)]
pub struct Document {
    pub sections: Vec<Section>,
}

fn is_word_byte(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | '+')
}

fn looks_numeric(word: &str) -> bool {
    let digits = word.strip_prefix(['-', '+']).unwrap_or(word);
    let mut dots = 0;
    !digits.is_empty()
        && digits.chars().all(|c| {
            if c == '.' {
                dots += 1;
                true
            } else {
                c.is_ascii_digit()
            }
        })
        && dots <= 1
        && digits.chars().any(|c| c.is_ascii_digit())
}

/// Tokenizes the remainder of a line starting at byte `start`.
fn lex_value(line: &str, start: usize, lineno: usize, errors: &mut Vec<ParseError>) -> Vec<Token> {
    let mut out = Vec::new();
    let mut chars = line[start..].char_indices().peekable();
    let col = |byte: usize| line[..start + byte].chars().count() + 1;
    while let Some(&(i, c)) = chars.peek() {
        let pos = Pos {
            line: lineno,
            column: col(i),
        };
        if c.is_whitespace() {
            chars.next();
        } else if c == '#' {
            break;
        } else if c == '"' {
            chars.next();
            let mut s = String::new();
            let mut closed = false;
            while let Some((_, c)) = chars.next() {
                match c {
                    '"' => {
                        closed = true;
                        break;
                    }
                    '\\' => match chars.next() {
                        Some((_, 'n')) => s.push('\n'),
                        Some((_, 't')) => s.push('\t'),
                        Some((_, 'r')) => s.push('\r'),
                        Some((_, '"')) => s.push('"'),
                        Some((_, '\\')) => s.push('\\'),
                        Some((j, other)) => {
                            errors.push(
                                Pos {
                                    line: lineno,
                                    column: col(j),
                                }
                                .syntax(format!("unknown escape '\\{other}'")),
                            );
                        }
                        None => break,
                    },
                    _ => s.push(c),
                }
            }
            if !closed {
                errors.push(pos.syntax("unterminated string"));
                return out;
            }
            out.push(Token {
                tok: Tok::Str(s),
                pos,
            });
        } else if is_word_byte(c) {
            let mut word = String::new();
            while let Some(&(_, c)) = chars.peek() {
                if !is_word_byte(c) {
                    break;
                }
                word.push(c);
                chars.next();
            }
            let tok = if looks_numeric(&word) {
                Tok::Number(word)
            } else {
                Tok::Ident(word)
            };
            out.push(Token { tok, pos });
        } else if "(),&|[]=!:".contains(c) {
            chars.next();
            out.push(Token {
                tok: Tok::Punct(c),
                pos,
            });
        } else {
            chars.next();
            errors.push(pos.syntax(format!("unexpected character {c:?}")));
        }
    }
    out
}

fn strip_comment(s: &str) -> &str {
    // only used on header and key text, which never contain strings
    match s.find('#') {
        Some(i) => &s[..i],
        None => s,
    }
}

fn parse_header(
    body: &str,
    pos: Pos,
    offset: usize,
    errors: &mut Vec<ParseError>,
) -> Option<(String, Option<String>, Pos)> {
    let trimmed = body.trim();
    let lead = body.len() - body.trim_start().len();
    let mut parts = trimmed.split_whitespace();
    let kind = match parts.next() {
        Some(k) => k.to_string(),
        None => {
            errors.push(pos.syntax("empty section header"));
            return None;
        }
    };
    let id = parts.next().map(str::to_string);
    if parts.next().is_some() {
        errors.push(pos.syntax("section header takes at most a kind and an id"));
        return None;
    }
    if !kind.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        errors.push(pos.syntax(format!("bad section kind {kind:?}")));
        return None;
    }
    let id_pos = match &id {
        Some(id) => {
            let at = trimmed.rfind(id.as_str()).unwrap_or(0);
            Pos {
                line: pos.line,
                column: pos.column + offset + lead + at,
            }
        }
        None => pos,
    };
    Some((kind, id, id_pos))
}

pub fn parse_document(source: &str) -> (Document, Vec<ParseError>) {
    let mut doc = Document::default();
    let mut errors = Vec::new();
    let mut in_child = false;

    for (idx, raw) in source.lines().enumerate() {
        let lineno = idx + 1;
        let indent = raw.len() - raw.trim_start().len();
        let line = raw.trim_start();
        let pos = Pos {
            line: lineno,
            column: raw[..indent].chars().count() + 1,
        };
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("[[") {
            let Some(close) = rest.find("]]") else {
                errors.push(pos.syntax("unterminated [[ header"));
                continue;
            };
            if !strip_comment(&rest[close + 2..]).trim().is_empty() {
                errors.push(pos.syntax("trailing text after header"));
                continue;
            }
            let Some((kind, id, id_pos)) = parse_header(&rest[..close], pos, 2, &mut errors) else {
                continue;
            };
            match doc.sections.last_mut() {
                Some(parent) => {
                    parent.children.push(Section {
                        kind,
                        id,
                        pos,
                        id_pos,
                        entries: Vec::new(),
                        children: Vec::new(),
                    });
                    in_child = true;
                }
                None => errors.push(pos.syntax("nested section before any top-level section")),
            }
        } else if let Some(rest) = line.strip_prefix('[') {
            let Some(close) = rest.find(']') else {
                errors.push(pos.syntax("unterminated [ header"));
                continue;
            };
            if !strip_comment(&rest[close + 1..]).trim().is_empty() {
                errors.push(pos.syntax("trailing text after header"));
                continue;
            }
            let Some((kind, id, id_pos)) = parse_header(&rest[..close], pos, 1, &mut errors) else {
                // keep subsequent entries from landing in the previous section
                doc.sections.push(Section {
                    kind: String::new(),
                    id: None,
                    pos,
                    id_pos: pos,
                    entries: Vec::new(),
                    children: Vec::new(),
                });
                in_child = false;
                continue;
            };
            doc.sections.push(Section {
                kind,
                id,
                pos,
                id_pos,
                entries: Vec::new(),
                children: Vec::new(),
            });
            in_child = false;
        } else {
            let Some(eq) = line.find('=') else {
                errors.push(pos.syntax("expected `key = value`"));
                continue;
            };
            let key = line[..eq].trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                errors.push(pos.syntax(format!("bad key {key:?}")));
                continue;
            }
            let value_start = indent + eq + 1;
            let value = lex_value(raw, value_start, lineno, &mut errors);
            let value_pos = Pos {
                line: lineno,
                column: raw[..value_start].chars().count() + 1,
            };
            let entry = Entry {
                key: key.to_string(),
                pos,
                value,
                value_pos,
            };
            let section = match doc.sections.last_mut() {
                Some(s) if in_child => s.children.last_mut(),
                Some(s) => Some(s),
                None => None,
            };
            match section {
                Some(s) => s.entries.push(entry),
                None => errors.push(pos.syntax("entry outside of any section")),
            }
        }
    }
    (doc, errors)
}

/// Reads typed values out of an entry's token list.
pub struct Cursor<'a> {
    tokens: &'a [Token],
    idx: usize,
    end: Pos,
}

impl<'a> Cursor<'a> {
    pub fn pos(&self) -> Pos {
        self.tokens.get(self.idx).map(|t| t.pos).unwrap_or(self.end)
    }

    pub fn peek(&self) -> Option<&'a Tok> {
        self.tokens.get(self.idx).map(|t| &t.tok)
    }

    pub fn at_end(&self) -> bool {
        self.idx >= self.tokens.len()
    }

    fn next(&mut self) -> Option<&'a Token> {
        let t = self.tokens.get(self.idx);
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    fn describe(&self) -> String {
        match self.peek() {
            Some(t) => format!("{t}"),
            None => "end of line".to_string(),
        }
    }

    pub fn finish(&self) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self
                .pos()
                .syntax(format!("unexpected {} after value", self.describe())))
        }
    }

    pub fn eat_punct(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    pub fn punct(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat_punct(c) {
            Ok(())
        } else {
            Err(self
                .pos()
                .syntax(format!("expected '{c}', found {}", self.describe())))
        }
    }

    pub fn ident(&mut self) -> Result<String, ParseError> {
        let pos = self.pos();
        let desc = self.describe();
        match self.next() {
            Some(Token {
                tok: Tok::Ident(s), ..
            }) => Ok(s.clone()),
            _ => Err(pos.syntax(format!("expected identifier, found {desc}"))),
        }
    }

    /// An identifier-like word; numbers are accepted too so ids such as `2nd` work.
    pub fn word(&mut self) -> Result<String, ParseError> {
        let pos = self.pos();
        let desc = self.describe();
        match self.next() {
            Some(Token {
                tok: Tok::Ident(s) | Tok::Number(s),
                ..
            }) => Ok(s.clone()),
            _ => Err(pos.syntax(format!("expected identifier, found {desc}"))),
        }
    }

    pub fn string(&mut self) -> Result<String, ParseError> {
        let pos = self.pos();
        let desc = self.describe();
        match self.next() {
            Some(Token {
                tok: Tok::Str(s), ..
            }) => Ok(s.clone()),
            _ => Err(pos.syntax(format!("expected quoted string, found {desc}"))),
        }
    }

    pub fn number(&mut self) -> Result<f64, ParseError> {
        let pos = self.pos();
        let desc = self.describe();
        match self.next() {
            Some(Token {
                tok: Tok::Number(s),
                ..
            }) => s
                .parse::<f64>()
                .map_err(|_| pos.syntax(format!("bad number {s}"))),
            _ => Err(pos.syntax(format!("expected number, found {desc}"))),
        }
    }

    pub fn uint(&mut self) -> Result<u32, ParseError> {
        let pos = self.pos();
        let desc = self.describe();
        match self.next() {
            Some(Token {
                tok: Tok::Number(s),
                ..
            }) => s
                .strip_prefix('+')
                .unwrap_or(s)
                .parse::<u32>()
                .map_err(|_| pos.syntax(format!("expected non-negative integer, found {s}"))),
            _ => Err(pos.syntax(format!("expected integer, found {desc}"))),
        }
    }
}
