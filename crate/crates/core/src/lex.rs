//! Tokenizer shared by the guard, CTL and model-file grammars.

use std::fmt;

use thiserror::Error;

/// A syntax error with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl SyntaxError {
    pub fn new(pos: Pos, message: impl Into<String>) -> Self {
        SyntaxError {
            line: pos.line,
            column: pos.column,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    /// Single-char punctuation, or `->`.
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Number(s) => write!(f, "number `{s}`"),
            Tok::Str(s) => write!(f, "string \"{s}\""),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
    /// Byte offset of the first character in the source.
    pub offset: usize,
}

const PUNCT: &[&str] = &[
    "+", "*", "!", "(", ")", "[", "]", "{", "}", ";", ",", ".", "&", "|", "=", "$",
];

pub fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Tokenizes `src`. `#` starts a line comment when `comments` is set.
pub fn tokenize(src: &str, comments: bool) -> Result<Vec<Token>, SyntaxError> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut col = 1;
    let mut it = src.char_indices().peekable();

    while let Some(&(off, c)) = it.peek() {
        let pos = Pos { line, column: col };
        if c == '\n' {
            it.next();
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            it.next();
            col += 1;
            continue;
        }
        if comments && c == '#' {
            while let Some(&(_, c)) = it.peek() {
                if c == '\n' {
                    break;
                }
                it.next();
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&(_, c)) = it.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    s.push(c);
                    it.next();
                    col += 1;
                } else {
                    break;
                }
            }
            out.push(Token {
                tok: Tok::Ident(s),
                pos,
                offset: off,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while let Some(&(_, c)) = it.peek() {
                if c.is_ascii_digit() {
                    s.push(c);
                    it.next();
                    col += 1;
                } else {
                    break;
                }
            }
            out.push(Token {
                tok: Tok::Number(s),
                pos,
                offset: off,
            });
            continue;
        }
        if c == '"' {
            it.next();
            col += 1;
            let mut s = String::new();
            loop {
                match it.next() {
                    Some((_, '"')) => {
                        col += 1;
                        break;
                    }
                    Some((_, '\n')) | None => {
                        return Err(SyntaxError::new(pos, "unterminated string literal"));
                    }
                    Some((_, c)) => {
                        s.push(c);
                        col += 1;
                    }
                }
            }
            out.push(Token {
                tok: Tok::Str(s),
                pos,
                offset: off,
            });
            continue;
        }
        if c == '-' {
            it.next();
            col += 1;
            if let Some(&(_, '>')) = it.peek() {
                it.next();
                col += 1;
                out.push(Token {
                    tok: Tok::Punct("->"),
                    pos,
                    offset: off,
                });
                continue;
            }
            return Err(SyntaxError::new(pos, "expected `->`"));
        }
        let mut buf = [0u8; 4];
        let cs: &str = c.encode_utf8(&mut buf);
        match PUNCT.iter().find(|p| **p == cs) {
            Some(p) => {
                it.next();
                col += 1;
                out.push(Token {
                    tok: Tok::Punct(p),
                    pos,
                    offset: off,
                });
            }
            None => return Err(SyntaxError::new(pos, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, column: col },
        offset: src.len(),
    });
    Ok(out)
}

/// Cursor over a token vector; the last token is always `Eof`.
pub struct Cursor {
    toks: Vec<Token>,
    at: usize,
}

impl Cursor {
    pub fn new(toks: Vec<Token>) -> Self {
        Cursor { toks, at: 0 }
    }

    pub fn peek(&self) -> &Token {
        &self.toks[self.at]
    }

    pub fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    pub fn at_eof(&self) -> bool {
        self.peek().tok == Tok::Eof
    }

    pub fn is_punct(&self, p: &str) -> bool {
        matches!(&self.peek().tok, Tok::Punct(q) if *q == p)
    }

    pub fn is_word(&self, w: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == w)
    }

    pub fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn eat_word(&mut self, w: &str) -> bool {
        if self.is_word(w) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect_punct(&mut self, p: &str) -> Result<Pos, SyntaxError> {
        let t = self.peek();
        if self.is_punct(p) {
            let pos = t.pos;
            self.bump();
            Ok(pos)
        } else {
            Err(self.unexpected(&format!("`{p}`")))
        }
    }

    pub fn expect_word(&mut self, w: &str) -> Result<Pos, SyntaxError> {
        if self.is_word(w) {
            Ok(self.bump().pos)
        } else {
            Err(self.unexpected(&format!("`{w}`")))
        }
    }

    pub fn expect_ident(&mut self) -> Result<(String, Pos), SyntaxError> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                let pos = self.bump().pos;
                Ok((s, pos))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    pub fn expect_str(&mut self) -> Result<(String, Pos), SyntaxError> {
        match &self.peek().tok {
            Tok::Str(s) => {
                let s = s.clone();
                let pos = self.bump().pos;
                Ok((s, pos))
            }
            _ => Err(self.unexpected("string literal")),
        }
    }

    pub fn unexpected(&self, wanted: &str) -> SyntaxError {
        let t = self.peek();
        SyntaxError::new(t.pos, format!("expected {wanted}, found {}", t.tok))
    }
}
