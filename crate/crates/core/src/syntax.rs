//! Byte cursor shared by the metric-spec and expression parsers.

use std::fmt;

/// A syntax or semantic error anchored at a byte offset of the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(offset: usize, message: impl Into<String>) -> Self {
        Self {
            offset,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (at byte {})", self.message, self.offset)
    }
}

impl std::error::Error for ParseError {}

pub(crate) struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn set_pos(&mut self, pos: usize) {
        self.pos = pos;
    }

    pub fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    pub fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.src.len()
    }

    pub fn skip_ws(&mut self) {
        while let Some(c) = self.rest().chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    pub fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    /// Consumes `c` if it is the next non-blank character.
    pub fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("'{c}'")))
        }
    }

    pub fn unexpected(&mut self, wanted: &str) -> ParseError {
        let pos = {
            self.skip_ws();
            self.pos
        };
        match self.rest().chars().next() {
            Some(c) => ParseError::new(pos, format!("expected {wanted}, found '{c}'")),
            None => ParseError::new(pos, format!("expected {wanted}, found end of input")),
        }
    }

    /// Identifier made of ASCII letters, digits, `_` and (optionally) `-`.
    pub fn ident(&mut self, allow_dash: bool) -> Option<&'a str> {
        self.skip_ws();
        let rest = self.rest();
        let first = rest.chars().next()?;
        if !first.is_ascii_alphabetic() {
            return None;
        }
        let len = rest
            .char_indices()
            .find(|&(_, c)| !(c.is_ascii_alphanumeric() || c == '_' || (allow_dash && c == '-')))
            .map(|(i, _)| i)
            .unwrap_or(rest.len());
        self.pos += len;
        Some(&rest[..len])
    }

    /// Unsigned decimal literal (`12`, `0.5`, `.5`, `1e-3`).
    pub fn number(&mut self) -> Option<Result<f64, ParseError>> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        let digits = |i: &mut usize| {
            let s = *i;
            while *i < bytes.len() && bytes[*i].is_ascii_digit() {
                *i += 1;
            }
            *i > s
        };
        let int = digits(&mut i);
        let mut frac = false;
        if i < bytes.len() && bytes[i] == b'.' {
            i += 1;
            frac = digits(&mut i);
        }
        if !int && !frac {
            return None;
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            if digits(&mut j) {
                i = j;
            } else {
                return Some(Err(ParseError::new(i, "malformed exponent in number")));
            }
        }
        self.pos = i;
        let text = &self.src[start..i];
        Some(
            text.parse::<f64>()
                .map_err(|_| ParseError::new(start, format!("invalid number '{text}'"))),
        )
    }

    /// Optionally signed number.
    pub fn signed_number(&mut self) -> Result<f64, ParseError> {
        let neg = self.eat('-');
        if !neg {
            self.eat('+');
        }
        match self.number() {
            Some(v) => v.map(|v| if neg { -v } else { v }),
            None => Err(self.unexpected("a number")),
        }
    }
}
