//! Small cursor used by the growth-function and density grammars.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("parse error at column {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

pub(crate) struct Cursor<'a> {
    s: &'a [u8],
    pub pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(s: &'a str) -> Self {
        Cursor { s: s.as_bytes(), pos: 0 }
    }

    pub fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { pos: self.pos + 1, msg: msg.into() })
    }

    pub fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    pub fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    pub fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected '{}'", c as char))
        }
    }

    pub fn ident(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && (self.s[self.pos].is_ascii_alphanumeric() || self.s[self.pos] == b'_') {
            self.pos += 1;
        }
        if self.pos > start {
            Some(String::from_utf8_lossy(&self.s[start..self.pos]).into_owned())
        } else {
            None
        }
    }

    /// A float literal, `e`, `pi`, or `e^k`, optionally negated.
    pub fn number(&mut self) -> Result<f64, ParseError> {
        self.skip_ws();
        let neg = self.eat(b'-');
        self.skip_ws();
        let start = self.pos;
        let v = if self.s[self.pos..].starts_with(b"pi") {
            self.pos += 2;
            std::f64::consts::PI
        } else if self.s.get(self.pos) == Some(&b'e') && !self.s.get(self.pos + 1).is_some_and(|c| c.is_ascii_alphabetic()) {
            self.pos += 1;
            if self.eat(b'^') {
                self.number()?.exp()
            } else {
                std::f64::consts::E
            }
        } else {
            while self.pos < self.s.len() {
                let c = self.s[self.pos];
                let exp_sign = (c == b'-' || c == b'+') && self.pos > start && matches!(self.s[self.pos - 1], b'e' | b'E');
                if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            let txt = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
            match txt.parse::<f64>() {
                Ok(v) => v,
                Err(_) => {
                    self.pos = start;
                    return self.err("expected a number");
                }
            }
        };
        Ok(if neg { -v } else { v })
    }

    pub fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }

    pub fn rest_starts_with(&mut self, lit: &str) -> bool {
        self.skip_ws();
        self.s[self.pos..].starts_with(lit.as_bytes())
    }

    pub fn advance(&mut self, n: usize) {
        self.pos += n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers() {
        for (txt, v) in [("2", 2.0), ("1.5e-3", 1.5e-3), ("e", std::f64::consts::E), ("-0.25", -0.25), ("e^2", 2f64.exp())] {
            assert_eq!(Cursor::new(txt).number().unwrap(), v, "{txt}");
        }
        assert!(Cursor::new("x").number().is_err());
    }
}
