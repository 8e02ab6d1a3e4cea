//! Parser for the infix expressions emitted by trees, with a row-wise
//! scalar interpreter.
//!
//! ```
//! use gpgomea::infix::parse;
//! let e = parse("(x0 * aq(x1, 2))").unwrap();
//! assert_eq!(e.eval_row(&[3.0, 5.0]), 3.0 * (5.0 / 5.0f64.sqrt()));
//! ```

use thiserror::Error;

use crate::data::FeatureMatrix;
use crate::tree::Op;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Constant(f64),
    Feature(usize),
    Apply(Op, Vec<Expr>),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("parse error at byte {at}: {message}")]
pub struct ParseError {
    pub at: usize,
    pub message: String,
}

impl Expr {
    pub fn eval_row(&self, row: &[f64]) -> f64 {
        match self {
            Expr::Constant(c) => *c,
            Expr::Feature(j) => row[*j],
            Expr::Apply(op, args) => {
                let values: Vec<f64> = args.iter().map(|a| a.eval_row(row)).collect();
                op.apply(&values)
            }
        }
    }

    pub fn evaluate(&self, x: &FeatureMatrix) -> Vec<f64> {
        (0..x.n_rows()).map(|i| self.eval_row(&x.row(i))).collect()
    }

    /// Highest referenced feature index.
    pub fn max_feature(&self) -> Option<usize> {
        match self {
            Expr::Constant(_) => None,
            Expr::Feature(j) => Some(*j),
            Expr::Apply(_, args) => args.iter().filter_map(Expr::max_feature).max(),
        }
    }
}

pub fn parse(input: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        s: input.as_bytes(),
        at: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.at != p.s.len() {
        return Err(p.error("trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    s: &'a [u8],
    at: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ParseError {
        ParseError {
            at: self.at,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.s.get(self.at).is_some_and(u8::is_ascii_whitespace) {
            self.at += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.at).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.at += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.at += 1;
                let a = self.expr()?;
                let op = match self.peek() {
                    Some(b'+') => Op::Add,
                    Some(b'-') => Op::Sub,
                    Some(b'*') => Op::Mul,
                    _ => return Err(self.error("expected binary operator")),
                };
                self.at += 1;
                let b = self.expr()?;
                self.expect(b')')?;
                Ok(Expr::Apply(op, vec![a, b]))
            }
            Some(b'x') if self.s.get(self.at + 1).is_some_and(u8::is_ascii_digit) => {
                self.at += 1;
                let start = self.at;
                while self.s.get(self.at).is_some_and(u8::is_ascii_digit) {
                    self.at += 1;
                }
                let digits = std::str::from_utf8(&self.s[start..self.at]).unwrap();
                digits
                    .parse()
                    .map(Expr::Feature)
                    .map_err(|_| self.error("feature index out of range"))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.at;
                while self.s.get(self.at).is_some_and(u8::is_ascii_alphanumeric) {
                    self.at += 1;
                }
                let name = std::str::from_utf8(&self.s[start..self.at]).unwrap();
                let op = Op::from_name(name).ok_or_else(|| self.error(&format!("unknown function `{name}`")))?;
                self.expect(b'(')?;
                let mut args = vec![self.expr()?];
                for _ in 1..op.arity() {
                    self.expect(b',')?;
                    args.push(self.expr()?);
                }
                self.expect(b')')?;
                Ok(Expr::Apply(op, args))
            }
            Some(c) if c.is_ascii_digit() || c == b'-' || c == b'.' => self.number(),
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.at;
        if self.s[self.at] == b'-' {
            self.at += 1;
        }
        while let Some(&c) = self.s.get(self.at) {
            let exponent_sign = (c == b'-' || c == b'+') && matches!(self.s[self.at - 1], b'e' | b'E');
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exponent_sign {
                self.at += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.s[start..self.at]).unwrap();
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Expr::Constant(v)),
            _ => {
                self.at = start;
                Err(self.error(&format!("invalid number `{text}`")))
            }
        }
    }
}
