//! Arithmetic expressions used by complex parameters.
//!
//! Standard infix precedence, `^` binds tighter than unary minus on its left
//! and is right-associative. Whitespace is insignificant.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Log10,
    Pow10,
    Sqrt,
    Abs,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "log10" => Func::Log10,
            "pow10" => Func::Pow10,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Log10 => "log10",
            Func::Pow10 => "pow10",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(n) => f.write_str(n),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Bin(op, a, b) => {
                let s = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {s} {b})")
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl Expr {
    /// Identifiers referenced anywhere in the tree.
    pub fn identifiers(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_identifiers(&mut out);
        out
    }

    fn collect_identifiers<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(n) => out.push(n),
            Expr::Neg(e) => e.collect_identifiers(out),
            Expr::Bin(_, a, b) => {
                a.collect_identifiers(out);
                b.collect_identifiers(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_identifiers(out)),
        }
    }

    /// Evaluates with IEEE double arithmetic; `lookup` resolves identifiers.
    pub fn eval(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64> {
        let fail = |message: &str| Error::Eval {
            node: self.to_string(),
            message: message.to_string(),
        };
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(n) => lookup(n).ok_or_else(|| fail("unbound identifier")),
            Expr::Neg(e) => Ok(-e.eval(lookup)?),
            Expr::Bin(op, a, b) => {
                let (x, y) = (a.eval(lookup)?, b.eval(lookup)?);
                match op {
                    BinOp::Add => Ok(x + y),
                    BinOp::Sub => Ok(x - y),
                    BinOp::Mul => Ok(x * y),
                    BinOp::Div if y == 0.0 => Err(fail("division by zero")),
                    BinOp::Div => Ok(x / y),
                    BinOp::Pow => {
                        let v = x.powf(y);
                        if v.is_nan() {
                            Err(fail("undefined power"))
                        } else {
                            Ok(v)
                        }
                    }
                }
            }
            Expr::Call(func, args) => {
                let vals = args
                    .iter()
                    .map(|a| a.eval(lookup))
                    .collect::<Result<Vec<_>>>()?;
                let x = vals[0];
                match func {
                    Func::Exp => Ok(x.exp()),
                    Func::Log | Func::Log10 if x <= 0.0 => Err(fail("logarithm of non-positive value")),
                    Func::Log => Ok(x.ln()),
                    Func::Log10 => Ok(x.log10()),
                    Func::Pow10 => Ok(10f64.powf(x)),
                    Func::Sqrt if x < 0.0 => Err(fail("square root of negative value")),
                    Func::Sqrt => Ok(x.sqrt()),
                    Func::Abs => Ok(x.abs()),
                    Func::Min => Ok(x.min(vals[1])),
                    Func::Max => Ok(x.max(vals[1])),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

/// Parses `text`; error columns are offset by `column` (1-based start of
/// `text` within its line).
pub fn parse_expr(text: &str, line: usize, column: usize) -> Result<Expr> {
    let toks = tokenize(text, line, column)?;
    let mut p = Parser {
        toks,
        pos: 0,
        line,
        end_col: column + text.len(),
    };
    let e = p.expr()?;
    if p.pos < p.toks.len() {
        return Err(p.error_at(p.pos, "unexpected trailing input"));
    }
    Ok(e)
}

fn tokenize(text: &str, line: usize, column: usize) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let col = column + i;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            i += 1;
            while i < bytes.len() {
                let d = bytes[i] as char;
                let prev = bytes[i - 1] as char;
                if d.is_ascii_digit()
                    || d == '.'
                    || d == 'e'
                    || d == 'E'
                    || ((d == '-' || d == '+') && (prev == 'e' || prev == 'E'))
                {
                    i += 1;
                } else {
                    break;
                }
            }
            let s = &text[start..i];
            let v: f64 = s.parse().map_err(|_| Error::Est {
                line,
                column: col,
                message: format!("malformed number `{s}`"),
            })?;
            out.push((Tok::Num(v), col));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), col));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                _ => {
                    return Err(Error::Est {
                        line,
                        column: col,
                        message: format!("unexpected character `{c}`"),
                    })
                }
            };
            out.push((tok, col));
            i += 1;
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    end_col: usize,
}

impl Parser {
    fn error_at(&self, pos: usize, message: &str) -> Error {
        let column = self.toks.get(pos).map_or(self.end_col, |t| t.1);
        Error::Est {
            line: self.line,
            column,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Tok::Op(c)) if ops.contains(c) => {
                let c = *c;
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(c) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(c) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.eat_op(&['-', '+']) {
            Some('-') => Ok(Expr::Neg(Box::new(self.unary()?))),
            Some(_) => self.unary(),
            None => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat_op(&['^']).is_some() {
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let here = self.pos;
        let Some((tok, _)) = self.toks.get(self.pos).cloned() else {
            return Err(self.error_at(here, "unexpected end of expression"));
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Ident(name) => {
                if self.peek() != Some(&Tok::LParen) {
                    return Ok(Expr::Var(name));
                }
                let func = Func::from_name(&name)
                    .ok_or_else(|| self.error_at(here, &format!("unknown function `{name}`")))?;
                self.pos += 1;
                let mut args = vec![self.expr()?];
                while self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                    args.push(self.expr()?);
                }
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.error_at(self.pos, "expected `)`"));
                }
                self.pos += 1;
                if args.len() != func.arity() {
                    return Err(self.error_at(
                        here,
                        &format!("`{name}` takes {} argument(s), got {}", func.arity(), args.len()),
                    ));
                }
                Ok(Expr::Call(func, args))
            }
            Tok::LParen => {
                let e = self.expr()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.error_at(self.pos, "expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            _ => Err(self.error_at(here, "expected a number, identifier or `(`")),
        }
    }
}
