//! Real arithmetic expressions over named variables.
//!
//! ```text
//! expr   = term { ("+" | "-") term }
//! term   = unary { ("*" | "/") unary }
//! unary  = "-" unary | power
//! power  = atom [ "^" unary ]
//! atom   = number | ident [ "(" expr { "," expr } ")" ] | "(" expr ")"
//! ident  = (letter | "_") { letter | digit | "_" | "." }
//! ```
//!
//! Functions are `sin`, `cos`, `exp` (one argument) and `pow` (two).

use std::collections::{BTreeSet, HashMap};
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
    Sin,
    Cos,
    Exp,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn num(x: f64) -> Expr {
        Expr::Num(x)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn parse(text: &str) -> Result<Expr> {
        let mut p = Parser {
            src: text.as_bytes(),
            pos: 0,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Replaces each variable for which `f` returns an expression.
    pub fn substitute(&self, f: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Num(x) => Expr::Num(*x),
            Expr::Var(v) => f(v).unwrap_or_else(|| self.clone()),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(f))),
            Expr::Call(g, a) => Expr::Call(*g, Box::new(a.substitute(f))),
            Expr::Bin(op, a, b) => Expr::bin(*op, a.substitute(f), b.substitute(f)),
        }
    }

    pub fn rename(&self, f: &dyn Fn(&str) -> String) -> Expr {
        self.substitute(&|v| Some(Expr::Var(f(v))))
    }

    pub fn eval(&self, env: &HashMap<String, f64>) -> Result<f64> {
        self.eval_with(&|v| env.get(v).copied())
    }

    pub fn eval_with(&self, env: &dyn Fn(&str) -> Option<f64>) -> Result<f64> {
        Ok(match self {
            Expr::Num(x) => *x,
            Expr::Var(v) => env(v).ok_or_else(|| Error::UnboundVariable(v.clone()))?,
            Expr::Neg(a) => -a.eval_with(env)?,
            Expr::Call(g, a) => g.apply(a.eval_with(env)?),
            Expr::Bin(op, a, b) => {
                let (x, y) = (a.eval_with(env)?, b.eval_with(env)?);
                if *op == BinOp::Div && y == 0.0 {
                    return Err(Error::DivisionByZero(self.to_string()));
                }
                op.apply(x, y)
            }
        })
    }

    /// Resolves variables to slots once, for repeated evaluation.
    pub fn compile(&self, slot: &dyn Fn(&str) -> Option<usize>) -> Result<Compiled> {
        Ok(match self {
            Expr::Num(x) => Compiled::Num(*x),
            Expr::Var(v) => {
                Compiled::Slot(slot(v).ok_or_else(|| Error::UnboundVariable(v.clone()))?)
            }
            Expr::Neg(a) => Compiled::Neg(Box::new(a.compile(slot)?)),
            Expr::Call(g, a) => Compiled::Call(*g, Box::new(a.compile(slot)?)),
            Expr::Bin(BinOp::Div, a, b) => Compiled::Div(
                Box::new(a.compile(slot)?),
                Box::new(b.compile(slot)?),
                self.to_string(),
            ),
            Expr::Bin(op, a, b) => {
                Compiled::Bin(*op, Box::new(a.compile(slot)?), Box::new(b.compile(slot)?))
            }
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Bin(BinOp::Pow, ..) => 4,
            Expr::Num(x) if x.is_sign_negative() => 3,
            _ => 5,
        }
    }
}

impl BinOp {
    fn apply(self, x: f64, y: f64) -> f64 {
        match self {
            BinOp::Add => x + y,
            BinOp::Sub => x - y,
            BinOp::Mul => x * y,
            BinOp::Div => x / y,
            BinOp::Pow => x.powf(y),
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

impl Func {
    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x:?}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_operand(f, a, a.precedence() < 3)
            }
            Expr::Call(g, a) => write!(f, "{}({a})", g.name()),
            Expr::Bin(op, a, b) => {
                let p = self.precedence();
                let (lp, rp) = if *op == BinOp::Pow {
                    (a.precedence() <= p, b.precedence() < 3)
                } else {
                    (a.precedence() < p, b.precedence() <= p)
                };
                write_operand(f, a, lp)?;
                if *op == BinOp::Pow {
                    f.write_str("^")?;
                } else {
                    write!(f, " {} ", op.symbol())?;
                }
                write_operand(f, b, rp)
            }
        }
    }
}

/// An expression with variables resolved to positions in a slice.
#[derive(Debug, Clone, PartialEq)]
pub enum Compiled {
    Num(f64),
    Slot(usize),
    Neg(Box<Compiled>),
    Bin(BinOp, Box<Compiled>, Box<Compiled>),
    /// Keeps the source text for error reports.
    Div(Box<Compiled>, Box<Compiled>, String),
    Call(Func, Box<Compiled>),
}

impl Compiled {
    pub fn eval(&self, vals: &[f64]) -> Result<f64> {
        Ok(match self {
            Compiled::Num(x) => *x,
            Compiled::Slot(k) => vals[*k],
            Compiled::Neg(a) => -a.eval(vals)?,
            Compiled::Call(g, a) => g.apply(a.eval(vals)?),
            Compiled::Bin(op, a, b) => op.apply(a.eval(vals)?, b.eval(vals)?),
            Compiled::Div(a, b, text) => {
                let y = b.eval(vals)?;
                if y == 0.0 {
                    return Err(Error::DivisionByZero(text.clone()));
                }
                a.eval(vals)? / y
            }
        })
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Syntax {
            line: 1,
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut e = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(e),
            };
            self.pos += 1;
            e = Expr::bin(op, e, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut e = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(e),
            };
            self.pos += 1;
            e = Expr::bin(op, e, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat(b'^') {
            return Ok(Expr::bin(BinOp::Pow, base, self.unary()?));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric()
                        || matches!(self.src[self.pos], b'_' | b'.'))
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                if self.peek() != Some(b'(') {
                    return Ok(Expr::var(name));
                }
                let at = start;
                self.pos += 1;
                let mut args = vec![self.expr()?];
                while self.eat(b',') {
                    args.push(self.expr()?);
                }
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                let n_args = args.len();
                let arity = |n: usize| {
                    if n_args == n {
                        Ok(())
                    } else {
                        Err(Error::Syntax {
                            line: 1,
                            column: at + 1,
                            message: format!("`{name}` takes {n} argument(s), got {n_args}"),
                        })
                    }
                };
                let func = match name {
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "pow" => {
                        arity(2)?;
                        let mut it = args.into_iter();
                        let (a, b) = (it.next().expect("two"), it.next().expect("two"));
                        return Ok(Expr::bin(BinOp::Pow, a, b));
                    }
                    _ => {
                        return Err(Error::Syntax {
                            line: 1,
                            column: at + 1,
                            message: format!("unknown function `{name}`"),
                        })
                    }
                };
                arity(1)?;
                Ok(Expr::Call(func, Box::new(args.pop().expect("one"))))
            }
            Some(_) => Err(self.error("expected a number, name or `(`")),
            None => Err(self.error("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                digits(self);
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| Error::Syntax {
                line: 1,
                column: start + 1,
                message: format!("bad number `{text}`"),
            })
    }
}
