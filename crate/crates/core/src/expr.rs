//! Scalar expressions in the chart coordinates `x1 … xn`.
//!
//! Used for the conformal factor σ(x). Grammar, loosest binding first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          right associative
//! primary := number | 'x'<index> | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | exp | log
//! ```

use std::fmt;
use std::str::FromStr;

use crate::derivkit::Scalar;
use crate::syntax::{Cursor, ParseError};

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
    Log,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Zero-based coordinate index (`x1` is `Var(0)`).
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval<S: Scalar>(&self, x: &[S]) -> S {
        match self {
            Expr::Num(v) => S::cst(*v),
            Expr::Var(i) => x[*i],
            Expr::Neg(e) => -e.eval(x),
            Expr::Call(f, e) => {
                let a = e.eval(x);
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Log => a.ln(),
                }
            }
            Expr::Bin(op, l, r) => {
                if *op == BinOp::Pow {
                    return pow(l.eval(x), r, x);
                }
                let (a, b) = (l.eval(x), r.eval(x));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => unreachable!(),
                }
            }
        }
    }

    /// Largest coordinate index referenced, one-based; 0 for constants.
    pub fn max_var(&self) -> usize {
        match self {
            Expr::Num(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(e) | Expr::Call(_, e) => e.max_var(),
            Expr::Bin(_, l, r) => l.max_var().max(r.max_var()),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.max_var() == 0
    }

    pub fn parse(src: &str) -> Result<Self, ParseError> {
        let mut cur = Cursor::new(src);
        let e = parse_expr(&mut cur)?;
        if !cur.at_end() {
            return Err(cur.unexpected("an operator or end of expression"));
        }
        Ok(e)
    }
}

fn pow<S: Scalar>(base: S, exponent: &Expr, x: &[S]) -> S {
    match constant_value(exponent) {
        Some(p) if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 => base.powi(p as i32),
        Some(p) => base.powf(p),
        // Variable exponents need a positive base.
        None => (exponent.eval(x) * base.ln()).exp(),
    }
}

fn constant_value(e: &Expr) -> Option<f64> {
    if e.is_constant() {
        Some(e.eval::<f64>(&[]))
    } else {
        None
    }
}

impl FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if v.is_sign_negative() => write!(f, "({v})"),
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
            Expr::Bin(op, l, r) => {
                let sym = match op {
                    BinOp::Add => '+',
                    BinOp::Sub => '-',
                    BinOp::Mul => '*',
                    BinOp::Div => '/',
                    BinOp::Pow => '^',
                };
                write!(f, "({l}{sym}{r})")
            }
        }
    }
}

pub(crate) fn parse_expr(cur: &mut Cursor<'_>) -> Result<Expr, ParseError> {
    let mut lhs = parse_term(cur)?;
    loop {
        let op = if cur.eat('+') {
            BinOp::Add
        } else if cur.eat('-') {
            BinOp::Sub
        } else {
            return Ok(lhs);
        };
        let rhs = parse_term(cur)?;
        lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
    }
}

fn parse_term(cur: &mut Cursor<'_>) -> Result<Expr, ParseError> {
    let mut lhs = parse_unary(cur)?;
    loop {
        let op = if cur.eat('*') {
            BinOp::Mul
        } else if cur.eat('/') {
            BinOp::Div
        } else {
            return Ok(lhs);
        };
        let rhs = parse_unary(cur)?;
        lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
    }
}

fn parse_unary(cur: &mut Cursor<'_>) -> Result<Expr, ParseError> {
    if cur.eat('-') {
        // Negated literals fold so that rendered constants parse back unchanged.
        return Ok(match parse_unary(cur)? {
            Expr::Num(v) => Expr::Num(-v),
            e => Expr::Neg(Box::new(e)),
        });
    }
    parse_power(cur)
}

fn parse_power(cur: &mut Cursor<'_>) -> Result<Expr, ParseError> {
    let base = parse_primary(cur)?;
    if cur.eat('^') {
        let exponent = parse_unary(cur)?;
        return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
    }
    Ok(base)
}

fn parse_primary(cur: &mut Cursor<'_>) -> Result<Expr, ParseError> {
    if cur.eat('(') {
        let e = parse_expr(cur)?;
        cur.expect(')')?;
        return Ok(e);
    }
    cur.skip_ws();
    let start = cur.pos();
    if let Some(n) = cur.number() {
        let n = n?;
        if !n.is_finite() {
            return Err(ParseError::new(start, "number out of range"));
        }
        return Ok(Expr::Num(n));
    }
    if let Some(id) = cur.ident(false) {
        if let Some(func) = Func::from_name(id) {
            cur.expect('(')?;
            let e = parse_expr(cur)?;
            cur.expect(')')?;
            return Ok(Expr::Call(func, Box::new(e)));
        }
        if let Some(digits) = id.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                return match digits.parse::<usize>() {
                    Ok(i) if i >= 1 => Ok(Expr::Var(i - 1)),
                    _ => Err(ParseError::new(start, format!("invalid coordinate '{id}'"))),
                };
            }
        }
        return Err(ParseError::new(start, format!("unknown identifier '{id}'")));
    }
    Err(cur.unexpected("a number, coordinate, function or '('"))
}
