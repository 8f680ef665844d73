//! Scalar expression trees.
//!
//! Coefficients of vector fields, Lagrangian bodies and test functions are all
//! carried as [`Expr`] values so they can be written in config files, printed
//! back, evaluated in plain IEEE double arithmetic and (for the smooth subset
//! of the grammar) differentiated symbolically.
//!
//! Variables are `x1..xn` (the spatial point) and `q1..qd` (the vector
//! argument of a Lagrangian). Supported syntax: numeric literals, `+ - * /`,
//! integer powers `e^k`, and the functions `exp`, `abs`, `sqrt`, `min`, `max`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A variable reference, zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    /// Spatial coordinate `x{i+1}`.
    X(usize),
    /// Argument component `q{i+1}`.
    Q(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Exp(Box<Expr>),
    Abs(Box<Expr>),
    Sqrt(Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Self {
        Expr::Num(v)
    }

    pub fn x(i: usize) -> Self {
        Expr::Var(Var::X(i))
    }

    pub fn q(i: usize) -> Self {
        Expr::Var(Var::Q(i))
    }

    pub fn parse(src: &str) -> Result<Self> {
        Parser::new(src).parse_all()
    }

    /// Evaluates with `x` as the spatial point and `q` as the argument.
    ///
    /// Variables beyond the supplied slices panic; use [`Expr::check_vars`]
    /// at construction time.
    pub fn eval(&self, x: &[f64], q: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X(i)) => x[*i],
            Expr::Var(Var::Q(i)) => q[*i],
            Expr::Neg(a) => -a.eval(x, q),
            Expr::Add(a, b) => a.eval(x, q) + b.eval(x, q),
            Expr::Sub(a, b) => a.eval(x, q) - b.eval(x, q),
            Expr::Mul(a, b) => a.eval(x, q) * b.eval(x, q),
            Expr::Div(a, b) => a.eval(x, q) / b.eval(x, q),
            Expr::Pow(a, k) => a.eval(x, q).powi(*k),
            Expr::Exp(a) => a.eval(x, q).exp(),
            Expr::Abs(a) => a.eval(x, q).abs(),
            Expr::Sqrt(a) => a.eval(x, q).sqrt(),
            Expr::Min(a, b) => a.eval(x, q).min(b.eval(x, q)),
            Expr::Max(a, b) => a.eval(x, q).max(b.eval(x, q)),
        }
    }

    /// Largest referenced `x` and `q` index counts, as `(n_x, n_q)`.
    pub fn var_extent(&self) -> (usize, usize) {
        let mut ext = (0, 0);
        self.visit(&mut |e| {
            if let Expr::Var(v) = e {
                match v {
                    Var::X(i) => ext.0 = ext.0.max(i + 1),
                    Var::Q(i) => ext.1 = ext.1.max(i + 1),
                }
            }
        });
        ext
    }

    /// Fails if the expression references `x_i` with `i > n_x` or `q_j` with `j > n_q`.
    pub fn check_vars(&self, n_x: usize, n_q: usize) -> Result<()> {
        let (ex, eq) = self.var_extent();
        if ex > n_x {
            return Err(Error::InvalidParam(format!(
                "expression `{self}` references x{ex} but only x1..x{n_x} are declared"
            )));
        }
        if eq > n_q {
            return Err(Error::InvalidParam(format!(
                "expression `{self}` references q{eq} but only q1..q{n_q} are declared"
            )));
        }
        Ok(())
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Num(_) | Expr::Var(_) => {}
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Exp(a) | Expr::Abs(a) | Expr::Sqrt(a) => {
                a.visit(f)
            }
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Min(a, b)
            | Expr::Max(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    pub fn depends_on(&self, var: Var) -> bool {
        let mut hit = false;
        self.visit(&mut |e| {
            if *e == Expr::Var(var) {
                hit = true;
            }
        });
        hit
    }

    /// Symbolic partial derivative with respect to `var`.
    ///
    /// `abs`, `min` and `max` nodes that depend on `var` are rejected.
    pub fn derivative(&self, var: Var) -> Result<Expr> {
        if !self.depends_on(var) {
            return Ok(Expr::Num(0.0));
        }
        let d = |e: &Expr| e.derivative(var);
        Ok(match self {
            Expr::Num(_) => Expr::Num(0.0),
            Expr::Var(v) => Expr::Num(if *v == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(d(a)?),
            Expr::Add(a, b) => add(d(a)?, d(b)?),
            Expr::Sub(a, b) => sub(d(a)?, d(b)?),
            Expr::Mul(a, b) => add(
                mul(d(a)?, (**b).clone()),
                mul((**a).clone(), d(b)?),
            ),
            Expr::Div(a, b) => {
                let num = sub(
                    mul(d(a)?, (**b).clone()),
                    mul((**a).clone(), d(b)?),
                );
                div(num, Expr::Pow(b.clone(), 2))
            }
            Expr::Pow(a, k) => {
                let inner = match k - 1 {
                    0 => Expr::Num(1.0),
                    1 => (**a).clone(),
                    km1 => Expr::Pow(a.clone(), km1),
                };
                mul(mul(Expr::Num(*k as f64), inner), d(a)?)
            }
            Expr::Exp(a) => mul(self.clone(), d(a)?),
            Expr::Sqrt(a) => div(d(a)?, mul(Expr::Num(2.0), self.clone())),
            Expr::Abs(_) | Expr::Min(_, _) | Expr::Max(_, _) => {
                return Err(Error::NonDifferentiable(format!(
                    "`{self}` contains abs/min/max"
                )))
            }
        })
    }
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Num(v) if *v == 0.0)
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Num(v) if *v == 1.0)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        a => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
        (a, b) if is_zero(&a) => b,
        (a, b) if is_zero(&b) => a,
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
        (a, b) if is_zero(&b) => a,
        (a, b) if is_zero(&a) => neg(b),
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
        (a, _) if is_zero(&a) => Expr::Num(0.0),
        (_, b) if is_zero(&b) => Expr::Num(0.0),
        (a, b) if is_one(&a) => b,
        (a, b) if is_one(&b) => a,
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        return Expr::Num(0.0);
    }
    if is_one(&b) {
        return a;
    }
    Expr::Div(Box::new(a), Box::new(b))
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

// Compound operands are always parenthesized; printing then parsing evaluates
// identically.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn atom(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match e {
                Expr::Num(v) if *v >= 0.0 => write!(f, "{e}"),
                Expr::Var(_)
                | Expr::Exp(_)
                | Expr::Abs(_)
                | Expr::Sqrt(_)
                | Expr::Min(_, _)
                | Expr::Max(_, _) => write!(f, "{e}"),
                _ => write!(f, "({e})"),
            }
        }
        match self {
            Expr::Num(v) => {
                if *v < 0.0 {
                    write!(f, "(-{:?})", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Var(Var::X(i)) => write!(f, "x{}", i + 1),
            Expr::Var(Var::Q(i)) => write!(f, "q{}", i + 1),
            Expr::Neg(a) => match **a {
                Expr::Num(v) => write!(f, "-({v:?})"),
                _ => {
                    write!(f, "-")?;
                    atom(a, f)
                }
            },
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let op = match self {
                    Expr::Add(..) => " + ",
                    Expr::Sub(..) => " - ",
                    Expr::Mul(..) => " * ",
                    _ => " / ",
                };
                atom(a, f)?;
                write!(f, "{op}")?;
                atom(b, f)
            }
            Expr::Pow(a, k) => {
                atom(a, f)?;
                if *k < 0 {
                    write!(f, "^({k})")
                } else {
                    write!(f, "^{k}")
                }
            }
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Abs(a) => write!(f, "abs({a})"),
            Expr::Sqrt(a) => write!(f, "sqrt({a})"),
            Expr::Min(a, b) => write!(f, "min({a}, {b})"),
            Expr::Max(a, b) => write!(f, "max({a}, {b})"),
        }
    }
}

impl FromStr for Expr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Expr::parse(s)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Expr::Num(v)),
            Raw::Text(s) => Expr::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src,
            bytes: src.as_bytes(),
            pos: 0,
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected `{}`", c as char))
        }
    }

    fn parse_all(mut self) -> Result<Expr> {
        let e = self.expr()?;
        if self.peek().is_some() {
            return self.err("trailing input");
        }
        Ok(e)
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = lhs + self.term()?;
            } else if self.eat(b'-') {
                lhs = lhs - self.term()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.peek() == Some(b'*') && self.bytes.get(self.pos + 1) != Some(&b'*') {
                self.pos += 1;
                lhs = lhs * self.unary()?;
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            // A minus sign glued to a literal is part of the literal.
            if matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == b'.') {
                return Ok(match self.power()? {
                    Expr::Num(v) => Expr::Num(-v),
                    e => -e,
                });
            }
            return Ok(-self.unary()?);
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        let is_pow = if self.eat(b'^') {
            true
        } else if self.peek() == Some(b'*') && self.bytes.get(self.pos + 1) == Some(&b'*') {
            self.pos += 2;
            true
        } else {
            false
        };
        if !is_pow {
            return Ok(base);
        }
        let k = if self.eat(b'(') {
            let k = self.integer()?;
            self.expect(b')')?;
            k
        } else {
            self.integer()?
        };
        Ok(Expr::Pow(Box::new(base), k))
    }

    fn integer(&mut self) -> Result<i32> {
        self.skip_ws();
        let start = self.pos;
        if matches!(self.bytes.get(self.pos), Some(b'-') | Some(b'+')) {
            self.pos += 1;
        }
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        match self.src[start..self.pos].parse::<i32>() {
            Ok(k) => Ok(k),
            Err(_) => {
                self.pos = start;
                self.err("exponent must be an integer literal")
            }
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let b = self.bytes;
        while self.pos < b.len() && (b[self.pos].is_ascii_digit() || b[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < b.len() && (b[self.pos] == b'e' || b[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < b.len() && (b[self.pos] == b'-' || b[self.pos] == b'+') {
                self.pos += 1;
            }
            if self.pos < b.len() && b[self.pos].is_ascii_digit() {
                while self.pos < b.len() && b[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        match self.src[start..self.pos].parse::<f64>() {
            Ok(v) => Ok(Expr::Num(v)),
            Err(_) => {
                self.pos = start;
                self.err("malformed number")
            }
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            None => self.err("unexpected end of input"),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let ident = &self.src[start..self.pos];
                self.ident(ident, start)
            }
            Some(c) => self.err(format!("unexpected character `{}`", c as char)),
        }
    }

    fn ident(&mut self, ident: &str, start: usize) -> Result<Expr> {
        let unary = |p: &mut Self, f: fn(Box<Expr>) -> Expr| -> Result<Expr> {
            p.expect(b'(')?;
            let a = p.expr()?;
            p.expect(b')')?;
            Ok(f(Box::new(a)))
        };
        let binary = |p: &mut Self, f: fn(Box<Expr>, Box<Expr>) -> Expr| -> Result<Expr> {
            p.expect(b'(')?;
            let a = p.expr()?;
            p.expect(b',')?;
            let b = p.expr()?;
            p.expect(b')')?;
            Ok(f(Box::new(a), Box::new(b)))
        };
        match ident {
            "exp" => unary(self, Expr::Exp),
            "abs" => unary(self, Expr::Abs),
            "sqrt" => unary(self, Expr::Sqrt),
            "min" => binary(self, Expr::Min),
            "max" => binary(self, Expr::Max),
            _ => {
                let (kind, digits) = ident.split_at(1);
                let idx = digits.parse::<usize>().ok().filter(|&i| i >= 1);
                match (kind, idx) {
                    ("x", Some(i)) => Ok(Expr::x(i - 1)),
                    ("q", Some(i)) => Ok(Expr::q(i - 1)),
                    _ => {
                        self.pos = start;
                        self.err(format!("unknown identifier `{ident}`"))
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: &[f64], q: &[f64]) -> f64 {
        Expr::parse(s).unwrap().eval(x, q)
    }

    #[test]
    fn precedence_and_powers() {
        assert_eq!(ev("1 + 2*3", &[], &[]), 7.0);
        assert_eq!(ev("-x1^2", &[3.0], &[]), -9.0);
        assert_eq!(ev("2*((q1+q2)/2)^2", &[], &[1.0, 1.0]), 2.0);
        assert_eq!(ev("x1**3", &[2.0], &[]), 8.0);
        assert_eq!(ev("x1^(-1)", &[4.0], &[]), 0.25);
        assert_eq!(ev("1e-3 * 2", &[], &[]), 0.002);
        assert_eq!(ev("max(x1, 0) + min(q1, -1)", &[-2.0], &[3.0]), -1.0);
        assert_eq!(ev("sqrt(abs(q1))", &[], &[-4.0]), 2.0);
        assert_eq!(ev("8/2/2", &[], &[]), 2.0);
        assert_eq!(ev("1 - 2 - 3", &[], &[]), -4.0);
    }

    #[test]
    fn f2_value() {
        let v = ev("2*((q1+q2)/2)^2 + exp((q1-q2)^2) - 1", &[], &[1.0, -1.0]);
        assert!((v - (4f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn parse_errors() {
        assert!(Expr::parse("x0").is_err());
        assert!(Expr::parse("y1").is_err());
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("x1^1.5").is_err());
        assert!(Expr::parse("sin(x1)").is_err());
        assert!(Expr::parse("(x1").is_err());
        assert!(Expr::parse("x1 x2").is_err());
    }

    #[test]
    fn var_checks() {
        let e = Expr::parse("x3 + q2").unwrap();
        assert_eq!(e.var_extent(), (3, 2));
        assert!(e.check_vars(3, 2).is_ok());
        assert!(e.check_vars(2, 2).is_err());
        assert!(e.check_vars(3, 1).is_err());
    }

    #[test]
    fn derivatives() {
        let e = Expr::parse("x1*x2^3 + exp(2*x1) - x2/x1 + sqrt(x2)").unwrap();
        let d1 = e.derivative(Var::X(0)).unwrap();
        let d2 = e.derivative(Var::X(1)).unwrap();
        let (a, b) = (1.3f64, 0.7f64);
        let x = [a, b];
        let want1 = b.powi(3) + 2.0 * (2.0 * a).exp() + b / (a * a);
        let want2 = 3.0 * a * b * b - 1.0 / a + 0.5 / b.sqrt();
        assert!((d1.eval(&x, &[]) - want1).abs() < 1e-12);
        assert!((d2.eval(&x, &[]) - want2).abs() < 1e-12);
        assert_eq!(Expr::parse("abs(x1)").unwrap().derivative(Var::X(1)).unwrap(), Expr::Num(0.0));
        assert!(Expr::parse("abs(x1)").unwrap().derivative(Var::X(0)).is_err());
        assert!(Expr::parse("max(x1, 0)").unwrap().derivative(Var::X(0)).is_err());
    }

    #[test]
    fn serde_as_string() {
        let e: Expr = serde_json::from_str("\"x1 - 2*q1\"").unwrap();
        assert_eq!(e.eval(&[1.0], &[1.0]), -1.0);
        let n: Expr = serde_json::from_str("0.5").unwrap();
        assert_eq!(n, Expr::Num(0.5));
        let s = serde_json::to_string(&e).unwrap();
        let back: Expr = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_expr() -> impl Strategy<Value = Expr> {
            let leaf = prop_oneof![
                (-5.0f64..5.0).prop_map(Expr::Num),
                (0usize..3).prop_map(Expr::x),
                (0usize..2).prop_map(Expr::q),
            ];
            leaf.prop_recursive(4, 24, 2, |inner| {
                prop_oneof![
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
                    (inner.clone(), inner.clone())
                        .prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
                    (inner.clone(), -3i32..4).prop_map(|(a, k)| Expr::Pow(Box::new(a), k)),
                    inner.clone().prop_map(|a| -a),
                    inner.clone().prop_map(|a| Expr::Abs(Box::new(a))),
                    inner.clone().prop_map(|a| Expr::Sqrt(Box::new(a))),
                    (inner.clone(), inner).prop_map(|(a, b)| Expr::Max(Box::new(a), Box::new(b))),
                ]
            })
        }

        proptest! {
            #[test]
            fn print_parse_roundtrip(e in arb_expr(), x in prop::array::uniform3(-2.0f64..2.0), q in prop::array::uniform2(-2.0f64..2.0)) {
                let printed = e.to_string();
                let back = Expr::parse(&printed).unwrap();
                prop_assert_eq!(back.to_string(), printed);
                let (a, b) = (e.eval(&x, &q), back.eval(&x, &q));
                prop_assert!(a == b || (a.is_nan() && b.is_nan()), "{} vs {}", a, b);
            }
        }
    }
}
