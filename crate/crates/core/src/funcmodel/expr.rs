//! Arithmetic expressions in `t`, evaluated in log form.
//!
//! Grammar: `+ - * / ^`, parentheses, numbers, `t`, `e`, `pi` and the
//! functions `exp log sqrt erfc`. `^` binds tighter than unary minus and is
//! right associative, so `-t^2` is `-(t^2)` and `2^3^2` is `2^9`.

use std::f64::consts::{LN_2, SQRT_2};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::funcmodel::special::{ln_normal_sf, normal_sf_log_deriv};
use crate::funcmodel::TailFunction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Erfc,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// A value `sign·exp(ln)` with its logarithmic derivative `v'/v`. `plain`
/// holds the value itself while it is a normal float; once it under- or
/// overflows only the log form is carried.
#[derive(Debug, Clone, Copy)]
struct LogDual {
    sign: f64,
    ln: f64,
    dlog: f64,
    plain: Option<f64>,
}

impl LogDual {
    fn from_plain(v: f64, dlog: f64) -> Option<Self> {
        v.is_normal().then(|| Self {
            sign: sign_of(v),
            ln: v.abs().ln(),
            dlog,
            plain: Some(v),
        })
    }

    fn from_log(sign: f64, ln: f64, dlog: f64) -> Self {
        Self {
            sign,
            ln,
            dlog,
            plain: None,
        }
    }

    fn constant(c: f64) -> Self {
        Self::from_plain(c, 0.0).unwrap_or_else(|| Self {
            plain: (c == 0.0).then_some(c),
            ..Self::from_log(sign_of(c), c.abs().ln(), 0.0)
        })
    }

    fn value(&self) -> f64 {
        self.plain.unwrap_or(self.sign * self.ln.exp())
    }

    /// `v'`, finite whenever `v` is representable.
    fn deriv(&self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.value() * self.dlog
        }
    }

    fn nan() -> Self {
        Self::from_log(f64::NAN, f64::NAN, f64::NAN)
    }

    fn both(a: Self, b: Self) -> Option<(f64, f64)> {
        Some((a.plain?, b.plain?))
    }

    fn neg(self) -> Self {
        Self {
            sign: -self.sign,
            plain: self.plain.map(|v| -v),
            ..self
        }
    }

    fn mul(self, o: Self) -> Self {
        let dlog = self.dlog + o.dlog;
        Self::both(self, o)
            .and_then(|(x, y)| Self::from_plain(x * y, dlog))
            .unwrap_or_else(|| Self::from_log(self.sign * o.sign, self.ln + o.ln, dlog))
    }

    fn div(self, o: Self) -> Self {
        if o.sign == 0.0 {
            return Self::nan();
        }
        let dlog = self.dlog - o.dlog;
        Self::both(self, o)
            .and_then(|(x, y)| Self::from_plain(x / y, dlog))
            .unwrap_or_else(|| Self::from_log(self.sign * o.sign, self.ln - o.ln, dlog))
    }

    fn add(self, o: Self) -> Self {
        if self.sign == 0.0 {
            return o;
        }
        if o.sign == 0.0 {
            return self;
        }
        if let Some((x, y)) = Self::both(self, o) {
            let v = x + y;
            if v == 0.0 {
                return Self::constant(0.0).with_dlog(f64::NAN);
            }
            if let Some(d) = Self::from_plain(v, (self.deriv() + o.deriv()) / v) {
                return d;
            }
        }
        let (a, b) = if self.ln >= o.ln { (self, o) } else { (o, self) };
        // a + b = a·(1 + r), |r| ≤ 1.
        let r = a.sign * b.sign * (b.ln - a.ln).exp();
        let s = 1.0 + r;
        if s == 0.0 {
            return Self::from_log(0.0, f64::NEG_INFINITY, f64::NAN);
        }
        Self::from_log(a.sign * sign_of(s), a.ln + r.ln_1p().max(f64::MIN), (a.dlog + r * b.dlog) / s)
    }

    fn pow(self, e: Self) -> Self {
        let ev = e.value();
        if self.sign > 0.0 {
            let dlog = e.deriv() * self.ln + ev * self.dlog;
            return Self::both(self, e)
                .and_then(|(x, y)| Self::from_plain(x.powf(y), dlog))
                .unwrap_or_else(|| Self::from_log(1.0, ev * self.ln, dlog));
        }
        let integral = ev.fract() == 0.0 && e.dlog == 0.0;
        if self.sign == 0.0 && ev > 0.0 {
            return Self::constant(0.0);
        }
        if self.sign < 0.0 && integral {
            let odd = (ev % 2.0).abs() == 1.0;
            let dlog = ev * self.dlog;
            return Self::both(self, e)
                .and_then(|(x, y)| Self::from_plain(x.powf(y), dlog))
                .unwrap_or_else(|| Self::from_log(if odd { -1.0 } else { 1.0 }, ev * self.ln, dlog));
        }
        Self::nan()
    }

    fn exp(self) -> Self {
        let v = self.value();
        let dlog = self.deriv();
        Self::from_plain(v.exp(), dlog).unwrap_or_else(|| Self::from_log(1.0, v, dlog))
    }

    fn log(self) -> Self {
        if !(self.sign > 0.0) {
            return Self::nan();
        }
        Self::constant(self.ln).with_dlog(self.dlog / self.ln)
    }

    fn sqrt(self) -> Self {
        if self.sign < 0.0 || self.sign.is_nan() {
            return Self::nan();
        }
        let dlog = 0.5 * self.dlog;
        self.plain
            .and_then(|x| Self::from_plain(x.sqrt(), dlog))
            .unwrap_or_else(|| Self::from_log(self.sign, 0.5 * self.ln, dlog))
    }

    /// `erfc(x) = 2·Φ̄(√2·x)`.
    fn erfc(self) -> Self {
        let x = self.value();
        if x.is_nan() {
            return Self::nan();
        }
        let z = SQRT_2 * x;
        let ln = LN_2 + ln_normal_sf(z);
        let dlog = SQRT_2 * normal_sf_log_deriv(z) * self.deriv();
        Self::from_plain(ln.exp(), dlog).unwrap_or_else(|| Self::from_log(1.0, ln, dlog))
    }

    fn with_dlog(self, dlog: f64) -> Self {
        Self { dlog, ..self }
    }
}

fn sign_of(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else if x == 0.0 {
        0.0
    } else {
        f64::NAN
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser { src, pos: 0 };
        let e = p.sum()?;
        p.skip_ws();
        if p.pos < src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    fn dual(&self, t: f64) -> LogDual {
        match self {
            Expr::Num(c) => LogDual::constant(*c),
            Expr::Var => LogDual::constant(t).with_dlog(1.0 / t),
            Expr::Neg(a) => a.dual(t).neg(),
            Expr::Add(a, b) => a.dual(t).add(b.dual(t)),
            Expr::Sub(a, b) => a.dual(t).add(b.dual(t).neg()),
            Expr::Mul(a, b) => a.dual(t).mul(b.dual(t)),
            Expr::Div(a, b) => a.dual(t).div(b.dual(t)),
            Expr::Pow(a, b) => a.dual(t).pow(b.dual(t)),
            Expr::Call(f, a) => {
                let v = a.dual(t);
                match f {
                    Func::Exp => v.exp(),
                    Func::Log => v.log(),
                    Func::Sqrt => v.sqrt(),
                    Func::Erfc => v.erfc(),
                }
            }
        }
    }

    /// Plain value at `t`.
    pub fn eval(&self, t: f64) -> f64 {
        self.dual(t).value()
    }

    /// `ln f(t)`: `-∞` at zero, NaN where negative or undefined.
    pub fn ln_eval(&self, t: f64) -> f64 {
        let d = self.dual(t);
        if d.sign > 0.0 {
            d.ln
        } else if d.sign == 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::NAN
        }
    }

    /// `f'(t)/f(t)`.
    pub fn log_deriv(&self, t: f64) -> f64 {
        self.dual(t).dlog
    }

    /// The expression as a tail function on `[t0, ∞)`; fails if it is not
    /// positive at `t0`.
    pub fn into_tail_function(self, label: impl Into<String>, t0: f64) -> Result<TailFunction> {
        let e = Arc::new(self);
        let d = e.clone();
        let f = TailFunction::from_log(
            label,
            t0,
            move |t| e.ln_eval(t),
            Some(Arc::new(move |t| d.log_deriv(t))),
        );
        f.ln_eval(t0)?;
        Ok(f)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => write!(f, "{c}"),
            Expr::Var => write!(f, "t"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", format!("{func:?}").to_lowercase()),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::InvalidArgument(format!("{msg} at column {} of expression", self.pos + 1))
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.product()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.product()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        self.skip_ws();
        if self.eat('(') {
            let e = self.sum()?;
            if !self.eat(')') {
                return Err(self.error("expected ')'"));
            }
            return Ok(e);
        }
        let rest = &self.src[self.pos..];
        let c = rest.chars().next().ok_or_else(|| self.error("unexpected end"))?;
        if c.is_ascii_digit() || c == '.' {
            let mut end = rest
                .find(|ch: char| !(ch.is_ascii_digit() || ch == '.'))
                .unwrap_or(rest.len());
            // Exponent part, e.g. 1e-3; a bare `e` after digits is not an
            // exponent unless digits follow.
            let tail = &rest[end..];
            if let Some(after) = tail.strip_prefix(['e', 'E']) {
                let signed = after.strip_prefix(['+', '-']).unwrap_or(after);
                let digits = signed.find(|ch: char| !ch.is_ascii_digit()).unwrap_or(signed.len());
                if digits > 0 {
                    end += 1 + (after.len() - signed.len()) + digits;
                }
            }
            let v: f64 = rest[..end].parse().map_err(|_| self.error("bad number"))?;
            self.pos += end;
            return Ok(Expr::Num(v));
        }
        if c.is_ascii_alphabetic() {
            let end = rest.find(|ch: char| !ch.is_ascii_alphanumeric() && ch != '_').unwrap_or(rest.len());
            let name = &rest[..end];
            let start = self.pos;
            self.pos += end;
            let func = match name {
                "t" => return Ok(Expr::Var),
                "e" => return Ok(Expr::Num(std::f64::consts::E)),
                "pi" => return Ok(Expr::Num(std::f64::consts::PI)),
                "exp" => Func::Exp,
                "log" => Func::Log,
                "sqrt" => Func::Sqrt,
                "erfc" => Func::Erfc,
                _ => {
                    self.pos = start;
                    return Err(self.error(&format!("unknown name '{name}'")));
                }
            };
            if !self.eat('(') {
                return Err(self.error("expected '(' after function name"));
            }
            let arg = self.sum()?;
            if !self.eat(')') {
                return Err(self.error("expected ')'"));
            }
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        Err(self.error(&format!("unexpected character '{c}'")))
    }
}
