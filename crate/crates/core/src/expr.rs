//! A small expression language for reproducible test signals.
//!
//! Grammar (usual precedence, `^` right-associative and binding tighter than unary minus):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Variables: `t`, `x1`..`x3` (`x` aliases `x1`), `rx` = |x|. Constants: `pi`.
//! Functions: `sin cos exp sqrt abs tanh step` (step(s) = 1 for s ≥ 0),
//! `gauss(c, w)` = exp(-((t-c)/w)²), `gauss(e, c, w)` = exp(-((e-c)/w)²),
//! `bump(e, r)` = exp(1 - 1/(1-(e/r)²)) for |e| < r and 0 otherwise,
//! `noise(seed, band)`: unit-RMS band-limited random field whose modes with
//! `|k_i| > band·n_i/2` on any axis (and all Nyquist modes) are zero.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::spectrum::{fft_all, mode_of_bin, to_complex};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
    Noise { seed: u64, band: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    T,
    X(usize),
    Radius,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Tanh,
    Step,
    Gauss,
    Bump,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Self::Sin,
            "cos" => Self::Cos,
            "exp" => Self::Exp,
            "sqrt" => Self::Sqrt,
            "abs" => Self::Abs,
            "tanh" => Self::Tanh,
            "step" => Self::Step,
            "gauss" => Self::Gauss,
            "bump" => Self::Bump,
            _ => return None,
        })
    }

    fn arity_ok(self, n: usize) -> bool {
        match self {
            Self::Gauss => n == 2 || n == 3,
            Self::Bump => n == 2,
            _ => n == 1,
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            pos: self.pos,
            msg: msg.into(),
        })
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
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => Op::Add,
                Some(b'-') => Op::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => Op::Mul,
                Some(b'/') => Op::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            return Ok(Expr::Bin(Op::Pow, Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            if self.pos < s.len() && s[self.pos].is_ascii_digit() {
                while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) => Ok(Expr::Num(v)),
            Err(_) => {
                self.pos = start;
                self.err(format!("malformed number '{text}'"))
            }
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            None => self.err("unexpected end of expression"),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return self.err("expected ')'");
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                self.ident(name, start)
            }
            Some(c) => self.err(format!("unexpected character '{}'", c as char)),
        }
    }

    fn args(&mut self) -> Result<Vec<Expr>> {
        let mut args = vec![self.expr()?];
        while self.eat(b',') {
            args.push(self.expr()?);
        }
        if !self.eat(b')') {
            return self.err("expected ')' or ','");
        }
        Ok(args)
    }

    fn ident(&mut self, name: &str, start: usize) -> Result<Expr> {
        let var = match name {
            "t" => Some(Var::T),
            "x" | "x1" => Some(Var::X(0)),
            "x2" => Some(Var::X(1)),
            "x3" => Some(Var::X(2)),
            "rx" => Some(Var::Radius),
            "pi" => return Ok(Expr::Num(std::f64::consts::PI)),
            _ => None,
        };
        if let Some(v) = var {
            return Ok(Expr::Var(v));
        }
        if !self.eat(b'(') {
            self.pos = start;
            return self.err(format!("unknown identifier '{name}'"));
        }
        if name == "noise" {
            let args = self.args()?;
            let [Expr::Num(seed), Expr::Num(band)] = args.as_slice() else {
                self.pos = start;
                return self.err("noise(seed, band) takes two numeric literals");
            };
            if *seed < 0.0 || seed.fract() != 0.0 || !(*band > 0.0 && *band <= 1.0) {
                self.pos = start;
                return self.err("noise needs an integer seed >= 0 and band in (0, 1]");
            }
            return Ok(Expr::Noise {
                seed: *seed as u64,
                band: *band,
            });
        }
        let Some(func) = Func::from_name(name) else {
            self.pos = start;
            return self.err(format!("unknown function '{name}'"));
        };
        let args = self.args()?;
        if !func.arity_ok(args.len()) {
            self.pos = start;
            return self.err(format!("wrong number of arguments to '{name}'"));
        }
        Ok(Expr::Call(func, args))
    }
}

pub fn parse(src: &str) -> Result<Expr> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    if p.peek().is_some() {
        return p.err("trailing input");
    }
    Ok(e)
}

/// Unit-RMS band-limited noise, deterministic in `seed`.
pub fn noise_field(grid: &Grid, seed: u64, band: f64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..grid.len())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let shape = grid.shape();
    let mut buf = to_complex(&raw);
    fft_all(&mut buf, &shape, false);
    let keep: Vec<Vec<bool>> = shape
        .iter()
        .map(|&n| {
            (0..n)
                .map(|bin| {
                    let k = mode_of_bin(bin, n);
                    k != -(n as i64) / 2 && (k.unsigned_abs() as f64) <= band * n as f64 / 2.0
                })
                .collect()
        })
        .collect();
    let mut idx = vec![0usize; shape.len()];
    for v in buf.iter_mut() {
        if !idx.iter().zip(&keep).all(|(&i, k)| k[i]) {
            *v = Complex64::default();
        }
        for a in (0..shape.len()).rev() {
            idx[a] += 1;
            if idx[a] < shape[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    fft_all(&mut buf, &shape, true);
    let data: Vec<f64> = buf.iter().map(|v| v.re).collect();
    let rms = (data.iter().map(|v| v * v).sum::<f64>() / data.len() as f64).sqrt();
    let scale = if rms > 0.0 { 1.0 / rms } else { 0.0 };
    Field::from_vec_unchecked(grid, data.into_iter().map(|v| v * scale).collect())
}

fn eval(e: &Expr, grid: &Grid) -> Result<Vec<f64>> {
    let n = grid.len();
    Ok(match e {
        Expr::Num(v) => vec![*v; n],
        Expr::Var(v) => (0..n)
            .map(|i| {
                let p = grid.point(i);
                match v {
                    Var::T => p.t,
                    Var::X(a) => p.x[*a],
                    Var::Radius => p.x.iter().map(|c| c * c).sum::<f64>().sqrt(),
                }
            })
            .collect(),
        Expr::Neg(a) => eval(a, grid)?.into_iter().map(|v| -v).collect(),
        Expr::Bin(op, a, b) => {
            let (a, b) = (eval(a, grid)?, eval(b, grid)?);
            a.into_iter()
                .zip(b)
                .map(|(x, y)| match op {
                    Op::Add => x + y,
                    Op::Sub => x - y,
                    Op::Mul => x * y,
                    Op::Div => x / y,
                    Op::Pow => x.powf(y),
                })
                .collect()
        }
        Expr::Call(f, args) => {
            let vals = args
                .iter()
                .map(|a| eval(a, grid))
                .collect::<Result<Vec<_>>>()?;
            let times = matches!((f, vals.len()), (Func::Gauss, 2)).then(|| {
                (0..n).map(|i| grid.point(i).t).collect::<Vec<_>>()
            });
            (0..n)
                .map(|i| {
                    let a = vals[0][i];
                    match f {
                        Func::Sin => a.sin(),
                        Func::Cos => a.cos(),
                        Func::Exp => a.exp(),
                        Func::Sqrt => a.sqrt(),
                        Func::Abs => a.abs(),
                        Func::Tanh => a.tanh(),
                        Func::Step => {
                            if a >= 0.0 {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        Func::Gauss => {
                            let (e, c, w) = match &times {
                                Some(ts) => (ts[i], a, vals[1][i]),
                                None => (a, vals[1][i], vals[2][i]),
                            };
                            (-((e - c) / w).powi(2)).exp()
                        }
                        Func::Bump => {
                            let s = a / vals[1][i];
                            if s.abs() < 1.0 {
                                (1.0 - 1.0 / (1.0 - s * s)).exp()
                            } else {
                                0.0
                            }
                        }
                    }
                })
                .collect()
        }
        Expr::Noise { seed, band } => noise_field(grid, *seed, *band).into_data(),
    })
}

/// Samples `expr` on every grid point.
pub fn field_from_expression(grid: &Grid, expr: &str) -> Result<Field> {
    let e = parse(expr)?;
    check_vars(&e, grid.d())?;
    Field::from_vec(grid, eval(&e, grid)?)
}

fn check_vars(e: &Expr, d: usize) -> Result<()> {
    match e {
        Expr::Var(Var::X(a)) if *a >= d => Err(Error::Parse {
            pos: 0,
            msg: format!("variable x{} not available for d = {d}", a + 1),
        }),
        Expr::Neg(a) => check_vars(a, d),
        Expr::Bin(_, a, b) => check_vars(a, d).and(check_vars(b, d)),
        Expr::Call(_, args) => args.iter().try_for_each(|a| check_vars(a, d)),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::spectrum::transform_time;

    #[test]
    fn examples() {
        let g = Grid::new(1, 32, &[8], 2.0 * PI, &[1.0]).unwrap();
        let u = field_from_expression(&g, "cos(t)").unwrap();
        for i in 0..g.len() {
            assert_eq!(u.data()[i], g.point(i).t.cos());
        }
        assert!(field_from_expression(&g, "0").unwrap().is_zero());
        let a = field_from_expression(&g, "noise(7, 0.25)").unwrap();
        let b = field_from_expression(&g, "noise(7, 0.25)").unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn precedence_and_literals() {
        let g = Grid::new(1, 8, &[8], 1.0, &[1.0]).unwrap();
        let v = |s: &str| field_from_expression(&g, s).unwrap().data()[0];
        assert_eq!(v("1+2*3"), 7.0);
        assert_eq!(v("-2^2"), -4.0);
        assert_eq!(v("2^3^2"), 512.0);
        assert_eq!(v("(1+2)*3"), 9.0);
        assert_eq!(v("1.5e2 / 3"), 50.0);
        assert_eq!(v("step(0) + step(-1)"), 1.0);
        assert!((v("pi") - PI).abs() < 1e-15);
    }

    #[test]
    fn malformed_expressions() {
        let g = Grid::new(1, 8, &[8], 1.0, &[1.0]).unwrap();
        for bad in ["", "1+", "sin(", "foo(1)", "y", "1 2", "gauss(1)", "noise(t, 1)", "x2"] {
            assert!(
                matches!(field_from_expression(&g, bad), Err(Error::Parse { .. })),
                "{bad}"
            );
        }
    }

    #[test]
    fn gauss_and_bump() {
        let g = Grid::new(2, 8, &[8, 8], 4.0, &[2.0, 2.0]).unwrap();
        let gt = field_from_expression(&g, "gauss(0, 1)").unwrap();
        let gx = field_from_expression(&g, "gauss(x2, 0.5, 2)").unwrap();
        let b = field_from_expression(&g, "bump(rx, 0.5)").unwrap();
        for i in 0..g.len() {
            let p = g.point(i);
            assert!((gt.data()[i] - (-p.t * p.t).exp()).abs() < 1e-15);
            assert!((gx.data()[i] - (-((p.x[1] - 0.5) / 2.0).powi(2)).exp()).abs() < 1e-15);
            let r = (p.x[0].powi(2) + p.x[1].powi(2)).sqrt();
            if r >= 0.5 {
                assert_eq!(b.data()[i], 0.0);
            }
        }
        assert_eq!(b.max_abs(), 1.0);
    }

    #[test]
    fn noise_is_band_limited_and_normalized() {
        let g = Grid::new(1, 64, &[16], 1.0, &[1.0]).unwrap();
        let u = noise_field(&g, 3, 0.25);
        let rms = (u.data().iter().map(|v| v * v).sum::<f64>() / g.len() as f64).sqrt();
        assert!((rms - 1.0).abs() < 1e-12);
        let sp = transform_time(&u);
        for k in -32..32i64 {
            if k.abs() > 8 {
                for s in 0..16 {
                    assert!(sp.coeff(k, s).norm() < 1e-12);
                }
            }
        }
        assert_ne!(noise_field(&g, 4, 0.25).data(), u.data());
    }
}
