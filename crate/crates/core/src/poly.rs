//! Polynomial containers and the text parser for expressions such as
//! `x^2*y - 3*x + 1` or `1 + t - t^2`.

use crate::error::{Error, Result};
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Exact rational from an `f64` (every finite double is a dyadic rational).
pub fn rational(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite coefficient")
}

pub fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Parses a polynomial in the variables `vars`; the result maps exponent
/// vectors (one entry per variable) to exact coefficients.
pub fn parse(src: &str, vars: &[char]) -> Result<BTreeMap<Vec<u32>, BigRational>> {
    let mut p = Parser { chars: src.chars().collect(), at: 0, vars };
    let terms = p.expr()?;
    p.skip_ws();
    if p.at < p.chars.len() {
        return Err(p.err(format!("unexpected {:?}", p.chars[p.at])));
    }
    Ok(terms)
}

struct Parser<'a> {
    chars: Vec<char>,
    at: usize,
    vars: &'a [char],
}

impl Parser<'_> {
    fn err(&self, msg: String) -> Error {
        let before = &self.chars[..self.at.min(self.chars.len())];
        let line = 1 + before.iter().filter(|c| **c == '\n').count();
        let col = 1 + before.iter().rev().take_while(|c| **c != '\n').count();
        Error::Parse { line, col, msg }
    }

    fn skip_ws(&mut self) {
        while self.at < self.chars.len() && self.chars[self.at].is_whitespace() {
            self.at += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.at).copied()
    }

    fn expr(&mut self) -> Result<BTreeMap<Vec<u32>, BigRational>> {
        let mut out: BTreeMap<Vec<u32>, BigRational> = BTreeMap::new();
        let mut first = true;
        loop {
            let mut sign = BigRational::one();
            match self.peek() {
                Some('+') => self.at += 1,
                Some('-') => {
                    self.at += 1;
                    sign = -sign;
                }
                None if first => return Err(self.err("empty expression".into())),
                _ if first => {}
                None => break,
                Some(c) => return Err(self.err(format!("expected '+' or '-', found {c:?}"))),
            }
            first = false;
            let (coef, exps) = self.term()?;
            let e = out.entry(exps).or_insert_with(BigRational::zero);
            *e += sign * coef;
            if self.peek().is_none() {
                break;
            }
        }
        out.retain(|_, v| !v.is_zero());
        Ok(out)
    }

    fn term(&mut self) -> Result<(BigRational, Vec<u32>)> {
        let mut coef = BigRational::one();
        let mut exps = vec![0u32; self.vars.len()];
        loop {
            self.factor(&mut coef, &mut exps)?;
            if self.peek() == Some('*') {
                self.at += 1;
            } else {
                return Ok((coef, exps));
            }
        }
    }

    fn factor(&mut self, coef: &mut BigRational, exps: &mut [u32]) -> Result<()> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == '.' => {
                *coef *= self.number()?;
                Ok(())
            }
            Some(c) if self.vars.contains(&c) => {
                self.at += 1;
                let idx = self.vars.iter().position(|v| *v == c).unwrap();
                let mut power = 1;
                if self.peek() == Some('^') {
                    self.at += 1;
                    self.skip_ws();
                    let start = self.at;
                    while self.at < self.chars.len() && self.chars[self.at].is_ascii_digit() {
                        self.at += 1;
                    }
                    if start == self.at {
                        return Err(self.err("expected an integer exponent".into()));
                    }
                    let s: String = self.chars[start..self.at].iter().collect();
                    power = s.parse().map_err(|_| self.err(format!("exponent {s} too large")))?;
                }
                exps[idx] += power;
                Ok(())
            }
            Some(c) => Err(self.err(format!("unexpected {c:?}; expected a number or one of {:?}", self.vars))),
            None => Err(self.err("unexpected end of input".into())),
        }
    }

    fn number(&mut self) -> Result<BigRational> {
        let start = self.at;
        let mut digits = String::new();
        let mut frac_len = 0u32;
        let mut seen_dot = false;
        while let Some(&c) = self.chars.get(self.at) {
            if c.is_ascii_digit() {
                digits.push(c);
                if seen_dot {
                    frac_len += 1;
                }
            } else if c == '.' && !seen_dot {
                seen_dot = true;
            } else {
                break;
            }
            self.at += 1;
        }
        if digits.is_empty() {
            self.at = start;
            return Err(self.err("malformed number".into()));
        }
        let n: BigInt = digits.parse().expect("digits");
        let d = num::pow(BigInt::from(10), frac_len as usize);
        Ok(BigRational::new(n, d))
    }
}

/// Coefficients a_0..a_n of a polynomial in one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly1(pub Vec<f64>);

impl Poly1 {
    pub fn new(mut c: Vec<f64>) -> Self {
        while c.len() > 1 && *c.last().unwrap() == 0.0 {
            c.pop();
        }
        if c.is_empty() {
            c.push(0.0);
        }
        Poly1(c)
    }

    pub fn parse(src: &str, var: char) -> Result<Self> {
        let terms = parse(src, &[var])?;
        let deg = terms.keys().map(|e| e[0]).max().unwrap_or(0) as usize;
        let mut c = vec![0.0; deg + 1];
        for (e, v) in terms {
            c[e[0] as usize] = to_f64(&v);
        }
        Ok(Poly1::new(c))
    }

    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| *c == 0.0)
    }

    /// `k * self + c`.
    pub fn affine(&self, k: f64, c: f64) -> Poly1 {
        let mut v: Vec<f64> = self.0.iter().map(|a| a * k).collect();
        v[0] += c;
        Poly1::new(v)
    }

    pub fn scale(&self, k: f64) -> Poly1 {
        self.affine(k, 0.0)
    }

    pub fn add(&self, o: &Poly1) -> Poly1 {
        let n = self.0.len().max(o.0.len());
        Poly1::new(
            (0..n)
                .map(|i| self.0.get(i).copied().unwrap_or(0.0) + o.0.get(i).copied().unwrap_or(0.0))
                .collect(),
        )
    }

    /// Coefficients in powers of u = 2t − 1, computed exactly.
    pub fn to_centered(&self) -> Vec<f64> {
        let exact: Vec<BigRational> = self.0.iter().map(|a| rational(*a)).collect();
        centered_exact(&exact).iter().map(to_f64).collect()
    }
}

/// Coefficients in u = 2t − 1 of the polynomial with coefficients `c` in t.
pub fn centered_exact(c: &[BigRational]) -> Vec<BigRational> {
    // t = (u + 1) / 2, so t^k = sum_j C(k, j) u^j / 2^k.
    let mut out = vec![BigRational::zero(); c.len()];
    for (k, a) in c.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        let a = a / BigRational::from_integer(num::pow(BigInt::from(2), k));
        let mut binom = BigInt::one();
        for j in 0..=k {
            out[j] += &a * BigRational::from_integer(binom.clone());
            binom = binom * BigInt::from(k - j) / BigInt::from(j + 1);
        }
    }
    out
}

/// A plane curve with polynomial coordinates on t ∈ [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyCurve {
    pub x: Poly1,
    pub y: Poly1,
}

impl PolyCurve {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        PolyCurve { x: Poly1::new(x), y: Poly1::new(y) }
    }

    pub fn parse(x: &str, y: &str) -> Result<Self> {
        Ok(PolyCurve { x: Poly1::parse(x, 't')?, y: Poly1::parse(y, 't')? })
    }

    pub fn eval(&self, t: f64) -> crate::geom::Vec2 {
        crate::geom::Vec2::new(self.x.eval(t), self.y.eval(t))
    }
}

/// Per-coordinate numerator/denominator pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalCurve {
    pub x_num: Poly1,
    pub x_den: Poly1,
    pub y_num: Poly1,
    pub y_den: Poly1,
}

impl RationalCurve {
    pub fn eval(&self, t: f64) -> crate::geom::Vec2 {
        crate::geom::Vec2::new(
            self.x_num.eval(t) / self.x_den.eval(t),
            self.y_num.eval(t) / self.y_den.eval(t),
        )
    }
}

/// f(x, y) = sum a_ij x^i y^j with exact coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BivariatePoly {
    pub terms: BTreeMap<(u32, u32), BigRational>,
}

impl BivariatePoly {
    pub fn parse(src: &str) -> Result<Self> {
        let terms = parse(src, &['x', 'y'])?;
        Ok(BivariatePoly {
            terms: terms.into_iter().map(|(e, v)| ((e[0], e[1]), v)).collect(),
        })
    }

    pub fn from_f64(terms: &[((u32, u32), f64)]) -> Self {
        let mut p = BivariatePoly::default();
        for (k, v) in terms {
            p.add_term(*k, rational(*v));
        }
        p
    }

    pub fn add_term(&mut self, key: (u32, u32), v: BigRational) {
        let e = self.terms.entry(key).or_insert_with(BigRational::zero);
        *e += v;
        if e.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|(i, j)| i + j).max().unwrap_or(0)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|((i, j), c)| to_f64(c) * x.powi(*i as i32) * y.powi(*j as i32))
            .sum()
    }

    pub fn add(&self, o: &BivariatePoly) -> BivariatePoly {
        let mut out = self.clone();
        for (k, v) in &o.terms {
            out.add_term(*k, v.clone());
        }
        out
    }

    /// g(X, Y) = f(X + dx, Y + dy), exactly.
    pub fn translate(&self, dx: &BigRational, dy: &BigRational) -> BivariatePoly {
        let mut out = BivariatePoly::default();
        for ((i, j), c) in &self.terms {
            let xs = binomial_shift(*i, dx);
            let ys = binomial_shift(*j, dy);
            for (p, cx) in xs.iter().enumerate() {
                for (q, cy) in ys.iter().enumerate() {
                    out.add_term((p as u32, q as u32), c * cx * cy);
                }
            }
        }
        out
    }

    /// Gradient (∂f/∂x, ∂f/∂y) evaluated at (x, y).
    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        let mut gx = 0.0;
        let mut gy = 0.0;
        for ((i, j), c) in &self.terms {
            let c = to_f64(c);
            if *i > 0 {
                gx += c * *i as f64 * x.powi(*i as i32 - 1) * y.powi(*j as i32);
            }
            if *j > 0 {
                gy += c * *j as f64 * x.powi(*i as i32) * y.powi(*j as i32 - 1);
            }
        }
        (gx, gy)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|k| *k == (0, 0))
    }
}

/// Coefficients of (X + d)^n in powers of X.
fn binomial_shift(n: u32, d: &BigRational) -> Vec<BigRational> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut binom = BigInt::one();
    for k in 0..=n {
        // C(n, k) d^(n-k) X^k
        out.push(BigRational::from_integer(binom.clone()) * num::pow(d.clone(), (n - k) as usize));
        binom = binom * BigInt::from(n - k) / BigInt::from(k + 1);
    }
    out
}

impl std::fmt::Display for BivariatePoly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, ((i, j), c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            if n > 0 {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            } else if neg {
                write!(f, "-")?;
            }
            write!(f, "{}", to_f64(&c.abs()))?;
            if *i > 0 {
                write!(f, "*x^{i}")?;
            }
            if *j > 0 {
                write!(f, "*y^{j}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_bivariate() {
        let p = BivariatePoly::parse("x^2*y - 3*x + 1").unwrap();
        assert_eq!(p.terms.len(), 3);
        assert_eq!(p.eval(2.0, 3.0), 12.0 - 6.0 + 1.0);
        assert_eq!(p.degree(), 3);
    }

    #[test]
    fn decimals_are_exact() {
        let p = BivariatePoly::parse("0.1*x + 0.2*x").unwrap();
        assert_eq!(p.terms[&(1, 0)], BigRational::new(3.into(), 10.into()));
    }

    #[test]
    fn cancellation_removes_terms() {
        let p = BivariatePoly::parse("x - x + y").unwrap();
        assert_eq!(p.terms.len(), 1);
    }

    #[test]
    fn reports_position() {
        match BivariatePoly::parse("x^2 +\n 3*z") {
            Err(Error::Parse { line, col, .. }) => assert_eq!((line, col), (2, 4)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(BivariatePoly::parse(""), Err(Error::Parse { .. })));
        assert!(matches!(BivariatePoly::parse("x^"), Err(Error::Parse { .. })));
        assert!(matches!(BivariatePoly::parse("2 x"), Err(Error::Parse { .. })));
    }

    #[test]
    fn univariate() {
        let p = Poly1::parse("1+t-t^2", 't').unwrap();
        assert_eq!(p.0, vec![1.0, 1.0, -1.0]);
        assert_eq!(p.eval(0.5), 1.25);
    }

    #[test]
    fn centered_basis_agrees() {
        let p = Poly1::new(vec![0.3, -1.0, 2.0, 0.5]);
        let c = Poly1::new(p.to_centered());
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            assert!((p.eval(t) - c.eval(2.0 * t - 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn translate_matches_eval() {
        let p = BivariatePoly::parse("x^2*y - 3*x*y^2 + 1").unwrap();
        let (dx, dy) = (0.25, -1.5);
        let g = p.translate(&rational(dx), &rational(dy));
        for (x, y) in [(0.0, 0.0), (1.0, 2.0), (-0.3, 0.7)] {
            assert!((g.eval(x, y) - p.eval(x + dx, y + dy)).abs() < 1e-12);
        }
    }
}
