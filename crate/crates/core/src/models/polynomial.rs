//! Sparse multivariate polynomials with exact rational coefficients.
//!
//! Grammar (whitespace is ignored):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('+' | '-') unary | power
//! power  := atom ('^' uint)?
//! atom   := number | var | '(' expr ')'
//! number := digits ('.' digits?)? (('e' | 'E') ('+' | '-')? digits)?
//! var    := 'x' | 'x' uint | 'u'
//! ```
//!
//! `x` and `x1` both name the first coordinate and `u` is the variable of a
//! univariate envelope. Division is only allowed by a nonzero constant.
//! Decimal literals are converted exactly, so `0.1` is `1/10`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Exponent vector with trailing zeros trimmed.
type Monomial = Vec<u32>;

fn trim(mut m: Monomial) -> Monomial {
    while m.last() == Some(&0) {
        m.pop();
    }
    m
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = Self::zero();
        p.add_term(Vec::new(), c);
        p
    }

    /// The coordinate `x_{index+1}`.
    pub fn variable(index: usize) -> Self {
        let mut m = vec![0; index + 1];
        m[index] = 1;
        let mut p = Self::zero();
        p.add_term(m, BigRational::one());
        p
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let m = trim(m);
        let entry = self.terms.entry(m.clone()).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser { src: text, pos: 0 };
        let out = p.expr()?;
        p.skip_ws();
        if p.pos != text.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(out)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Constant value when the polynomial has no variables.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&Vec::new()).cloned(),
            _ => None,
        }
    }

    /// One more than the largest variable index that occurs.
    pub fn num_vars(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.iter().sum()).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &BigRational)> {
        self.terms.iter().map(|(m, c)| (m.as_slice(), c))
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        let mut out = Self::zero();
        for (m, a) in &self.terms {
            out.add_term(m.clone(), a * c);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-BigRational::one()))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let n = ma.len().max(mb.len());
                let m = (0..n)
                    .map(|i| ma.get(i).copied().unwrap_or(0) + mb.get(i).copied().unwrap_or(0))
                    .collect();
                out.add_term(m, ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut out = Self::constant(BigRational::one());
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Partial derivative with respect to variable `var` (0-based).
    pub fn derivative(&self, var: usize) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let e = m.get(var).copied().unwrap_or(0);
            if e == 0 {
                continue;
            }
            let mut dm = m.clone();
            dm[var] = e - 1;
            out.add_term(dm, c * BigRational::from_integer(BigInt::from(e)));
        }
        out
    }

    /// Exact value at a rational point.
    pub fn eval_exact(&self, x: &[BigRational]) -> BigRational {
        let mut acc = BigRational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, &e) in m.iter().enumerate() {
                let xi = x.get(i).cloned().unwrap_or_else(BigRational::zero);
                for _ in 0..e {
                    t *= &xi;
                }
            }
            acc += t;
        }
        acc
    }

    /// Floating-point form for `dim` variables; fails if a variable beyond
    /// `dim` occurs.
    pub fn compile<T: Scalar>(&self, dim: usize) -> Result<CompiledPolynomial<T>> {
        if self.num_vars() > dim {
            return Err(Error::Config(format!(
                "polynomial `{self}` uses x{} but the state has dimension {dim}",
                self.num_vars()
            )));
        }
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| {
                let v = c
                    .to_f64()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Config(format!("coefficient {c} is not representable")))?;
                Ok((T::lit(v), m.clone()))
            })
            .collect::<Result<_>>()?;
        Ok(CompiledPolynomial { terms })
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            match (k, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let vars: Vec<String> = m
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| if e == 1 { format!("x{}", i + 1) } else { format!("x{}^{e}", i + 1) })
                .collect();
            if vars.is_empty() {
                write!(f, "{a}")?;
            } else if a.is_one() {
                write!(f, "{}", vars.join("*"))?;
            } else {
                write!(f, "{a}*{}", vars.join("*"))?;
            }
        }
        Ok(())
    }
}

/// A polynomial with coefficients rounded to `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledPolynomial<T> {
    terms: Vec<(T, Monomial)>,
}

impl<T: Scalar> CompiledPolynomial<T> {
    pub fn eval(&self, x: &[T]) -> T {
        let mut acc = T::zero();
        for (c, m) in &self.terms {
            let mut t = *c;
            for (i, &e) in m.iter().enumerate() {
                if e > 0 {
                    t = t * x[i].powi(e as i32);
                }
            }
            acc = acc + t;
        }
        acc
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Config(format!("polynomial `{}`: {msg} at offset {}", self.src, self.pos))
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek_raw() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn peek_raw(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.peek_raw()
    }

    fn digits(&mut self) -> &str {
        let start = self.pos;
        while matches!(self.peek_raw(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn expr(&mut self) -> Result<Polynomial> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some('+') => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some('-') => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    acc = acc.mul(&self.unary()?);
                }
                Some('/') => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    match rhs.as_constant() {
                        Some(c) if !c.is_zero() => acc = acc.scale(&c.recip()),
                        Some(_) => return Err(self.error("division by zero")),
                        None => return Err(self.error("division by a non-constant")),
                    }
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Polynomial> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(self.unary()?.scale(&-BigRational::one()))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Polynomial> {
        let base = self.atom()?;
        if self.peek() != Some('^') {
            return Ok(base);
        }
        self.pos += 1;
        self.skip_ws();
        let e = self.digits().to_string();
        if e.is_empty() || matches!(self.peek_raw(), Some('.') | Some('e') | Some('E')) {
            return Err(self.error("malformed exponent (expected a nonnegative integer)"));
        }
        let e: u32 = e
            .parse()
            .ok()
            .filter(|&e| e <= 64)
            .ok_or_else(|| self.error("exponent too large"))?;
        Ok(base.pow(e))
    }

    fn atom(&mut self) -> Result<Polynomial> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some('x') => {
                self.pos += 1;
                let idx = self.digits();
                let k: usize = if idx.is_empty() {
                    1
                } else {
                    idx.parse().map_err(|_| self.error("bad variable index"))?
                };
                if k == 0 || k > 64 {
                    return Err(self.error("variable index must be in 1..=64"));
                }
                Ok(Polynomial::variable(k - 1))
            }
            Some('u') => {
                self.pos += 1;
                Ok(Polynomial::variable(0))
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) => Err(self.error(&format!("unexpected `{c}`"))),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Polynomial> {
        let int = self.digits().to_string();
        let mut frac = String::new();
        if self.peek_raw() == Some('.') {
            self.pos += 1;
            frac = self.digits().to_string();
        }
        if int.is_empty() && frac.is_empty() {
            return Err(self.error("malformed number"));
        }
        let mut exp: i64 = 0;
        if matches!(self.peek_raw(), Some('e') | Some('E')) {
            self.pos += 1;
            let neg = match self.peek_raw() {
                Some('-') => {
                    self.pos += 1;
                    true
                }
                Some('+') => {
                    self.pos += 1;
                    false
                }
                _ => false,
            };
            let d = self.digits();
            let v: i64 = d
                .parse()
                .ok()
                .filter(|&v| v <= 400)
                .ok_or_else(|| self.error("malformed number exponent"))?;
            exp = if neg { -v } else { v };
        }
        let mantissa: BigInt = format!("{int}{frac}").parse().unwrap_or_else(|_| BigInt::zero());
        let exp = exp - frac.len() as i64;
        let ten = BigInt::from(10);
        let value = if exp >= 0 {
            BigRational::from_integer(mantissa * num_traits::pow(ten, exp as usize))
        } else {
            BigRational::new(mantissa, num_traits::pow(ten, (-exp) as usize))
        };
        Ok(Polynomial::constant(value))
    }
}

/// Parses a constant expression such as `1/8` or `0.25` to an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    Polynomial::parse(text)?
        .as_constant()
        .ok_or_else(|| Error::Config(format!("`{text}` is not a constant")))
}
