//! Truncated polynomials in the blow-up parameter ε with exact rational
//! coefficients, compared in the ε → 0⁺ (lexicographic) order.

mod roots;

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use roots::{positive_root_bound, Interval, RootBound};

/// Arbitrary-precision rational, always kept in lowest terms with a
/// positive denominator.
pub type Rational = num_rational::BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EpsError {
    #[error("polynomial is identically zero")]
    ZeroPolynomial,
    #[error("precision must be a positive rational, got {0}")]
    NonPositivePrecision(Rational),
    #[error("cannot parse rational from {0:?}")]
    BadRational(String),
}

/// Builds `num / den`. Panics if `den == 0`.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `"p/q"`, `"p"` or a decimal literal such as `"0.125"`.
pub fn parse_rational(s: &str) -> Result<Rational, EpsError> {
    let t = s.trim();
    let bad = || EpsError::BadRational(s.to_string());
    if let Some((whole, frac)) = t.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = whole.starts_with('-');
        let whole_digits = whole.trim_start_matches(['-', '+']);
        if !whole_digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{whole_digits}{frac}");
        let numer: BigInt = digits.parse().map_err(|_| bad())?;
        let denom = num_traits::pow(BigInt::from(10), frac.len());
        let r = Rational::new(numer, denom);
        return Ok(if negative { -r } else { r });
    }
    let r: Rational = t.parse().map_err(|_| bad())?;
    Ok(r)
}

/// Canonical text form: `"p"` for integers, `"p/q"` otherwise.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // numerator or denominator out of f64 range; fall back to a ratio of
        // scaled values
        let n = r.numer().to_f64().unwrap_or(f64::INFINITY);
        let d = r.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn of(r: &Rational) -> Sign {
        match r.cmp(&Rational::zero()) {
            Ordering::Less => Sign::Negative,
            Ordering::Equal => Sign::Zero,
            Ordering::Greater => Sign::Positive,
        }
    }

    pub fn of_f64(x: f64) -> Sign {
        if x > 0.0 {
            Sign::Positive
        } else if x < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }

    pub fn as_i32(self) -> i32 {
        match self {
            Sign::Negative => -1,
            Sign::Zero => 0,
            Sign::Positive => 1,
        }
    }
}

impl Neg for Sign {
    type Output = Sign;
    fn neg(self) -> Sign {
        match self {
            Sign::Negative => Sign::Positive,
            Sign::Zero => Sign::Zero,
            Sign::Positive => Sign::Negative,
        }
    }
}

impl Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        match self.as_i32() * rhs.as_i32() {
            1 => Sign::Positive,
            -1 => Sign::Negative,
            _ => Sign::Zero,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Negative => "negative",
            Sign::Zero => "zero",
            Sign::Positive => "positive",
        })
    }
}

/// Polynomial in ε truncated at a fixed maximal degree. `coeffs[k]` is the
/// coefficient of ε^k and the vector always has `max_degree + 1` entries.
///
/// Binary operations on polynomials of different truncation degree pad the
/// shorter one with zeros; within a single instance all polynomials share the
/// degree `n − 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EpsPoly {
    coeffs: Vec<Rational>,
}

impl EpsPoly {
    pub fn zero(max_degree: usize) -> Self {
        EpsPoly {
            coeffs: vec![Rational::zero(); max_degree + 1],
        }
    }

    /// Panics on an empty coefficient list.
    pub fn new(coeffs: Vec<Rational>) -> Self {
        assert!(!coeffs.is_empty(), "EpsPoly needs at least one coefficient");
        EpsPoly { coeffs }
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| int(c)).collect())
    }

    pub fn constant(c: Rational, max_degree: usize) -> Self {
        let mut p = Self::zero(max_degree);
        p.coeffs[0] = c;
        p
    }

    /// `c·ε^k` inside the truncation `max_degree`. Panics if `k > max_degree`.
    pub fn monomial(c: Rational, k: usize, max_degree: usize) -> Self {
        assert!(k <= max_degree, "monomial degree {k} exceeds truncation {max_degree}");
        let mut p = Self::zero(max_degree);
        p.coeffs[k] = c;
        p
    }

    pub fn max_degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Rational {
        self.coeffs.get(k).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn set_coeff(&mut self, k: usize, c: Rational) {
        if k >= self.coeffs.len() {
            self.coeffs.resize(k + 1, Rational::zero());
        }
        self.coeffs[k] = c;
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    /// Index of the first nonzero coefficient.
    pub fn leading_order(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    /// Sign of the first nonzero coefficient: the sign of `p(ε)` for all
    /// sufficiently small `ε > 0`.
    pub fn lex_sign(&self) -> Sign {
        self.coeffs.iter().find(|c| !c.is_zero()).map_or(Sign::Zero, Sign::of)
    }

    /// Lexicographic comparison as ε → 0⁺.
    pub fn lex_cmp(&self, other: &EpsPoly) -> Ordering {
        match (self - other).lex_sign() {
            Sign::Negative => Ordering::Less,
            Sign::Zero => Ordering::Equal,
            Sign::Positive => Ordering::Greater,
        }
    }

    pub fn eval(&self, eps: &Rational) -> Rational {
        self.coeffs.iter().rev().fold(Rational::zero(), |acc, c| acc * eps + c)
    }

    pub fn eval_f64(&self, eps: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * eps + rational_to_f64(c))
    }

    pub fn scale(&self, c: &Rational) -> EpsPoly {
        EpsPoly {
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    /// Panics if `c` is zero.
    pub fn div_scalar(&self, c: &Rational) -> EpsPoly {
        assert!(!c.is_zero(), "division of EpsPoly by zero");
        self.scale(&c.recip())
    }

    /// Copy with the truncation degree changed (extra coefficients dropped,
    /// missing ones zero).
    pub fn truncated(&self, max_degree: usize) -> EpsPoly {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(max_degree + 1, Rational::zero());
        EpsPoly { coeffs }
    }

    /// `Σ weights[i]·polys[i]`.
    pub fn linear_combination<'a, I>(terms: I, max_degree: usize) -> EpsPoly
    where
        I: IntoIterator<Item = (&'a Rational, &'a EpsPoly)>,
    {
        terms
            .into_iter()
            .fold(EpsPoly::zero(max_degree), |acc, (w, p)| &acc + &p.scale(w))
    }

    pub fn positive_root_bound(&self, precision: &Rational) -> Result<RootBound, EpsError> {
        positive_root_bound(self, precision)
    }

    fn zip_with(&self, other: &EpsPoly, f: impl Fn(&Rational, &Rational) -> Rational) -> EpsPoly {
        let len = self.coeffs.len().max(other.coeffs.len());
        let zero = Rational::zero();
        let coeffs = (0..len)
            .map(|k| {
                f(
                    self.coeffs.get(k).unwrap_or(&zero),
                    other.coeffs.get(k).unwrap_or(&zero),
                )
            })
            .collect();
        EpsPoly { coeffs }
    }
}

impl Add for &EpsPoly {
    type Output = EpsPoly;
    fn add(self, rhs: &EpsPoly) -> EpsPoly {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &EpsPoly {
    type Output = EpsPoly;
    fn sub(self, rhs: &EpsPoly) -> EpsPoly {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &EpsPoly {
    type Output = EpsPoly;
    fn neg(self) -> EpsPoly {
        EpsPoly {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

impl Add for EpsPoly {
    type Output = EpsPoly;
    fn add(self, rhs: EpsPoly) -> EpsPoly {
        &self + &rhs
    }
}

impl Sub for EpsPoly {
    type Output = EpsPoly;
    fn sub(self, rhs: EpsPoly) -> EpsPoly {
        &self - &rhs
    }
}

impl Neg for EpsPoly {
    type Output = EpsPoly;
    fn neg(self) -> EpsPoly {
        -&self
    }
}

impl fmt::Display for EpsPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (k, c) in self.coeffs.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            f.write_str(&format_rational(c))?;
        }
        f.write_str("]")
    }
}

/// Serialized as a list of canonical rational strings.
impl Serialize for EpsPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let strs: Vec<String> = self.coeffs.iter().map(format_rational).collect();
        strs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for EpsPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw: Vec<crate::doc::RationalRepr> = Vec::deserialize(d)?;
        if raw.is_empty() {
            return Err(serde::de::Error::custom("empty coefficient list"));
        }
        Ok(EpsPoly::new(raw.into_iter().map(|r| r.0).collect()))
    }
}
