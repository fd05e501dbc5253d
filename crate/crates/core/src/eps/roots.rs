//! Isolation of the smallest root of an ε-polynomial in (0, 1].
//!
//! Works on the squarefree part with exact rationals: Descartes sign counts
//! on Möbius-transformed subintervals locate the leftmost root, then plain
//! bisection shrinks the bracket.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::{EpsError, EpsPoly, Rational, Sign};

/// Closed interval `[lo, hi]` of rationals.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "crate::doc::rational_str")]
    pub lo: Rational,
    #[serde(with = "crate::doc::rational_str")]
    pub hi: Rational,
}

impl Interval {
    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RootBound {
    /// The smallest root in (0, 1] lies in the interval; `p` has no root in
    /// `(0, lo)` so its sign there is the lexicographic sign.
    Root(Interval),
    NoPositiveRoot,
}

impl RootBound {
    pub fn interval(&self) -> Option<&Interval> {
        match self {
            RootBound::Root(i) => Some(i),
            RootBound::NoPositiveRoot => None,
        }
    }
}

pub fn positive_root_bound(p: &EpsPoly, precision: &Rational) -> Result<RootBound, EpsError> {
    if precision <= &Rational::zero() {
        return Err(EpsError::NonPositivePrecision(precision.clone()));
    }
    let low = p.leading_order().ok_or(EpsError::ZeroPolynomial)?;
    // strip the ε^low factor: the remaining polynomial is nonzero at 0
    let q = trim(p.coeffs()[low..].to_vec());
    if q.len() <= 1 {
        return Ok(RootBound::NoPositiveRoot);
    }
    let sf = squarefree(&q);
    let zero = Rational::zero();
    let one = Rational::one();
    let located = match smallest_root(&sf, &zero, &one) {
        Some(loc) => loc,
        None if eval(&sf, &one).is_zero() => Located::Exact(one),
        None => return Ok(RootBound::NoPositiveRoot),
    };
    let interval = match located {
        Located::Exact(r) => Interval { lo: r.clone(), hi: r },
        Located::Isolated(lo, hi) => refine(&sf, lo, hi, precision),
    };
    Ok(RootBound::Root(interval))
}

enum Located {
    Exact(Rational),
    /// Exactly one simple root in the open interval.
    Isolated(Rational, Rational),
}

fn smallest_root(sf: &[Rational], a: &Rational, b: &Rational) -> Option<Located> {
    match descartes_count(sf, a, b) {
        0 => None,
        1 => Some(Located::Isolated(a.clone(), b.clone())),
        _ => {
            let mid = (a + b) / Rational::from_integer(2.into());
            if let Some(left) = smallest_root(sf, a, &mid) {
                return Some(left);
            }
            if eval(sf, &mid).is_zero() {
                return Some(Located::Exact(mid));
            }
            smallest_root(sf, &mid, b)
        }
    }
}

fn refine(sf: &[Rational], mut lo: Rational, mut hi: Rational, precision: &Rational) -> Interval {
    let two = Rational::from_integer(2.into());
    let lo_sign = Sign::of(&eval(sf, &lo));
    debug_assert_ne!(lo_sign, Sign::Zero);
    while &(&hi - &lo) > precision || lo.is_zero() {
        let mid = (&lo + &hi) / &two;
        match Sign::of(&eval(sf, &mid)) {
            Sign::Zero => {
                return Interval {
                    lo: mid.clone(),
                    hi: mid,
                }
            }
            s if s == lo_sign => lo = mid,
            _ => hi = mid,
        }
    }
    Interval { lo, hi }
}

/// Sign variations of `(1+y)^d · p((a + b·y)/(1 + y))`, an upper bound on the
/// number of roots of `p` in the open interval `(a, b)` with equal parity.
fn descartes_count(p: &[Rational], a: &Rational, b: &Rational) -> usize {
    let d = p.len() - 1;
    let lin = vec![a.clone(), b.clone()];
    let one_plus_y = vec![Rational::one(), Rational::one()];
    let mut lin_pows = vec![vec![Rational::one()]];
    let mut shift_pows = vec![vec![Rational::one()]];
    for k in 1..=d {
        lin_pows.push(mul(&lin_pows[k - 1], &lin));
        shift_pows.push(mul(&shift_pows[k - 1], &one_plus_y));
    }
    let mut q = vec![Rational::zero(); d + 1];
    for (k, c) in p.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let term = mul(&lin_pows[k], &shift_pows[d - k]);
        for (i, t) in term.iter().enumerate() {
            q[i] += c * t;
        }
    }
    sign_variations(&q)
}

fn sign_variations(p: &[Rational]) -> usize {
    let signs: Vec<Sign> = p.iter().map(Sign::of).filter(|s| *s != Sign::Zero).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

// Dense helpers; coefficients ascending.

fn trim(mut p: Vec<Rational>) -> Vec<Rational> {
    while p.len() > 1 && p.last().is_some_and(Zero::is_zero) {
        p.pop();
    }
    p
}

fn eval(p: &[Rational], x: &Rational) -> Rational {
    p.iter().rev().fold(Rational::zero(), |acc, c| acc * x + c)
}

fn mul(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn derivative(p: &[Rational]) -> Vec<Rational> {
    if p.len() <= 1 {
        return vec![Rational::zero()];
    }
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| c * Rational::from_integer((k as i64).into()))
        .collect()
}

fn is_zero_poly(p: &[Rational]) -> bool {
    p.iter().all(Zero::is_zero)
}

/// Quotient and remainder of `a / b`; `b` must be nonzero.
fn div_rem(a: &[Rational], b: &[Rational]) -> (Vec<Rational>, Vec<Rational>) {
    let b = trim(b.to_vec());
    let mut r = trim(a.to_vec());
    if r.len() < b.len() {
        return (vec![Rational::zero()], r);
    }
    let lead = b.last().expect("nonempty divisor").clone();
    let mut quot = vec![Rational::zero(); r.len() - b.len() + 1];
    while r.len() >= b.len() && !is_zero_poly(&r) {
        let shift = r.len() - b.len();
        let c = r.last().expect("nonempty").clone() / &lead;
        for (i, bc) in b.iter().enumerate() {
            r[shift + i] -= &c * bc;
        }
        quot[shift] = c;
        r.pop();
        r = trim(r);
        if r.is_empty() {
            r.push(Rational::zero());
        }
    }
    (trim(quot), r)
}

fn gcd(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let mut x = trim(a.to_vec());
    let mut y = trim(b.to_vec());
    while !is_zero_poly(&y) {
        let (_, r) = div_rem(&x, &y);
        x = y;
        y = r;
    }
    let lead = x.last().cloned().unwrap_or_else(Rational::one);
    x.iter().map(|c| c / &lead).collect()
}

fn squarefree(p: &[Rational]) -> Vec<Rational> {
    let g = gcd(p, &derivative(p));
    if g.len() <= 1 {
        return p.to_vec();
    }
    div_rem(p, &g).0
}
