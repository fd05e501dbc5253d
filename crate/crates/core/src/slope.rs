//! Slope ε-polynomials of γ-invariant subsheaves and the stable /
//! semistable / unstable decision for the pulled-back bundle.

use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::eps::{int, rat, EpsPoly, Interval, Rational, RootBound, Sign};
use crate::instance::{Instance, Quiver, ValidationError};
use crate::par::{self, Execution};

/// Bracket width used when locating the smallest positive root of the slope
/// differences.
pub fn default_root_precision() -> Rational {
    rat(1, 4096)
}

/// Candidate counts below this are checked sequentially.
const PAR_MIN_CANDIDATES: usize = 128;

/// Nonempty proper set of component indices, sorted, 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubsheafIndex(Vec<usize>);

impl SubsheafIndex {
    pub fn new(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        SubsheafIndex(members)
    }

    pub fn from_mask(mask: u64, len: usize) -> Self {
        SubsheafIndex((0..len).filter(|i| mask >> i & 1 == 1).collect())
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|i| i + 1).collect()
    }

    /// The complementary index set within `0..len`.
    pub fn complement(&self, len: usize) -> SubsheafIndex {
        SubsheafIndex((0..len).filter(|i| !self.contains(*i)).collect())
    }

    /// Every edge `(i, j)` with `j` in the set has `i` in the set.
    pub fn is_predecessor_closed(&self, quiver: &Quiver) -> bool {
        quiver
            .edges()
            .iter()
            .all(|&(i, j)| !self.contains(j) || self.contains(i))
    }
}

impl fmt::Display for SubsheafIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        f.write_str("}")
    }
}

/// JSON form: 1-based index list.
impl Serialize for SubsheafIndex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SubsheafIndex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw: Vec<usize> = Vec::deserialize(d)?;
        if raw.contains(&0) {
            return Err(serde::de::Error::custom("subsheaf indices are 1-based"));
        }
        Ok(SubsheafIndex::new(raw.into_iter().map(|i| i - 1).collect()))
    }
}

#[derive(Clone, Copy, Debug)]
pub enum SlopeOf<'a> {
    Full,
    Subsheaf(&'a SubsheafIndex),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StabilityKind {
    Stable,
    Semistable,
    Unstable,
}

impl fmt::Display for StabilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StabilityKind::Stable => "Stable",
            StabilityKind::Semistable => "Semistable",
            StabilityKind::Unstable => "Unstable",
        })
    }
}

/// Outcome of comparing `μ(E)` with one candidate `μ(F_I)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsetCheck {
    pub subset: SubsheafIndex,
    /// `μ_{L_ε}(E) − μ_{L_ε}(F_I)`.
    pub difference: EpsPoly,
    pub sign: Sign,
    pub root: RootBound,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub kind: StabilityKind,
    /// Destabilizer (unstable) or an equal-slope subsheaf (semistable).
    pub witness: Option<SubsheafIndex>,
    /// Bracket of the smallest positive root among all slope differences;
    /// the verdict holds for `0 < ε < lo`. `None` when no difference
    /// vanishes in (0, 1].
    pub epsilon_threshold: Option<Interval>,
    pub checks: Vec<SubsetCheck>,
}

impl Verdict {
    /// A rational `ε` strictly inside the validity range, at most `cap`.
    pub fn safe_epsilon(&self, cap: &Rational) -> Rational {
        match &self.epsilon_threshold {
            Some(iv) if &iv.lo <= cap => &iv.lo / int(2),
            _ => cap.clone(),
        }
    }
}

fn ranked_sum<'a>(inst: &Instance, members: impl Iterator<Item = &'a usize>) -> (EpsPoly, Rational) {
    let comps = inst.components();
    let mut deg = EpsPoly::zero(inst.max_degree());
    let mut rank = 0u64;
    for &i in members {
        deg = &deg + &comps[i].deg_coeffs;
        rank += u64::from(comps[i].rank);
    }
    (deg, Rational::from_integer(BigInt::from(rank)))
}

/// Slope polynomial `Σ deg_i / Σ rank_i` over the chosen components.
pub fn slope_poly(inst: &Instance, of: SlopeOf<'_>) -> EpsPoly {
    let all: Vec<usize> = (0..inst.len()).collect();
    let members = match of {
        SlopeOf::Full => &all[..],
        SlopeOf::Subsheaf(idx) => idx.members(),
    };
    let (deg, rank) = ranked_sum(inst, members.iter());
    assert!(!rank.is_zero(), "slope of an empty subsheaf");
    deg.div_scalar(&rank)
}

/// Slope of the quotient `E / F_I`.
pub fn quotient_slope_poly(inst: &Instance, idx: &SubsheafIndex) -> EpsPoly {
    slope_poly(inst, SlopeOf::Subsheaf(&idx.complement(inst.len())))
}

/// All nonempty proper predecessor-closed subsets, ordered by size and then
/// lexicographically.
pub fn enumerate_subsheaves(inst: &Instance) -> Vec<SubsheafIndex> {
    let len = inst.len();
    if len < 2 {
        return Vec::new();
    }
    let full = (1u64 << len) - 1;
    // closure test on bitmasks: for every edge (i, j), j ∈ I ⇒ i ∈ I
    let edges = inst.quiver().edges();
    let mut out: Vec<SubsheafIndex> = (1..full)
        .filter(|mask| edges.iter().all(|&(i, j)| mask >> j & 1 == 0 || mask >> i & 1 == 1))
        .map(|mask| SubsheafIndex::from_mask(mask, len))
        .collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

fn check_subset(inst: &Instance, full_slope: &EpsPoly, subset: &SubsheafIndex, precision: &Rational) -> SubsetCheck {
    let difference = full_slope - &slope_poly(inst, SlopeOf::Subsheaf(subset));
    let sign = difference.lex_sign();
    let root = if difference.is_zero() {
        RootBound::NoPositiveRoot
    } else {
        difference
            .positive_root_bound(precision)
            .expect("nonzero polynomial with positive precision")
    };
    SubsetCheck {
        subset: subset.clone(),
        difference,
        sign,
        root,
    }
}

/// Decides stability of the pullback for `0 < ε ≪ 1` over all
/// predecessor-closed candidates.
pub fn decide_stability(inst: &Instance) -> Verdict {
    decide_over(inst, &enumerate_subsheaves(inst), &default_root_precision())
}

pub fn decide_stability_with_precision(inst: &Instance, precision: &Rational) -> Verdict {
    decide_over(inst, &enumerate_subsheaves(inst), precision)
}

/// Same decision rule restricted to an explicit candidate list.
pub fn decide_over(inst: &Instance, candidates: &[SubsheafIndex], precision: &Rational) -> Verdict {
    if inst.len() == 1 {
        return Verdict {
            kind: StabilityKind::Stable,
            witness: None,
            epsilon_threshold: None,
            checks: Vec::new(),
        };
    }
    let full = slope_poly(inst, SlopeOf::Full);
    let exec = if candidates.len() >= PAR_MIN_CANDIDATES {
        Execution::Parallel
    } else {
        Execution::Sequential
    };
    let checks = par::map(candidates, exec, |s| check_subset(inst, &full, s, precision));

    let smallest_with = |sign: Sign| {
        checks
            .iter()
            .filter(|c| c.sign == sign)
            .map(|c| &c.subset)
            .min()
            .cloned()
    };
    let (kind, witness) = if let Some(w) = smallest_with(Sign::Negative) {
        (StabilityKind::Unstable, Some(w))
    } else if let Some(w) = smallest_with(Sign::Zero) {
        (StabilityKind::Semistable, Some(w))
    } else {
        (StabilityKind::Stable, None)
    };
    let epsilon_threshold = checks
        .iter()
        .filter_map(|c| c.root.interval())
        .min_by(|a, b| a.lo.cmp(&b.lo))
        .cloned();
    Verdict {
        kind,
        witness,
        epsilon_threshold,
        checks,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TwoTermVerdict {
    /// Every candidate restricts with strictly larger slope on `Z`.
    Stable,
    /// The sufficient condition fails at `failing` (first in candidate order).
    Inconclusive { failing: SubsheafIndex },
}

fn restricted_slope(inst: &Instance, members: &[usize]) -> Result<Rational, ValidationError> {
    let mut deg = Rational::zero();
    let mut rank = 0u64;
    for &i in members {
        let c = &inst.components()[i];
        let rd = c
            .restriction_degree
            .as_ref()
            .ok_or_else(|| ValidationError::MissingRestrictionData(c.name.clone()))?;
        deg += rd;
        rank += u64::from(c.rank);
    }
    Ok(deg / Rational::from_integer(BigInt::from(rank)))
}

/// Sufficient criterion from the restriction slopes alone:
/// `μ_{L|Z}(E|Z) < μ_{L|Z}(F|Z)` for every candidate `F`.
pub fn two_term_decide(inst: &Instance) -> Result<TwoTermVerdict, ValidationError> {
    if inst.ambient().m() == 0 {
        return Err(ValidationError::PointCenter);
    }
    let all: Vec<usize> = (0..inst.len()).collect();
    let whole = restricted_slope(inst, &all)?;
    for cand in enumerate_subsheaves(inst) {
        if restricted_slope(inst, cand.members())? <= whole {
            return Ok(TwoTermVerdict::Inconclusive { failing: cand });
        }
    }
    Ok(TwoTermVerdict::Stable)
}

/// Additivity `rk F·μ(F) + rk(E/F)·μ(E/F) = rk E·μ(E)` together with the
/// sign transfer `sign(μ(E) − μ(F)) = sign(μ(E/F) − μ(E))`.
pub fn seesaw_check(inst: &Instance, idx: &SubsheafIndex) -> bool {
    let rank_of = |s: &SubsheafIndex| {
        Rational::from_integer(BigInt::from(
            s.members()
                .iter()
                .map(|&i| u64::from(inst.components()[i].rank))
                .sum::<u64>(),
        ))
    };
    let quotient = idx.complement(inst.len());
    if idx.is_empty() || quotient.is_empty() {
        return false;
    }
    let mu_e = slope_poly(inst, SlopeOf::Full);
    let mu_f = slope_poly(inst, SlopeOf::Subsheaf(idx));
    let mu_q = slope_poly(inst, SlopeOf::Subsheaf(&quotient));
    let rank_e = Rational::from_integer(BigInt::from(inst.total_rank()));
    let additive = &mu_f.scale(&rank_of(idx)) + &mu_q.scale(&rank_of(&quotient)) == mu_e.scale(&rank_e);
    let signs = (&mu_e - &mu_f).lex_sign() == (&mu_q - &mu_e).lex_sign();
    additive && signs
}
