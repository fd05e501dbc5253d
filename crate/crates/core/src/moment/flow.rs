//! Exact flow feasibility: `Σ_e t_e·m_e = −W` with `t_e ≥ δ`, maximizing `δ`.
//!
//! The `m_e` are signed incidence vectors, so `t` is a flow on the quiver
//! with prescribed divergence `−W`. The quiver is acyclic, which keeps the
//! program bounded.

use num_traits::{Signed, Zero};

use crate::cone::Position;
use crate::eps::Rational;
use crate::lp::{self, LpOutcome};

use super::MomentProblem;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FlowResult {
    /// `max_min_t` is `None` when there are no edges (single component).
    Feasible {
        max_min_t: Option<Rational>,
        t: Vec<Rational>,
    },
    Infeasible,
}

impl FlowResult {
    /// Interior when a strictly positive flow exists, boundary when only
    /// flows with a zero edge exist, outside when none does.
    pub fn position(&self) -> Position {
        match self {
            FlowResult::Feasible { max_min_t: None, .. } => Position::Interior,
            FlowResult::Feasible { max_min_t: Some(d), .. } => {
                if d.is_positive() {
                    Position::Interior
                } else {
                    Position::Boundary
                }
            }
            FlowResult::Infeasible => Position::Outside,
        }
    }
}

pub fn flow_feasibility(prob: &MomentProblem) -> FlowResult {
    let len = prob.len();
    let edges = prob.edges();
    let w = prob.w_exact();
    if edges.is_empty() {
        return if w.iter().all(Zero::is_zero) {
            FlowResult::Feasible {
                max_min_t: None,
                t: Vec::new(),
            }
        } else {
            FlowResult::Infeasible
        };
    }
    let ne = edges.len();
    let one = Rational::from_integer(1.into());
    // t = δ·1 + s with s ≥ 0, δ ≥ 0; the last vertex row is implied by the others
    let mut a = vec![vec![Rational::zero(); ne + 1]; len - 1];
    for (e, &(i, j)) in edges.iter().enumerate() {
        for (v, sign) in [(i, one.clone()), (j, -one.clone())] {
            if v < len - 1 {
                a[v][e] += &sign;
                a[v][ne] += &sign;
            }
        }
    }
    let b: Vec<Rational> = w[..len - 1].iter().map(|x| -x).collect();
    let mut c = vec![Rational::zero(); ne + 1];
    c[ne] = one;
    match lp::maximize(&a, &b, &c) {
        LpOutcome::Optimal { x, value } => FlowResult::Feasible {
            t: x[..ne].iter().map(|s| s + &value).collect(),
            max_min_t: Some(value),
        },
        LpOutcome::Infeasible => FlowResult::Infeasible,
        LpOutcome::Unbounded => unreachable!("acyclic quivers carry no positive circulation"),
    }
}
