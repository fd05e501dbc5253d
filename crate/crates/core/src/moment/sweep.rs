//! Solving the moment-map equation along a schedule of ε values.

use std::fmt;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::eps::Rational;
use crate::instance::Instance;
use crate::par::{self, Execution};

use super::{solve_moment_map, MomentError, MomentProblem, SolveOutcome, SolverOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepStatus {
    Converged,
    Boundary,
    Divergent,
    MaxIterations,
    DivergenceSuspected,
    Invalid,
    /// ε = 0: `W` vanishes and the unshifted point `x = 0` is reported.
    BaselineAtEpsZero,
}

impl fmt::Display for SweepStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub eps: Rational,
    pub b_norm: Option<f64>,
    pub residual: Option<f64>,
    pub status: SweepStatus,
    pub newton_iters: usize,
    pub message: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOptions {
    pub solver: SolverOptions,
    pub b0_sq: Option<Vec<Rational>>,
    pub exec: Execution,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            solver: SolverOptions::default(),
            b0_sq: None,
            exec: Execution::Parallel,
        }
    }
}

/// `start·factor^k` for `k = 0..count`.
pub fn geometric_schedule(start: &Rational, factor: &Rational, count: usize) -> Vec<Rational> {
    let mut out = Vec::with_capacity(count);
    let mut e = start.clone();
    for _ in 0..count {
        out.push(e.clone());
        e = &e * factor;
    }
    out
}

fn row(inst: &Instance, eps: &Rational, opts: &SweepOptions) -> SweepRow {
    let failed = |status, message: String| SweepRow {
        eps: eps.clone(),
        b_norm: None,
        residual: None,
        status,
        newton_iters: 0,
        message: Some(message),
    };
    if eps.is_negative() {
        return failed(SweepStatus::Invalid, "ε must be non-negative".into());
    }
    let prob = match MomentProblem::from_instance(inst, eps, opts.b0_sq.as_deref()) {
        Ok(p) => p,
        Err(e) => return failed(SweepStatus::Invalid, e.to_string()),
    };
    if eps.is_zero() {
        let b_norm = prob.b0_sq().iter().sum::<f64>().sqrt();
        return SweepRow {
            eps: eps.clone(),
            b_norm: Some(b_norm),
            residual: Some(0.0),
            status: SweepStatus::BaselineAtEpsZero,
            newton_iters: 0,
            message: None,
        };
    }
    match solve_moment_map(&prob, &opts.solver) {
        Ok(out) => {
            let (status, b_norm) = match &out {
                SolveOutcome::Converged(s) => (SweepStatus::Converged, Some(s.b_norm)),
                SolveOutcome::Boundary(e) => (SweepStatus::Boundary, Some(e.last.b_norm)),
                SolveOutcome::Divergent(_) => (SweepStatus::Divergent, None),
            };
            SweepRow {
                eps: eps.clone(),
                b_norm,
                residual: Some(out.solution().residual),
                status,
                newton_iters: out.iterations(),
                message: None,
            }
        }
        Err(MomentError::MaxIterations { iterations, best }) => SweepRow {
            eps: eps.clone(),
            b_norm: Some(best.b_norm),
            residual: Some(best.residual),
            status: SweepStatus::MaxIterations,
            newton_iters: iterations,
            message: None,
        },
        Err(e @ MomentError::DivergenceSuspected { .. }) => failed(SweepStatus::DivergenceSuspected, e.to_string()),
        Err(e) => failed(SweepStatus::Invalid, e.to_string()),
    }
}

/// One row per ε, ordered by decreasing ε. Rows are solved independently
/// (concurrently under [`Execution::Parallel`]); a failing row does not stop
/// the others.
pub fn eps_sweep(inst: &Instance, schedule: &[Rational], opts: &SweepOptions) -> Vec<SweepRow> {
    let mut sorted = schedule.to_vec();
    sorted.sort_by(|a, b| b.cmp(a));
    par::map(&sorted, opts.exec, |eps| row(inst, eps, opts))
}

/// Least-squares slope of `log b_norm` against `log ε` over converged rows.
pub fn loglog_slope(rows: &[SweepRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.status == SweepStatus::Converged)
        .filter_map(|r| {
            let e = crate::eps::rational_to_f64(&r.eps);
            let b = r.b_norm?;
            (e > 0.0 && b > 0.0).then(|| (e.ln(), b.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
