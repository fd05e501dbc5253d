//! Finite-dimensional moment-map equation for the torus acting on the
//! extension classes, solved by Kempf–Ness minimization (floating point) and
//! by exact flow feasibility.
//!
//! For torus coordinates `x` the transformed magnitudes are
//! `t_e = b0_e·exp(2(x_i − x_j))` on edge `e = (i, j)`, and the shifted moment
//! map is `Σ_e t_e·m_e + W`. It is the gradient of the convex potential
//! `φ(x) = ½ Σ_e t_e + ⟨W, x⟩`.

pub mod flow;
pub mod laplacian;
pub mod sweep;

use num_traits::Zero;
use thiserror::Error;

use crate::cone::{self, moment_weight, DualGenerator, Position};
use crate::eps::{rational_to_f64, Rational};
use crate::instance::Instance;

pub use flow::{flow_feasibility, FlowResult};
pub use sweep::{eps_sweep, SweepOptions, SweepRow, SweepStatus};

/// Exponents `2(x_i − x_j) + ln b0` above this are refused.
pub const DEFAULT_EXP_BOUND: f64 = 600.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentError {
    #[error("InvalidProblem: {0}")]
    InvalidProblem(String),
    #[error("DivergenceSuspected: exponent {exponent:.3} on edge ({}, {}) exceeds {bound}", .edge.0 + 1, .edge.1 + 1)]
    DivergenceSuspected {
        edge: (usize, usize),
        exponent: f64,
        bound: f64,
    },
    #[error("MaxIterations: no convergence after {iterations} Newton steps (residual {:.3e})", .best.residual)]
    MaxIterations {
        iterations: usize,
        best: Box<MomentSolution>,
    },
}

/// `W` at a fixed ε, edge magnitudes `|b_e|²` and the quiver.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentProblem {
    edges: Vec<(usize, usize)>,
    ranks: Vec<u32>,
    w_exact: Vec<Rational>,
    w: Vec<f64>,
    /// Low-order parts of `w`, so that `w + w_lo` carries ~106 bits.
    w_lo: Vec<f64>,
    b0_sq_exact: Vec<Rational>,
    b0_sq: Vec<f64>,
    exp_bound: f64,
}

impl MomentProblem {
    pub fn new(
        edges: Vec<(usize, usize)>,
        ranks: Vec<u32>,
        w_exact: Vec<Rational>,
        b0_sq_exact: Vec<Rational>,
    ) -> Result<Self, MomentError> {
        let len = ranks.len();
        let bad = |msg: String| Err(MomentError::InvalidProblem(msg));
        if len == 0 || w_exact.len() != len {
            return bad(format!("{} weights for {} components", w_exact.len(), len));
        }
        if ranks.contains(&0) {
            return bad("zero rank".into());
        }
        if b0_sq_exact.len() != edges.len() {
            return bad(format!("{} magnitudes for {} edges", b0_sq_exact.len(), edges.len()));
        }
        if b0_sq_exact.iter().any(|b| *b <= Rational::zero()) {
            return bad("edge magnitudes must be positive".into());
        }
        if edges.iter().any(|&(i, j)| i >= j || j >= len) {
            return bad("edges must satisfy i < j <= len".into());
        }
        if !w_exact.iter().sum::<Rational>().is_zero() {
            return bad("moment weight is not trace-free".into());
        }
        if len > 1 && !crate::instance::Quiver::from_edges(edges.clone()).is_connected(len) {
            return bad("quiver is disconnected".into());
        }
        let w: Vec<f64> = w_exact.iter().map(rational_to_f64).collect();
        let w_lo = w_exact
            .iter()
            .zip(&w)
            .map(|(q, &hi)| Rational::from_float(hi).map_or(0.0, |h| rational_to_f64(&(q - h))))
            .collect();
        let b0_sq = b0_sq_exact.iter().map(rational_to_f64).collect();
        Ok(MomentProblem {
            edges,
            ranks,
            w_exact,
            w,
            w_lo,
            b0_sq_exact,
            b0_sq,
            exp_bound: DEFAULT_EXP_BOUND,
        })
    }

    /// `W = MomentWeight(ε)`; `b0_sq` defaults to 1 on every edge.
    pub fn from_instance(inst: &Instance, eps: &Rational, b0_sq: Option<&[Rational]>) -> Result<Self, MomentError> {
        let w = moment_weight(inst).eval(eps);
        let edges = inst.quiver().edges().to_vec();
        let b0 = match b0_sq {
            Some(b) => b.to_vec(),
            None => vec![Rational::from_integer(1.into()); edges.len()],
        };
        MomentProblem::new(edges, inst.ranks(), w, b0)
    }

    pub fn with_exp_bound(mut self, bound: f64) -> Self {
        self.exp_bound = bound;
        self
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn ranks(&self) -> &[u32] {
        &self.ranks
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn w_exact(&self) -> &[Rational] {
        &self.w_exact
    }

    pub fn b0_sq(&self) -> &[f64] {
        &self.b0_sq
    }

    pub fn b0_sq_exact(&self) -> &[Rational] {
        &self.b0_sq_exact
    }

    /// `‖W‖∞`.
    pub fn scale(&self) -> f64 {
        self.w.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Moves `x` onto `Σ rank_i·x_i = 0`.
    pub fn project(&self, x: &mut [f64]) {
        let total: f64 = self.ranks.iter().map(|&r| f64::from(r)).sum();
        let mean = self
            .ranks
            .iter()
            .zip(x.iter())
            .map(|(&r, xi)| f64::from(r) * xi)
            .sum::<f64>()
            / total;
        for xi in x.iter_mut() {
            *xi -= mean;
        }
    }

    fn exponents(&self, x: &[f64]) -> Result<Vec<f64>, MomentError> {
        self.edges
            .iter()
            .zip(&self.b0_sq)
            .map(|(&(i, j), &b)| {
                let z = b.ln() + 2.0 * (x[i] - x[j]);
                if z > self.exp_bound || z.is_nan() {
                    Err(MomentError::DivergenceSuspected {
                        edge: (i, j),
                        exponent: z,
                        bound: self.exp_bound,
                    })
                } else {
                    Ok(z)
                }
            })
            .collect()
    }

    /// Transformed magnitudes `t_e = |b_e|²·exp(2(x_i − x_j))`.
    pub fn magnitudes(&self, x: &[f64]) -> Result<Vec<f64>, MomentError> {
        Ok(self.exponents(x)?.into_iter().map(f64::exp).collect())
    }

    /// `Σ_e t_e·m_e + W`, summed in double-double so that cancellation between
    /// large flows and the weight does not swamp small components.
    pub fn shifted_moment(&self, t: &[f64]) -> Vec<f64> {
        let mut acc: Vec<TwoSum> = self
            .w
            .iter()
            .zip(&self.w_lo)
            .map(|(&hi, &lo)| {
                let mut a = TwoSum::default();
                a.add(hi);
                a.add(lo);
                a
            })
            .collect();
        for (&(i, j), &te) in self.edges.iter().zip(t) {
            acc[i].add(te);
            acc[j].add(-te);
        }
        acc.iter().map(TwoSum::value).collect()
    }
}

/// Compensated accumulator (Neumaier).
#[derive(Clone, Copy, Debug, Default)]
struct TwoSum {
    sum: f64,
    err: f64,
}

impl TwoSum {
    fn add(&mut self, x: f64) {
        let s = self.sum + x;
        self.err += if self.sum.abs() >= x.abs() {
            (self.sum - s) + x
        } else {
            (x - s) + self.sum
        };
        self.sum = s;
    }

    fn value(&self) -> f64 {
        self.sum + self.err
    }
}

/// Potential value, gradient and Hessian at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct KnEval {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<Vec<f64>>,
    pub t: Vec<f64>,
}

pub fn kn_value_grad_hess(prob: &MomentProblem, x: &[f64]) -> Result<KnEval, MomentError> {
    let n = prob.len();
    if x.len() != n {
        return Err(MomentError::InvalidProblem(format!(
            "point of length {} for {} components",
            x.len(),
            n
        )));
    }
    let t = prob.magnitudes(x)?;
    let value = 0.5 * t.iter().sum::<f64>() + prob.w.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
    let grad = prob.shifted_moment(&t);
    let mut hess = vec![vec![0.0; n]; n];
    for (&(i, j), &te) in prob.edges.iter().zip(&t) {
        let h = 2.0 * te;
        hess[i][i] += h;
        hess[j][j] += h;
        hess[i][j] -= h;
        hess[j][i] -= h;
    }
    Ok(KnEval { value, grad, hess, t })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentSolution {
    /// Torus logarithm, rank-weighted trace zero.
    pub x_star: Vec<f64>,
    pub t: Vec<f64>,
    /// `‖Σ t_e·m_e + W‖∞`.
    pub residual: f64,
    /// `sqrt(Σ t_e)`.
    pub b_norm: f64,
    pub iterations: usize,
}

impl MomentSolution {
    fn at(prob: &MomentProblem, x: Vec<f64>, t: Vec<f64>, grad: &[f64], iterations: usize) -> Self {
        let residual = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let b_norm = t.iter().sum::<f64>().sqrt();
        let _ = prob;
        MomentSolution {
            x_star: x,
            t,
            residual,
            b_norm,
            iterations,
        }
    }
}

/// Where and how the iterates left every bounded region.
#[derive(Clone, Debug, PartialEq)]
pub struct Escape {
    /// Unit recession direction `−v/‖v‖` of the certificate, or the raw
    /// estimate if no certificate matched.
    pub direction: Vec<f64>,
    /// `(x − x0)/‖x − x0‖` when divergence was declared.
    pub estimate: Vec<f64>,
    pub certificate: Option<DualGenerator>,
    /// Last iterate.
    pub last: MomentSolution,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolveOutcome {
    Converged(MomentSolution),
    /// The infimum is approached only at infinity and the moment map tends
    /// to zero: `−W` lies on the boundary of σ.
    Boundary(Escape),
    /// The potential is unbounded below: `−W` lies outside σ.
    Divergent(Escape),
}

impl SolveOutcome {
    pub fn position(&self) -> Position {
        match self {
            SolveOutcome::Converged(_) => Position::Interior,
            SolveOutcome::Boundary(_) => Position::Boundary,
            SolveOutcome::Divergent(_) => Position::Outside,
        }
    }

    pub fn iterations(&self) -> usize {
        match self {
            SolveOutcome::Converged(s) => s.iterations,
            SolveOutcome::Boundary(e) | SolveOutcome::Divergent(e) => e.last.iterations,
        }
    }

    pub fn solution(&self) -> &MomentSolution {
        match self {
            SolveOutcome::Converged(s) => s,
            SolveOutcome::Boundary(e) | SolveOutcome::Divergent(e) => &e.last,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    /// Required `‖Σ t_e·m_e + W‖∞`.
    pub tol: f64,
    pub max_iter: usize,
    /// Divergence is declared once `‖x − x0‖∞` exceeds this.
    pub divergence_bound: f64,
    pub armijo: f64,
    pub shrink: f64,
    /// Cap on `‖Δx‖∞` per Newton step.
    pub max_step: f64,
    /// Newton steps below this (in `‖·‖∞`) count as converged.
    pub step_tol: f64,
    /// At divergence, a residual below `boundary_rel·‖W‖∞` means boundary.
    pub boundary_rel: f64,
    /// When the line search stalls at a small residual, a Newton step longer
    /// than this means the iterates have not settled.
    pub stall_step: f64,
    /// Flows below `vanishing_t·max t` count as zero when checking whether a
    /// numerically converged point sits on the boundary.
    pub vanishing_t: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 500,
            divergence_bound: 50.0,
            armijo: 1e-4,
            shrink: 0.5,
            max_step: 10.0,
            step_tol: 1e-8,
            boundary_rel: 1e-8,
            stall_step: 1e-4,
            vanishing_t: 1e-12,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions {
            tol,
            ..SolverOptions::default()
        }
    }
}

/// Starting point with every transformed magnitude at most `‖W‖∞`: `x` grows
/// along the quiver by a fixed amount per level of the longest-path depth.
pub fn initial_point(prob: &MomentProblem) -> Vec<f64> {
    let n = prob.len();
    let s = prob.scale();
    let bmax = prob.b0_sq.iter().fold(0.0f64, |m, b| m.max(*b));
    let lift = if s > 0.0 && bmax > s {
        0.5 * (bmax / s).ln()
    } else {
        0.0
    };
    let mut depth = vec![0usize; n];
    // edges are sorted with i < j, so one pass in order is topological
    for &(i, j) in &prob.edges {
        depth[j] = depth[j].max(depth[i] + 1);
    }
    let mut x: Vec<f64> = depth.iter().map(|&d| lift * d as f64).collect();
    prob.project(&mut x);
    x
}

fn newton_direction(prob: &MomentProblem, t: &[f64], grad: &[f64]) -> Option<Vec<f64>> {
    let n = prob.len();
    let mut local = vec![0.0f64; n];
    for (&(i, j), &te) in prob.edges.iter().zip(t) {
        local[i] += te;
        local[j] += te;
    }
    let ground = (0..n).max_by(|&a, &b| local[a].total_cmp(&local[b]))?;
    let weights: Vec<f64> = t.iter().map(|te| 2.0 * te).collect();
    let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
    let mut dx = laplacian::solve_grounded(n, &prob.edges, &weights, &rhs, ground)?;
    prob.project(&mut dx);
    Some(dx)
}

/// `e^z − 1 − z` without cancellation for small `z`.
fn expm1_minus_z(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        let z2 = z * z;
        z2 * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0)))
    } else {
        z.exp_m1() - z
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Damped Newton on the Kempf–Ness potential.
///
/// The decrease `φ(x + αΔ) − φ(x) = ½Σ t_e(e^{z_e} − 1 − z_e) + α⟨∇φ, Δ⟩`,
/// `z_e = 2α⟨m_e, Δ⟩`, is evaluated in that form so that the Armijo test stays
/// meaningful when `φ` itself is dominated by large terms.
pub fn solve_moment_map(prob: &MomentProblem, opts: &SolverOptions) -> Result<SolveOutcome, MomentError> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(MomentError::InvalidProblem("tolerance must be positive".into()));
    }
    let n = prob.len();
    let x0 = initial_point(prob);
    let mut x = x0.clone();
    let mut eval = kn_value_grad_hess(prob, &x)?;
    let mut iterations = 0;
    loop {
        let residual = inf_norm(&eval.grad);
        if prob.edges.is_empty() {
            let sol = MomentSolution::at(prob, x, eval.t, &eval.grad, iterations);
            return if residual <= opts.tol {
                Ok(SolveOutcome::Converged(sol))
            } else {
                Err(MomentError::MaxIterations {
                    iterations,
                    best: Box::new(sol),
                })
            };
        }
        let Some(mut dx) = newton_direction(prob, &eval.t, &eval.grad) else {
            let best = MomentSolution::at(prob, x, eval.t, &eval.grad, iterations);
            return Err(MomentError::MaxIterations {
                iterations,
                best: Box::new(best),
            });
        };
        let step = inf_norm(&dx);
        if residual <= opts.tol && step <= opts.step_tol {
            let sol = MomentSolution::at(prob, x, eval.t, &eval.grad, iterations);
            return Ok(settle(prob, opts, &x0, sol));
        }
        if iterations >= opts.max_iter {
            let best = MomentSolution::at(prob, x, eval.t, &eval.grad, iterations);
            return Err(MomentError::MaxIterations {
                iterations,
                best: Box::new(best),
            });
        }
        if step > opts.max_step {
            let f = opts.max_step / step;
            dx.iter_mut().for_each(|d| *d *= f);
        }
        let slope: f64 = eval.grad.iter().zip(&dx).map(|(g, d)| g * d).sum();
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..80 {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(xi, d)| xi + alpha * d).collect();
            if let Ok(next) = kn_value_grad_hess(prob, &trial) {
                let curv: f64 = prob
                    .edges
                    .iter()
                    .zip(&eval.t)
                    .map(|(&(i, j), &te)| 0.5 * te * expm1_minus_z(2.0 * alpha * (dx[i] - dx[j])))
                    .sum();
                let decrease = curv + alpha * slope;
                let slack = 16.0 * f64::EPSILON * (curv.abs() + (alpha * slope).abs());
                if decrease <= opts.armijo * alpha * slope + slack {
                    accepted = Some((trial, next));
                    break;
                }
            }
            alpha *= opts.shrink;
        }
        let Some((mut trial, _)) = accepted else {
            // the potential cannot be decreased further in floating point
            let best = MomentSolution::at(prob, x, eval.t, &eval.grad, iterations);
            if residual <= opts.tol {
                match settle(prob, opts, &x0, best) {
                    SolveOutcome::Converged(best) if step > opts.stall_step => {
                        return Err(MomentError::MaxIterations {
                            iterations,
                            best: Box::new(best),
                        })
                    }
                    out => return Ok(out),
                }
            }
            return Err(MomentError::MaxIterations {
                iterations,
                best: Box::new(best),
            });
        };
        prob.project(&mut trial);
        x = trial;
        eval = kn_value_grad_hess(prob, &x)?;
        iterations += 1;

        let moved: Vec<f64> = x.iter().zip(&x0).map(|(a, b)| a - b).collect();
        if inf_norm(&moved) > opts.divergence_bound {
            let last = MomentSolution::at(prob, x, eval.t, &eval.grad, iterations);
            return Ok(classify_escape(prob, opts, moved, last));
        }
        debug_assert_eq!(x.len(), n);
    }
}

/// A dual generator whose crossing edges all carry vanished flow and whose
/// exact pairing with `W` is zero.
fn vanishing_certificate(prob: &MomentProblem, opts: &SolverOptions, t: &[f64]) -> Option<DualGenerator> {
    let tmax = t.iter().fold(0.0f64, |m, x| m.max(*x));
    let vanished: Vec<bool> = t.iter().map(|&te| te <= opts.vanishing_t * tmax).collect();
    if !vanished.contains(&true) {
        return None;
    }
    cone::dual_generators_for(&prob.edges, &prob.ranks)
        .ok()?
        .into_iter()
        .filter(|g| crate::eps::Sign::of(&g.pairing(&prob.w_exact)) == crate::eps::Sign::Zero)
        .find(|g| {
            prob.edges
                .iter()
                .zip(&vanished)
                .all(|(e, &v)| v || g.tight_edges.contains(e))
        })
}

/// A small-residual point is converged unless its vanished flows cut the
/// quiver along a certified boundary face.
fn settle(prob: &MomentProblem, opts: &SolverOptions, x0: &[f64], sol: MomentSolution) -> SolveOutcome {
    let Some(g) = vanishing_certificate(prob, opts, &sol.t) else {
        return SolveOutcome::Converged(sol);
    };
    let direction = unit_recession(&g);
    let moved: Vec<f64> = sol.x_star.iter().zip(x0).map(|(a, b)| a - b).collect();
    let norm = moved.iter().map(|v| v * v).sum::<f64>().sqrt();
    let estimate = if norm > 0.0 {
        moved.iter().map(|v| v / norm).collect()
    } else {
        direction.clone()
    };
    SolveOutcome::Boundary(Escape {
        direction,
        estimate,
        certificate: Some(g),
        last: sol,
    })
}

fn classify_escape(prob: &MomentProblem, opts: &SolverOptions, moved: Vec<f64>, last: MomentSolution) -> SolveOutcome {
    let norm = moved.iter().map(|v| v * v).sum::<f64>().sqrt();
    let estimate: Vec<f64> = moved.iter().map(|v| v / norm).collect();
    let s = prob.scale();
    let scale = if s > 0.0 {
        s
    } else {
        prob.b0_sq.iter().fold(0.0f64, |m, b| m.max(*b))
    };
    let boundary = last.residual <= opts.boundary_rel * scale;
    let wanted = if boundary {
        crate::eps::Sign::Zero
    } else {
        crate::eps::Sign::Positive
    };
    let certificate = cone::dual_generators_for(&prob.edges, &prob.ranks)
        .ok()
        .and_then(|gens| {
            gens.into_iter()
                .filter(|g| crate::eps::Sign::of(&g.pairing(&prob.w_exact)) == wanted)
                .map(|g| {
                    let d = unit_recession(&g);
                    let cos: f64 = d.iter().zip(&estimate).map(|(a, b)| a * b).sum();
                    (cos, g)
                })
                .max_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, g)| g)
        });
    let direction = certificate.as_ref().map_or_else(|| estimate.clone(), unit_recession);
    let escape = Escape {
        direction,
        estimate,
        certificate,
        last,
    };
    if boundary {
        SolveOutcome::Boundary(escape)
    } else {
        SolveOutcome::Divergent(escape)
    }
}

/// `−v/‖v‖₂`: along it every `t_e` is non-increasing and `⟨W, ·⟩` does not
/// increase when `v` certifies.
pub fn unit_recession(v: &DualGenerator) -> Vec<f64> {
    let d: Vec<f64> = v.coords.iter().map(|c| -rational_to_f64(c)).collect();
    let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    d.iter().map(|x| x / norm).collect()
}
