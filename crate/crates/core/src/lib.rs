//! Stability of pulled-back bundles on blow-ups.
//!
//! A semistable, sufficiently smooth bundle `E` on `X` with graded object
//! `⊕ 𝒢_i` pulls back to the blow-up of `X` along `Z`. For the polarizations
//! `L_ε = π*L − ε[Z']` with `0 < ε ≪ 1` this crate decides whether the pullback
//! is stable, semistable or unstable, in three independent ways:
//!
//! * [`slope`]: exact slope comparison over the subsheaves built from the
//!   extension quiver, as ε-polynomials;
//! * [`cone`]: membership of the moment weight in the cone spanned by the
//!   torus weights of the extension classes;
//! * [`moment`]: solving the moment-map equation, numerically by Kempf–Ness
//!   minimization and exactly as a flow problem.
//!
//! Instances are read from JSON documents ([`doc`]).

pub mod cone;
pub mod doc;
pub mod eps;
pub mod exact;
pub mod instance;
pub mod lp;
pub mod moment;
pub mod par;
pub mod slope;

pub use cone::{cone_position, dual_cone_generators, moment_weight, weight_vectors, Position};
pub use eps::{EpsPoly, Rational, Sign};
pub use instance::{validate_instance, Instance, RawInstance, ValidationError};
pub use moment::{flow_feasibility, solve_moment_map, MomentProblem, SolveOutcome, SolverOptions};
pub use slope::{decide_stability, StabilityKind, SubsheafIndex, Verdict};
