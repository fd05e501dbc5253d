//! Problem instances: blow-up geometry, the graded pieces of the
//! Jordan–Hölder filtration and the extension quiver.
//!
//! Components and quiver vertices are indexed from 0 in this API. Error
//! messages and the JSON document use 1-based indices.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::eps::{format_rational, EpsPoly, Rational};

/// Hard cap on the number of graded components; subset enumeration is
/// exponential in it.
pub const MAX_COMPONENTS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValidationError {
    #[error("BadAmbient: need n >= 2 and 0 <= m <= n - 2, got n = {n}, m = {m}")]
    BadAmbient { n: usize, m: usize },
    #[error("NoComponents: the graded object needs at least one component")]
    NoComponents,
    #[error("TooManyComponents: {0} components exceed the supported maximum of {MAX_COMPONENTS}")]
    TooManyComponents(usize),
    #[error("ZeroRank: component {0:?} has rank 0")]
    ZeroRank(String),
    #[error("WrongLength: component {component:?} carries {found} degree coefficients, expected {expected}")]
    WrongLength {
        component: String,
        expected: usize,
        found: usize,
    },
    #[error("DuplicateComponent: component name {0:?} appears twice")]
    DuplicateComponent(String),
    #[error("UnequalBaseSlopes: component {component:?} has base slope {found}, expected {expected}")]
    UnequalBaseSlopes {
        component: String,
        expected: String,
        found: String,
    },
    #[error("EdgeOutOfRange: edge ({}, {}) refers to a component beyond {len}", .i + 1, .j + 1)]
    EdgeOutOfRange { i: usize, j: usize, len: usize },
    #[error("BadEdgeOrder: edge ({}, {}) must satisfy i < j", .i + 1, .j + 1)]
    BadEdgeOrder { i: usize, j: usize },
    #[error("DuplicateEdge: edge ({}, {}) listed more than once", .i + 1, .j + 1)]
    DuplicateEdge { i: usize, j: usize },
    #[error("DisconnectedQuiver: component {} is not linked to component 1", .unreachable + 1)]
    DisconnectedQuiver { unreachable: usize },
    #[error("ModeInconsistency: component {component:?} has ε^{order} coefficient {found}, restriction data requires {expected}")]
    ModeInconsistency {
        component: String,
        order: usize,
        expected: String,
        found: String,
    },
    #[error("MissingRestrictionData: component {0:?} has no restriction degree")]
    MissingRestrictionData(String),
    #[error("PointCenter: the two-term expansion needs a positive-dimensional centre (m >= 1)")]
    PointCenter,
}

/// `n = dim X` and `m = dim Z` for the blown-up centre `Z ⊂ X`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ambient {
    n: usize,
    m: usize,
}

impl Ambient {
    pub fn new(n: usize, m: usize) -> Result<Self, ValidationError> {
        if n < 2 || m + 2 > n {
            return Err(ValidationError::BadAmbient { n, m });
        }
        Ok(Ambient { n, m })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn codim(&self) -> usize {
        self.n - self.m
    }

    /// Truncation degree of every ε-polynomial of the instance.
    pub fn max_degree(&self) -> usize {
        self.n - 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradedComponent {
    pub name: String,
    pub rank: u32,
    /// ε-expansion of `c₁(π*𝒢)·(π*L − ε[Z'])^{n−1}`.
    pub deg_coeffs: EpsPoly,
    /// `deg_{L|Z}(𝒢|Z)`, used by the two-term criterion.
    pub restriction_degree: Option<Rational>,
}

impl GradedComponent {
    pub fn rank_q(&self) -> Rational {
        Rational::from_integer(BigInt::from(self.rank))
    }

    pub fn base_slope(&self) -> Rational {
        self.deg_coeffs.coeff(0) / self.rank_q()
    }
}

/// Extension quiver: edge `(i, j)`, `i < j`, whenever the extension block
/// `γ_ij` is nonzero. Edges are kept sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Quiver {
    edges: Vec<(usize, usize)>,
}

impl Quiver {
    /// Sorted, deduplicated edge set; no other checks.
    pub fn from_edges(mut edges: Vec<(usize, usize)>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        Quiver { edges }
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// First vertex not reachable from vertex 0 in the undirected graph.
    pub fn first_unreachable(&self, vertices: usize) -> Option<usize> {
        let mut seen = vec![false; vertices];
        let mut stack = vec![0];
        if vertices == 0 {
            return None;
        }
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(i, j) in &self.edges {
                let w = if i == v {
                    j
                } else if j == v {
                    i
                } else {
                    continue;
                };
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.iter().position(|s| !s)
    }

    pub fn is_connected(&self, vertices: usize) -> bool {
        self.first_unreachable(vertices).is_none()
    }
}

/// Unvalidated instance data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawInstance {
    pub n: usize,
    pub m: usize,
    pub components: Vec<GradedComponent>,
    /// 0-based `(i, j)` pairs.
    pub edges: Vec<(usize, usize)>,
}

/// A validated instance. Immutable after construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    ambient: Ambient,
    components: Vec<GradedComponent>,
    quiver: Quiver,
}

impl Instance {
    pub fn ambient(&self) -> Ambient {
        self.ambient
    }

    pub fn components(&self) -> &[GradedComponent] {
        &self.components
    }

    pub fn quiver(&self) -> &Quiver {
        &self.quiver
    }

    /// Number of graded components `ℓ`.
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn max_degree(&self) -> usize {
        self.ambient.max_degree()
    }

    pub fn ranks(&self) -> Vec<u32> {
        self.components.iter().map(|c| c.rank).collect()
    }

    pub fn total_rank(&self) -> u32 {
        self.components.iter().map(|c| c.rank).sum()
    }

    pub fn has_restriction_data(&self) -> bool {
        self.components.iter().all(|c| c.restriction_degree.is_some())
    }

    /// Same instance with every degree polynomial multiplied by `c`.
    pub fn with_scaled_degrees(&self, c: &Rational) -> Instance {
        let mut out = self.clone();
        for comp in &mut out.components {
            comp.deg_coeffs = comp.deg_coeffs.scale(c);
            if let Some(r) = &comp.restriction_degree {
                comp.restriction_degree = Some(r * c);
            }
        }
        out
    }
}

/// Checks every standing hypothesis and returns the validated instance.
pub fn validate_instance(raw: RawInstance) -> Result<Instance, ValidationError> {
    validate_with(raw, true)
}

/// Like [`validate_instance`] but accepts a disconnected quiver, so that the
/// cone layer can report the degenerate cone itself.
pub fn validate_instance_allow_disconnected(raw: RawInstance) -> Result<Instance, ValidationError> {
    validate_with(raw, false)
}

fn validate_with(raw: RawInstance, require_connected: bool) -> Result<Instance, ValidationError> {
    let ambient = Ambient::new(raw.n, raw.m)?;
    let ell = raw.components.len();
    if ell == 0 {
        return Err(ValidationError::NoComponents);
    }
    if ell > MAX_COMPONENTS {
        return Err(ValidationError::TooManyComponents(ell));
    }
    let mut names = BTreeSet::new();
    for c in &raw.components {
        if c.rank == 0 {
            return Err(ValidationError::ZeroRank(c.name.clone()));
        }
        if c.deg_coeffs.coeffs().len() != ambient.n() {
            return Err(ValidationError::WrongLength {
                component: c.name.clone(),
                expected: ambient.n(),
                found: c.deg_coeffs.coeffs().len(),
            });
        }
        if !names.insert(c.name.as_str()) {
            return Err(ValidationError::DuplicateComponent(c.name.clone()));
        }
    }
    let base = raw.components[0].base_slope();
    for c in &raw.components[1..] {
        let s = c.base_slope();
        if s != base {
            return Err(ValidationError::UnequalBaseSlopes {
                component: c.name.clone(),
                expected: format_rational(&base),
                found: format_rational(&s),
            });
        }
    }
    for c in &raw.components {
        check_mode_consistency(ambient, c)?;
    }

    let mut seen = BTreeSet::new();
    for &(i, j) in &raw.edges {
        if i >= ell || j >= ell {
            return Err(ValidationError::EdgeOutOfRange { i, j, len: ell });
        }
        if i >= j {
            return Err(ValidationError::BadEdgeOrder { i, j });
        }
        if !seen.insert((i, j)) {
            return Err(ValidationError::DuplicateEdge { i, j });
        }
    }
    let quiver = Quiver {
        edges: seen.into_iter().collect(),
    };
    if require_connected && ell > 1 {
        if let Some(v) = quiver.first_unreachable(ell) {
            return Err(ValidationError::DisconnectedQuiver { unreachable: v });
        }
    }
    Ok(Instance {
        ambient,
        components: raw.components,
        quiver,
    })
}

/// When restriction data accompanies full degree data, the expansion must
/// have the two-term shape: nothing strictly between orders 0 and `n − m`,
/// and `−C(n−1, m−1)·deg_{L|Z}` at order `n − m`.
fn check_mode_consistency(ambient: Ambient, c: &GradedComponent) -> Result<(), ValidationError> {
    let Some(rd) = &c.restriction_degree else {
        return Ok(());
    };
    if ambient.m() == 0 {
        return Ok(());
    }
    let order = ambient.codim();
    for k in 1..order {
        let found = c.deg_coeffs.coeff(k);
        if !found.is_zero() {
            return Err(ValidationError::ModeInconsistency {
                component: c.name.clone(),
                order: k,
                expected: "0".into(),
                found: format_rational(&found),
            });
        }
    }
    let expected = -Rational::from_integer(binomial(ambient.n() - 1, ambient.m() - 1)) * rd;
    let found = c.deg_coeffs.coeff(order);
    if found != expected {
        return Err(ValidationError::ModeInconsistency {
            component: c.name.clone(),
            order,
            expected: format_rational(&expected),
            found: format_rational(&found),
        });
    }
    Ok(())
}

pub fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    (0..k).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i) / BigInt::from(i + 1))
}

/// Expands `c₁(π*𝒢)·(π*L − ε[Z'])^{n−1}` from the mixed intersection numbers
/// `numbers[k] = c₁(π*𝒢)·(π*L)^{n−1−k}·[Z']^k`.
pub fn degrees_from_intersections(n: usize, numbers: &[Rational]) -> Result<EpsPoly, ValidationError> {
    if numbers.len() != n || n == 0 {
        return Err(ValidationError::WrongLength {
            component: String::new(),
            expected: n,
            found: numbers.len(),
        });
    }
    let coeffs = numbers
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let b = Rational::from_integer(binomial(n - 1, k));
            let signed = if k % 2 == 0 { b } else { -b };
            signed * x
        })
        .collect();
    Ok(EpsPoly::new(coeffs))
}

/// Two-term degree model `deg − C(n−1, m−1)·deg_{L|Z}·ε^{n−m}`, i.e. the rank
/// times the slope expansion `μ_L − C(n−1, m−1)·μ_{L|Z}·ε^{n−m}`.
pub fn two_term_degree(
    ambient: Ambient,
    base_degree: &Rational,
    rank: u32,
    restriction_degree: Option<&Rational>,
) -> Result<EpsPoly, ValidationError> {
    if ambient.m() == 0 {
        return Err(ValidationError::PointCenter);
    }
    let rd = restriction_degree.ok_or_else(|| ValidationError::MissingRestrictionData(String::new()))?;
    if rank == 0 {
        return Err(ValidationError::ZeroRank(String::new()));
    }
    let r = Rational::from_integer(BigInt::from(rank));
    let slope = base_degree / &r;
    let restricted_slope = rd / &r;
    let c = Rational::from_integer(binomial(ambient.n() - 1, ambient.m() - 1));
    let mut mu = EpsPoly::constant(slope, ambient.max_degree());
    mu.set_coeff(ambient.codim(), -(c * restricted_slope));
    Ok(mu.scale(&r))
}
