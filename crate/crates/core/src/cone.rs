//! The weight cone σ spanned by the extension weights `e_i − e_j`, the
//! extreme rays of its dual inside the trace-free coalgebra, and the
//! position of the moment weight `−W(ε)` relative to σ as ε → 0⁺.
//!
//! Dual vectors are represented by their rank-weighted trace-free lift
//! `Σ rank_i·a_i = 0`; pairings with trace-free weights do not depend on the
//! lift.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eps::{EpsPoly, Rational, Sign};
use crate::exact;
use crate::instance::Instance;
use crate::slope::{slope_poly, SlopeOf, SubsheafIndex};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConeError {
    #[error("DegenerateCone: the weight cone is not full-dimensional (quiver is disconnected)")]
    DegenerateCone,
}

/// Character `e_i − e_j` of the torus on the extension block of edge `(i, j)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightVector {
    pub edge: (usize, usize),
    pub coords: Vec<i64>,
}

impl WeightVector {
    pub fn as_rational(&self) -> Vec<Rational> {
        self.coords
            .iter()
            .map(|&c| Rational::from_integer(BigInt::from(c)))
            .collect()
    }
}

pub fn weight_vectors(inst: &Instance) -> Vec<WeightVector> {
    inst.quiver()
        .edges()
        .iter()
        .map(|&(i, j)| {
            let mut coords = vec![0; inst.len()];
            coords[i] = 1;
            coords[j] = -1;
            WeightVector { edge: (i, j), coords }
        })
        .collect()
}

/// Extreme ray of σ^∨, normalized to `1/rank(I⁺)` on `I⁺` and
/// `−1/rank(I⁻)` on `I⁻`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualGenerator {
    pub coords: Vec<Rational>,
    pub minus: SubsheafIndex,
    pub plus: SubsheafIndex,
    /// Edges whose weight pairs to zero with this ray.
    pub tight_edges: Vec<(usize, usize)>,
}

impl DualGenerator {
    pub fn pairing(&self, v: &[Rational]) -> Rational {
        exact::dot(&self.coords, v)
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }

    /// False if `a` and `b` were already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra] = rb;
        true
    }
}

fn combinations(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let Some(pos) = (0..k).rev().find(|&p| idx[p] != p + n - k) else {
            return;
        };
        idx[pos] += 1;
        for q in pos + 1..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

fn rank_sum(ranks: &[u32], members: &[usize]) -> Rational {
    Rational::from_integer(BigInt::from(members.iter().map(|&i| u64::from(ranks[i])).sum::<u64>()))
}

/// Extreme rays of `σ^∨ = {a : a_i − a_j ≥ 0 on every edge, Σ rank_i·a_i = 0}`.
///
/// A ray is cut out by `ℓ − 2` independent tight edge constraints, i.e. a
/// spanning forest of the quiver with two trees. Forests with the same
/// vertex partition give the same line, so the partitions are enumerated
/// once each: for every split into two connected sides, the tight system of
/// two spanning trees plus the trace condition is solved exactly, oriented
/// into the cone when possible, and kept. Sorted by size of `I⁺`, then `I⁺`.
pub fn dual_cone_generators(inst: &Instance) -> Result<Vec<DualGenerator>, ConeError> {
    dual_generators_for(inst.quiver().edges(), &inst.ranks())
}

/// [`dual_cone_generators`] for a bare edge list (sorted, `i < j`) on
/// `ranks.len()` vertices.
pub fn dual_generators_for(edges: &[(usize, usize)], ranks: &[u32]) -> Result<Vec<DualGenerator>, ConeError> {
    let len = ranks.len();
    if len < 2 {
        return Ok(Vec::new());
    }
    if spanning_tree(edges, (1u64 << len) - 1).is_none() {
        return Err(ConeError::DegenerateCone);
    }
    let rank_row: Vec<Rational> = ranks.iter().map(|&r| Rational::from_integer(BigInt::from(r))).collect();
    let weights: Vec<Vec<Rational>> = edges
        .iter()
        .map(|&(i, j)| {
            let mut w = vec![Rational::zero(); len];
            w[i] = Rational::from_integer(BigInt::from(1));
            w[j] = Rational::from_integer(BigInt::from(-1));
            w
        })
        .collect();
    let inside = |v: &[Rational]| weights.iter().all(|m| exact::dot(m, v) >= Rational::zero());

    let full = (1u64 << len) - 1;
    let mut out = Vec::new();
    // vertex 0 always on side `a`, so each partition is visited once
    for a in (1..full).filter(|a| a & 1 == 1) {
        let (Some(ta), Some(tb)) = (spanning_tree(edges, a), spanning_tree(edges, full & !a)) else {
            continue;
        };
        let mut rows: Vec<Vec<Rational>> = ta.iter().chain(&tb).map(|&e| weights[e].clone()).collect();
        rows.push(rank_row.clone());
        let ns = exact::nullspace(&rows, len);
        debug_assert_eq!(ns.len(), 1, "forest with two trees leaves a line");
        let Some(ray) = ns.into_iter().next() else { continue };
        let ray = if inside(&ray) {
            ray
        } else {
            let neg: Vec<Rational> = ray.iter().map(|x| -x).collect();
            if !inside(&neg) {
                continue;
            }
            neg
        };
        out.push(normalize(ray, ranks, edges, &weights));
    }
    out.sort_by(|x, y| x.plus.len().cmp(&y.plus.len()).then_with(|| x.plus.cmp(&y.plus)));
    Ok(out)
}

/// Indices of the edges of a spanning tree of the subgraph induced on the
/// vertex mask, or `None` if that subgraph is disconnected.
fn spanning_tree(edges: &[(usize, usize)], mask: u64) -> Option<Vec<usize>> {
    let vertices: Vec<usize> = (0..64).filter(|v| mask >> v & 1 == 1).collect();
    let mut uf = UnionFind::new(64);
    let tree: Vec<usize> = edges
        .iter()
        .enumerate()
        .filter(|(_, &(i, j))| mask >> i & 1 == 1 && mask >> j & 1 == 1)
        .filter(|(_, &(i, j))| uf.union(i, j))
        .map(|(e, _)| e)
        .collect();
    (tree.len() + 1 == vertices.len()).then_some(tree)
}

fn normalize(a: Vec<Rational>, ranks: &[u32], edges: &[(usize, usize)], weights: &[Vec<Rational>]) -> DualGenerator {
    let zero = Rational::zero();
    let plus: Vec<usize> = (0..a.len()).filter(|&i| a[i] > zero).collect();
    let minus: Vec<usize> = (0..a.len()).filter(|&i| a[i] < zero).collect();
    // scale so the value on the positive block is 1/rank(I⁺)
    let target = rank_sum(ranks, &plus).recip();
    let scale = &target / &a[plus[0]];
    let coords: Vec<Rational> = a.iter().map(|x| x * &scale).collect();
    let tight_edges = edges
        .iter()
        .zip(weights)
        .filter(|(_, m)| exact::dot(m, &coords).is_zero())
        .map(|(e, _)| *e)
        .collect();
    DualGenerator {
        coords,
        minus: SubsheafIndex::new(minus),
        plus: SubsheafIndex::new(plus),
        tight_edges,
    }
}

/// Generic counterpart of [`dual_cone_generators`]: extreme rays of
/// `{x : ⟨g, x⟩ ≥ 0 for all g, ⟨normal, x⟩ = 0}` by enumerating every
/// `(dim − 2)`-subset of constraints, without using any graph structure.
/// Rays are returned scaled to unit max-norm and sorted. The cone must be
/// pointed inside the hyperplane.
pub fn dual_extreme_rays(constraints: &[Vec<Rational>], normal: &[Rational]) -> Vec<Vec<Rational>> {
    let dim = normal.len();
    if dim < 2 {
        return Vec::new();
    }
    let mut rays = BTreeSet::new();
    combinations(constraints.len(), dim - 2, |chosen| {
        let mut rows: Vec<Vec<Rational>> = chosen.iter().map(|&k| constraints[k].clone()).collect();
        rows.push(normal.to_vec());
        let ns = exact::nullspace(&rows, dim);
        if ns.len() != 1 {
            return;
        }
        for cand in [ns[0].clone(), ns[0].iter().map(|x| -x).collect()] {
            if constraints.iter().all(|g| exact::dot(g, &cand) >= Rational::zero()) {
                rays.insert(exact::ray_key(&cand));
            }
        }
    });
    rays.into_iter().collect()
}

/// Subsheaf `F = ⊕_{i ∈ I⁺} 𝒢_i` attached to a dual generator.
pub fn subsheaf_of_generator(_inst: &Instance, v: &DualGenerator) -> SubsheafIndex {
    v.plus.clone()
}

/// Number of connected components of the graph joining `i < j` whenever
/// `a_i = a_j`.
pub fn equality_graph_components(a: &[Rational]) -> usize {
    let mut uf = UnionFind::new(a.len());
    let mut comps = a.len();
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            if a[i] == a[j] && uf.union(i, j) {
                comps -= 1;
            }
        }
    }
    comps
}

/// Two-block shape: exactly two distinct values, negative on `I⁻` and
/// positive on `I⁺`, equal to `−1/rank(I⁻)` and `1/rank(I⁺)`, with `I⁺`
/// predecessor-closed.
pub fn has_two_block_shape(inst: &Instance, v: &DualGenerator) -> bool {
    let ranks = inst.ranks();
    let plus_val = rank_sum(&ranks, v.plus.members()).recip();
    let minus_val = -rank_sum(&ranks, v.minus.members()).recip();
    let values_ok = (0..inst.len()).all(|i| {
        if v.plus.contains(i) {
            v.coords[i] == plus_val
        } else {
            v.minus.contains(i) && v.coords[i] == minus_val
        }
    });
    values_ok
        && !v.plus.is_empty()
        && !v.minus.is_empty()
        && equality_graph_components(&v.coords) == 2
        && v.plus.is_predecessor_closed(inst.quiver())
}

/// `W_i = rank_i·(μ(𝒢_i) − μ(E))`, the moment map at the origin up to a
/// positive factor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MomentWeight {
    pub w: Vec<EpsPoly>,
}

impl MomentWeight {
    pub fn eval(&self, eps: &Rational) -> Vec<Rational> {
        self.w.iter().map(|p| p.eval(eps)).collect()
    }

    /// Lowest order at which some `W_i` is nonzero.
    pub fn leading_order(&self) -> Option<usize> {
        self.w.iter().filter_map(EpsPoly::leading_order).min()
    }

    pub fn pair(&self, v: &[Rational]) -> EpsPoly {
        let deg = self.w.first().map_or(0, EpsPoly::max_degree);
        EpsPoly::linear_combination(v.iter().zip(&self.w), deg)
    }
}

pub fn moment_weight(inst: &Instance) -> MomentWeight {
    let mu_e = slope_poly(inst, SlopeOf::Full);
    let w = inst
        .components()
        .iter()
        .map(|c| &c.deg_coeffs - &mu_e.scale(&c.rank_q()))
        .collect();
    MomentWeight { w }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Position {
    Interior,
    Boundary,
    Outside,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConePosition {
    pub position: Position,
    /// Violating generator (outside) or tight generator (boundary), the one
    /// with the smallest `I⁺`.
    pub certificate: Option<DualGenerator>,
    pub generators: Vec<DualGenerator>,
    /// `⟨W(ε), v⟩` for each generator, in generator order.
    pub pairings: Vec<EpsPoly>,
}

/// Classifies `−W(ε)` against σ for ε → 0⁺: interior iff every generator
/// pairs lex-negatively with `W`.
pub fn cone_position(inst: &Instance) -> Result<ConePosition, ConeError> {
    let generators = dual_cone_generators(inst)?;
    let mw = moment_weight(inst);
    let pairings: Vec<EpsPoly> = generators.iter().map(|g| mw.pair(&g.coords)).collect();
    let pick = |sign: Sign| {
        generators
            .iter()
            .zip(&pairings)
            .filter(|(_, p)| p.lex_sign() == sign)
            .map(|(g, _)| g)
            .min_by(|a, b| a.plus.cmp(&b.plus))
            .cloned()
    };
    let (position, certificate) = if let Some(g) = pick(Sign::Positive) {
        (Position::Outside, Some(g))
    } else if let Some(g) = pick(Sign::Zero) {
        (Position::Boundary, Some(g))
    } else {
        (Position::Interior, None)
    };
    Ok(ConePosition {
        position,
        certificate,
        generators,
        pairings,
    })
}

/// Position of a concrete trace-free vector `−w` against σ, using exact
/// signs of the generator pairings.
pub fn position_at(generators: &[DualGenerator], w: &[Rational]) -> Position {
    let signs: Vec<Sign> = generators.iter().map(|g| Sign::of(&g.pairing(w))).collect();
    if signs.contains(&Sign::Positive) {
        Position::Outside
    } else if signs.contains(&Sign::Zero) {
        Position::Boundary
    } else {
        Position::Interior
    }
}
