//! Shared helpers for the integration tests: a seeded random instance
//! generator, an independent double-description oracle for dual cones and a
//! finite-difference gradient.
#![allow(dead_code)]

use blowup_core::eps::{int, rat, rational_to_f64, EpsPoly, Rational};
use blowup_core::instance::{validate_instance, GradedComponent, Instance, RawInstance};
use blowup_core::slope::{enumerate_subsheaves, SlopeOf};
use num_traits::{One, Signed, Zero};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SEED_VAR: &str = "BLOWUP_STABILITY_SEED";
const DEFAULT_SEED: u64 = 0x5eed_b10c;

pub fn seed() -> u64 {
    std::env::var(SEED_VAR)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

/// Independent deterministic stream per test.
pub fn rng(stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed() ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

#[derive(Clone, Copy, Debug)]
pub struct GenConfig {
    pub max_len: usize,
    pub max_n: usize,
    pub rank_one: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_len: 6,
            max_n: 5,
            rank_one: false,
        }
    }
}

fn small_rational(rng: &mut ChaCha8Rng) -> Rational {
    let num = rng.random_range(-4i64..=4);
    let den = *[1i64, 1, 1, 2, 3].choose(rng).expect("nonempty");
    rat(num, den)
}

/// Random connected quiver: a random spanning tree oriented by index, plus
/// extra edges.
pub fn random_quiver(rng: &mut ChaCha8Rng, len: usize) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for k in 1..len {
        let other = order[rng.random_range(0..k)];
        let v = order[k];
        edges.push((v.min(other), v.max(other)));
    }
    let extra = rng.random_range(0.0..0.6);
    for i in 0..len {
        for j in i + 1..len {
            if !edges.contains(&(i, j)) && rng.random_bool(extra) {
                edges.push((i, j));
            }
        }
    }
    edges.sort_unstable();
    edges
}

fn build(n: usize, m: usize, ranks: &[u32], degs: Vec<Vec<Rational>>, edges: Vec<(usize, usize)>) -> Instance {
    let components = ranks
        .iter()
        .zip(degs)
        .enumerate()
        .map(|(k, (&rank, d))| GradedComponent {
            name: format!("G{}", k + 1),
            rank,
            deg_coeffs: EpsPoly::new(d),
            restriction_degree: None,
        })
        .collect();
    validate_instance(RawInstance {
        n,
        m,
        components,
        edges,
    })
    .expect("generated instance is valid")
}

/// Random validated instance: `ℓ ≤ max_len`, `n ≤ max_n`, equal base slopes,
/// small rational higher coefficients. About a quarter of the instances get
/// a planted equal-slope subsheaf, and a few have no higher terms at all.
pub fn random_instance(rng: &mut ChaCha8Rng, cfg: GenConfig) -> Instance {
    let len = rng.random_range(1..=cfg.max_len);
    let n = rng.random_range(2..=cfg.max_n);
    let m = rng.random_range(0..=n - 2);
    let ranks: Vec<u32> = if cfg.rank_one || rng.random_bool(0.5) {
        vec![1; len]
    } else {
        (0..len).map(|_| rng.random_range(1..=3)).collect()
    };
    let base = rat(rng.random_range(-6i64..=6), rng.random_range(1i64..=3));
    let flat = rng.random_bool(0.05);
    let mut degs: Vec<Vec<Rational>> = ranks
        .iter()
        .map(|&r| {
            let mut d = vec![&base * int(i64::from(r))];
            for _ in 1..n {
                d.push(if flat { Rational::zero() } else { small_rational(rng) });
            }
            d
        })
        .collect();
    let edges = random_quiver(rng, len);
    let inst = build(n, m, &ranks, degs.clone(), edges.clone());
    if len < 2 || !rng.random_bool(0.25) {
        return inst;
    }
    // plant μ(F_I) = μ(E) for one closed I by adjusting one member of I
    let cands = enumerate_subsheaves(&inst);
    let idx = cands[rng.random_range(0..cands.len())].clone();
    let r_i: i64 = idx.members().iter().map(|&i| i64::from(ranks[i])).sum();
    let r_c: i64 = ranks.iter().map(|&r| i64::from(r)).sum::<i64>() - r_i;
    let p = idx.members()[0];
    let adjust: Vec<Rational> = (1..n)
        .map(|k| {
            let s_i: Rational = idx.members().iter().map(|&i| degs[i][k].clone()).sum();
            let s_c: Rational = (0..len).filter(|i| !idx.contains(*i)).map(|i| degs[i][k].clone()).sum();
            rat(r_i, r_c) * s_c - s_i
        })
        .collect();
    for (d, a) in degs[p][1..].iter_mut().zip(adjust) {
        *d += a;
    }
    build(n, m, &ranks, degs, edges)
}

pub fn corpus(count: usize, stream: u64, cfg: GenConfig) -> Vec<Instance> {
    let mut r = rng(stream);
    (0..count).map(|_| random_instance(&mut r, cfg)).collect()
}

/// Random positive rational magnitudes, one per edge.
pub fn random_b0(rng: &mut ChaCha8Rng, edges: usize) -> Vec<Rational> {
    (0..edges)
        .map(|_| rat(rng.random_range(1i64..=8), rng.random_range(1i64..=4)))
        .collect()
}

// ---------------------------------------------------------------------------
// double description

fn rank_of(rows: &[Vec<Rational>], ncols: usize) -> usize {
    let mut m: Vec<Vec<Rational>> = rows.to_vec();
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..m.len()).find(|&k| !m[k][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let pivot = m[r].clone();
        for (k, row) in m.iter_mut().enumerate() {
            if k != r && !row[c].is_zero() {
                let f = &row[c] / &pivot[c];
                for (x, y) in row[c..ncols].iter_mut().zip(&pivot[c..ncols]) {
                    *x -= &f * y;
                }
            }
        }
        r += 1;
        if r == m.len() {
            break;
        }
    }
    r
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves a square nonsingular system by Gauss–Jordan.
fn solve_square(a: &[Vec<Rational>], b: &[Rational]) -> Vec<Rational> {
    let n = a.len();
    let mut m: Vec<Vec<Rational>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&k| !m[k][c].is_zero()).expect("nonsingular");
        m.swap(c, p);
        let inv = m[c][c].recip();
        for x in m[c].iter_mut() {
            *x *= &inv;
        }
        let pivot = m[c].clone();
        for (k, row) in m.iter_mut().enumerate() {
            if k != c && !row[c].is_zero() {
                let f = row[c].clone();
                for (x, y) in row.iter_mut().zip(&pivot) {
                    *x -= &f * y;
                }
            }
        }
    }
    m.into_iter().map(|r| r[n].clone()).collect()
}

fn normalize_ray(v: &[Rational]) -> Vec<Rational> {
    let m = v.iter().map(|x| x.abs()).max().unwrap_or_else(Rational::zero);
    v.iter().map(|x| x / &m).collect()
}

/// Extreme rays of the pointed cone `{y ∈ ℚ^d : g·y ≥ 0 for g in rows}` by the
/// double-description method, starting from a simplicial cone on `d`
/// independent rows. Rays are scaled to unit max-norm and sorted.
pub fn dd_extreme_rays(rows: &[Vec<Rational>], d: usize) -> Vec<Vec<Rational>> {
    // choose d independent rows
    let mut basis: Vec<usize> = Vec::new();
    for (k, _) in rows.iter().enumerate() {
        let mut trial: Vec<Vec<Rational>> = basis.iter().map(|&b| rows[b].clone()).collect();
        trial.push(rows[k].clone());
        if rank_of(&trial, d) == trial.len() {
            basis.push(k);
        }
        if basis.len() == d {
            break;
        }
    }
    assert_eq!(basis.len(), d, "cone must be pointed");
    let a: Vec<Vec<Rational>> = basis.iter().map(|&b| rows[b].clone()).collect();
    // rays of {A y ≥ 0}: columns of A^{-1}
    let mut rays: Vec<Vec<Rational>> = (0..d)
        .map(|k| {
            let e: Vec<Rational> = (0..d)
                .map(|i| if i == k { Rational::one() } else { Rational::zero() })
                .collect();
            solve_square(&a, &e)
        })
        .collect();
    let mut processed: Vec<Vec<Rational>> = a.clone();
    for (k, g) in rows.iter().enumerate() {
        if basis.contains(&k) {
            continue;
        }
        let vals: Vec<Rational> = rays.iter().map(|r| dot(g, r)).collect();
        let mut next: Vec<Vec<Rational>> = rays
            .iter()
            .zip(&vals)
            .filter(|(_, v)| !v.is_negative())
            .map(|(r, _)| r.clone())
            .collect();
        for (p, vp) in rays.iter().zip(&vals).filter(|(_, v)| v.is_positive()) {
            for (q, vq) in rays.iter().zip(&vals).filter(|(_, v)| v.is_negative()) {
                let comb: Vec<Rational> = p.iter().zip(q).map(|(x, y)| x * (-vq) + y * vp).collect();
                next.push(comb);
            }
        }
        processed.push(g.clone());
        // keep extreme rays only: tight constraints of rank d − 1
        let mut kept: Vec<Vec<Rational>> = Vec::new();
        for r in next {
            if r.iter().all(Zero::is_zero) {
                continue;
            }
            let tight: Vec<Vec<Rational>> = processed.iter().filter(|h| dot(h, &r).is_zero()).cloned().collect();
            if rank_of(&tight, d) + 1 != d {
                continue;
            }
            let key = normalize_ray(&r);
            if !kept.contains(&key) {
                kept.push(key);
            }
        }
        rays = kept;
    }
    let mut out: Vec<Vec<Rational>> = rays.iter().map(|r| normalize_ray(r)).collect();
    out.sort();
    out.dedup();
    out
}

/// Extreme rays of `σ^∨` in trace-free coordinates, via [`dd_extreme_rays`]
/// on the first `ℓ − 1` coordinates (the last is eliminated by the trace).
pub fn dual_rays_oracle(edges: &[(usize, usize)], ranks: &[u32]) -> Vec<Vec<Rational>> {
    let len = ranks.len();
    if len < 2 {
        return Vec::new();
    }
    let d = len - 1;
    let last = Rational::from_integer(ranks[d].into());
    // a_last = −Σ_{i<d} r_i y_i / r_last
    let lift = |i: usize| -> Vec<Rational> {
        if i < d {
            (0..d)
                .map(|k| if k == i { Rational::one() } else { Rational::zero() })
                .collect()
        } else {
            (0..d)
                .map(|k| -Rational::from_integer(ranks[k].into()) / &last)
                .collect()
        }
    };
    let rows: Vec<Vec<Rational>> = edges
        .iter()
        .map(|&(i, j)| lift(i).iter().zip(lift(j)).map(|(a, b)| a - b).collect())
        .collect();
    let mut out: Vec<Vec<Rational>> = dd_extreme_rays(&rows, d)
        .into_iter()
        .map(|y| {
            let mut a = y.clone();
            a.push(dot(&lift(d), &y));
            normalize_ray(&a)
        })
        .collect();
    out.sort();
    out
}

pub fn ray_set(vectors: impl Iterator<Item = Vec<Rational>>) -> Vec<Vec<Rational>> {
    let mut out: Vec<Vec<Rational>> = vectors.map(|v| normalize_ray(&v)).collect();
    out.sort();
    out
}

// ---------------------------------------------------------------------------
// numerics

/// Central differences of `f` at `x` with step `h`.
pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            (f(&xp) - f(&xm)) / (2.0 * h)
        })
        .collect()
}

pub fn to_f64s(v: &[Rational]) -> Vec<f64> {
    v.iter().map(rational_to_f64).collect()
}

/// The slope polynomial of the full object, for sanity output.
pub fn full_slope(inst: &Instance) -> EpsPoly {
    blowup_core::slope::slope_poly(inst, SlopeOf::Full)
}
