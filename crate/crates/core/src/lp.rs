//! Dense two-phase simplex over exact rationals with Bland's rule.
//!
//! Solves `max c·x  s.t.  A x = b, x ≥ 0`. Intended for the tiny programs
//! that arise from quivers; no attempt is made at sparsity.

use num_traits::{Signed, Zero};

use crate::eps::Rational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { x: Vec<Rational>, value: Rational },
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// `rows[r]` holds the coefficients followed by the right-hand side.
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> &Rational {
        &self.rows[r][self.ncols]
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let inv = self.rows[r][col].recip();
        for x in self.rows[r].iter_mut() {
            *x *= &inv;
        }
        for k in 0..self.rows.len() {
            if k == r || self.rows[k][col].is_zero() {
                continue;
            }
            let f = self.rows[k][col].clone();
            for c in 0..=self.ncols {
                let delta = &f * &self.rows[r][c];
                self.rows[k][c] -= delta;
            }
        }
        self.basis[r] = col;
    }

    /// Maximizes `c` over columns `allowed`; returns false if unbounded.
    fn optimize(&mut self, c: &[Rational], allowed: usize) -> bool {
        loop {
            // Bland: lowest-index improving column
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let mut reduced = c[j].clone();
                for (r, &b) in self.basis.iter().enumerate() {
                    reduced -= &c[b] * &self.rows[r][j];
                }
                reduced.is_positive()
            });
            let Some(col) = entering else { return true };
            let mut best: Option<(Rational, usize, usize)> = None;
            for r in 0..self.rows.len() {
                let a = &self.rows[r][col];
                if !a.is_positive() {
                    continue;
                }
                let ratio = self.rhs(r) / a;
                let better = match &best {
                    None => true,
                    Some((q, _, b)) => ratio < *q || (ratio == *q && self.basis[r] < *b),
                };
                if better {
                    best = Some((ratio, r, self.basis[r]));
                }
            }
            let Some((_, r, _)) = best else { return false };
            self.pivot(r, col);
        }
    }

    fn solution(&self, n: usize) -> Vec<Rational> {
        let mut x = vec![Rational::zero(); n];
        for (r, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = self.rhs(r).clone();
            }
        }
        x
    }
}

pub fn maximize(a: &[Vec<Rational>], b: &[Rational], c: &[Rational]) -> LpOutcome {
    let n = c.len();
    let m = a.len();
    assert_eq!(b.len(), m, "one right-hand side per row");
    let ncols = n + m;
    let mut rows = Vec::with_capacity(m);
    for (r, (row, rhs)) in a.iter().zip(b).enumerate() {
        assert_eq!(row.len(), n, "row width");
        let flip = rhs.is_negative();
        let mut t: Vec<Rational> = row.iter().map(|x| if flip { -x } else { x.clone() }).collect();
        t.extend((0..m).map(|k| Rational::from_integer(u8::from(k == r).into())));
        t.push(if flip { -rhs } else { rhs.clone() });
        rows.push(t);
    }
    let mut tab = Tableau {
        rows,
        basis: (n..ncols).collect(),
        ncols,
    };

    // phase 1: maximize −Σ artificials
    let mut phase1 = vec![Rational::zero(); ncols];
    for x in &mut phase1[n..] {
        *x = -Rational::from_integer(1.into());
    }
    tab.optimize(&phase1, ncols);
    let infeas: Rational = tab
        .basis
        .iter()
        .enumerate()
        .filter(|(_, &bv)| bv >= n)
        .map(|(r, _)| tab.rhs(r).clone())
        .sum();
    if infeas.is_positive() {
        return LpOutcome::Infeasible;
    }
    // drive zero-level artificials out of the basis; drop redundant rows
    let mut r = 0;
    while r < tab.rows.len() {
        if tab.basis[r] >= n {
            if let Some(col) = (0..n).find(|&j| !tab.rows[r][j].is_zero()) {
                tab.pivot(r, col);
            } else {
                tab.rows.remove(r);
                tab.basis.remove(r);
                continue;
            }
        }
        r += 1;
    }

    let mut phase2 = c.to_vec();
    phase2.extend((0..m).map(|_| Rational::zero()));
    if !tab.optimize(&phase2, n) {
        return LpOutcome::Unbounded;
    }
    let x = tab.solution(n);
    let value = x.iter().zip(c).map(|(xi, ci)| xi * ci).sum();
    LpOutcome::Optimal { x, value }
}
