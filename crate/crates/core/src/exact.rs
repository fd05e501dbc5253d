//! Small dense linear algebra over exact rationals.

use num_traits::{One, Zero};

use crate::eps::Rational;

/// Reduced row echelon form in place; returns the pivot columns.
pub fn rref(rows: &mut [Vec<Rational>], ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..ncols {
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len()).find(|&k| !rows[k][col].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][col].recip();
        for x in rows[r].iter_mut() {
            *x *= &inv;
        }
        let pivot_row = rows[r].clone();
        for (k, row) in rows.iter_mut().enumerate() {
            if k != r && !row[col].is_zero() {
                let f = row[col].clone();
                for (x, p) in row.iter_mut().zip(&pivot_row).take(ncols) {
                    *x -= &f * p;
                }
            }
        }
        pivots.push(col);
        r += 1;
    }
    pivots
}

pub fn rank(rows: &[Vec<Rational>], ncols: usize) -> usize {
    let mut m = rows.to_vec();
    rref(&mut m, ncols).len()
}

/// Basis of `{x : rows·x = 0}`, one vector per free column.
pub fn nullspace(rows: &[Vec<Rational>], ncols: usize) -> Vec<Vec<Rational>> {
    let mut m = rows.to_vec();
    let pivots = rref(&mut m, ncols);
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Rational::zero(); ncols];
            v[f] = Rational::one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[row][f].clone();
            }
            v
        })
        .collect()
}

pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scales a nonzero vector so that its largest absolute entry is 1; used to
/// compare rays.
pub fn ray_key(v: &[Rational]) -> Vec<Rational> {
    let m = v
        .iter()
        .map(|x| if x < &Rational::zero() { -x.clone() } else { x.clone() })
        .max()
        .unwrap_or_else(Rational::zero);
    if m.is_zero() {
        return v.to_vec();
    }
    v.iter().map(|x| x / &m).collect()
}
