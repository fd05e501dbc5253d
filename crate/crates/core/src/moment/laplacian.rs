//! Grounded solves with weighted graph Laplacians.
//!
//! Elimination keeps every Schur complement a Laplacian and computes each
//! pivot as a sum of positive edge weights, so no cancellation occurs even
//! when the weights span many orders of magnitude.

/// Solves `L y = rhs` where `L = Σ w_e (e_i − e_j)(e_i − e_j)ᵀ`, with `y` fixed
/// to 0 at `ground`. `rhs` must sum to zero and the graph must be
/// connected. Returns `None` if a pivot vanishes (disconnected graph or
/// underflowed weights).
pub fn solve_grounded(
    n: usize,
    edges: &[(usize, usize)],
    weights: &[f64],
    rhs: &[f64],
    ground: usize,
) -> Option<Vec<f64>> {
    debug_assert_eq!(edges.len(), weights.len());
    let mut a = vec![vec![0.0f64; n]; n];
    for (&(i, j), &w) in edges.iter().zip(weights) {
        a[i][j] += w;
        a[j][i] += w;
    }
    let mut b = rhs.to_vec();
    let mut alive = vec![true; n];
    let order: Vec<usize> = (0..n).filter(|&k| k != ground).collect();
    let mut pivots = Vec::with_capacity(order.len());
    for &k in &order {
        alive[k] = false;
        let d: f64 = (0..n).filter(|&j| alive[j]).map(|j| a[k][j]).sum();
        if !d.is_finite() || d <= 0.0 {
            return None;
        }
        for i in 0..n {
            if !alive[i] || a[i][k] == 0.0 {
                continue;
            }
            let f = a[i][k] / d;
            b[i] += f * b[k];
            for j in 0..n {
                if alive[j] && j != i {
                    let add = f * a[k][j];
                    a[i][j] += add;
                }
            }
        }
        pivots.push(d);
    }
    let mut y = vec![0.0; n];
    let mut alive = vec![false; n];
    alive[ground] = true;
    for (&k, &d) in order.iter().zip(&pivots).rev() {
        let s: f64 = (0..n).filter(|&j| alive[j]).map(|j| a[k][j] * y[j]).sum();
        y[k] = (b[k] + s) / d;
        alive[k] = true;
    }
    Some(y)
}
