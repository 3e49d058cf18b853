//! Phase-1 simplex for feasibility of `A x = b, x >= 0`.
//!
//! Dense tableau with one artificial variable per row and Bland's rule for
//! both the entering and the leaving variable.

use serde::{Deserialize, Serialize};

/// Result of a phase-1 solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase1Outcome {
    /// Minimum of the summed artificial variables; zero exactly when feasible.
    pub gap: f64,
    /// Primal point of the original variables at the optimum.
    pub x: Vec<f64>,
    pub pivots: usize,
}

impl Phase1Outcome {
    pub fn feasible(&self, tol: f64) -> bool {
        self.gap <= tol
    }
}

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-12;

/// Minimizes `sum_i a_i` subject to `A x + a = b`, `x, a >= 0`.
///
/// `a` holds the rows of `A`; rows with negative `b_i` are negated first.
pub fn phase1(a: &[Vec<f64>], b: &[f64]) -> Phase1Outcome {
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m];
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sign * a[i][j];
        }
        t[i][n + i] = 1.0;
        t[i][width - 1] = sign * b[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    // Reduced costs of the phase-1 objective: c_j - z_j with c = 1 on artificials.
    let mut cost = vec![0.0; width];
    for row in &t {
        for j in 0..n {
            cost[j] -= row[j];
        }
        cost[width - 1] -= row[width - 1];
    }
    let mut pivots = 0;
    let max_pivots = 50 * (n + m) + 1000;
    while pivots < max_pivots {
        let Some(enter) = (0..n + m).find(|&j| cost[j] < -COST_TOL) else {
            break;
        };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            let coef = t[i][enter];
            if coef > PIVOT_TOL {
                let ratio = t[i][width - 1] / coef;
                let better = match leave {
                    None => true,
                    Some(l) => ratio < best - 1e-15 || (ratio <= best + 1e-15 && basis[i] < basis[l]),
                };
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(r) = leave else {
            // Unbounded direction cannot occur for a phase-1 objective bounded below by 0.
            break;
        };
        let piv = t[r][enter];
        for v in t[r].iter_mut() {
            *v /= piv;
        }
        let pivot_row = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != r {
                let f = row[enter];
                if f != 0.0 {
                    for (v, p) in row.iter_mut().zip(&pivot_row) {
                        *v -= f * p;
                    }
                }
            }
        }
        let f = cost[enter];
        for (v, p) in cost.iter_mut().zip(&pivot_row) {
            *v -= f * p;
        }
        basis[r] = enter;
        pivots += 1;
    }
    let mut x = vec![0.0; n];
    let mut gap = 0.0;
    for (i, &bv) in basis.iter().enumerate() {
        let val = t[i][width - 1].max(0.0);
        if bv < n {
            x[bv] = val;
        } else {
            gap += val;
        }
    }
    Phase1Outcome { gap, x, pivots }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feasible_simplex_point() {
        // x + y + z = 1, x - y = 0.2
        let a = vec![vec![1.0, 1.0, 1.0], vec![1.0, -1.0, 0.0]];
        let out = phase1(&a, &[1.0, 0.2]);
        assert!(out.feasible(1e-12));
        assert!((out.x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((out.x[0] - out.x[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn infeasible_system() {
        // x + y = 1, x + y = 2
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let out = phase1(&a, &[1.0, 2.0]);
        assert!((out.gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_rhs() {
        // -x = -0.5
        let out = phase1(&[vec![-1.0]], &[-0.5]);
        assert!(out.feasible(1e-12));
        assert!((out.x[0] - 0.5).abs() < 1e-15);
    }
}
