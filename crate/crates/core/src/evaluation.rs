//! Exact 2-Wasserstein distance between equal-size particle clouds.
//!
//! With uniform weights and equal sizes the optimal coupling is a
//! permutation, so `W_2^2 = (1/N) min_pi sum_i ||x_i - y_pi(i)||^2` is a
//! linear assignment problem, solved here with the O(N^3) shortest
//! augmenting path form of the Hungarian algorithm.

use crate::error::{check_dim, invalid, Error, Result};
use crate::metrics::EmpiricalDistribution;

/// Largest cloud size accepted by [`wasserstein2_exact`].
pub const MAX_EXACT_SIZE: usize = 1024;

/// An optimal matching of rows to columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `permutation[i]` is the column assigned to row `i`.
    pub permutation: Vec<usize>,
    pub cost: f64,
}

/// Minimum-cost perfect matching on a square cost matrix.
pub fn linear_assignment(cost: &[Vec<f64>]) -> Result<Assignment> {
    let n = cost.len();
    if n == 0 {
        return Err(invalid("empty cost matrix"));
    }
    for row in cost {
        check_dim(n, row.len())?;
        if row.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("assignment cost".into()));
        }
    }

    // 1-based potentials; column 0 is the virtual start of each augmenting path.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = f64::INFINITY;
            let mut next = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[r - 1][col - 1] - u[r] - v[col];
                if reduced < min_to[col] {
                    min_to[col] = reduced;
                    way[col] = col0;
                }
                if min_to[col] < delta {
                    delta = min_to[col];
                    next = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_to[col] -= delta;
                }
            }
            col0 = next;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut permutation = vec![0; n];
    for col in 1..=n {
        permutation[owner[col] - 1] = col - 1;
    }
    let cost = permutation.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Ok(Assignment { permutation, cost })
}

/// `( (1/N) min_pi sum_i ||x_i - y_pi(i)||^2 )^(1/2)` for clouds of equal size.
/// Sample weights are ignored; both clouds are treated as uniform.
pub fn wasserstein2_exact(x: &EmpiricalDistribution, y: &EmpiricalDistribution) -> Result<f64> {
    let matching = optimal_matching(x, y)?;
    Ok((matching.cost / x.len() as f64).sqrt())
}

/// The optimal assignment behind [`wasserstein2_exact`], with squared-distance cost.
pub fn optimal_matching(x: &EmpiricalDistribution, y: &EmpiricalDistribution) -> Result<Assignment> {
    check_dim(x.dim(), y.dim())?;
    if x.len() != y.len() {
        return Err(invalid(format!("cloud sizes differ: {} vs {}", x.len(), y.len())));
    }
    if x.len() > MAX_EXACT_SIZE {
        return Err(Error::BudgetExceeded {
            n: x.len(),
            max: MAX_EXACT_SIZE,
        });
    }
    let cost: Vec<Vec<f64>> = x
        .points()
        .map(|a| {
            y.points()
                .map(|b| a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum())
                .collect()
        })
        .collect();
    linear_assignment(&cost)
}
