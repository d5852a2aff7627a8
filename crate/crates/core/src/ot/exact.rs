//! Exact OT for small square problems with uniform marginals, by enumerating
//! permutations. With uniform weights and `n = m` an optimal coupling can
//! always be chosen among permutation matrices, so this is exact; it exists
//! as a reference oracle for the entropic solver.

use ndarray::Array2;

use super::cost::CostMatrix;
use super::sinkhorn::{Coupling, TransportResult};
use crate::error::{Error, Result};

/// Largest problem size the enumeration accepts (8! = 40320 permutations).
pub const EXACT_MAX_N: usize = 8;

pub fn exact_ot_uniform(c: &CostMatrix) -> Result<TransportResult> {
    let (n, m) = (c.rows(), c.cols());
    if n != m {
        return Err(Error::Shape(format!("exact OT needs a square cost, got {n}x{m}")));
    }
    if n > EXACT_MAX_N {
        return Err(Error::TooLarge { n, max: EXACT_MAX_N });
    }
    let cv = c.view();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_sum = f64::INFINITY;
    loop {
        let s: f64 = perm.iter().enumerate().map(|(i, &j)| cv[[i, j]]).sum();
        // Strict comparison keeps the lexicographically first optimum.
        if s < best_sum {
            best_sum = s;
            best.copy_from_slice(&perm);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    let cost = best_sum / n as f64;
    let mut plan = Array2::zeros((n, n));
    for (i, &j) in best.iter().enumerate() {
        plan[[i, j]] = 1.0 / n as f64;
    }
    Ok(TransportResult {
        linear_cost: cost,
        regularized_objective: cost,
        coupling: Some(Coupling {
            matrix: plan,
            row_residual: 0.0,
            col_residual: 0.0,
        }),
        iterations: 0,
        converged: true,
        marginal_residual: 0.0,
        effective_epsilon: 0.0,
        cost_scale: 1.0,
        debiased: false,
    })
}

/// Optimal assignment (row `i` goes to column `perm[i]`) found by the same
/// enumeration.
pub fn exact_assignment(c: &CostMatrix) -> Result<Vec<usize>> {
    let res = exact_ot_uniform(c)?;
    let plan = res.coupling.expect("exact solver always returns a plan").matrix;
    Ok(plan
        .outer_iter()
        .map(|row| row.iter().position(|v| *v > 0.0).expect("permutation row"))
        .collect())
}

/// Advances `v` to the next permutation in lexicographic order; returns
/// false after the last one.
fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}
