//! Entropy-regularized optimal transport solved by Sinkhorn-Knopp iterations
//! carried out entirely on dual potentials (log domain).
//!
//! For a cost `C`, marginals `p`, `q` and regularization `eps`, the solver
//! minimizes `<G, C> + eps * sum_ij G_ij (log G_ij - 1)` over couplings `G`
//! with row sums `p` and column sums `q`. The optimal coupling has the form
//! `G_ij = exp((f_i + g_j - C_ij) / eps)`; the potentials `f`, `g` are updated
//! alternately with log-sum-exp reductions so that no kernel entry is ever
//! materialized outside a stabilized exponent.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::cost::CostMatrix;
use super::measure::validate_probability;
use crate::error::{Error, Result};

/// Ratio between consecutive epsilons of the annealing schedule, which starts
/// at the largest cost entry.
const ANNEAL_FACTOR: f64 = 0.5;
/// Potential updates spent on each intermediate annealing stage.
const ANNEAL_STAGE_ITERATIONS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Entropic regularization strength.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Stopping threshold on the larger of the two marginal L1 residuals.
    pub tolerance: f64,
    /// Report Sinkhorn divergences instead of raw entropic costs where a
    /// caller offers both.
    pub debiased: bool,
    pub keep_coupling: bool,
    /// Solve against `C / max(C)`; equivalent to scaling epsilon by `max(C)`.
    pub normalize_cost: bool,
    /// Warm-start through a geometric schedule of decreasing epsilon.
    pub annealing: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.25,
            max_iterations: 1000,
            tolerance: 1e-6,
            debiased: true,
            keep_coupling: false,
            normalize_cost: false,
            annealing: true,
        }
    }
}

impl SolverConfig {
    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be a positive finite number, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tolerance must be a positive finite number, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// A transport plan together with its marginal violations.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub matrix: Array2<f64>,
    /// `||G 1 - p||_1`
    pub row_residual: f64,
    /// `||G^T 1 - q||_1`
    pub col_residual: f64,
}

impl Coupling {
    fn transposed(self) -> Self {
        Coupling {
            matrix: self.matrix.reversed_axes().as_standard_layout().into_owned(),
            row_residual: self.col_residual,
            col_residual: self.row_residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportResult {
    /// `<G, C>`
    pub linear_cost: f64,
    /// `<G, C> + eps * H(G)`, or a debiased combination of such terms when
    /// `debiased` is set.
    pub regularized_objective: f64,
    pub coupling: Option<Coupling>,
    pub iterations: usize,
    pub converged: bool,
    /// Larger of the row and column L1 marginal residuals.
    pub marginal_residual: f64,
    /// Epsilon actually used by the final solve (after cost normalization).
    pub effective_epsilon: f64,
    /// Divisor applied to the cost when normalization is on, else 1.
    pub cost_scale: f64,
    pub debiased: bool,
}

impl TransportResult {
    /// The scalar distance carried into distance matrices.
    pub fn value(&self) -> f64 {
        self.regularized_objective
    }
}

/// Solves entropic OT between `p` and `q` under cost `c`.
///
/// Non-convergence is reported through `converged = false`, never as an
/// error. `sinkhorn(C^T, q, p)` returns exactly the transpose of
/// `sinkhorn(C, p, q)`: both calls canonicalize to the same orientation.
pub fn sinkhorn(
    c: &CostMatrix,
    p: ArrayView1<'_, f64>,
    q: ArrayView1<'_, f64>,
    cfg: &SolverConfig,
) -> Result<TransportResult> {
    let scale = if cfg.normalize_cost && c.max() > 0.0 {
        c.max()
    } else {
        1.0
    };
    sinkhorn_with_scale(c, p, q, cfg, scale)
}

/// Like [`sinkhorn`] with an explicit cost scale; the solve uses
/// `epsilon * scale` as its regularization.
pub(crate) fn sinkhorn_with_scale(
    c: &CostMatrix,
    p: ArrayView1<'_, f64>,
    q: ArrayView1<'_, f64>,
    cfg: &SolverConfig,
    scale: f64,
) -> Result<TransportResult> {
    cfg.validate()?;
    if p.len() != c.rows() {
        return Err(Error::DimensionMismatch {
            context: "sinkhorn row marginal".into(),
            expected: c.rows(),
            found: p.len(),
        });
    }
    if q.len() != c.cols() {
        return Err(Error::DimensionMismatch {
            context: "sinkhorn column marginal".into(),
            expected: c.cols(),
            found: q.len(),
        });
    }
    validate_probability(p, "row marginal")?;
    validate_probability(q, "column marginal")?;

    let eps = cfg.epsilon * scale;
    if should_transpose(c.view(), p, q) {
        let ct = c.view().t().as_standard_layout().into_owned();
        let mut res = solve_dropping_zeros(ct.view(), q, p, eps, cfg)?;
        res.coupling = res.coupling.map(Coupling::transposed);
        res.cost_scale = scale;
        Ok(res)
    } else {
        let mut res = solve_dropping_zeros(c.view(), p, q, eps, cfg)?;
        res.cost_scale = scale;
        Ok(res)
    }
}

/// Whether `(q, p, C^T)` precedes `(p, q, C)` in a fixed total order.
fn should_transpose(c: ArrayView2<'_, f64>, p: ArrayView1<'_, f64>, q: ArrayView1<'_, f64>) -> bool {
    use std::cmp::Ordering;
    let (n, m) = c.dim();
    if n != m {
        return n > m;
    }
    let lex = |a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    };
    match lex(q, p) {
        Ordering::Less => return true,
        Ordering::Greater => return false,
        Ordering::Equal => {}
    }
    for i in 0..n {
        for j in 0..n {
            match c[[j, i]].total_cmp(&c[[i, j]]) {
                Ordering::Less => return true,
                Ordering::Greater => return false,
                Ordering::Equal => {}
            }
        }
    }
    false
}

fn solve_dropping_zeros(
    c: ArrayView2<'_, f64>,
    p: ArrayView1<'_, f64>,
    q: ArrayView1<'_, f64>,
    eps: f64,
    cfg: &SolverConfig,
) -> Result<TransportResult> {
    let rows: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0).collect();
    let cols: Vec<usize> = (0..q.len()).filter(|&j| q[j] > 0.0).collect();
    if rows.len() == p.len() && cols.len() == q.len() {
        let c = c.as_standard_layout();
        return Ok(solve_log_domain(c.view(), p, q, eps, cfg));
    }
    let sub_c = Array2::from_shape_fn((rows.len(), cols.len()), |(i, j)| c[[rows[i], cols[j]]]);
    let sub_p: Array1<f64> = rows.iter().map(|&i| p[i]).collect();
    let sub_q: Array1<f64> = cols.iter().map(|&j| q[j]).collect();
    let mut res = solve_log_domain(sub_c.view(), sub_p.view(), sub_q.view(), eps, cfg);
    if let Some(sub) = res.coupling.take() {
        let mut full = Array2::zeros(c.dim());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                full[[i, j]] = sub.matrix[[a, b]];
            }
        }
        res.coupling = Some(Coupling { matrix: full, ..sub });
    }
    Ok(res)
}

fn epsilon_schedule(c_max: f64, target: f64, annealing: bool) -> Vec<f64> {
    let mut stages = Vec::new();
    if annealing {
        let mut e = c_max;
        while e > target {
            stages.push(e);
            e *= ANNEAL_FACTOR;
        }
    }
    stages.push(target);
    stages
}

/// Self-transport problems (`p == q`, `C == C^T` exactly) have a symmetric
/// optimum `f == g`. Alternating updates approach it slowly when the kernel is
/// close to the identity, so these use an averaged symmetric update instead.
fn is_symmetric_problem(c: ArrayView2<'_, f64>, p: ArrayView1<'_, f64>, q: ArrayView1<'_, f64>) -> bool {
    let n = c.nrows();
    if n != c.ncols() || p != q {
        return false;
    }
    (0..n).all(|i| (0..i).all(|j| c[[i, j]].to_bits() == c[[j, i]].to_bits()))
}

/// Core iteration on strictly positive marginals and a row-major cost.
fn solve_log_domain(
    c: ArrayView2<'_, f64>,
    p: ArrayView1<'_, f64>,
    q: ArrayView1<'_, f64>,
    eps: f64,
    cfg: &SolverConfig,
) -> TransportResult {
    let (n, m) = c.dim();
    let cs = c.as_slice().expect("row-major cost");
    let log_p: Vec<f64> = p.iter().map(|w| w.ln()).collect();
    let log_q: Vec<f64> = q.iter().map(|w| w.ln()).collect();
    let c_max = cs.iter().copied().fold(0.0, f64::max);
    let symmetric = is_symmetric_problem(c, p, q);

    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut f_next = vec![0.0; n];
    let mut col_max = vec![0.0; m];
    let mut col_sum = vec![0.0; m];
    let mut row_buf = vec![0.0; m];

    let schedule = epsilon_schedule(c_max, eps, cfg.annealing);
    let mut iterations = 0;
    'stages: for (stage, &e) in schedule.iter().enumerate() {
        let last = stage + 1 == schedule.len();
        let inv = 1.0 / e;
        let mut stage_updates = 0;
        loop {
            if iterations >= cfg.max_iterations {
                break 'stages;
            }
            if !last && stage_updates >= ANNEAL_STAGE_ITERATIONS {
                break;
            }
            // f-update; the same reductions give the row residual of the
            // current plan, whose columns are exact after the last g-update.
            let mut residual = 0.0;
            for i in 0..n {
                let row = &cs[i * m..(i + 1) * m];
                let mut mx = f64::NEG_INFINITY;
                for j in 0..m {
                    let v = (g[j] - row[j]) * inv;
                    row_buf[j] = v;
                    mx = mx.max(v);
                }
                let s: f64 = row_buf.iter().map(|v| (v - mx).exp()).sum();
                let lse = mx + s.ln();
                f_next[i] = e * (log_p[i] - lse);
                residual += p[i] * (1.0 - ((f[i] - f_next[i]) * inv).exp()).abs();
            }
            if stage_updates > 0 && residual <= cfg.tolerance {
                if last {
                    break 'stages;
                }
                break;
            }
            if symmetric {
                // Averaged fixed-point step on the shared potential g = f.
                for i in 0..n {
                    f[i] = 0.5 * (f[i] + f_next[i]);
                }
                g.copy_from_slice(&f);
                iterations += 1;
                stage_updates += 1;
                continue;
            }
            std::mem::swap(&mut f, &mut f_next);

            col_max.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
            for i in 0..n {
                let row = &cs[i * m..(i + 1) * m];
                for j in 0..m {
                    let v = (f[i] - row[j]) * inv;
                    if v > col_max[j] {
                        col_max[j] = v;
                    }
                }
            }
            col_sum.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..n {
                let row = &cs[i * m..(i + 1) * m];
                for j in 0..m {
                    col_sum[j] += ((f[i] - row[j]) * inv - col_max[j]).exp();
                }
            }
            for j in 0..m {
                g[j] = e * (log_q[j] - (col_max[j] + col_sum[j].ln()));
            }
            iterations += 1;
            stage_updates += 1;
        }
    }

    // Primal quantities at the target epsilon.
    let inv = 1.0 / eps;
    let mut plan = Array2::<f64>::zeros((n, m));
    let mut linear = 0.0;
    let mut entropy = 0.0;
    let mut row_res = 0.0;
    let mut col_acc = vec![0.0; m];
    for i in 0..n {
        let row = &cs[i * m..(i + 1) * m];
        let mut row_acc = 0.0;
        for j in 0..m {
            let log_gamma = (f[i] + g[j] - row[j]) * inv;
            let gamma = log_gamma.exp();
            if gamma > 0.0 {
                linear += gamma * row[j];
                entropy += gamma * (log_gamma - 1.0);
            }
            row_acc += gamma;
            col_acc[j] += gamma;
            plan[[i, j]] = gamma;
        }
        row_res += (row_acc - p[i]).abs();
    }
    let col_res: f64 = col_acc.iter().zip(q.iter()).map(|(a, b)| (a - b).abs()).sum();
    let marginal_residual = row_res.max(col_res);

    TransportResult {
        linear_cost: linear,
        regularized_objective: linear + eps * entropy,
        coupling: cfg.keep_coupling.then(|| Coupling {
            matrix: plan,
            row_residual: row_res,
            col_residual: col_res,
        }),
        iterations,
        converged: marginal_residual <= cfg.tolerance,
        marginal_residual,
        effective_epsilon: eps,
        cost_scale: 1.0,
        debiased: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::exact::exact_ot_uniform;
    use ndarray::array;

    fn uniform(n: usize) -> Array1<f64> {
        Array1::from_elem(n, 1.0 / n as f64)
    }

    fn cfg(eps: f64) -> SolverConfig {
        SolverConfig {
            keep_coupling: true,
            ..SolverConfig::default().with_epsilon(eps)
        }
    }

    #[test]
    fn one_by_one_is_forced() {
        let c = CostMatrix::new(array![[5.0]]).unwrap();
        let r = sinkhorn(&c, array![1.0].view(), array![1.0].view(), &cfg(0.25)).unwrap();
        assert!(r.converged);
        assert!((r.coupling.unwrap().matrix[[0, 0]] - 1.0).abs() < 1e-15);
        assert!((r.linear_cost - 5.0).abs() < 1e-12);
        assert!((r.regularized_objective - 4.75).abs() < 1e-12);
    }

    #[test]
    fn swap_cost_small_eps() {
        let c = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let r = sinkhorn(&c, uniform(2).view(), uniform(2).view(), &cfg(1e-3)).unwrap();
        assert!(r.converged);
        assert!(r.linear_cost.abs() < 1e-3);
    }

    #[test]
    fn random_five_by_five_matches_enumeration() {
        // Frozen pseudo-random costs in [0, 10).
        let c = array![
            [3.1, 7.4, 0.9, 5.5, 8.2],
            [6.6, 2.3, 4.8, 9.1, 1.7],
            [0.4, 5.9, 7.7, 2.8, 6.3],
            [8.8, 1.2, 3.6, 4.4, 9.9],
            [2.2, 6.1, 5.0, 0.6, 3.9]
        ];
        let cm = CostMatrix::new(c).unwrap();
        let exact = exact_ot_uniform(&cm).unwrap().linear_cost;
        let r = sinkhorn(&cm, uniform(5).view(), uniform(5).view(), &cfg(1e-3)).unwrap();
        assert!(r.converged, "residual {}", r.marginal_residual);
        assert!((r.linear_cost - exact).abs() <= 0.01 * exact);
    }

    #[test]
    fn marginals_within_tolerance() {
        let c = CostMatrix::new(array![[1.0, 4.0, 2.0], [0.5, 3.0, 9.0]]).unwrap();
        let p = array![0.3, 0.7];
        let q = array![0.2, 0.5, 0.3];
        let conf = cfg(0.1);
        let r = sinkhorn(&c, p.view(), q.view(), &conf).unwrap();
        let g = r.coupling.unwrap();
        assert!(g.row_residual <= conf.tolerance && g.col_residual <= conf.tolerance);
        assert!(g.matrix.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn transposed_problem_is_bitwise_transposed() {
        let c = array![[1.0, 4.0, 2.0], [0.5, 3.0, 9.0], [2.0, 2.0, 1.0]];
        let p = array![0.3, 0.5, 0.2];
        let q = array![0.2, 0.5, 0.3];
        let a = sinkhorn(&CostMatrix::new(c.clone()).unwrap(), p.view(), q.view(), &cfg(0.3)).unwrap();
        let b = sinkhorn(
            &CostMatrix::new(c.t().to_owned()).unwrap(),
            q.view(),
            p.view(),
            &cfg(0.3),
        )
        .unwrap();
        assert_eq!(a.regularized_objective.to_bits(), b.regularized_objective.to_bits());
        assert_eq!(a.coupling.unwrap().matrix, b.coupling.unwrap().matrix.t());
    }

    #[test]
    fn zero_weight_points_are_dropped() {
        let c = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let r = sinkhorn(&c, array![1.0, 0.0].view(), array![0.5, 0.5].view(), &cfg(0.5)).unwrap();
        assert!(r.converged);
        let g = r.coupling.unwrap().matrix;
        assert_eq!(g[[1, 0]], 0.0);
        assert_eq!(g[[1, 1]], 0.0);
        assert!((g[[0, 0]] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn self_transport_with_peaked_kernel_converges() {
        // Off-diagonal costs of 8 to 68 times epsilon.
        let x = array![[0.0, 0.0], [1.0, 1.0], [0.5, -1.0]];
        let c = crate::ot::squared_euclidean_cost(x.view(), x.view()).unwrap();
        let u = uniform(3);
        let r = sinkhorn(&c, u.view(), u.view(), &cfg(0.25)).unwrap();
        assert!(r.converged, "residual {} after {}", r.marginal_residual, r.iterations);
        let g = r.coupling.unwrap().matrix;
        assert_eq!(g, g.t());
    }

    #[test]
    fn non_convergence_is_flagged() {
        let c = CostMatrix::new(array![[0.0, 3.0], [2.0, 0.5]]).unwrap();
        let conf = SolverConfig {
            max_iterations: 1,
            annealing: false,
            ..cfg(0.05)
        };
        let r = sinkhorn(&c, array![0.9, 0.1].view(), array![0.2, 0.8].view(), &conf).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn rejects_bad_marginals() {
        let c = CostMatrix::new(array![[0.0, 1.0]]).unwrap();
        assert!(sinkhorn(&c, array![1.0].view(), array![0.4, 0.4].view(), &cfg(1.0)).is_err());
        assert!(sinkhorn(&c, array![1.0].view(), array![1.0].view(), &cfg(1.0)).is_err());
    }

    #[test]
    fn rejects_bad_config() {
        let c = CostMatrix::new(array![[0.0]]).unwrap();
        let bad = SolverConfig {
            epsilon: 0.0,
            ..SolverConfig::default()
        };
        assert!(matches!(
            sinkhorn(&c, array![1.0].view(), array![1.0].view(), &bad),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn normalized_cost_matches_scaled_epsilon() {
        let c = CostMatrix::new(array![[0.0, 8.0], [4.0, 2.0]]).unwrap();
        let u = uniform(2);
        let norm = SolverConfig {
            normalize_cost: true,
            ..cfg(0.1)
        };
        let a = sinkhorn(&c, u.view(), u.view(), &norm).unwrap();
        let b = sinkhorn(&c, u.view(), u.view(), &cfg(0.8)).unwrap();
        assert_eq!(a.cost_scale, 8.0);
        assert!((a.regularized_objective - b.regularized_objective).abs() < 1e-9);
    }

    #[test]
    fn deterministic() {
        let c = CostMatrix::new(array![[1.0, 2.0, 0.3], [0.7, 0.1, 5.0]]).unwrap();
        let p = array![0.4, 0.6];
        let q = array![0.3, 0.3, 0.4];
        let a = sinkhorn(&c, p.view(), q.view(), &cfg(0.01)).unwrap();
        let b = sinkhorn(&c, p.view(), q.view(), &cfg(0.01)).unwrap();
        assert_eq!(a, b);
    }
}
