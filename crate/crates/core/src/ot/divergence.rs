use super::cost::squared_euclidean_cost;
use super::measure::DiscreteMeasure;
use super::sinkhorn::{sinkhorn_with_scale, SolverConfig, TransportResult};
use crate::error::{Error, Result};

/// Entropic OT between two measures under the squared Euclidean ground cost.
pub fn entropic_ot(x: &DiscreteMeasure, y: &DiscreteMeasure, cfg: &SolverConfig) -> Result<TransportResult> {
    let c = squared_euclidean_cost(x.points(), y.points())?;
    let scale = cost_scale(cfg, c.max());
    sinkhorn_with_scale(&c, x.weights(), y.weights(), cfg, scale)
}

/// `OT(x, y) - (OT(x, x) + OT(y, y)) / 2` on regularized objectives.
///
/// The returned result carries the cross-term coupling and linear cost; the
/// divergence itself is in `regularized_objective`. `converged` is the
/// conjunction over all three solves.
pub fn sinkhorn_divergence(x: &DiscreteMeasure, y: &DiscreteMeasure, cfg: &SolverConfig) -> Result<TransportResult> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            context: "sinkhorn divergence".into(),
            expected: x.dim(),
            found: y.dim(),
        });
    }
    let cross_cost = squared_euclidean_cost(x.points(), y.points())?;
    // One scale for all three terms keeps them on the same footing.
    let scale = cost_scale(cfg, cross_cost.max());
    let cross = sinkhorn_with_scale(&cross_cost, x.weights(), y.weights(), cfg, scale)?;
    let self_x = self_term(x, cfg, scale)?;
    let self_y = self_term(y, cfg, scale)?;
    Ok(debias(cross, &self_x, &self_y))
}

fn self_term(x: &DiscreteMeasure, cfg: &SolverConfig, scale: f64) -> Result<TransportResult> {
    let c = squared_euclidean_cost(x.points(), x.points())?;
    let self_cfg = SolverConfig {
        keep_coupling: false,
        ..*cfg
    };
    sinkhorn_with_scale(&c, x.weights(), x.weights(), &self_cfg, scale)
}

pub(crate) fn cost_scale(cfg: &SolverConfig, max_cost: f64) -> f64 {
    if cfg.normalize_cost && max_cost > 0.0 {
        max_cost
    } else {
        1.0
    }
}

/// Combines a cross solve with the two self solves.
///
/// The arithmetic is symmetric in the self terms, so swapping the roles of
/// the two measures cannot change the result bitwise.
pub fn debias(cross: TransportResult, self_a: &TransportResult, self_b: &TransportResult) -> TransportResult {
    TransportResult {
        regularized_objective: debiased_value(
            cross.regularized_objective,
            self_a.regularized_objective,
            self_b.regularized_objective,
        ),
        iterations: cross.iterations + self_a.iterations + self_b.iterations,
        converged: cross.converged && self_a.converged && self_b.converged,
        marginal_residual: cross
            .marginal_residual
            .max(self_a.marginal_residual)
            .max(self_b.marginal_residual),
        debiased: true,
        ..cross
    }
}

#[inline]
pub fn debiased_value(cross: f64, self_a: f64, self_b: f64) -> f64 {
    cross - 0.5 * (self_a + self_b)
}
