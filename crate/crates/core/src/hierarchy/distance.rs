use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::{DistanceMatrix, MatrixMetadata};
use super::types::{check_same_dim, Dataset, Slide};
use crate::error::{Error, Result};
use crate::ot::{
    cost_scale, debias, debiased_value, sinkhorn_with_scale, squared_distance, squared_euclidean_cost, CostMatrix,
    Coupling, SolverConfig, TransportResult,
};

pub const METRIC_HHOT: &str = "hhot";
pub const METRIC_CENTROID: &str = "centroid";
pub const METRIC_FLAT: &str = "flat";

/// Default ceiling on the pooled cost matrix of a flat solve (4 GiB).
pub const DEFAULT_MEMORY_BUDGET: u64 = 4 << 30;

/// Settings for a two-level computation. Both levels share tolerance,
/// iteration cap, debiasing and normalization; epsilons are separate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    pub epsilon_inner: f64,
    pub epsilon_outer: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub debiased: bool,
    pub normalize_cost: bool,
    pub annealing: bool,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            epsilon_inner: s.epsilon,
            epsilon_outer: s.epsilon,
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
            debiased: true,
            normalize_cost: s.normalize_cost,
            annealing: s.annealing,
        }
    }
}

impl HierarchyConfig {
    pub fn inner(&self) -> SolverConfig {
        self.level(self.epsilon_inner)
    }

    pub fn outer(&self) -> SolverConfig {
        self.level(self.epsilon_outer)
    }

    fn level(&self, epsilon: f64) -> SolverConfig {
        SolverConfig {
            epsilon,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            debiased: self.debiased,
            keep_coupling: false,
            normalize_cost: self.normalize_cost,
            annealing: self.annealing,
        }
    }
}

/// How a pair solve picks the divisor for its cost matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostScale {
    /// `max(C)` of this solve when normalization is on, else 1.
    Auto,
    Fixed(f64),
}

/// Produces the raw entropic OT between the tiles of two slides.
///
/// Implementations may memoize or instrument, but must return exactly what
/// [`DirectSolver`] would.
pub trait PairSolver: Sync {
    fn solve(&self, a: &Slide, b: &Slide, cfg: &SolverConfig, scale: CostScale) -> Result<TransportResult>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DirectSolver;

impl PairSolver for DirectSolver {
    fn solve(&self, a: &Slide, b: &Slide, cfg: &SolverConfig, scale: CostScale) -> Result<TransportResult> {
        let c = squared_euclidean_cost(a.tiles(), b.tiles())?;
        let s = resolve_scale(cfg, scale, || c.max());
        sinkhorn_with_scale(&c, a.tile_weights(), b.tile_weights(), cfg, s)
    }
}

pub fn resolve_scale(cfg: &SolverConfig, scale: CostScale, max_cost: impl FnOnce() -> f64) -> f64 {
    if !cfg.normalize_cost {
        return 1.0;
    }
    match scale {
        CostScale::Auto => cost_scale(cfg, max_cost()),
        CostScale::Fixed(s) => s,
    }
}

/// Entropic OT between the tile sets of two slides; the Sinkhorn divergence
/// when `cfg.debiased` is set.
pub fn slide_distance(a: &Slide, b: &Slide, cfg: &SolverConfig) -> Result<TransportResult> {
    slide_distance_with(&DirectSolver, a, b, cfg)
}

pub fn slide_distance_with<S: PairSolver + ?Sized>(
    solver: &S,
    a: &Slide,
    b: &Slide,
    cfg: &SolverConfig,
) -> Result<TransportResult> {
    check_slide_dims(a, b)?;
    let cross = solver.solve(a, b, cfg, CostScale::Auto)?;
    if !cfg.debiased {
        return Ok(cross);
    }
    let scale = CostScale::Fixed(cross.cost_scale);
    let self_cfg = SolverConfig {
        keep_coupling: false,
        ..*cfg
    };
    let sa = solver.solve(a, a, &self_cfg, scale)?;
    let sb = solver.solve(b, b, &self_cfg, scale)?;
    Ok(debias(cross, &sa, &sb))
}

/// Optimal tile-to-tile coupling between two slides (rows index `a`'s tiles).
pub fn tile_coupling(a: &Slide, b: &Slide, cfg: &SolverConfig) -> Result<Coupling> {
    check_slide_dims(a, b)?;
    let cfg = SolverConfig {
        keep_coupling: true,
        ..*cfg
    };
    let res = DirectSolver.solve(a, b, &cfg, CostScale::Auto)?;
    Ok(res.coupling.expect("coupling requested"))
}

fn check_slide_dims(a: &Slide, b: &Slide) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("slides `{}` and `{}`", a.id, b.id),
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Per-slide self solves, shared by every pair a slide takes part in.
struct SelfTerms(Option<Vec<TransportResult>>);

impl SelfTerms {
    fn compute<S: PairSolver + ?Sized>(solver: &S, d: &Dataset, cfg: &SolverConfig) -> Result<Self> {
        // With normalization the self terms depend on each pair's cross cost.
        if !cfg.debiased || cfg.normalize_cost {
            return Ok(SelfTerms(None));
        }
        let self_cfg = SolverConfig {
            keep_coupling: false,
            ..*cfg
        };
        let results: Vec<Result<TransportResult>> = d
            .slides()
            .par_iter()
            .map(|s| solver.solve(s, s, &self_cfg, CostScale::Fixed(1.0)))
            .collect();
        let mut out = Vec::with_capacity(results.len());
        for (s, r) in d.slides().iter().zip(results) {
            out.push(r.map_err(|e| pair_error(s, s, e))?);
        }
        Ok(SelfTerms(Some(out)))
    }
}

fn pair_error(a: &Slide, b: &Slide, e: Error) -> Error {
    Error::Pair {
        row: a.id.clone(),
        col: b.id.clone(),
        source: Box::new(e),
    }
}

fn pair_entry<S: PairSolver + ?Sized>(
    solver: &S,
    a: &Slide,
    b: &Slide,
    self_a: Option<&TransportResult>,
    self_b: Option<&TransportResult>,
    cfg: &SolverConfig,
) -> Result<(f64, bool)> {
    match (self_a, self_b) {
        // Cross term and self terms would be the same solve.
        (Some(sa), Some(_)) if std::ptr::eq(a, b) => Ok((0.0, sa.converged)),
        (Some(sa), Some(sb)) => {
            let cross = solver.solve(a, b, cfg, CostScale::Auto)?;
            Ok((
                debiased_value(
                    cross.regularized_objective,
                    sa.regularized_objective,
                    sb.regularized_objective,
                ),
                cross.converged && sa.converged && sb.converged,
            ))
        }
        _ => {
            let r = slide_distance_with(solver, a, b, cfg)?;
            Ok((r.value(), r.converged))
        }
    }
}

/// All pairwise slide distances between two datasets.
///
/// Pairs are solved in parallel on the current rayon pool; every entry is
/// computed independently and written once, so the result does not depend on
/// the number of workers.
pub fn slide_cost_matrix(a: &Dataset, b: &Dataset, cfg: &SolverConfig) -> Result<DistanceMatrix> {
    slide_cost_matrix_with(&DirectSolver, a, b, cfg)
}

pub fn slide_cost_matrix_with<S: PairSolver + ?Sized>(
    solver: &S,
    a: &Dataset,
    b: &Dataset,
    cfg: &SolverConfig,
) -> Result<DistanceMatrix> {
    cfg.validate()?;
    check_same_dim(a, b)?;
    let self_a = SelfTerms::compute(solver, a, cfg)?;
    if a.slides() == b.slides() {
        return matrix_from_terms(solver, a, a, &self_a, &self_a, cfg, true);
    }
    let self_b = SelfTerms::compute(solver, b, cfg)?;
    matrix_from_terms(solver, a, b, &self_a, &self_b, cfg, false)
}

fn matrix_from_terms<S: PairSolver + ?Sized>(
    solver: &S,
    a: &Dataset,
    b: &Dataset,
    self_a: &SelfTerms,
    self_b: &SelfTerms,
    cfg: &SolverConfig,
    symmetric: bool,
) -> Result<DistanceMatrix> {
    let (n, m) = (a.len(), b.len());
    let pairs: Vec<(usize, usize)> = if symmetric {
        (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
    } else {
        (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect()
    };
    let results: Vec<Result<(f64, bool)>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (sa, sb) = (&a.slides()[i], &b.slides()[j]);
            pair_entry(
                solver,
                sa,
                sb,
                self_a.0.as_ref().map(|v| &v[i]),
                self_b.0.as_ref().map(|v| &v[j]),
                cfg,
            )
            .map_err(|e| pair_error(sa, sb, e))
        })
        .collect();

    let mut entries = Array2::zeros((n, m));
    let mut unconverged = 0;
    for (&(i, j), r) in pairs.iter().zip(results) {
        let (v, ok) = r?;
        entries[[i, j]] = v;
        if symmetric {
            entries[[j, i]] = v;
        }
        if !ok {
            unconverged += if symmetric && i != j { 2 } else { 1 };
        }
    }
    Ok(DistanceMatrix {
        row_ids: a.slides().iter().map(|s| s.id.clone()).collect(),
        col_ids: b.slides().iter().map(|s| s.id.clone()).collect(),
        entries,
        metadata: MatrixMetadata {
            epsilon_inner: Some(cfg.epsilon),
            debiased: cfg.debiased,
            metric: METRIC_HHOT.into(),
            unconverged,
            ..MatrixMetadata::default()
        },
    })
}

/// Dataset distance together with the slide-level matrices it was built on.
#[derive(Debug, Clone)]
pub struct DatasetDistance {
    pub result: TransportResult,
    pub cross: DistanceMatrix,
    /// Self matrices of each dataset, present in debiased mode.
    pub self_a: Option<DistanceMatrix>,
    pub self_b: Option<DistanceMatrix>,
}

/// Outer OT over the slide cost matrix, debiased at both levels when
/// `cfg.debiased` is set.
pub fn dataset_distance(a: &Dataset, b: &Dataset, cfg: &HierarchyConfig) -> Result<TransportResult> {
    Ok(dataset_distance_with(&DirectSolver, a, b, cfg)?.result)
}

pub fn dataset_distance_with<S: PairSolver + ?Sized>(
    solver: &S,
    a: &Dataset,
    b: &Dataset,
    cfg: &HierarchyConfig,
) -> Result<DatasetDistance> {
    let inner = cfg.inner();
    let outer = cfg.outer();
    inner.validate()?;
    outer.validate()?;
    check_same_dim(a, b)?;

    let same = a.slides() == b.slides();
    let terms_a = SelfTerms::compute(solver, a, &inner)?;
    let terms_b = if same {
        None
    } else {
        Some(SelfTerms::compute(solver, b, &inner)?)
    };
    let terms_b_ref = terms_b.as_ref().unwrap_or(&terms_a);

    let with_outer_eps = |mut m: DistanceMatrix| {
        m.metadata.epsilon_outer = Some(cfg.epsilon_outer);
        m
    };
    let cross = with_outer_eps(matrix_from_terms(solver, a, b, &terms_a, terms_b_ref, &inner, same)?);
    let cross_cost = ground_cost(&cross)?;
    let scale = cost_scale(&outer, cross_cost.max());
    let mut result = sinkhorn_with_scale(&cross_cost, a.slide_weights(), b.slide_weights(), &outer, scale)?;

    let (mut self_a, mut self_b) = (None, None);
    if cfg.debiased {
        let ma = with_outer_eps(matrix_from_terms(solver, a, a, &terms_a, &terms_a, &inner, true)?);
        let mb = if same {
            ma.clone()
        } else {
            with_outer_eps(matrix_from_terms(solver, b, b, terms_b_ref, terms_b_ref, &inner, true)?)
        };
        let ra = sinkhorn_with_scale(&ground_cost(&ma)?, a.slide_weights(), a.slide_weights(), &outer, scale)?;
        let rb = sinkhorn_with_scale(&ground_cost(&mb)?, b.slide_weights(), b.slide_weights(), &outer, scale)?;
        result = debias(result, &ra, &rb);
        if ma.metadata.unconverged > 0 || mb.metadata.unconverged > 0 {
            result.converged = false;
        }
        self_a = Some(ma);
        self_b = Some(mb);
    }
    if cross.metadata.unconverged > 0 {
        result.converged = false;
    }
    Ok(DatasetDistance {
        result,
        cross,
        self_a,
        self_b,
    })
}

/// Slide distances as an outer ground cost. Debiased entries may sit a hair
/// below zero from solver tolerance; those are clamped.
fn ground_cost(m: &DistanceMatrix) -> Result<CostMatrix> {
    if let Some(v) = m.entries.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("slide cost matrix entry {v}")));
    }
    CostMatrix::new(m.entries.mapv(|v| v.max(0.0)))
}

/// Non-hierarchical baseline: pools every tile of a dataset into one
/// measure (tile weight = slide weight x within-slide tile weight) and runs a
/// single solve between the pools.
pub fn flat_dataset_distance(
    a: &Dataset,
    b: &Dataset,
    cfg: &SolverConfig,
    memory_budget: Option<u64>,
) -> Result<TransportResult> {
    flat_dataset_distance_with(&DirectSolver, a, b, cfg, memory_budget)
}

pub fn flat_dataset_distance_with<S: PairSolver + ?Sized>(
    solver: &S,
    a: &Dataset,
    b: &Dataset,
    cfg: &SolverConfig,
    memory_budget: Option<u64>,
) -> Result<TransportResult> {
    check_same_dim(a, b)?;
    let required = flat_memory_required(a, b, cfg.debiased);
    let budget = memory_budget.unwrap_or(DEFAULT_MEMORY_BUDGET);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let pa = pool(a)?;
    let pb = pool(b)?;
    slide_distance_with(solver, &pa, &pb, cfg)
}

/// Bytes of the largest cost matrix a flat solve materializes.
pub fn flat_memory_required(a: &Dataset, b: &Dataset, debiased: bool) -> u64 {
    let (n, m) = (a.total_tiles() as u64, b.total_tiles() as u64);
    let largest = if debiased { (n * m).max(n * n).max(m * m) } else { n * m };
    largest * std::mem::size_of::<f64>() as u64
}

/// Pools a dataset's tiles into a single slide.
pub fn pool(d: &Dataset) -> Result<Slide> {
    let total = d.total_tiles();
    let mut tiles = Array2::zeros((total, d.dim()));
    let mut weights = Array1::zeros(total);
    let mut row = 0;
    for (s, &sw) in d.slides().iter().zip(d.slide_weights().iter()) {
        for (t, &tw) in s.tiles().outer_iter().zip(s.tile_weights().iter()) {
            tiles.row_mut(row).assign(&t);
            weights[row] = sw * tw;
            row += 1;
        }
    }
    // Products of two probability vectors can drift from 1 by a few ulps.
    let sum: f64 = weights.sum();
    if (sum - 1.0).abs() > 1e-12 {
        weights.mapv_inplace(|w| w / sum);
    }
    Slide::new(d.name.clone(), None, tiles, weights)
}

/// Euclidean distance between tile-weighted mean embeddings.
pub fn centroid_distance(a: &Slide, b: &Slide) -> Result<f64> {
    check_slide_dims(a, b)?;
    let (ca, cb) = (a.centroid(), b.centroid());
    Ok(squared_distance(ca.as_slice().expect("contiguous"), cb.as_slice().expect("contiguous")).sqrt())
}

pub fn centroid_matrix(a: &Dataset, b: &Dataset) -> Result<DistanceMatrix> {
    check_same_dim(a, b)?;
    let ca: Vec<Array1<f64>> = a.slides().iter().map(Slide::centroid).collect();
    let cb: Vec<Array1<f64>> = b.slides().iter().map(Slide::centroid).collect();
    let entries = Array2::from_shape_fn((ca.len(), cb.len()), |(i, j)| {
        squared_distance(ca[i].as_slice().unwrap(), cb[j].as_slice().unwrap()).sqrt()
    });
    Ok(DistanceMatrix {
        row_ids: a.slides().iter().map(|s| s.id.clone()).collect(),
        col_ids: b.slides().iter().map(|s| s.id.clone()).collect(),
        entries,
        metadata: MatrixMetadata {
            debiased: true,
            metric: METRIC_CENTROID.into(),
            ..MatrixMetadata::default()
        },
    })
}
