//! Runtime comparison of the hierarchical distance against the flat pooled
//! solve on seeded synthetic datasets.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hierarchy::{
    dataset_distance_with, flat_dataset_distance_with, resolve_scale, CostScale, HierarchyConfig, PairSolver, Slide,
};
use crate::ot::{sinkhorn_with_scale, squared_euclidean_cost, SolverConfig, TransportResult};
use crate::synth;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub n_slides: Vec<usize>,
    pub tiles_per_slide: usize,
    pub dim: usize,
    pub repeats: usize,
    pub seed: u64,
    pub hierarchy: HierarchyConfig,
    pub memory_budget: Option<u64>,
    /// Worker count in effect, recorded in the output.
    pub workers: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n_slides: (4..=18).collect(),
            tiles_per_slide: 100,
            dim: 64,
            repeats: 3,
            seed: 0,
            hierarchy: HierarchyConfig::default(),
            memory_budget: None,
            workers: 1,
        }
    }
}

/// Median wall times (seconds) for one dataset size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub n_slides: usize,
    pub tiles_per_slide: usize,
    pub dim: usize,
    pub workers: usize,
    pub t_hier: f64,
    /// Thread-summed time spent building tile cost matrices.
    pub hier_cost: f64,
    /// Thread-summed time spent in slide-level Sinkhorn solves.
    pub hier_solve: f64,
    pub t_flat: Option<f64>,
    pub flat_cost: Option<f64>,
    pub flat_solve: Option<f64>,
    /// `ok`, or why the flat solve was skipped.
    pub flat_status: String,
    pub hier_value: f64,
    pub flat_value: Option<f64>,
}

/// A [`PairSolver`] that accumulates time spent per phase.
#[derive(Debug, Default)]
pub struct TimedSolver {
    cost_nanos: AtomicU64,
    solve_nanos: AtomicU64,
}

impl TimedSolver {
    pub fn cost_seconds(&self) -> f64 {
        self.cost_nanos.load(Ordering::Relaxed) as f64 * 1e-9
    }

    pub fn solve_seconds(&self) -> f64 {
        self.solve_nanos.load(Ordering::Relaxed) as f64 * 1e-9
    }
}

impl PairSolver for TimedSolver {
    fn solve(&self, a: &Slide, b: &Slide, cfg: &SolverConfig, scale: CostScale) -> Result<TransportResult> {
        let t0 = Instant::now();
        let c = squared_euclidean_cost(a.tiles(), b.tiles())?;
        let t1 = Instant::now();
        let s = resolve_scale(cfg, scale, || c.max());
        let r = sinkhorn_with_scale(&c, a.tile_weights(), b.tile_weights(), cfg, s);
        let t2 = Instant::now();
        self.cost_nanos
            .fetch_add((t1 - t0).as_nanos() as u64, Ordering::Relaxed);
        self.solve_nanos
            .fetch_add((t2 - t1).as_nanos() as u64, Ordering::Relaxed);
        r
    }
}

struct Sample {
    wall: f64,
    cost: f64,
    solve: f64,
    value: f64,
}

fn median_by<F: Fn(&Sample) -> f64>(samples: &[Sample], key: F) -> f64 {
    let mut v: Vec<f64> = samples.iter().map(key).collect();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.repeats == 0 || cfg.tiles_per_slide == 0 || cfg.dim == 0 {
        return Err(Error::InvalidConfig("bench needs repeats, tiles and dim >= 1".into()));
    }
    cfg.n_slides.iter().map(|&n| bench_size(cfg, n)).collect()
}

pub fn bench_size(cfg: &BenchConfig, n: usize) -> Result<BenchRow> {
    if n == 0 {
        return Err(Error::InvalidConfig("bench needs n_slides >= 1".into()));
    }
    let (a, b) = synth::benchmark_pair(n, cfg.tiles_per_slide, cfg.dim, cfg.seed)?;

    let mut hier = Vec::with_capacity(cfg.repeats);
    for _ in 0..cfg.repeats {
        let timer = TimedSolver::default();
        let t0 = Instant::now();
        let d = dataset_distance_with(&timer, &a, &b, &cfg.hierarchy)?;
        hier.push(Sample {
            wall: t0.elapsed().as_secs_f64(),
            cost: timer.cost_seconds(),
            solve: timer.solve_seconds(),
            value: d.result.value(),
        });
    }

    let mut flat = Vec::with_capacity(cfg.repeats);
    let mut flat_status = "ok".to_string();
    let inner = cfg.hierarchy.inner();
    for _ in 0..cfg.repeats {
        let timer = TimedSolver::default();
        let t0 = Instant::now();
        match flat_dataset_distance_with(&timer, &a, &b, &inner, cfg.memory_budget) {
            Ok(r) => flat.push(Sample {
                wall: t0.elapsed().as_secs_f64(),
                cost: timer.cost_seconds(),
                solve: timer.solve_seconds(),
                value: r.value(),
            }),
            Err(Error::BudgetExceeded { required, budget }) => {
                flat_status = format!("over-budget: {required} > {budget} bytes");
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let flat_some = |f: fn(&Sample) -> f64| (!flat.is_empty()).then(|| median_by(&flat, f));
    Ok(BenchRow {
        n_slides: n,
        tiles_per_slide: cfg.tiles_per_slide,
        dim: cfg.dim,
        workers: cfg.workers,
        t_hier: median_by(&hier, |s| s.wall),
        hier_cost: median_by(&hier, |s| s.cost),
        hier_solve: median_by(&hier, |s| s.solve),
        t_flat: flat_some(|s| s.wall),
        flat_cost: flat_some(|s| s.cost),
        flat_solve: flat_some(|s| s.solve),
        flat_status,
        hier_value: median_by(&hier, |s| s.value),
        flat_value: flat_some(|s| s.value),
    })
}
