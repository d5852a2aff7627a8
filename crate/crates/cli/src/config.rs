use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use hhot::hierarchy::{HierarchyConfig, MatrixMetadata, DEFAULT_MEMORY_BUDGET};
use hhot::io::SUBSAMPLE_RNG;
use hhot::ot::SolverConfig;

/// Settings shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Entropic regularization between tiles.
    #[arg(long, global = true, default_value_t = 0.25, env = "HHOT_EPSILON_INNER")]
    pub epsilon_inner: f64,
    /// Entropic regularization between slides.
    #[arg(long, global = true, default_value_t = 0.25, env = "HHOT_EPSILON_OUTER")]
    pub epsilon_outer: f64,
    /// Marginal L1 tolerance for Sinkhorn convergence.
    #[arg(long = "tol", global = true, default_value_t = 1e-6, env = "HHOT_TOL")]
    pub tolerance: f64,
    #[arg(long = "max-iter", global = true, default_value_t = 1000, env = "HHOT_MAX_ITER")]
    pub max_iterations: usize,
    /// Use the Sinkhorn divergence (default).
    #[arg(long, global = true, conflicts_with = "raw")]
    pub debiased: bool,
    /// Use raw entropic OT instead of the divergence.
    #[arg(long, global = true, env = "HHOT_RAW")]
    pub raw: bool,
    /// Keep at most N tiles per slide, chosen by a seeded generator.
    #[arg(long, global = true, value_name = "N", env = "HHOT_SUBSAMPLE")]
    pub subsample: Option<usize>,
    #[arg(long, global = true, default_value_t = 0, value_name = "S", env = "HHOT_SEED")]
    pub seed: u64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, value_name = "W", env = "HHOT_WORKERS")]
    pub workers: Option<usize>,
    /// Directory for memoized pairwise solves.
    #[arg(long = "cache", global = true, value_name = "DIR", env = "HHOT_CACHE")]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH", env = "HHOT_OUT")]
    pub out: Option<PathBuf>,
    /// Divide costs by their maximum before solving.
    #[arg(long, global = true, env = "HHOT_NORMALIZE_COST")]
    pub normalize_cost: bool,
    /// Largest pooled cost matrix a flat solve may allocate.
    #[arg(long, global = true, value_name = "BYTES", env = "HHOT_MEMORY_BUDGET")]
    pub memory_budget: Option<u64>,
}

impl RunArgs {
    pub fn is_debiased(&self) -> bool {
        self.debiased || !self.raw
    }

    pub fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
    }

    pub fn memory_budget(&self) -> u64 {
        self.memory_budget.unwrap_or(DEFAULT_MEMORY_BUDGET)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("--epsilon-inner", self.epsilon_inner),
            ("--epsilon-outer", self.epsilon_outer),
        ] {
            if !(v.is_finite() && v > 0.0) {
                bail!(hhot::Error::InvalidConfig(format!(
                    "{name} must be a positive number, got {v}"
                )));
            }
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            bail!(hhot::Error::InvalidConfig(format!(
                "--tol must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            bail!(hhot::Error::InvalidConfig("--max-iter must be at least 1".into()));
        }
        if self.subsample == Some(0) {
            bail!(hhot::Error::InvalidConfig("--subsample must be at least 1".into()));
        }
        if self.workers == Some(0) {
            bail!(hhot::Error::InvalidConfig("--workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn hierarchy(&self) -> HierarchyConfig {
        HierarchyConfig {
            epsilon_inner: self.epsilon_inner,
            epsilon_outer: self.epsilon_outer,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            debiased: self.is_debiased(),
            normalize_cost: self.normalize_cost,
            ..HierarchyConfig::default()
        }
    }

    pub fn inner(&self) -> SolverConfig {
        self.hierarchy().inner()
    }

    pub fn subsample_spec(&self) -> Option<(usize, u64)> {
        self.subsample.map(|k| (k, self.seed))
    }

    /// Run settings recorded in output files. Worker count and cache location
    /// are left out because they do not affect results.
    pub fn metadata_extra(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("tolerance".into(), self.tolerance.to_string());
        m.insert("max_iterations".into(), self.max_iterations.to_string());
        m.insert("normalize_cost".into(), self.normalize_cost.to_string());
        m.insert("annealing".into(), HierarchyConfig::default().annealing.to_string());
        if self.subsample.is_some() {
            m.insert("subsample_rng".into(), SUBSAMPLE_RNG.into());
        }
        m
    }

    /// Stamps run settings onto metadata produced by the library.
    pub fn stamp(&self, md: &mut MatrixMetadata) {
        md.subsample = self.subsample;
        md.seed = Some(self.seed);
        md.extra.extend(self.metadata_extra());
    }
}
