//! On-disk memo of pairwise slide solves.
//!
//! One JSON file per entry, named by the hex SHA-256 of the request: both
//! slide ids with digests of their tiles and weights, the solver settings,
//! the cost scale and the subsample spec. Floats are stored as their bit
//! patterns so a hit reproduces the original result exactly. Entries are
//! written to a temporary file in the cache directory and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hierarchy::{slide_cost_matrix_with, CostScale, Dataset, DirectSolver, DistanceMatrix, PairSolver, Slide};
use crate::ot::{SolverConfig, TransportResult};

const ENTRY_FORMAT: u32 = 1;

/// SHA-256 over a slide's shape, tile values and weights (as f64 bits).
pub fn slide_digest(s: &Slide) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((s.n_tiles() as u64).to_le_bytes());
    h.update((s.dim() as u64).to_le_bytes());
    for v in s.tiles().iter() {
        h.update(v.to_bits().to_le_bytes());
    }
    for w in s.tile_weights().iter() {
        h.update(w.to_bits().to_le_bytes());
    }
    h.finalize().into()
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    format: u32,
    key: String,
    linear_cost: u64,
    regularized_objective: u64,
    iterations: usize,
    converged: bool,
    marginal_residual: u64,
    effective_epsilon: u64,
    cost_scale: u64,
    debiased: bool,
}

impl Entry {
    fn new(key: String, r: &TransportResult) -> Self {
        Self {
            format: ENTRY_FORMAT,
            key,
            linear_cost: r.linear_cost.to_bits(),
            regularized_objective: r.regularized_objective.to_bits(),
            iterations: r.iterations,
            converged: r.converged,
            marginal_residual: r.marginal_residual.to_bits(),
            effective_epsilon: r.effective_epsilon.to_bits(),
            cost_scale: r.cost_scale.to_bits(),
            debiased: r.debiased,
        }
    }

    fn result(&self) -> TransportResult {
        TransportResult {
            linear_cost: f64::from_bits(self.linear_cost),
            regularized_objective: f64::from_bits(self.regularized_objective),
            coupling: None,
            iterations: self.iterations,
            converged: self.converged,
            marginal_residual: f64::from_bits(self.marginal_residual),
            effective_epsilon: f64::from_bits(self.effective_epsilon),
            cost_scale: f64::from_bits(self.cost_scale),
            debiased: self.debiased,
        }
    }
}

/// A [`PairSolver`] that consults a cache directory before delegating.
///
/// Requests for a coupling bypass the cache.
#[derive(Debug)]
pub struct CachedSolver<S = DirectSolver> {
    inner: S,
    dir: PathBuf,
    subsample: Option<(usize, u64)>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl CachedSolver<DirectSolver> {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        Self::wrap(DirectSolver, dir)
    }
}

impl<S: PairSolver> CachedSolver<S> {
    pub fn wrap(inner: S, dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self {
            inner,
            dir,
            subsample: None,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        })
    }

    /// Records the subsample spec that produced the slides, as part of the key.
    pub fn with_subsample(mut self, subsample: Option<(usize, u64)>) -> Self {
        self.subsample = subsample;
        self
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    /// Number of requests that reached the wrapped solver.
    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn key(&self, a: &Slide, b: &Slide, cfg: &SolverConfig, scale: CostScale) -> String {
        // Solves are orientation-invariant in their scalars, so order the pair.
        let (da, db) = (slide_digest(a), slide_digest(b));
        let (x, y) = if (a.id.as_str(), da) <= (b.id.as_str(), db) {
            ((&a.id, da), (&b.id, db))
        } else {
            ((&b.id, db), (&a.id, da))
        };
        let mut h = Sha256::new();
        h.update(format!("hhot-cache v{ENTRY_FORMAT}\n"));
        for (id, d) in [x, y] {
            h.update((id.len() as u64).to_le_bytes());
            h.update(id.as_bytes());
            h.update(d);
        }
        h.update(cfg.epsilon.to_bits().to_le_bytes());
        h.update((cfg.max_iterations as u64).to_le_bytes());
        h.update(cfg.tolerance.to_bits().to_le_bytes());
        h.update([cfg.normalize_cost as u8, cfg.annealing as u8, cfg.debiased as u8]);
        // Without normalization the scale is ignored; Auto is resolved from
        // the cost matrix, which the digests already pin down.
        match (cfg.normalize_cost, scale) {
            (false, _) => h.update([0]),
            (true, CostScale::Auto) => h.update([1]),
            (true, CostScale::Fixed(s)) => {
                h.update([2]);
                h.update(s.to_bits().to_le_bytes());
            }
        }
        match self.subsample {
            Some((k, seed)) => {
                h.update([1]);
                h.update((k as u64).to_le_bytes());
                h.update(seed.to_le_bytes());
            }
            None => h.update([0]),
        }
        hex::encode(h.finalize())
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    fn lookup(&self, key: &str) -> Option<TransportResult> {
        let path = self.entry_path(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return None,
            Err(e) => {
                log::warn!("cache entry {} unreadable ({e}); recomputing", path.display());
                return None;
            }
        };
        match serde_json::from_slice::<Entry>(&bytes) {
            Ok(entry) if entry.format == ENTRY_FORMAT && entry.key == key => Some(entry.result()),
            Ok(_) => {
                log::warn!("cache entry {} does not match its key; recomputing", path.display());
                None
            }
            Err(e) => {
                log::warn!("cache entry {} is corrupt ({e}); recomputing", path.display());
                None
            }
        }
    }

    fn store(&self, key: String, r: &TransportResult) -> Result<()> {
        let path = self.entry_path(&key);
        let body = serde_json::to_vec(&Entry::new(key, r)).expect("entry serializes");
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        tmp.write_all(&body).map_err(|e| Error::io(tmp.path(), e))?;
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        Ok(())
    }
}

impl<S: PairSolver> PairSolver for CachedSolver<S> {
    fn solve(&self, a: &Slide, b: &Slide, cfg: &SolverConfig, scale: CostScale) -> Result<TransportResult> {
        if cfg.keep_coupling {
            self.misses.fetch_add(1, Ordering::Relaxed);
            return self.inner.solve(a, b, cfg, scale);
        }
        let key = self.key(a, b, cfg, scale);
        if let Some(r) = self.lookup(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(r);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let r = self.inner.solve(a, b, cfg, scale)?;
        self.store(key, &r)?;
        Ok(r)
    }
}

/// [`crate::hierarchy::slide_cost_matrix`] backed by a cache directory.
pub fn cached_slide_cost_matrix(
    a: &Dataset,
    b: &Dataset,
    cfg: &SolverConfig,
    cache_dir: impl AsRef<Path>,
) -> Result<DistanceMatrix> {
    let solver = CachedSolver::new(cache_dir.as_ref())?;
    slide_cost_matrix_with(&solver, a, b, cfg)
}
