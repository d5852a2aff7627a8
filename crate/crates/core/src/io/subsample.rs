//! Seeded tile subsampling.
//!
//! The generator is ChaCha8 (`rand_chacha::ChaCha8Rng`) keyed with the
//! 32-byte seed `seed.to_le_bytes() ++ [0; 24]`. Indices are drawn with a
//! partial Fisher-Yates shuffle: for `i in 0..k`, swap position `i` with
//! `i + bounded(n - i)`, where `bounded(r)` takes the high word of
//! `next_u64() * r` and rejects draws whose low word is below
//! `(2^64 - r) mod r`. The first `k` positions, sorted ascending, are kept.

use ndarray::{Array1, Axis};
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hierarchy::{Dataset, Slide};

/// Generator name recorded alongside subsampled outputs.
pub const SUBSAMPLE_RNG: &str = "chacha8-fisher-yates-v1";

pub fn subsample_rng(seed: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Uniform draw from `0..range` without modulo bias.
pub fn bounded(rng: &mut impl RngCore, range: u64) -> u64 {
    assert!(range > 0);
    let threshold = range.wrapping_neg() % range;
    loop {
        let m = rng.next_u64() as u128 * range as u128;
        if (m as u64) >= threshold {
            return (m >> 64) as u64;
        }
    }
}

/// Sorted indices of `k` of `n` items chosen uniformly without replacement.
pub fn sample_indices(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let k = k.min(n);
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = subsample_rng(seed);
    for i in 0..k {
        let j = i + bounded(&mut rng, (n - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Keeps `k` tiles of `s` with uniform weights; a no-op when `k` covers
/// every tile.
pub fn subsample_tiles(s: &Slide, k: usize, seed: u64) -> Result<Slide> {
    if k == 0 {
        return Err(Error::InvalidConfig("subsample size must be >= 1".into()));
    }
    if k >= s.n_tiles() {
        return Ok(s.clone());
    }
    let idx = sample_indices(s.n_tiles(), k, seed);
    let tiles = s.tiles().select(Axis(0), &idx);
    Slide::new(
        s.id.clone(),
        s.label.clone(),
        tiles,
        Array1::from_elem(k, 1.0 / k as f64),
    )
}

/// Subsamples every slide with the same `(k, seed)`. Slide weights are kept.
pub fn subsample_dataset(d: &Dataset, k: usize, seed: u64) -> Result<Dataset> {
    let slides = d
        .slides()
        .iter()
        .map(|s| subsample_tiles(s, k, seed))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(d.name.clone(), slides, d.slide_weights().to_owned())
}
