//! Seeded synthetic slides and datasets for benchmarks and tests.
//!
//! Every generator is a pure function of its arguments and seed.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::hierarchy::{Dataset, Slide};

/// Spread parameters for Gaussian-blob datasets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobSpec {
    /// Standard deviation of slide centers around the dataset center.
    pub slide_spread: f64,
    /// Standard deviation of tiles around their slide center.
    pub tile_spread: f64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            slide_spread: 0.2,
            tile_spread: 0.1,
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vector<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> Array1<f64> {
    (0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// `n` isotropic Gaussian points around `center`.
pub fn gaussian_blob<R: Rng>(rng: &mut R, center: &Array1<f64>, n: usize, sigma: f64) -> Array2<f64> {
    let dim = center.len();
    let mut out = Array2::zeros((n, dim));
    for mut row in out.outer_iter_mut() {
        for (k, v) in row.iter_mut().enumerate() {
            *v = center[k] + sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }
    out
}

/// A dataset of `n_slides` blob slides whose centers scatter around
/// `center`. Slide ids are `{name}-s{index}`.
pub fn blob_dataset(
    name: &str,
    center: &Array1<f64>,
    n_slides: usize,
    tiles_per_slide: usize,
    spec: BlobSpec,
    seed: u64,
) -> Result<Dataset> {
    let mut r = rng(seed);
    let slides = (0..n_slides)
        .map(|i| {
            let c = center + &normal_vector(&mut r, center.len(), spec.slide_spread);
            let tiles = gaussian_blob(&mut r, &c, tiles_per_slide, spec.tile_spread);
            Slide::uniform(format!("{name}-s{i}"), None, tiles)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::uniform(name, slides)
}

/// A pair of benchmark datasets with the given shape, centered one unit
/// apart along the first axis.
pub fn benchmark_pair(n_slides: usize, tiles_per_slide: usize, dim: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let origin = Array1::zeros(dim);
    let mut shifted = Array1::zeros(dim);
    shifted[0] = 1.0;
    let spec = BlobSpec::default();
    let a = blob_dataset("bench-a", &origin, n_slides, tiles_per_slide, spec, seed)?;
    let b = blob_dataset(
        "bench-b",
        &shifted,
        n_slides,
        tiles_per_slide,
        spec,
        seed.wrapping_add(1),
    )?;
    Ok((a, b))
}

/// Labeled slides whose classes differ only in the shape of their tile
/// distribution: every slide's tiles come in antipodal pairs `(x, -x)`, so
/// all slide centroids are exactly the origin. Class `c` places its tiles
/// near `+-separation * e_c` (with `e_c` a coordinate axis).
///
/// Requires `dim >= n_classes` and an even `tiles_per_slide`.
pub fn equal_centroid_classes(
    n_classes: usize,
    slides_per_class: usize,
    tiles_per_slide: usize,
    dim: usize,
    separation: f64,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    assert!(dim >= n_classes, "need one axis per class");
    assert!(tiles_per_slide.is_multiple_of(2), "tiles come in antipodal pairs");
    let mut r = rng(seed);
    let mut slides = Vec::with_capacity(n_classes * slides_per_class);
    for class in 0..n_classes {
        let mut axis = Array1::zeros(dim);
        axis[class] = separation;
        for s in 0..slides_per_class {
            let half = gaussian_blob(&mut r, &axis, tiles_per_slide / 2, noise);
            let mut tiles = Array2::zeros((tiles_per_slide, dim));
            for (k, row) in half.outer_iter().enumerate() {
                tiles.row_mut(2 * k).assign(&row);
                tiles.row_mut(2 * k + 1).assign(&row.mapv(|v| -v));
            }
            slides.push(Slide::uniform(
                format!("c{class}-s{s}"),
                Some(format!("class{class}")),
                tiles,
            )?);
        }
    }
    Dataset::uniform("equal-centroid", slides)
}

/// Labeled slides drawn from well-separated class blobs: class `c` has its
/// center at `separation * e_c`.
pub fn separated_classes(
    n_classes: usize,
    slides_per_class: usize,
    tiles_per_slide: usize,
    dim: usize,
    separation: f64,
    spec: BlobSpec,
    seed: u64,
) -> Result<Dataset> {
    assert!(dim >= n_classes, "need one axis per class");
    let mut r = rng(seed);
    let mut slides = Vec::new();
    for class in 0..n_classes {
        let mut center = Array1::zeros(dim);
        center[class] = separation;
        for s in 0..slides_per_class {
            let c = &center + &normal_vector(&mut r, dim, spec.slide_spread);
            let tiles = gaussian_blob(&mut r, &c, tiles_per_slide, spec.tile_spread);
            slides.push(Slide::uniform(
                format!("c{class}-s{s}"),
                Some(format!("class{class}")),
                tiles,
            )?);
        }
    }
    Dataset::uniform("separated", slides)
}
