use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Largest tolerated deviation of a probability vector's sum from one.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// A weighted finite point set in `R^d`.
///
/// Points are stored row-major, one point per row. Weights form a probability
/// vector with one entry per point.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Array2<f64>,
    weights: Array1<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Array2<f64>, weights: Array1<f64>) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::Shape("measure needs at least one point".into()));
        }
        if points.ncols() == 0 {
            return Err(Error::Shape("points must have dimension >= 1".into()));
        }
        if weights.len() != points.nrows() {
            return Err(Error::DimensionMismatch {
                context: "measure weights".into(),
                expected: points.nrows(),
                found: weights.len(),
            });
        }
        check_finite(points.view(), "measure points")?;
        validate_probability(weights.view(), "measure weights")?;
        Ok(Self { points, weights })
    }

    /// Uniform weights over the given points.
    pub fn uniform(points: Array2<f64>) -> Result<Self> {
        let n = points.nrows().max(1);
        Self::new(points, Array1::from_elem(n, 1.0 / n as f64))
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn weights(&self) -> ArrayView1<'_, f64> {
        self.weights.view()
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }
}

pub(crate) fn check_finite(values: ArrayView2<'_, f64>, context: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context.to_string()))
    }
}

/// Checks that `weights` is a non-empty probability vector.
pub fn validate_probability(weights: ArrayView1<'_, f64>, context: &str) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidWeights(format!("{context}: empty")));
    }
    let mut sum = 0.0;
    for &w in weights {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidWeights(format!(
                "{context}: entry {w} is not a finite non-negative number"
            )));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::InvalidWeights(format!("{context}: sum is {sum}, expected 1")));
    }
    Ok(())
}

/// Rescales positive weights to sum to one.
pub fn normalize_weights(raw: &[f64], context: &str) -> Result<Array1<f64>> {
    if raw.is_empty() {
        return Err(Error::InvalidWeights(format!("{context}: empty")));
    }
    if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidWeights(format!(
            "{context}: weights must be finite and non-negative"
        )));
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidWeights(format!("{context}: weights sum to zero")));
    }
    Ok(raw.iter().map(|w| w / total).collect())
}
