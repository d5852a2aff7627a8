use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Non-negative finite ground-cost matrix between two point sets.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix(Array2<f64>);

impl CostMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Shape("cost matrix must be at least 1x1".into()));
        }
        for &c in &entries {
            if !c.is_finite() {
                return Err(Error::NonFinite("cost matrix".into()));
            }
            if c < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "cost matrix entries must be >= 0, found {c}"
                )));
            }
        }
        Ok(Self(entries))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// Pairwise squared Euclidean distances, `C[i][j] = sum_k (x_i[k] - y_j[k])^2`.
///
/// Computed by the direct difference formula so that identical rows give an
/// exact zero and `cost(Y, X)` is bitwise the transpose of `cost(X, Y)`.
pub fn squared_euclidean_cost(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<CostMatrix> {
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch {
            context: "squared euclidean cost".into(),
            expected: x.ncols(),
            found: y.ncols(),
        });
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cost inputs".into()));
    }
    let (n, m) = (x.nrows(), y.nrows());
    let mut out = Array2::<f64>::zeros((n, m));
    let x = x.as_standard_layout();
    let y = y.as_standard_layout();
    for (i, xi) in x.outer_iter().enumerate() {
        let xi = xi.as_slice().expect("standard layout row");
        for (j, yj) in y.outer_iter().enumerate() {
            let yj = yj.as_slice().expect("standard layout row");
            out[[i, j]] = squared_distance(xi, yj);
        }
    }
    // Squares of finite differences can still overflow to +inf.
    CostMatrix::new(out)
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| {
            let d = p - q;
            d * d
        })
        .sum()
}
