use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical floor below zero tolerated for debiased entries.
pub const NEGATIVE_FLOOR: f64 = -1e-8;
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Provenance carried with every distance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixMetadata {
    pub epsilon_inner: Option<f64>,
    pub epsilon_outer: Option<f64>,
    pub debiased: bool,
    pub metric: String,
    pub subsample: Option<usize>,
    pub seed: Option<u64>,
    pub version: String,
    /// Number of entries whose solves did not reach tolerance.
    pub unconverged: usize,
    /// Further run settings, echoed verbatim.
    pub extra: BTreeMap<String, String>,
}

impl Default for MatrixMetadata {
    fn default() -> Self {
        Self {
            epsilon_inner: None,
            epsilon_outer: None,
            debiased: false,
            metric: String::new(),
            subsample: None,
            seed: None,
            version: crate::VERSION.to_string(),
            unconverged: 0,
            extra: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
    pub entries: Array2<f64>,
    pub metadata: MatrixMetadata,
}

impl DistanceMatrix {
    pub fn new(
        row_ids: Vec<String>,
        col_ids: Vec<String>,
        entries: Array2<f64>,
        metadata: MatrixMetadata,
    ) -> Result<Self> {
        let m = Self {
            row_ids,
            col_ids,
            entries,
            metadata,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = self.entries.dim();
        if n != self.row_ids.len() || m != self.col_ids.len() {
            return Err(Error::Shape(format!(
                "{n}x{m} entries for {} row ids and {} column ids",
                self.row_ids.len(),
                self.col_ids.len()
            )));
        }
        if self.entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("distance matrix".into()));
        }
        if self.metadata.debiased {
            if let Some(v) = self.entries.iter().find(|v| **v < NEGATIVE_FLOOR) {
                return Err(Error::InvalidConfig(format!(
                    "debiased distance matrix has negative entry {v}"
                )));
            }
        }
        if self.is_square_same_ids() {
            self.check_symmetric(SYMMETRY_TOLERANCE)?;
            if self.metadata.debiased {
                for i in 0..n {
                    if self.entries[[i, i]].abs() > SYMMETRY_TOLERANCE {
                        return Err(Error::InvalidConfig(format!(
                            "debiased self-distance of `{}` is {}",
                            self.row_ids[i],
                            self.entries[[i, i]]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_square_same_ids(&self) -> bool {
        self.row_ids == self.col_ids
    }

    pub fn check_symmetric(&self, tol: f64) -> Result<()> {
        let (n, m) = self.entries.dim();
        if n != m {
            return Err(Error::Shape(format!("matrix is {n}x{m}, not square")));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (self.entries[[i, j]], self.entries[[j, i]]);
                if (a - b).abs() > tol {
                    return Err(Error::InvalidConfig(format!(
                        "matrix not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, row: &str, col: &str) -> Option<f64> {
        let i = self.row_ids.iter().position(|r| r == row)?;
        let j = self.col_ids.iter().position(|c| c == col)?;
        Some(self.entries[[i, j]])
    }
}
