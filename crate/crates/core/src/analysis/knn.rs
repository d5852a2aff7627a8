use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hierarchy::{DistanceMatrix, NEGATIVE_FLOOR, SYMMETRY_TOLERANCE};

/// A square distance matrix with one class label per id.
#[derive(Debug, Clone)]
pub struct LabeledMatrix {
    pub matrix: DistanceMatrix,
    pub labels: Vec<String>,
}

impl LabeledMatrix {
    pub fn new(matrix: DistanceMatrix, labels: Vec<String>) -> Result<Self> {
        let n = matrix.row_ids.len();
        if labels.len() != n {
            return Err(Error::Analysis(format!("{} labels for {n} ids", labels.len())));
        }
        if !matrix.is_square_same_ids() {
            return Err(Error::Analysis(
                "KNN needs a square matrix with identical row and column ids".into(),
            ));
        }
        matrix
            .check_symmetric(SYMMETRY_TOLERANCE)
            .map_err(|e| Error::Analysis(e.to_string()))?;
        if let Some(v) = matrix.entries.iter().find(|v| **v < NEGATIVE_FLOOR || !v.is_finite()) {
            return Err(Error::Analysis(format!("distance matrix has invalid entry {v}")));
        }
        let mut classes: Vec<&String> = labels.iter().collect();
        classes.sort();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::Analysis("classification needs at least two classes".into()));
        }
        Ok(Self { matrix, labels })
    }

    /// Pairs ids with labels from an `(id, label)` list; every id must be covered.
    pub fn from_id_labels(matrix: DistanceMatrix, pairs: &[(String, String)]) -> Result<Self> {
        let map: BTreeMap<&str, &str> = pairs.iter().map(|(i, l)| (i.as_str(), l.as_str())).collect();
        let labels = matrix
            .row_ids
            .iter()
            .map(|id| {
                map.get(id.as_str())
                    .map(|l| l.to_string())
                    .ok_or_else(|| Error::Analysis(format!("no label for id `{id}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(matrix, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnnResult {
    pub k: usize,
    pub predictions: Vec<String>,
    pub accuracy: f64,
    /// Fraction of each class predicted correctly.
    pub recall: BTreeMap<String, f64>,
}

/// Leave-one-out k-nearest-neighbor classification.
///
/// Neighbors are ordered by distance, ties by lower index. The majority class
/// among the `k` nearest wins; a tie between classes goes to whichever of
/// them has the nearest member.
pub fn knn_loocv(lm: &LabeledMatrix, k: usize) -> Result<KnnResult> {
    let n = lm.len();
    if k == 0 || k + 1 > n {
        return Err(Error::Analysis(format!("k = {k} outside 1..={}", n.saturating_sub(1))));
    }
    let d = &lm.matrix.entries;
    let mut predictions = Vec::with_capacity(n);
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| d[[i, a]].total_cmp(&d[[i, b]]).then(a.cmp(&b)));
        let neighbors = &others[..k];

        // (votes, rank of nearest member) per class
        let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for (rank, &j) in neighbors.iter().enumerate() {
            let e = tally.entry(lm.labels[j].as_str()).or_insert((0, rank));
            e.0 += 1;
        }
        let winner = tally
            .iter()
            .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
            .map(|(c, _)| c.to_string())
            .expect("k >= 1");
        predictions.push(winner);
    }

    let mut per_class: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut correct = 0;
    for (truth, pred) in lm.labels.iter().zip(&predictions) {
        let e = per_class.entry(truth.clone()).or_default();
        e.1 += 1;
        if truth == pred {
            e.0 += 1;
            correct += 1;
        }
    }
    Ok(KnnResult {
        k,
        predictions,
        accuracy: correct as f64 / n as f64,
        recall: per_class
            .into_iter()
            .map(|(c, (hit, total))| (c, hit as f64 / total as f64))
            .collect(),
    })
}
