//! Dataset manifests: one JSON document naming a dataset and its slides.
//!
//! ```json
//! {
//!   "name": "blca",
//!   "slides": [
//!     {"id": "s1", "label": "tumor", "path": "s1.bin", "weight": 2.0},
//!     {"id": "s2", "path": "embeddings/s2.csv"}
//!   ]
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory. Unknown fields
//! are rejected.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::embedding::read_embedding_file;
use crate::error::{Error, Result};
use crate::hierarchy::{Dataset, Slide};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlideEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    pub slides: Vec<SlideEntry>,
}

/// A parsed and validated manifest whose embeddings have not been read yet.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub path: PathBuf,
    pub spec: DatasetManifest,
    /// Normalized slide weights, aligned with `spec.slides`.
    pub weights: Array1<f64>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.spec.slides.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spec.slides.is_empty()
    }

    /// Embedding path of slide `i`, resolved against the manifest directory.
    pub fn resolved_path(&self, i: usize) -> PathBuf {
        let p = &self.spec.slides[i].path;
        if p.is_absolute() {
            p.clone()
        } else {
            self.path.parent().unwrap_or(Path::new("")).join(p)
        }
    }

    pub fn load_slide(&self, i: usize) -> Result<Slide> {
        let entry = &self.spec.slides[i];
        let path = self.resolved_path(i);
        let emb = read_embedding_file(&path)?;
        Slide::uniform(entry.id.clone(), entry.label.clone(), emb.values).map_err(|e| Error::Manifest {
            path: self.path.clone(),
            field: format!("slides[{i}].path"),
            message: format!("{}: {e}", path.display()),
        })
    }

    pub fn slide_index(&self, id: &str) -> Option<usize> {
        self.spec.slides.iter().position(|s| s.id == id)
    }

    /// Reads every embedding file and assembles the dataset.
    pub fn load(&self) -> Result<Dataset> {
        let mut slides: Vec<Slide> = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let s = self.load_slide(i)?;
            if let Some(first) = slides.first() {
                if s.dim() != first.dim() {
                    return Err(Error::DimensionMismatch {
                        context: format!(
                            "{} (slide `{}` in {})",
                            self.resolved_path(i).display(),
                            s.id,
                            self.path.display()
                        ),
                        expected: first.dim(),
                        found: s.dim(),
                    });
                }
            }
            slides.push(s);
        }
        Dataset::new(self.spec.name.clone(), slides, self.weights.clone())
    }
}

fn manifest_error(path: &Path, field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Manifest {
        path: path.to_path_buf(),
        field: field.into(),
        message: message.into(),
    }
}

/// Parses and validates a manifest without touching the embedding files.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(path, &text)
}

pub fn parse_manifest(path: &Path, text: &str) -> Result<Manifest> {
    let spec: DatasetManifest = serde_json::from_str(text).map_err(|e| {
        manifest_error(
            path,
            "<document>",
            format!("line {}, column {}: {e}", e.line(), e.column()),
        )
    })?;
    if spec.slides.is_empty() {
        return Err(manifest_error(path, "slides", "no slides listed"));
    }
    let mut seen = HashSet::new();
    for (i, s) in spec.slides.iter().enumerate() {
        if s.id.is_empty() {
            return Err(manifest_error(path, format!("slides[{i}].id"), "empty id"));
        }
        if !seen.insert(s.id.as_str()) {
            return Err(manifest_error(
                path,
                format!("slides[{i}].id"),
                format!("duplicate slide id `{}`", s.id),
            ));
        }
        if let Some(w) = s.weight {
            if !(w.is_finite() && w > 0.0) {
                return Err(manifest_error(
                    path,
                    format!("slides[{i}].weight"),
                    format!("weight must be positive and finite, got {w}"),
                ));
            }
        }
    }
    let n_weighted = spec.slides.iter().filter(|s| s.weight.is_some()).count();
    let weights = match n_weighted {
        0 => Array1::from_elem(spec.slides.len(), 1.0 / spec.slides.len() as f64),
        n if n == spec.slides.len() => {
            let raw = Array1::from_iter(spec.slides.iter().map(|s| s.weight.unwrap()));
            let sum = raw.sum();
            raw / sum
        }
        _ => {
            return Err(manifest_error(
                path,
                "slides[].weight",
                "weights must be given for all slides or none",
            ))
        }
    };
    Ok(Manifest {
        path: path.to_path_buf(),
        spec,
        weights,
    })
}

/// Reads a manifest and all embedding files it references.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Dataset> {
    read_manifest(path)?.load()
}
