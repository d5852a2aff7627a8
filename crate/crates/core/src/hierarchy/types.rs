use std::collections::HashSet;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::ot::{validate_probability, DiscreteMeasure};

/// A slide: an unordered weighted collection of tile embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Slide {
    pub id: String,
    pub label: Option<String>,
    measure: DiscreteMeasure,
}

impl Slide {
    pub fn new(
        id: impl Into<String>,
        label: Option<String>,
        tiles: Array2<f64>,
        tile_weights: Array1<f64>,
    ) -> Result<Self> {
        Ok(Self {
            id: id.into(),
            label,
            measure: DiscreteMeasure::new(tiles, tile_weights)?,
        })
    }

    /// Slide with uniform tile weights.
    pub fn uniform(id: impl Into<String>, label: Option<String>, tiles: Array2<f64>) -> Result<Self> {
        let n = tiles.nrows().max(1);
        Self::new(id, label, tiles, Array1::from_elem(n, 1.0 / n as f64))
    }

    pub fn tiles(&self) -> ArrayView2<'_, f64> {
        self.measure.points()
    }

    pub fn tile_weights(&self) -> ArrayView1<'_, f64> {
        self.measure.weights()
    }

    pub fn measure(&self) -> &DiscreteMeasure {
        &self.measure
    }

    pub fn n_tiles(&self) -> usize {
        self.measure.len()
    }

    pub fn dim(&self) -> usize {
        self.measure.dim()
    }

    /// Tile-weighted mean embedding.
    pub fn centroid(&self) -> Array1<f64> {
        let w = self.tile_weights();
        let mut c = Array1::zeros(self.dim());
        for (row, &wi) in self.tiles().outer_iter().zip(w.iter()) {
            c.scaled_add(wi, &row);
        }
        c
    }
}

/// A dataset: a weighted collection of slides sharing one embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    slides: Vec<Slide>,
    slide_weights: Array1<f64>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, slides: Vec<Slide>, slide_weights: Array1<f64>) -> Result<Self> {
        if slides.is_empty() {
            return Err(Error::Shape("dataset needs at least one slide".into()));
        }
        if slide_weights.len() != slides.len() {
            return Err(Error::DimensionMismatch {
                context: "slide weights".into(),
                expected: slides.len(),
                found: slide_weights.len(),
            });
        }
        validate_probability(slide_weights.view(), "slide weights")?;
        let dim = slides[0].dim();
        let mut seen = HashSet::new();
        for s in &slides {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    context: format!("slide `{}`", s.id),
                    expected: dim,
                    found: s.dim(),
                });
            }
            if !seen.insert(s.id.as_str()) {
                return Err(Error::InvalidConfig(format!("duplicate slide id `{}`", s.id)));
            }
        }
        Ok(Self {
            name: name.into(),
            slides,
            slide_weights,
        })
    }

    pub fn uniform(name: impl Into<String>, slides: Vec<Slide>) -> Result<Self> {
        let n = slides.len().max(1);
        Self::new(name, slides, Array1::from_elem(n, 1.0 / n as f64))
    }

    pub fn slides(&self) -> &[Slide] {
        &self.slides
    }

    pub fn slide_weights(&self) -> ArrayView1<'_, f64> {
        self.slide_weights.view()
    }

    pub fn len(&self) -> usize {
        self.slides.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slides.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.slides[0].dim()
    }

    pub fn total_tiles(&self) -> usize {
        self.slides.iter().map(Slide::n_tiles).sum()
    }

    pub fn slide(&self, id: &str) -> Option<&Slide> {
        self.slides.iter().find(|s| s.id == id)
    }

    /// Replaces every slide through `f`, keeping slide weights.
    pub fn map_slides(&self, f: impl FnMut(&Slide) -> Slide) -> Self {
        Self {
            name: self.name.clone(),
            slides: self.slides.iter().map(f).collect(),
            slide_weights: self.slide_weights.clone(),
        }
    }
}

pub(crate) fn check_same_dim(a: &Dataset, b: &Dataset) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("datasets `{}` and `{}`", a.name, b.name),
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}
