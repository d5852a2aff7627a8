//! Two-level transport: tiles within slides, slides within datasets.
//!
//! The slide-to-slide distance solves OT between tile embeddings under the
//! squared Euclidean cost. Collecting it over all slide pairs gives a ground
//! cost between slides, over which a second OT problem compares datasets.

mod distance;
mod matrix;
mod types;

pub use distance::{
    centroid_distance, centroid_matrix, dataset_distance, dataset_distance_with, flat_dataset_distance,
    flat_dataset_distance_with, flat_memory_required, pool, resolve_scale, slide_cost_matrix, slide_cost_matrix_with,
    slide_distance, slide_distance_with, tile_coupling, CostScale, DatasetDistance, DirectSolver, HierarchyConfig,
    PairSolver, DEFAULT_MEMORY_BUDGET, METRIC_CENTROID, METRIC_FLAT, METRIC_HHOT,
};
pub use matrix::{DistanceMatrix, MatrixMetadata, NEGATIVE_FLOOR, SYMMETRY_TOLERANCE};
pub use types::{Dataset, Slide};
