//! Reading and writing embeddings, manifests and distance matrices, plus
//! seeded subsampling and the pairwise result cache.

mod cache;
mod embedding;
mod manifest;
mod matrix_file;
mod subsample;

pub use cache::{cached_slide_cost_matrix, slide_digest, CachedSolver};
pub use embedding::{
    decode_binary, encode_binary, read_embedding_file, write_embedding_file, EmbeddingFile, FORMAT_VERSION, MAGIC,
};
pub use manifest::{load_manifest, parse_manifest, read_manifest, DatasetManifest, Manifest, SlideEntry};
pub use matrix_file::{
    format_distance_matrix, parse_distance_matrix, read_distance_matrix, read_labels, write_distance_matrix,
    write_labels,
};
pub use subsample::{bounded, sample_indices, subsample_dataset, subsample_rng, subsample_tiles, SUBSAMPLE_RNG};
