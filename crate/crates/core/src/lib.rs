//! Hierarchical optimal-transport distances between datasets of slides,
//! where every slide is itself a weighted set of tile embeddings.

pub mod analysis;
pub mod bench;
pub mod error;
pub mod hierarchy;
pub mod io;
pub mod ot;
pub mod synth;

pub use error::{Error, ErrorClass, Result};

/// Version string stamped into every output file.
pub const VERSION: &str = concat!("hhot ", env!("CARGO_PKG_VERSION"));
