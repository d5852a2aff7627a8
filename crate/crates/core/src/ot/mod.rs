//! Discrete optimal transport: ground costs, the log-domain Sinkhorn solver,
//! Sinkhorn divergences and a small exact oracle.

mod cost;
mod divergence;
mod exact;
mod measure;
mod sinkhorn;

pub(crate) use cost::squared_distance;
pub use cost::{squared_euclidean_cost, CostMatrix};
pub(crate) use divergence::cost_scale;
pub use divergence::{debias, debiased_value, entropic_ot, sinkhorn_divergence};
pub use exact::{exact_assignment, exact_ot_uniform, EXACT_MAX_N};
pub use measure::{normalize_weights, validate_probability, DiscreteMeasure, WEIGHT_SUM_TOLERANCE};
pub(crate) use sinkhorn::sinkhorn_with_scale;
pub use sinkhorn::{sinkhorn, Coupling, SolverConfig, TransportResult};
