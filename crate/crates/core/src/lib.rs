//! RSSI fingerprint localization with k-nearest neighbors.
//!
//! The pipeline: load fingerprints ([`dataset`]), map raw RSSI into one of
//! four representations ([`transform`]), compare fingerprints with a vector
//! metric ([`vecmetric`]), estimate positions with brute-force kNN
//! ([`estimator`]) and measure geodesic error ([`geo`], [`evaluate`]).
//! [`sweep`] tunes k, the threshold and the representation parameters on
//! the validation set.

pub mod dataset;
pub mod estimator;
pub mod evaluate;
pub mod geo;
pub mod sweep;
pub mod synthetic;
pub mod transform;
pub mod vecmetric;

pub use dataset::{FingerprintSet, FingerprintSource, Schema, SplitIndices};
pub use estimator::KnnModel;
pub use evaluate::{evaluate, ErrorStats, EvalConfig, EvalError, Target};
pub use geo::{GeoPoint, Geodesic};
pub use sweep::{select_best, SweepContext, SweepGrid, SweepResult};
pub use transform::{Representation, TransformParams};
pub use vecmetric::MetricKind;
