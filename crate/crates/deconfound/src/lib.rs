//! Propensity weighting toolkit and replication harness.
//!
//! The crate fits assignment models (penalized logistic likelihood and a
//! covariate-balancing objective), turns them into sample weights
//! (deconfounding factor, inverse probability, balance-objective inverse
//! probability, overlap, unit), feeds those weights into outcome models
//! (weighted linear ridge and weighted RBF kernel ridge) and
//! difference-in-means effect estimators, and measures what the weights
//! did to covariate balance. A harness replicates the whole pipeline over
//! seeds or benchmark realizations and writes deterministic reports.
//!
//! Replication loops run on a rayon pool by default; build with
//! `--no-default-features` for a fully sequential library. Results are
//! identical either way.

// Validation sites negate comparisons on purpose: `!(x > 0.0)` also
// rejects NaN, which the positive form lets through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod balance;
pub mod data;
pub mod effects;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod numeric;
pub mod outcome;
pub mod par;
pub mod propensity;
pub mod rng;
pub mod synth;
pub mod weights;

pub use data::{
    validate_bundle, DatasetBundle, FeatureRole, PropensityEstimator, PropensityFit, Scheme,
    WeightVector,
};
pub use error::{Error, ErrorCategory, Result};
pub use par::Execution;
