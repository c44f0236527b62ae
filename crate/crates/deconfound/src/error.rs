//! Error taxonomy shared across the toolkit.
//!
//! Every fallible operation returns [`Error`]. Variants are grouped into
//! [`ErrorCategory`] so front ends can map failures to stable exit codes
//! without matching on individual variants.

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Array lengths or matrix dimensions that must agree do not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Treatment labels outside {0, .., n_arms - 1}.
    #[error("treatment coding: {0}")]
    TreatmentCoding(String),

    /// A treatment arm has no samples where at least one is required.
    #[error("empty arm: {0}")]
    EmptyArm(String),

    /// Weights that cannot support the requested statistic
    /// (non-finite, negative, zero-sum, or concentrated on one sample).
    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    /// Too few observations or replications for the requested statistic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Inputs whose dimensions disagree with a fitted model.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A linear system was numerically singular even after regularization.
    #[error("singular system: {0}")]
    SingularSystem(String),

    /// An iterative fit exhausted its iteration budget without meeting
    /// its convergence tolerance.
    #[error("did not converge: {0}")]
    NonConvergence(String),

    /// A computation produced NaN or infinity.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A data file does not match its documented column layout.
    #[error("schema: {0}")]
    Schema(String),

    /// A data file parsed cleanly but fails a required row or arm count.
    #[error("count: {0}")]
    Count(String),

    /// The requested realization index is absent from the data source.
    #[error("missing realization: {0}")]
    MissingRealization(String),

    /// Ground-truth effects were requested from a dataset that has none.
    #[error("missing ground truth: {0}")]
    MissingGroundTruth(String),

    /// Malformed or inconsistent configuration.
    #[error("config: {0}")]
    Config(String),

    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    /// A failure inside the replication loop, annotated with the
    /// replication index and, when known, the weighting scheme.
    #[error("replication {replication}{}: {source}", scheme.as_deref().map(|s| format!(" ({s})")).unwrap_or_default())]
    Replication {
        replication: usize,
        scheme: Option<String>,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse failure classes, each with a stable process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad configuration files or option combinations. Exit code 3.
    Config,
    /// Invalid inputs: shapes, codings, schemas, counts. Exit code 4.
    Data,
    /// Numerical failure: singular systems, divergence, NaN. Exit code 5.
    Numeric,
    /// Filesystem and serialization failures. Exit code 6.
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorCategory::Config => 3,
            ErrorCategory::Data => 4,
            ErrorCategory::Numeric => 5,
            ErrorCategory::Io => 6,
        }
    }
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::ShapeMismatch(_)
            | Error::TreatmentCoding(_)
            | Error::EmptyArm(_)
            | Error::DegenerateWeights(_)
            | Error::InsufficientData(_)
            | Error::DimensionMismatch(_)
            | Error::Schema(_)
            | Error::Count(_)
            | Error::MissingRealization(_)
            | Error::MissingGroundTruth(_) => ErrorCategory::Data,
            Error::SingularSystem(_) | Error::NonConvergence(_) | Error::NonFinite(_) => {
                ErrorCategory::Numeric
            }
            Error::Config(_) => ErrorCategory::Config,
            Error::Io { .. } | Error::Csv { .. } => ErrorCategory::Io,
            Error::Replication { source, .. } => source.category(),
        }
    }

    /// Wraps an error with its position in the replication loop.
    pub fn in_replication(self, replication: usize, scheme: Option<&str>) -> Error {
        Error::Replication {
            replication,
            scheme: scheme.map(str::to_owned),
            source: Box::new(self),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Error {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
