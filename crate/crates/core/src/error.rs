use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-supplied configuration (bounds, counts, index sets).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {context} (expected {expected}, got {actual})")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },

    /// The variance estimate is too small relative to the output scale.
    #[error("degenerate variance: estimate {variance:e} below threshold {threshold:e}")]
    DegenerateVariance { variance: f64, threshold: f64 },

    #[error("requested {requested} components but the snapshot matrix only supports m <= {achievable}")]
    RankDeficient { requested: usize, achievable: usize },

    #[error("estimates come from different pick-freeze designs")]
    ProvenanceMismatch,

    #[error("input {value} outside the domain [{lower}, {upper}] in dimension {dim}")]
    Domain {
        dim: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("quadrature did not converge: relative change {change:e} at {points} points")]
    NonConvergence { change: f64, points: usize },

    #[error("bootstrap dropped {dropped} of {total} replicates (limit 10%)")]
    TooManyDropped { dropped: usize, total: usize },

    #[error("integer overflow in cost model")]
    Overflow,

    #[error("empty common support across series")]
    EmptySupport,

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics rather than of the inputs or the filesystem.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateVariance { .. }
                | Error::ProvenanceMismatch
                | Error::NonConvergence { .. }
                | Error::TooManyDropped { .. }
                | Error::Overflow
        )
    }
}
