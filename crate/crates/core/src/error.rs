use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: row {row}: {message}")]
    Parse {
        path: String,
        row: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("cannot fit model: no observed events")]
    NoEvents,

    #[error(
        "Newton iterations did not converge after {iterations} steps \
         (gradient inf-norm {gradient_norm:.3e}, last iterate {coefficients:?})"
    )]
    CoxNonConvergence {
        iterations: usize,
        gradient_norm: f64,
        coefficients: Vec<f64>,
    },

    #[error(
        "coefficient {index} diverged to {value:.3} (likely separation); \
         refit with a positive ridge penalty"
    )]
    Separation { index: usize, value: f64 },

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("every calibration weight is zero at grid time {time}")]
    DegenerateTime { time: f64 },

    #[error("doubly monotone projection did not converge after {iterations} iterations (last change {change:.3e})")]
    ProjectionNonConvergence {
        iterations: usize,
        change: f64,
        last_iterate: Vec<f64>,
    },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("invalid simulation setting {0} (expected 1..=6)")]
    InvalidSetting(u8),

    #[error("usage: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::InvalidSetting(_) => 1,
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::Alignment(_)
            | Error::Io { .. }
            | Error::Json { .. } => 2,
            Error::NoEvents
            | Error::CoxNonConvergence { .. }
            | Error::Separation { .. }
            | Error::Degenerate(_)
            | Error::DegenerateTime { .. }
            | Error::ProjectionNonConvergence { .. }
            | Error::UndefinedMetric(_) => 3,
        }
    }
}
