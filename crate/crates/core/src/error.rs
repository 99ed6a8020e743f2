use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the solvers, loaders and the command-line front end.
#[derive(Debug, Error)]
pub enum IbError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("target {target} is infeasible (maximum attainable {limit})")]
    InfeasibleTarget { target: f64, limit: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("multiplier search failed: {0}")]
    BracketFailure(String),

    #[error("divergence is infinite: {0}")]
    UndefinedDivergence(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IbError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IbError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            IbError::InfeasibleTarget { .. } => 1,
            IbError::NumericalFailure(_)
            | IbError::BracketFailure(_)
            | IbError::UndefinedDivergence(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T, E = IbError> = std::result::Result<T, E>;
