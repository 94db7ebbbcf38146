use std::path::PathBuf;

use thiserror::Error;

use crate::solver::SolverResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    Dimension(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("solver diverged at iteration {iteration} (non-finite iterate)")]
    NumericDivergence { iteration: usize },

    #[error("constrained problem could not be bracketed: {0}")]
    Infeasible(String),

    #[error("solver returned an all-zero precoder (lambda={}, mu={}); retry with a smaller mu", .diagnostics.lambda, .diagnostics.mu)]
    DegenerateSolution { diagnostics: Box<SolverResult> },

    #[error("user {user} has an all-zero channel vector")]
    DegenerateChannel { user: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
