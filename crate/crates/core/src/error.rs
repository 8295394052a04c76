use thiserror::Error;

/// Failure classes raised across the solver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("no nonzero singular value: {0}")]
    NoNonzeroSingularValue(String),

    #[error("ledger error: {0}")]
    Ledger(String),

    #[error("planning error: {0}")]
    Planning(String),

    #[error("infeasible subproblem at stage {stage}, outcome {outcome}: {detail}")]
    Infeasible {
        stage: usize,
        outcome: usize,
        detail: String,
    },

    #[error("reference solve did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    /// An error raised inside the nested recursion, tagged with the
    /// (stage, outer-iteration) path that led to it.
    #[error("at path {path:?}: {source}")]
    AtPath {
        path: Vec<(usize, usize)>,
        source: Box<Error>,
    },
}

impl Error {
    pub fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    /// Attach one more (stage, index) hop to the error path.
    pub fn at(self, stage: usize, index: usize) -> Self {
        match self {
            Error::AtPath { mut path, source } => {
                path.insert(0, (stage, index));
                Error::AtPath { path, source }
            }
            other => Error::AtPath {
                path: vec![(stage, index)],
                source: Box::new(other),
            },
        }
    }

    /// The innermost error with any path context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtPath { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
