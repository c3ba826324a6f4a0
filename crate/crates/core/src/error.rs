//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("IO error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: usize, msg: String },

    #[error("missing file: {0}")]
    MissingFile(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{op} did not converge: residual {residual:e} after {iterations} iterations")]
    NonConvergence { op: &'static str, residual: f64, iterations: usize },

    #[error("graph is disconnected: {0}")]
    Disconnected(String),

    #[error("unstable step size: dt = {dt} but stability requires dt < {limit}")]
    UnstableStep { dt: f64, limit: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
}

impl Error {
    pub(crate) fn parse(file: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { file: file.into(), line, msg: msg.into() }
    }
}
