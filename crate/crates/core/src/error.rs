use thiserror::Error;

/// Errors produced by the numerical kernel, network construction, training
/// and dataset generation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    Shape {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("matrix is singular: numerical rank {rank} of {cols} columns")]
    Singular { rank: usize, cols: usize },

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("threshold pruned every node for output {output} at iteration {iteration}")]
    EmptyActiveSet { output: usize, iteration: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("exhaustive search refused: {cols} columns exceeds the limit of {limit}")]
    TooManyColumns { cols: usize, limit: usize },

    #[error("simulation became unstable at step {step}: {reason}")]
    Instability { step: usize, reason: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err(op: &'static str, expected: impl ToString, got: impl ToString) -> Error {
    Error::Shape {
        op,
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
