use thiserror::Error;

use crate::minimax::SolveRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field contains non-finite values")]
    NonFinite,

    #[error("field mean {mean:e} exceeds mean-zero tolerance (project before calling)")]
    NonZeroMean { mean: f64 },

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("invalid region spec: {0}")]
    InvalidRegion(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid bubble spec: {0}")]
    InvalidBubble(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("mountain-pass geometry failure: {0}")]
    GeometryFailure(String),

    #[error("newton stagnated at residual {:e} after {} iterations", .0.residual_norm, .0.iterations)]
    Stagnation(Box<SolveRecord>),

    #[error("malformed field file: {0}")]
    FieldFormat(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
