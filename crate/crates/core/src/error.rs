use thiserror::Error;

use crate::minmode::MinModeResult;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: fields live on different grids")]
    GridMismatch,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported backend: {0}")]
    UnsupportedBackend(String),

    #[error("eigensolver did not converge after {} iterations (residual {:.3e})", .0.iterations, .0.residual)]
    MinModeNotConverged(Box<MinModeResult>),

    #[error("linear solve breakdown: {0}")]
    Breakdown(String),

    #[error("degenerate direction: {0}")]
    DegenerateDirection(String),

    #[error("value count mismatch: header declares {expected}, file holds {found}")]
    ValueCountMismatch { expected: usize, found: usize },

    #[error("malformed field file: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("expression error: {0}")]
    Expr(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
