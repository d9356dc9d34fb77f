use thiserror::Error;

/// Errors raised by the splitting library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("graph is disconnected: {0}")]
    Disconnected(String),

    #[error("inconsistent linear system (residual {residual:e})")]
    InconsistentSystem { residual: f64 },

    #[error("degree-balance solution has zero norm; limit formula undefined")]
    DegenerateAlpha,

    #[error("degenerate angle: deflated subspaces coincide numerically (cos = {cos})")]
    DegenerateAngle { cos: f64 },

    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
