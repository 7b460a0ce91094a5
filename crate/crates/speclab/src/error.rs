use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violated: {0}")]
    Contract(String),

    #[error("infinite product did not reach epsilon {epsilon:e} within {max_depth} factors")]
    Truncation { epsilon: f64, max_depth: usize },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("logarithm undefined: {0}")]
    UndefinedLog(String),

    #[error("symmetry violation: imaginary part {imag:e} exceeds {tol:e}")]
    SymmetryViolation { imag: f64, tol: f64 },

    #[error("point {x} is not in the support (mass {mass:e} at radius {radius:e})")]
    NotInSupport { x: f64, radius: f64, mass: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("unsupported model: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
