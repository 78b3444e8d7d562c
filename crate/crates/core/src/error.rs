use thiserror::Error;

/// Errors raised by the physics modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("degenerate selection: retained fraction {fraction:e} is below the floor {floor:e}")]
    DegenerateSelection { fraction: f64, floor: f64 },

    #[error("empty ensemble: {0}")]
    EmptyEnsemble(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("inversion error: {0}")]
    Inversion(String),

    #[error("degenerate ensemble: {0}")]
    DegenerateEnsemble(String),

    #[error("numeric error: {0}")]
    Numeric(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
