use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Bad arguments or configuration; maps to CLI exit code 2.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A numerical guard tripped (resolution too coarse, residual overlap, degenerate estimator); exit code 3.
    #[error("numerical guard: {0}")]
    NumericalGuard(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
