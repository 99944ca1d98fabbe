use alloc::string::String;

/// Errors raised by the tomography routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate state: {0}")]
    DegenerateState(String),

    #[error("numerical consistency failure: {0}")]
    NumericalConsistency(String),

    #[error("empty measurement: {0}")]
    EmptyMeasurement(String),

    #[error("empty data: {0}")]
    EmptyData(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
