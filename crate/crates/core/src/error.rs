use thiserror::Error;

/// Errors raised by the simulation, barrier and quadrature routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("model evaluation produced a non-finite value at state {state:?}")]
    ModelEvaluation { state: Vec<f64> },

    #[error("state is outside the interior of the safe set: h(x) = {value}")]
    OutsideSafeSet { value: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid(msg: impl Into<String>) -> LabError {
    LabError::InvalidArgument(msg.into())
}
