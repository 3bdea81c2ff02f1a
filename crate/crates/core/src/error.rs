use thiserror::Error;

/// Errors raised by the library. Verdict-style failures (an approximation that
/// does not verify, a cover that does not exist) are reported through
/// [`crate::Verdict`] instead.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MmError {
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("basepoint not in support at scale {0}")]
    BasepointNotInSupport(f64),
    #[error("index {index} out of range for space with {n} points")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameters: {0}")]
    Parameter(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("not an object of the category: {0}")]
    NotAnObject(String),
    #[error("not a valid direct system at numeric precision: {0}")]
    NumericDirectSystem(String),
    #[error("no representable atoms at stage {0}")]
    NoRepresentableAtoms(usize),
    #[error("internal assertion failed: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, MmError>;
