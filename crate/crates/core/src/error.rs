use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes shared across the crate. Witness points are carried as
/// `f64` so the error type does not depend on the scalar parameter.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value in {context} at x = {at:?}")]
    NumericFailure { context: String, at: Vec<f64> },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("truncation policy violated: {0}")]
    PolicyViolation(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation failed [{check}]: {detail} (witness {witness:?})")]
    Validation {
        check: String,
        detail: String,
        witness: Vec<f64>,
    },
}

impl Error {
    pub(crate) fn numeric(context: impl Into<String>, at: Vec<f64>) -> Self {
        Error::NumericFailure {
            context: context.into(),
            at,
        }
    }
}
