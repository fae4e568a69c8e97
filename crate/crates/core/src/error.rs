use thiserror::Error;

/// Errors raised by the synthesis toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} is not positive definite (pivot {pivot:.3e} <= threshold {threshold:.3e})")]
    NotPositiveDefinite { what: String, pivot: f64, threshold: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: String,
        found: String,
    },

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("infeasible synthesis spec: {0}")]
    InfeasibleSpec(String),

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("need more than {required} samples, got {found}")]
    InsufficientSamples { required: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn dims(what: impl Into<String>, expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            what: what.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Re-labels a positive-definiteness failure with the name of the
    /// offending quantity.
    pub(crate) fn relabel(self, label: &str) -> Self {
        match self {
            Error::NotPositiveDefinite { pivot, threshold, .. } => Error::NotPositiveDefinite {
                what: label.to_string(),
                pivot,
                threshold,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
