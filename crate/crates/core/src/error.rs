use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("matrix is not symmetric: entry ({row}, {col}) differs from its transpose")]
    NotSymmetric { row: usize, col: usize },

    #[error("unsupported Matrix Market field `{0}` (only real and integer are accepted)")]
    UnsupportedField(String),

    #[error("unsupported Matrix Market format: {0}")]
    UnsupportedFormat(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not positive definite (pivot {pivot} is {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("factorization needs {required} band entries, limit is {limit}")]
    TooLarge { required: usize, limit: usize },

    #[error("moment {index} = {value} lies outside (0, 1]")]
    ConstraintDomain { index: usize, value: f64 },

    #[error("non-finite density while updating coefficient {coefficient}")]
    NumericalFailure { coefficient: usize },

    #[error("relative error is undefined for an exact value of zero")]
    UndefinedRelativeError,

    #[error("iterative solve did not converge after {iterations} iterations (residual {residual:e})")]
    SolveDiverged { iterations: usize, residual: f64 },

    #[error("{0} is not implemented")]
    Unimplemented(&'static str),
}

impl Error {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::NumericalFailure { .. }
                | Error::SolveDiverged { .. }
                | Error::UndefinedRelativeError
        )
    }
}
