use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix {index} is not Hermitian (max asymmetry {max_asymmetry:e})")]
    NotHermitian { index: usize, max_asymmetry: f64 },

    #[error("invalid multi-index {entries:?}: {reason}")]
    InvalidMultiIndex { entries: Vec<usize>, reason: String },

    #[error("Jacobi eigensolver did not converge within {sweeps} sweeps (off-diagonal {off_norm:e})")]
    EigenNoConvergence { sweeps: usize, off_norm: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature tolerance not met: estimate error {abs_error:e} > target {target:e} ({context})")]
    ToleranceNotMet {
        context: String,
        abs_error: f64,
        target: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid too small for the finite-difference stencil: {0}")]
    GridTooSmall(String),
}

impl Error {
    pub(crate) fn dim(what: &'static str, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch {
            what,
            expected,
            got,
        }
    }
}
