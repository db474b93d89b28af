use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
///
/// Class violations (an operator outside `C_α`, a non-concave broken line)
/// are reported as data, not through this type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not hermitian (‖A − A*‖₂ = {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e}, threshold {threshold:.3e})")]
    NotPsd { min_eig: f64, threshold: f64 },

    #[error("matrix is singular or too ill-conditioned (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
