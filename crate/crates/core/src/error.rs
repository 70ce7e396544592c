use thiserror::Error;

use crate::wen::WenError;

pub type Result<T, E = FqheError> = std::result::Result<T, E>;

/// Errors raised by the numerical kernels and the drivers built on them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FqheError {
    #[error("theta series does not converge: {0}")]
    NonconvergentDomain(String),

    #[error("tolerance {tol:e} unachievable: truncation radius would exceed the cap of {cap} lattice points")]
    ToleranceUnachievable { tol: f64, cap: usize },

    #[error("series value overflowed the double-precision range")]
    Overflow,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid with {points:e} evaluations exceeds the cap of {cap:e}")]
    GridTooLarge { points: f64, cap: f64 },

    #[error("grid too coarse: step h and 2h curvature estimates differ by {discrepancy:e} (allowed {allowed:e})")]
    GridTooCoarse { discrepancy: f64, allowed: f64 },

    #[error("only {survivors} sample points survived the exclusion rule (need at least {needed})")]
    DegenerateSampling { survivors: usize, needed: usize },

    #[error("matrix is not hermitian positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error(transparent)]
    Wen(#[from] WenError),
}

impl FqheError {
    /// True for failures caused by bad user input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            FqheError::NonconvergentDomain(_) | FqheError::InvalidInput(_) | FqheError::Wen(_)
        )
    }
}
