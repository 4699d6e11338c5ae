use thiserror::Error;

use crate::analytic::Sign;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid truncation: {0}")]
    InvalidTruncation(String),

    #[error(
        "truncation too small: {mode} tail probability {tail:.3e} exceeds threshold {threshold:.1e}"
    )]
    TruncationTooSmall {
        mode: &'static str,
        tail: f64,
        threshold: f64,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate detuning: {0}")]
    DegenerateDetuning(&'static str),

    #[error("null branch {sign}: detection probability {probability:.3e} below 1e-14")]
    NullBranch { sign: Sign, probability: f64 },

    #[error("integrator failure at t = {t}: {reason}")]
    IntegratorFailure { t: f64, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("eigendecomposition did not converge")]
    Eigendecomposition,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Failures that the CLI reports as numerical (exit code 3) rather than
    /// as configuration problems.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::TruncationTooSmall { .. }
                | Error::IntegratorFailure { .. }
                | Error::NullBranch { .. }
                | Error::Eigendecomposition
                | Error::DegenerateDetuning(_)
        )
    }
}
