//! Library error type.

use crate::channel::Domain;

#[derive(Debug, thiserror::Error)]
pub enum AfdmError {
    /// A parameter violates its documented constraint.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The Gram matrix G = H̆H̆ᴴ + σ²I failed the positive-definiteness
    /// check during Cholesky factorization. σ² is too small relative to
    /// round-off; the caller may retry with jitter.
    #[error("matrix numerically non-positive-definite (sigma^2 too small relative to round-off)")]
    NotPositiveDefinite,

    /// A channel matrix was supplied in the wrong domain.
    #[error("channel matrix domain mismatch: expected {expected:?}, got {got:?}")]
    DomainMismatch { expected: Domain, got: Domain },

    /// Simulation configuration is internally inconsistent.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, AfdmError>;
