use thiserror::Error;

/// Errors raised while building or evaluating the beam model.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("profile domains differ: [0, {0}] vs [0, {1}]")]
    DomainMismatch(f64, f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("clamped degrees of freedom must be zero (found {0:e})")]
    ClampedDofsNonzero(f64),

    #[error("time-step factorization is stale: prepared for dt = {prepared}, asked for dt = {requested}")]
    StaleFactorization { prepared: f64, requested: f64 },

    #[error("wrong channel: expected {expected:?}, got {got:?}")]
    WrongChannel {
        expected: crate::beam::ChannelTag,
        got: crate::beam::ChannelTag,
    },

    #[error("profile file: {0}")]
    Io(#[from] std::io::Error),

    #[error("profile JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
