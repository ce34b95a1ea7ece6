use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient samples: need at least {needed}, have {have}")]
    InsufficientSamples { needed: u64, have: u64 },

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("trajectory {index} diverged (non-finite state at step {step})")]
    NonFiniteTrajectory { index: u64, step: usize },

    #[error("covariance lost positive semidefiniteness at step {step} (min pivot {min_pivot:e})")]
    NotPositiveSemidefinite { step: usize, min_pivot: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
