use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("time {t} is outside the drift domain [0, 1)")]
    TimeOutOfDomain { t: f64 },

    #[error("{0} is not supported for this target")]
    Unsupported(&'static str),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("all importance weights underflowed (zero total mass) at t = {t}")]
    ZeroMass { t: f64 },

    #[error("state diverged at step {step}")]
    Divergence { step: usize },

    #[error("{} of {total} chains failed; first: chain {} ({})", failures.len(), failures[0].0, failures[0].1)]
    Ensemble {
        total: usize,
        failures: Vec<(usize, Box<Error>)>,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True when the failure is a numerical blow-up of some chain (as opposed to a
    /// configuration or domain error).
    pub fn is_divergence(&self) -> bool {
        match self {
            Error::Divergence { .. } | Error::NonFinite(_) | Error::ZeroMass { .. } => true,
            Error::Ensemble { failures, .. } => failures.iter().any(|(_, e)| e.is_divergence()),
            _ => false,
        }
    }
}
