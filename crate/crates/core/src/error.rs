use thiserror::Error;

/// Errors raised by the planning library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArtoError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("unknown integrator `{0}` (expected euler, heun or rk4)")]
    UnknownIntegrator(String),
    #[error("rollout produced a non-finite state")]
    NonFiniteRollout,
    #[error("plan shape mismatch: expected {expected_feet} feet and {} durations, got {feet} and {durations}", expected_feet + 1)]
    PlanShape {
        expected_feet: usize,
        feet: usize,
        durations: usize,
    },
    #[error("quadratic program is infeasible")]
    InfeasibleQp,
    #[error("no plan has been produced yet")]
    NotReady,
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = ArtoError> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> ArtoError {
    ArtoError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
