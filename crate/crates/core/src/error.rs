use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid basis state: {0}")]
    InvalidState(String),

    #[error("duplicate basis state {0}")]
    DuplicateState(String),

    #[error("basis closure exceeded cap of {cap} states")]
    ClosureCap { cap: usize },

    #[error("state not normalized: |psi|^2 = {norm_sq}")]
    NotNormalized { norm_sq: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("dark subspace has dimension {found}, expected {expected}")]
    KernelDimension { found: usize, expected: usize },

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("adiabatic elimination is singular at zero detuning")]
    SingularElimination,

    #[error("negative radicand in counterdiabatic amplitude at t = {time} (theta_dot = {theta_dot})")]
    NegativeRadicand { time: f64, theta_dot: f64 },

    #[error("integration failed: {0}")]
    IntegrationFailure(String),

    #[error("empty sweep axis `{0}`")]
    EmptyAxis(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
