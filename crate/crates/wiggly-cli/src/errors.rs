//! Process-level error classification. Every failure maps to one of three
//! exit codes: 2 for configuration problems (bad flags, bad config file,
//! invalid parameter values), 3 for solver failures (the computation itself
//! went wrong), and 4 for an exhausted iteration budget (the artifact, where
//! one is defined for this case, has already been written with its best
//! estimate flagged).

use thiserror::Error;
use wiggly::dynamics::DynamicsError;
use wiggly::limit_ode::LimitOdeError;
use wiggly::potentials::PotentialError;
use wiggly::proximal::ProxError;
use wiggly::HomogenizationError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Budget(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Budget(_) => 4,
        }
    }
}

impl From<PotentialError> for CliError {
    fn from(err: PotentialError) -> Self {
        CliError::Config(err.to_string())
    }
}

impl From<ProxError> for CliError {
    fn from(err: ProxError) -> Self {
        match err {
            ProxError::InvalidInput(_) => CliError::Config(err.to_string()),
            ProxError::NonCoercive { .. } => CliError::Solver(err.to_string()),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(err: DynamicsError) -> Self {
        match err {
            DynamicsError::InvalidInput(_) => CliError::Config(err.to_string()),
            DynamicsError::Prox(inner) => inner.into(),
            DynamicsError::MonotonicityViolation { .. } => CliError::Solver(err.to_string()),
        }
    }
}

impl From<HomogenizationError> for CliError {
    fn from(err: HomogenizationError) -> Self {
        match err {
            HomogenizationError::InvalidInput(_) => CliError::Config(err.to_string()),
            HomogenizationError::Prox(inner) => inner.into(),
            HomogenizationError::BudgetExceeded { .. } => CliError::Budget(err.to_string()),
            HomogenizationError::HypothesisViolated(_)
            | HomogenizationError::NotFound { .. }
            | HomogenizationError::QuadratureSingularity(_) => CliError::Solver(err.to_string()),
        }
    }
}

impl From<LimitOdeError> for CliError {
    fn from(err: LimitOdeError) -> Self {
        match err {
            LimitOdeError::InvalidInput(_) => CliError::Config(err.to_string()),
            LimitOdeError::Homogenization(inner) => inner.into(),
            LimitOdeError::Dynamics(inner) => inner.into(),
            LimitOdeError::Potential(inner) => inner.into(),
            LimitOdeError::ControllerStalled { .. } => CliError::Solver(err.to_string()),
        }
    }
}
