//! Long-run averages of the linearized orbit: the homogenized velocity
//! `f_gamma(T)` with a certified error bound, the pinning threshold by two
//! independent methods, rational-velocity periodic orbits, and the small- and
//! large-`gamma` extreme regimes with their closed-form/ODE cross-checks.

mod cache;
mod extremes;
mod orbit;
mod threshold;
mod velocity;

pub use cache::VelocityCache;
pub use extremes::{extreme_limits, gradient_flow_velocity, ExtremeLimits};
pub use orbit::{detect_periodic_orbit, PeriodicOrbitReport};
pub use threshold::{pinning_threshold_criterion, pinning_threshold_velocity, PinningReport, ThresholdMethod};
pub use velocity::{homogenized_velocity, VelocityEstimate};

use serde::ser::SerializeTuple;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::proximal::ProxError;

/// Relative increment below which a step counts as standing still. Shared by
/// every long-run observer so "numerically pinned" means the same thing for
/// the velocity estimate and for orbit detection.
pub(crate) const PINNED_REL_TOL: f64 = 1e-12;
/// Consecutive standstill steps that declare an orbit pinned.
pub(crate) const PINNED_RUN: usize = 10;

#[derive(Debug, Error)]
pub enum HomogenizationError {
    #[error(transparent)]
    Prox(#[from] ProxError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("iteration budget of 2^24 steps exhausted before the error bound met the tolerance; best estimate {:.6} +/- {:.2e}", estimate.value, estimate.error_bound)]
    BudgetExceeded { estimate: VelocityEstimate },
    #[error("criterion hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("no periodic orbit found with period up to {q_max}")]
    NotFound { q_max: usize },
    #[error("quadrature singularity: {0}")]
    QuadratureSingularity(String),
}

/// Threshold bracket, serialized as the two-element array `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub low: f64,
    pub high: f64,
}

impl Serialize for Bracket {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut tuple = serializer.serialize_tuple(2)?;
        tuple.serialize_element(&self.low)?;
        tuple.serialize_element(&self.high)?;
        tuple.end()
    }
}
