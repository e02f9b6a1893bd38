//! Minimizing-movement dynamics for wiggly energies: proximal orbits of
//! `h(x) + eps * W(x / eps)`, homogenized velocities of the induced
//! interface law, pinning thresholds, and the effective limit ODE.

mod numerics;

pub mod dynamics;
pub mod homogenization;
pub mod limit_ode;
pub mod potentials;
pub mod proximal;
pub mod pwq;
pub mod selftest;

pub use homogenization::{
    detect_periodic_orbit, extreme_limits, homogenized_velocity, pinning_threshold_criterion,
    pinning_threshold_velocity, HomogenizationError, PinningReport, ThresholdMethod,
    VelocityCache, VelocityEstimate,
};
pub use limit_ode::{convergence_study, integrate_limit, ConvergenceRow, LimitOdeError, OdeRun};
pub use selftest::{run_all, CriterionOutcome};
pub use potentials::{
    ConvexDrive, OscillatingEnergy, PeriodicPotential, PotentialError, PotentialKind,
    ValidationReport,
};
pub use proximal::{
    prox_minimum, prox_selection_monotone_check, prox_step, ProxError, ProxObjective, ProxProblem,
    ProxResult, SolverPath,
};
