//! The effective evolution that the minimizing movements approach as the
//! oscillation scale vanishes at fixed `gamma = eps / tau`: the scalar ODE
//! `x' = -gamma * f_gamma(h'(x))`, whose right-hand side is the homogenized
//! velocity of the drive slope seen at the current state. Because the
//! velocity vanishes for slopes at or below the pinning threshold, the limit
//! motion stalls at the first point where `|h'(x)|` falls to the threshold;
//! the integrator clamps to a constant there instead of creeping through the
//! non-Lipschitz logarithmic regime.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{run_mm, DynamicsError, MMConfig, Trajectory};
use crate::homogenization::{
    pinning_threshold_criterion, pinning_threshold_velocity, HomogenizationError, VelocityCache,
};
use crate::potentials::{ConvexDrive, OscillatingEnergy, PeriodicPotential, PotentialError};

#[derive(Debug, Error)]
pub enum LimitOdeError {
    #[error(transparent)]
    Homogenization(#[from] HomogenizationError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("step-size controller stalled at t = {t} with step {h}")]
    ControllerStalled { t: f64, h: f64 },
}

/// Adaptive integration record with enough data for dense output.
#[derive(Debug, Clone, Serialize)]
pub struct OdeRun {
    pub gamma: f64,
    pub x0: f64,
    pub t_end: f64,
    /// Accepted step and half-step times, starting at 0 and ending at
    /// `t_end`.
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    /// Right-hand-side values at the accepted times (for Hermite sampling).
    pub derivatives: Vec<f64>,
    /// Time at which the drive slope reached the pinning band and the state
    /// was frozen, if that happened before `t_end`.
    pub pinned_at: Option<f64>,
}

impl OdeRun {
    pub fn final_state(&self) -> f64 {
        *self.states.last().expect("runs are never empty")
    }

    /// Dense output: cubic Hermite interpolation between accepted steps,
    /// constant extension outside `[0, t_end]` and after the pinning time.
    pub fn sample(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.states[0];
        }
        if t >= self.times[n - 1] {
            return self.states[n - 1];
        }
        let hi = self.times.partition_point(|&s| s < t).max(1);
        let (t0, t1) = (self.times[hi - 1], self.times[hi]);
        let (x0, x1) = (self.states[hi - 1], self.states[hi]);
        let (d0, d1) = (self.derivatives[hi - 1], self.derivatives[hi]);
        let h = t1 - t0;
        if h <= 0.0 {
            return x1;
        }
        let s = (t - t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        h00 * x0 + h10 * h * d0 + h01 * x1 + h11 * h * d1
    }

    /// CSV export with header `t,x`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.states.len() * 48 + 8);
        out.push_str("t,x\n");
        for (t, x) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t:.17e},{x:.17e}\n"));
        }
        out
    }
}

/// Width of the slope band around the threshold inside which the state is
/// declared pinned and frozen.
const ETA_STOP: f64 = 1e-6;
/// Velocity tolerance used for right-hand-side queries, clamped so a single
/// query can neither dominate the error budget nor stall the integrator.
const VEL_TOL_RANGE: (f64, f64) = (1e-5, 1e-4);
/// Step-size safety factor and growth/shrink limits for the controller.
const SAFETY: f64 = 0.9;
const MAX_GROW: f64 = 4.0;
const MAX_SHRINK: f64 = 0.25;
/// Hard cap on step attempts; reaching it means the controller stalled.
const MAX_ATTEMPTS: u64 = 1_000_000;

struct Rhs<'a> {
    w: &'a PeriodicPotential,
    drive: &'a ConvexDrive,
    gamma: f64,
    threshold: f64,
    vel_tol: f64,
    cache: &'a VelocityCache,
}

impl Rhs<'_> {
    /// `-gamma * f_gamma(h'(x))`, extended to negative slopes by odd
    /// reflection. Slopes inside the pinned band short-circuit to zero.
    fn eval(&self, x: f64) -> Result<f64, HomogenizationError> {
        let slope = self.drive.derivative(x);
        let magnitude = slope.abs();
        if magnitude <= self.threshold + ETA_STOP {
            return Ok(0.0);
        }
        let est = self
            .cache
            .get_or_compute(self.w, magnitude, self.gamma, self.vel_tol)?;
        Ok(-slope.signum() * self.gamma * est.value)
    }

    fn in_pinned_band(&self, x: f64) -> bool {
        self.drive.derivative(x).abs() <= self.threshold + ETA_STOP
    }
}

fn rk4_step(rhs: &Rhs, x: f64, h: f64, k1: f64) -> Result<f64, HomogenizationError> {
    let k2 = rhs.eval(x + 0.5 * h * k1)?;
    let k3 = rhs.eval(x + 0.5 * h * k2)?;
    let k4 = rhs.eval(x + h * k3)?;
    Ok(x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

/// Pinning threshold for the right-hand side: the fixed-point criterion
/// where its hypothesis holds, otherwise direct velocity bisection (the flat
/// profile and multi-dip data fall back to the latter).
fn threshold_for(
    w: &PeriodicPotential,
    gamma: f64,
) -> Result<f64, HomogenizationError> {
    match pinning_threshold_criterion(w, gamma, 1e-8) {
        Ok(report) => Ok(report.threshold),
        Err(HomogenizationError::HypothesisViolated(_)) => {
            Ok(pinning_threshold_velocity(w, gamma, 1e-6)?.threshold)
        }
        Err(other) => Err(other),
    }
}

/// Integrates `x' = -gamma * f_gamma(h'(x))` from `x0` to `t_end` with
/// classical Runge-Kutta and step-doubling error control: each step is taken
/// once at full length and once as two halves, accepted when the discrepancy
/// stays below an error budget of `tol` per unit time, and advanced with the
/// Richardson-extrapolated state. The budget carries an additive floor of
/// `gamma * vel_tol` because the right-hand side is itself a measured
/// velocity only accurate to `vel_tol`; without the floor the controller
/// would endlessly shrink steps chasing measurement noise it cannot reduce.
///
/// The state freezes (recording `pinned_at`) as soon as the drive slope
/// enters the pinned band `|h'(x)| <= threshold + 1e-6`. A step that lands
/// in the band is first re-taken at half length until the step size is tiny,
/// so the frozen state sits at the band edge instead of overshooting into
/// it.
pub fn integrate_limit(
    gamma: f64,
    x0: f64,
    t_end: f64,
    drive: &ConvexDrive,
    w: &PeriodicPotential,
    tol: f64,
) -> Result<OdeRun, LimitOdeError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(LimitOdeError::InvalidInput(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    if !x0.is_finite() {
        return Err(LimitOdeError::InvalidInput("x0 must be finite".into()));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(LimitOdeError::InvalidInput(format!(
            "t_end must be positive, got {t_end}"
        )));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(LimitOdeError::InvalidInput(format!(
            "tolerance must be positive, got {tol}"
        )));
    }

    let cache = VelocityCache::new();
    let rhs = Rhs {
        w,
        drive,
        gamma,
        threshold: threshold_for(w, gamma)?,
        vel_tol: (tol * 10.0).clamp(VEL_TOL_RANGE.0, VEL_TOL_RANGE.1),
        cache: &cache,
    };

    let mut times = vec![0.0];
    let mut states = vec![x0];
    let mut derivatives = vec![rhs.eval(x0)?];
    let mut pinned_at = None;

    if rhs.in_pinned_band(x0) {
        pinned_at = Some(0.0);
        times.push(t_end);
        states.push(x0);
        derivatives.push(0.0);
        return Ok(OdeRun { gamma, x0, t_end, times, states, derivatives, pinned_at });
    }

    let h_min = t_end * 1e-12;
    // Node spacing also bounds the dense-output interpolation error, so the
    // step is capped even when the controller would allow a longer one.
    let h_max = t_end / 10.0;
    // Once a step would land in the pinned band, it is halved down to this
    // length first, so the recorded pinning state hugs the band edge.
    let h_band = t_end * 1e-7;
    let tol_floor = tol + gamma * rhs.vel_tol;
    let mut t = 0.0_f64;
    let mut x = x0;
    let mut h = (t_end / 100.0).max(h_min);
    let mut attempts = 0_u64;
    while t < t_end {
        attempts += 1;
        if attempts > MAX_ATTEMPTS {
            return Err(LimitOdeError::ControllerStalled { t, h });
        }
        h = h.min(t_end - t);
        let k1 = rhs.eval(x)?;
        let full = rk4_step(&rhs, x, h, k1)?;
        let half = rk4_step(&rhs, x, 0.5 * h, k1)?;
        let k1_mid = rhs.eval(half)?;
        let two_halves = rk4_step(&rhs, half, 0.5 * h, k1_mid)?;
        let err = (two_halves - full).abs() / 15.0;
        let budget = tol_floor * h;
        if err > budget && h > h_min {
            let scale = SAFETY * (budget / err).powf(0.25);
            h = (h * scale.clamp(MAX_SHRINK, 1.0)).max(h_min);
            continue;
        }
        let next = two_halves + (two_halves - full) / 15.0;
        if rhs.in_pinned_band(next) && h > h_band {
            h = (0.5 * h).max(h_band);
            continue;
        }
        // The half-step state comes for free and doubles the dense-output
        // node density.
        times.push(t + 0.5 * h);
        states.push(half);
        derivatives.push(k1_mid);
        t += h;
        x = next;
        times.push(t);
        states.push(x);
        if rhs.in_pinned_band(x) {
            derivatives.push(0.0);
            pinned_at = Some(t);
            if t < t_end {
                times.push(t_end);
                states.push(x);
                derivatives.push(0.0);
            }
            break;
        }
        derivatives.push(rhs.eval(x)?);
        let scale = if err > 0.0 {
            SAFETY * (budget / err).powf(0.25)
        } else {
            MAX_GROW
        };
        h = (h * scale.clamp(MAX_SHRINK, MAX_GROW)).clamp(h_min, h_max);
    }

    Ok(OdeRun { gamma, x0, t_end, times, states, derivatives, pinned_at })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    /// Sup over 1000 uniform sample times of the distance between the
    /// discrete trajectory and the limit run.
    pub sup_distance: f64,
}

/// Number of uniform sample times used for sup-distance measurements.
const SAMPLE_TIMES: usize = 1000;

/// Left-continuous piecewise-constant sampling of a discrete trajectory:
/// the state at the earliest recorded time `>= t`.
fn sample_discrete(trajectory: &Trajectory, t: f64) -> f64 {
    let idx = trajectory.times.partition_point(|&s| s < t);
    if idx >= trajectory.states.len() {
        return *trajectory.states.last().expect("trajectories are never empty");
    }
    trajectory.states[idx]
}

/// For each `epsilon`, runs the full minimizing movement at `tau =
/// epsilon / gamma` to the horizon and reports the sup-distance to the limit
/// run over 1000 uniform sample times. The `epsilons` list must be strictly
/// decreasing with at least three entries, so the table exposes the
/// convergence trend.
pub fn convergence_study(
    drive: &ConvexDrive,
    w: &PeriodicPotential,
    gamma: f64,
    x0: f64,
    t_end: f64,
    epsilons: &[f64],
    tol: f64,
) -> Result<Vec<ConvergenceRow>, LimitOdeError> {
    if epsilons.len() < 3 {
        return Err(LimitOdeError::InvalidInput(format!(
            "need at least 3 epsilons, got {}",
            epsilons.len()
        )));
    }
    if !epsilons.iter().all(|&e| e > 0.0 && e.is_finite()) {
        return Err(LimitOdeError::InvalidInput(
            "epsilons must be positive and finite".into(),
        ));
    }
    for pair in epsilons.windows(2) {
        if pair[1] >= pair[0] {
            return Err(LimitOdeError::InvalidInput(
                "epsilons must be strictly decreasing".into(),
            ));
        }
    }

    let ode = integrate_limit(gamma, x0, t_end, drive, w, tol)?;
    // The per-epsilon discrete runs are independent; row order follows the
    // input order regardless of scheduling.
    epsilons
        .par_iter()
        .map(|&epsilon| {
            let tau = epsilon / gamma;
            let steps = (t_end / tau).ceil() as usize;
            let energy = OscillatingEnergy::new(drive.clone(), w.clone(), epsilon)?;
            let config = MMConfig::fixed_ratio(energy, gamma, x0, steps.max(1))?;
            let trajectory = run_mm(&config)?;
            let mut sup = 0.0_f64;
            for j in 0..SAMPLE_TIMES {
                let t = t_end * j as f64 / (SAMPLE_TIMES - 1) as f64;
                let gap = (sample_discrete(&trajectory, t) - ode.sample(t)).abs();
                sup = sup.max(gap);
            }
            Ok(ConvergenceRow { epsilon, sup_distance: sup })
        })
        .collect()
}
