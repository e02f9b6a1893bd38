//! Pinning threshold: the largest drive slope at which the linearized orbit
//! stays put. Two independent methods: a fixed-point criterion (classify one
//! proximal step from the in-well minimizer) and direct bisection on the
//! measured velocity. Their agreement is a strong end-to-end check, since
//! they share almost no code.

use serde::Serialize;

use super::velocity::homogenized_velocity;
use super::{Bracket, HomogenizationError};
use crate::potentials::PeriodicPotential;
use crate::proximal::{prox_step, ProxProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMethod {
    Criterion,
    VelocityBisection,
}

#[derive(Debug, Clone, Serialize)]
pub struct PinningReport {
    pub gamma: f64,
    pub threshold: f64,
    pub bracket: Bracket,
    pub method: ThresholdMethod,
}

const BISECT_MAX_ITERS: u32 = 60;
/// A velocity above this counts as moving (pinned runs report exactly 0).
const MOVING_VELOCITY: f64 = 1e-9;
/// Internal tolerance for velocity evaluations inside the bisection.
const CLASSIFY_VEL_TOL: f64 = 1e-3;
/// Match radius for "the proximal step returned the in-well minimizer".
const FIXED_POINT_TOL: f64 = 1e-9;

/// Pinning threshold by the fixed-point criterion: for a trial slope `T`,
/// locate the unique in-well minimizer `y_T` of `T y + W(y)` on
/// [-1/2, 1/2], take one proximal step centered at `y_T`, and call `T`
/// pinned when the step returns `y_T` itself. Bisects the slope until the
/// pinned/unpinned bracket is narrower than `tol` (at least 1e-8).
///
/// Requires the trial objective to have exactly one interior local minimum;
/// profiles that break this (e.g. the flat one, or data with several dips
/// per period) are rejected with `HypothesisViolated` — use
/// `pinning_threshold_velocity` for those.
pub fn pinning_threshold_criterion(
    w: &PeriodicPotential,
    gamma: f64,
    tol: f64,
) -> Result<PinningReport, HomogenizationError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(HomogenizationError::InvalidInput(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    if tol.is_nan() || tol < 1e-8 {
        return Err(HomogenizationError::InvalidInput(format!(
            "tolerance must be at least 1e-8, got {tol}"
        )));
    }

    let classify = |t: f64| -> Result<bool, HomogenizationError> {
        let y_t = in_well_minimizer(w, t)?;
        let problem = ProxProblem::tilted(t, gamma, y_t, w);
        let result = prox_step(&problem)?;
        Ok((result.minimizer - y_t).abs() <= FIXED_POINT_TOL)
    };

    let hi_limit = w.lipschitz_bound().max(1.0);
    if !classify(0.0)? {
        // No interior pinning at all; threshold is at the bottom.
        return Ok(PinningReport {
            gamma,
            threshold: 0.0,
            bracket: Bracket { low: 0.0, high: 0.0 },
            method: ThresholdMethod::Criterion,
        });
    }
    let mut low = 0.0;
    let mut high = hi_limit;
    for _ in 0..BISECT_MAX_ITERS {
        if high - low <= tol {
            break;
        }
        let mid = 0.5 * (low + high);
        if classify(mid)? {
            low = mid;
        } else {
            high = mid;
        }
    }
    Ok(PinningReport {
        gamma,
        threshold: 0.5 * (low + high),
        bracket: Bracket { low, high },
        method: ThresholdMethod::Criterion,
    })
}

/// Unique interior local minimizer of `t y + W(y)` on [-1/2, 1/2], found as
/// the unique minus-to-plus sign change of `t + W'(y)` on a dense grid
/// followed by bisection. Zero or several such crossings violate the
/// criterion hypothesis.
fn in_well_minimizer(w: &PeriodicPotential, t: f64) -> Result<f64, HomogenizationError> {
    const SCAN: usize = 4096;
    let g = |y: f64| t + w.derivative(y);
    let mut bracket = None;
    let mut crossings = 0usize;
    let mut prev_y = -0.5;
    let mut prev_g = g(prev_y);
    for i in 1..=SCAN {
        let y = -0.5 + i as f64 / SCAN as f64;
        let cur = g(y);
        if prev_g < 0.0 && cur >= 0.0 {
            crossings += 1;
            if bracket.is_none() {
                bracket = Some((prev_y, y));
            }
        }
        prev_y = y;
        prev_g = cur;
    }
    match (crossings, bracket) {
        (1, Some((lo, hi))) => Ok(crate::numerics::bisect_root(g, lo, hi, 80)),
        (0, _) => Err(HomogenizationError::HypothesisViolated(format!(
            "t*y + W(y) has no interior local minimum on [-1/2, 1/2] at slope {t}"
        ))),
        (n, _) => Err(HomogenizationError::HypothesisViolated(format!(
            "t*y + W(y) has {n} interior local minima on [-1/2, 1/2] at slope {t}; need exactly one"
        ))),
    }
}

/// Pinning threshold straight from the definition: bisect on the slope,
/// classifying each trial by whether the measured homogenized velocity is
/// positive. `tol` must be at least 1e-6.
pub fn pinning_threshold_velocity(
    w: &PeriodicPotential,
    gamma: f64,
    tol: f64,
) -> Result<PinningReport, HomogenizationError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(HomogenizationError::InvalidInput(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    if tol.is_nan() || tol < 1e-6 {
        return Err(HomogenizationError::InvalidInput(format!(
            "tolerance must be at least 1e-6, got {tol}"
        )));
    }

    let moving = |t: f64| -> Result<bool, HomogenizationError> {
        if t == 0.0 {
            return Ok(false);
        }
        let est = homogenized_velocity(w, t, gamma, CLASSIFY_VEL_TOL, 0.0)?;
        Ok(est.value > MOVING_VELOCITY)
    };

    let hi_limit = w.lipschitz_bound().max(1.0);
    let mut low = 0.0;
    let mut high = hi_limit;
    if moving(low)? {
        high = low;
    } else if !moving(high)? {
        low = high;
    }
    for _ in 0..BISECT_MAX_ITERS {
        if high - low <= tol {
            break;
        }
        let mid = 0.5 * (low + high);
        if moving(mid)? {
            high = mid;
        } else {
            low = mid;
        }
    }
    Ok(PinningReport {
        gamma,
        threshold: 0.5 * (low + high),
        bracket: Bracket { low, high },
        method: ThresholdMethod::VelocityBisection,
    })
}
