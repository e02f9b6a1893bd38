//! Closed forms for the piecewise-quadratic profile under a linear drive:
//! per-well minimizer candidates, the well-jump indicator `psi`, the in-well
//! geometric orbit, the escape step count, the pinning threshold
//! `gamma / (2 + gamma)`, and the near-threshold velocity asymptotic.
//!
//! Nothing here iterates a solver; every result is hand-derivable algebra,
//! kept in its derivation form on purpose (no simplification), so that a
//! disagreement with the numerical paths localizes the mistake. The generic
//! machinery is tested against this module, not the other way around.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PwqError {
    #[error("drive slope {t} is at or below the pinning threshold {threshold}; the orbit does not escape")]
    Pinned { t: f64, threshold: f64 },
    #[error("orbit leaves well 0 at step {step} (from position {position}); the in-well formula stops being valid")]
    WellEscape { step: usize, position: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Slope/threshold bundle for one piecewise-quadratic configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PwqState {
    pub gamma: f64,
    pub t: f64,
    /// Pinning threshold `gamma / (2 + gamma)`.
    pub t_gamma: f64,
    /// Escape-margin scale `((2 + gamma) / (2 gamma)) * (t - t_gamma)`.
    pub delta_t: f64,
}

impl PwqState {
    pub fn new(gamma: f64, t: f64) -> Result<Self, PwqError> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(PwqError::InvalidInput(format!("gamma must be positive, got {gamma}")));
        }
        if !(t > 0.0 && t < 1.0) {
            return Err(PwqError::InvalidInput(format!("drive slope must lie in (0, 1), got {t}")));
        }
        Ok(Self { gamma, t, t_gamma: threshold(gamma), delta_t: delta_t(t, gamma) })
    }
}

/// Pinning threshold `gamma / (2 + gamma)`.
pub fn threshold(gamma: f64) -> f64 {
    assert!(gamma > 0.0, "gamma must be positive");
    gamma / (2.0 + gamma)
}

/// Supremum of the thresholds over all gamma.
pub fn t_infinity() -> f64 {
    1.0
}

/// Escape-margin scale `((2 + gamma) / (2 gamma)) * (t - threshold)`; the
/// orbit jumps wells as soon as it drops below `-t/2 + delta_t`.
pub fn delta_t(t: f64, gamma: f64) -> f64 {
    assert!(gamma > 0.0, "gamma must be positive");
    ((2.0 + gamma) / (2.0 * gamma)) * (t - threshold(gamma))
}

/// Minimizer of `t*y + (y - k)^2 + (gamma/2)(y - y0)^2` over well `k`
/// (ignoring the well boundary): `(-t + 2k) / (2 + gamma) + (gamma / (2 + gamma)) * y0`.
pub fn candidate(k: i64, t: f64, gamma: f64, y0: f64) -> f64 {
    assert!(gamma > 0.0, "gamma must be positive");
    (-t + 2.0 * k as f64) / (2.0 + gamma) + (gamma / (2.0 + gamma)) * y0
}

fn well_objective(y: f64, k: i64, t: f64, gamma: f64, y0: f64) -> f64 {
    let r = y - k as f64;
    let d = y - y0;
    t * y + r * r + (gamma / 2.0) * d * d
}

/// Difference between the best value in well -1 and the best value in well 0
/// for the next iterate from `y0`: negative means the next step jumps wells,
/// nonnegative means it stays.
pub fn psi(y0: f64, t: f64, gamma: f64) -> f64 {
    let y_left = candidate(-1, t, gamma, y0);
    let y_stay = candidate(0, t, gamma, y0);
    well_objective(y_left, -1, t, gamma, y0) - well_objective(y_stay, 0, t, gamma, y0)
}

/// In-well orbit `y_h = r^h (y0 + t/2) - t/2` with `r = gamma / (2 + gamma)`,
/// valid while every step stays in well 0. Returns `[y_1, ..., y_h_steps]`;
/// fails with `WellEscape` if the jump indicator goes negative first.
pub fn in_well_orbit(
    y0: f64,
    t: f64,
    gamma: f64,
    h_steps: usize,
) -> Result<Vec<f64>, PwqError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(PwqError::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    if h_steps == 0 {
        return Err(PwqError::InvalidInput("h_steps must be positive".into()));
    }
    let r = gamma / (2.0 + gamma);
    let mut orbit = Vec::with_capacity(h_steps);
    let mut prev = y0;
    for h in 1..=h_steps {
        if psi(prev, t, gamma) < 0.0 {
            return Err(PwqError::WellEscape { step: h, position: prev });
        }
        let y = r.powi(h as i32) * (y0 + t / 2.0) - t / 2.0;
        orbit.push(y);
        prev = y;
    }
    Ok(orbit)
}

/// Index of the first iterate that lands outside well 0, for the orbit
/// started at the worst case `y0 = 1/2 - 1e-9` (the same start the
/// verification runs use). While `y_h = r^h (y0 + t/2) - t/2` stays at or
/// above the jump line `-t/2 + delta_t` the orbit contracts in well 0; the
/// step taken from the first iterate strictly below that line lands in well
/// -1. With `arg = delta_t / (y0 + t/2)`, the below-line count is
/// `floor(log(arg) / log(gamma/(2+gamma))) + 1` (0 when the start itself is
/// already below the line, i.e. `arg >= 1`), and the escape index is one
/// more. Baking the explicit 1e-9 start offset into `arg` keeps knife-edge
/// configurations (`log(arg)` an exact integer, e.g. gamma=2, t=0.6)
/// consistent with the simulated orbit, whose start is strictly inside the
/// well.
pub fn escape_steps(t: f64, gamma: f64) -> Result<u64, PwqError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(PwqError::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    if t.is_nan() || t >= 1.0 {
        return Err(PwqError::InvalidInput(format!("drive slope must be below 1, got {t}")));
    }
    let t_gamma = threshold(gamma);
    if t <= t_gamma {
        return Err(PwqError::Pinned { t, threshold: t_gamma });
    }
    let y0 = 0.5 - 1e-9;
    let arg = delta_t(t, gamma) / (y0 + t / 2.0);
    let below_line = if arg >= 1.0 {
        0.0
    } else {
        ((arg.ln() / (gamma / (2.0 + gamma)).ln()).floor() + 1.0).max(0.0)
    };
    Ok(below_line as u64 + 1)
}

/// Near-threshold asymptotic for the homogenized velocity:
/// `log(gamma/(2+gamma)) / log(((2+gamma)/gamma) (t - t_gamma)/(t + 1))`.
/// Accurate only as `t` approaches the threshold from above; far from it the
/// estimate degrades (and the denominator changes sign once the single-step
/// escape regime starts).
pub fn velocity_estimate(t: f64, gamma: f64) -> Result<f64, PwqError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(PwqError::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    let t_gamma = threshold(gamma);
    if t <= t_gamma {
        return Err(PwqError::Pinned { t, threshold: t_gamma });
    }
    let arg = ((2.0 + gamma) / gamma) * (t - t_gamma) / (t + 1.0);
    Ok((gamma / (2.0 + gamma)).ln() / arg.ln())
}
