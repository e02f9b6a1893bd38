//! Periodic-orbit detection for the fixed-slope iteration. After a burn-in
//! the orbit relaxes onto an attractor that, at rational mean velocities,
//! repeats itself after `q` steps up to an integer shift `p`. Detecting the
//! pair `(p, q)` exposes the mode-locking structure directly instead of
//! inferring it from long-run averages.

use serde::Serialize;

use super::{HomogenizationError, PINNED_REL_TOL, PINNED_RUN};
use crate::potentials::PeriodicPotential;
use crate::proximal::{prox_step, ProxProblem};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PeriodicOrbitReport {
    pub t: f64,
    pub gamma: f64,
    /// Number of steps in one period.
    pub q: usize,
    /// Signed integer shift per period (negative means leftward drift).
    pub p: i64,
    /// Representative point on the attractor (start of the verified cycle).
    pub witness_y0: f64,
    /// |y_{i0+q} - y_{i0} - p| for the detected pair.
    pub residual: f64,
}

const BURN_IN: usize = 4096;
const MATCH_TOL: f64 = 1e-8;

fn fold(y: f64) -> f64 {
    y - y.floor()
}

/// Search for the smallest period `q <= q_max` such that after a burn-in the
/// orbit satisfies `y_{i+q} = y_i + p` for an integer `p`, verified over two
/// further periods. Returns `NotFound` when no period up to `q_max` checks
/// out.
///
/// An orbit that stands still — ten consecutive relative increments below
/// 1e-12, the same rule the velocity estimate uses — is reported immediately
/// as a fixed point (`q = 1`, `p = 0`). This matters at exact objective
/// ties: once increments shrink under the value comparison's float
/// resolution, ties resolve to the leftmost candidate and the iterate can
/// creep one cell per few dozen steps, so waiting for fold matches would
/// report that rounding artifact as a long genuine period.
pub fn detect_periodic_orbit(
    w: &PeriodicPotential,
    t: f64,
    gamma: f64,
    q_max: usize,
) -> Result<PeriodicOrbitReport, HomogenizationError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(HomogenizationError::InvalidInput(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    if !t.is_finite() {
        return Err(HomogenizationError::InvalidInput(format!(
            "slope must be finite, got {t}"
        )));
    }
    if !(1..=10_000).contains(&q_max) {
        return Err(HomogenizationError::InvalidInput(format!(
            "q_max must lie in [1, 10000], got {q_max}"
        )));
    }

    // Burn in, then record enough of the orbit to verify three periods.
    let mut y = 0.0_f64;
    let mut quiet = 0_usize;
    let mut advance = |y: &mut f64| -> Result<Option<PeriodicOrbitReport>, HomogenizationError> {
        let next = prox_step(&ProxProblem::tilted(t, gamma, *y, w))?.minimizer;
        let diff = next - *y;
        if diff.abs() <= PINNED_REL_TOL * y.abs().max(1.0) {
            quiet += 1;
        } else {
            quiet = 0;
        }
        *y = next;
        if quiet >= PINNED_RUN {
            Ok(Some(PeriodicOrbitReport {
                t,
                gamma,
                q: 1,
                p: 0,
                witness_y0: next,
                residual: diff.abs(),
            }))
        } else {
            Ok(None)
        }
    };
    for _ in 0..BURN_IN {
        if let Some(fixed_point) = advance(&mut y)? {
            return Ok(fixed_point);
        }
    }
    let tail_len = 3 * q_max + 1;
    let mut tail = Vec::with_capacity(tail_len);
    tail.push(y);
    for _ in 1..tail_len {
        if let Some(fixed_point) = advance(&mut y)? {
            return Ok(fixed_point);
        }
        tail.push(y);
    }

    let anchor = fold(tail[0]);
    for q in 1..=q_max {
        if (fold(tail[q]) - anchor).abs() > MATCH_TOL {
            continue;
        }
        let p = (tail[q] - tail[0]).round();
        let residual = (tail[q] - tail[0] - p).abs();
        if residual > MATCH_TOL {
            continue;
        }
        let second = (tail[2 * q] - tail[q] - p).abs();
        let third = (tail[3 * q] - tail[2 * q] - p).abs();
        if second <= MATCH_TOL && third <= MATCH_TOL {
            return Ok(PeriodicOrbitReport {
                t,
                gamma,
                q,
                p: p as i64,
                witness_y0: tail[0],
                residual,
            });
        }
    }
    Err(HomogenizationError::NotFound { q_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homogenization::homogenized_velocity;

    #[test]
    fn pinned_slope_gives_a_fixed_point() {
        let w = PeriodicPotential::piecewise_quadratic();
        let report = detect_periodic_orbit(&w, 0.499, 2.0, 16).unwrap();
        assert_eq!(report.q, 1);
        assert_eq!(report.p, 0);
        // The fixed point of the pinned orbit sits at the in-well minimizer,
        // which for this profile is -t/2 (mod 1).
        let folded = fold(report.witness_y0);
        let expected = fold(-0.499 / 2.0);
        assert!(
            (folded - expected).abs() <= 1e-6,
            "witness {folded} vs {expected}"
        );
        assert!(report.residual <= 1e-8);
    }

    #[test]
    fn plateau_slope_locks_to_one_over_two() {
        let w = PeriodicPotential::piecewise_quadratic();
        let report = detect_periodic_orbit(&w, 0.9, 2.0, 64).unwrap();
        assert_eq!(report.q, 2, "{report:?}");
        assert_eq!(report.p, -1, "{report:?}");
        assert!(report.residual <= 1e-8);

        // The locked ratio must match the long-run velocity measurement.
        let ratio = report.p.unsigned_abs() as f64 / report.q as f64;
        let est = homogenized_velocity(&w, 0.9, 2.0, 1e-5, 0.0).unwrap();
        assert!(
            (ratio - est.value).abs() <= 1e-4,
            "ratio {ratio} vs measured {}",
            est.value
        );
    }

    #[test]
    fn large_slope_is_periodic_or_honestly_not_found() {
        let w = PeriodicPotential::piecewise_quadratic();
        match detect_periodic_orbit(&w, 1.5, 2.0, 256) {
            Ok(report) => {
                assert!(report.q >= 1 && report.q <= 256);
                assert!(report.residual <= 1e-8);
                assert!(report.p <= -1, "fast drift must move left: {report:?}");
            }
            Err(HomogenizationError::NotFound { q_max }) => assert_eq!(q_max, 256),
            Err(other) => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let w = PeriodicPotential::piecewise_quadratic();
        assert!(detect_periodic_orbit(&w, 0.5, -1.0, 8).is_err());
        assert!(detect_periodic_orbit(&w, 0.5, 2.0, 0).is_err());
        assert!(detect_periodic_orbit(&w, 0.5, 2.0, 20_000).is_err());
    }
}
