//! Built-in verification suite: ten end-to-end checks that exercise every
//! layer of the crate against closed forms, independent recomputations, and
//! randomized property sweeps. The `acceptance` integration test asserts the
//! suite and the CLI `selftest` subcommand runs it directly.
//!
//! All randomness is drawn from a caller-supplied seed, so a run is
//! reproducible bit for bit.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{run_mm, sandwich_check, MMConfig};
use crate::homogenization::{
    detect_periodic_orbit, extreme_limits, homogenized_velocity, pinning_threshold_criterion,
    pinning_threshold_velocity, HomogenizationError,
};
use crate::limit_ode::convergence_study;
use crate::potentials::{ConvexDrive, OscillatingEnergy, PeriodicPotential};
use crate::proximal::{prox_minimum, prox_selection_monotone_check, ProxProblem};
use crate::pwq;

/// Result of one suite criterion.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub index: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CriterionOutcome {
    /// One-line rendering, `ok`/`FAILED` followed by the detail.
    pub fn line(&self) -> String {
        let status = if self.passed { "ok    " } else { "FAILED" };
        format!("{} {:02} {:<32} {}", status, self.index, self.name, self.detail)
    }
}

type Check = Result<(bool, String), String>;

fn outcome(index: usize, name: &'static str, check: Check) -> CriterionOutcome {
    match check {
        Ok((passed, detail)) => CriterionOutcome { index, name, passed, detail },
        Err(message) => CriterionOutcome {
            index,
            name,
            passed: false,
            detail: format!("error: {message}"),
        },
    }
}

/// Runs the complete suite in order. Each criterion is independent; a
/// failure is reported in its outcome rather than aborting the run.
pub fn run_all(seed: u64) -> Vec<CriterionOutcome> {
    vec![
        outcome(1, "threshold_two_method_closed_form", threshold_closed_form()),
        outcome(2, "escape_step_counts_exact", escape_steps_exact()),
        outcome(3, "prox_matches_per_cell_closed_form", closed_form_equivalence(seed ^ 0x03)),
        outcome(4, "velocity_start_point_independence", start_independence(seed ^ 0x04)),
        outcome(5, "monotonicity_randomized_sweeps", monotonicity_sweeps(seed ^ 0x05)),
        outcome(6, "near_threshold_log_law", log_law()),
        outcome(7, "extreme_gamma_regimes", extreme_regimes()),
        outcome(8, "periodic_orbit_velocity_match", periodic_orbits()),
        outcome(9, "discrete_to_limit_convergence", discrete_to_limit()),
        outcome(10, "pinning_end_to_end", pinning_end_to_end()),
    ]
}

const THRESHOLD_GAMMAS: [f64; 4] = [0.5, 1.0, 2.0, 10.0];

/// Both threshold methods must land on `gamma / (2 + gamma)` within 1e-4 for
/// the quadratic-well profile.
fn threshold_closed_form() -> Check {
    let w = PeriodicPotential::piecewise_quadratic();
    let mut worst = 0.0_f64;
    for gamma in THRESHOLD_GAMMAS {
        let exact = gamma / (2.0 + gamma);
        let criterion = pinning_threshold_criterion(&w, gamma, 1e-6)
            .map_err(|e| e.to_string())?
            .threshold;
        let velocity = pinning_threshold_velocity(&w, gamma, 1e-4)
            .map_err(|e| e.to_string())?
            .threshold;
        worst = worst.max((criterion - exact).abs()).max((velocity - exact).abs());
    }
    Ok((
        worst <= 1e-4,
        format!("max |threshold - gamma/(2+gamma)| = {worst:.3e} (allowed 1.0e-4)"),
    ))
}

/// The closed-form escape-step count must agree exactly with a simulated
/// orbit started just below the top of well 0, across a 5x5 parameter grid.
fn escape_steps_exact() -> Check {
    let w = PeriodicPotential::piecewise_quadratic();
    let y0 = 0.5 - 1e-9;
    let anchor = pwq::escape_steps(0.6, 2.0).map_err(|e| e.to_string())?;
    if anchor != 4 {
        return Ok((false, format!("anchor case gamma=2, T=0.6 gave {anchor}, want 4")));
    }
    let gammas = [0.5, 1.0, 2.0, 4.0, 8.0];
    let fractions = [0.037, 0.083, 0.141, 0.219, 0.311];
    let mut checked = 0_usize;
    for gamma in gammas {
        let tg = pwq::threshold(gamma);
        for frac in fractions {
            let t = tg + frac * (1.0 - tg);
            let formula = pwq::escape_steps(t, gamma).map_err(|e| e.to_string())?;
            let orbit = crate::dynamics::run_linearized(&w, t, gamma, y0, formula as usize + 20)
                .map_err(|e| e.to_string())?;
            let simulated = orbit
                .y
                .iter()
                .position(|&y| y < -0.5)
                .ok_or_else(|| format!("orbit never left well 0 at gamma={gamma}, T={t}"))?;
            if simulated as u64 != formula {
                return Ok((
                    false,
                    format!(
                        "gamma={gamma}, T={t:.6}: simulated escape {simulated}, formula {formula}"
                    ),
                ));
            }
            checked += 1;
        }
    }
    Ok((true, format!("{checked} grid cells + anchor, all exact integer matches")))
}

/// The generic proximal solver must match the per-cell stationary-point
/// closed form (clamped to its cell) to 1e-10, and in-well runs must match
/// the geometric recursion to 1e-10.
fn closed_form_equivalence(seed: u64) -> Check {
    let w = PeriodicPotential::piecewise_quadratic();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..500 {
        let t = rng.gen_range(0.0..1.2);
        let gamma = 10f64.powf(rng.gen_range(-1.0..1.0));
        let y0 = rng.gen_range(-1.5..1.5);
        let problem = ProxProblem::tilted(t, gamma, y0, &w);
        let (minimizer, _) = prox_minimum(&problem).map_err(|e| e.to_string())?;

        let objective =
            |y: f64| t * y + w.value(y) + 0.5 * gamma * (y - y0) * (y - y0);
        let k0 = y0.round() as i64;
        let reach = ((t + 1.0) / gamma).ceil() as i64 + 2;
        let mut best = (f64::INFINITY, f64::NAN);
        for k in (k0 - reach)..=(k0 + reach) {
            let stationary = pwq::candidate(k, t, gamma, y0);
            let y = stationary.clamp(k as f64 - 0.5, k as f64 + 0.5);
            let v = objective(y);
            if v < best.0 {
                best = (v, y);
            }
        }
        worst = worst.max((best.1 - minimizer).abs());
    }
    if worst > 1e-10 {
        return Ok((false, format!("worst per-cell closed-form gap {worst:.3e} > 1e-10")));
    }

    let mut orbit_worst = 0.0_f64;
    let mut orbit_checked = 0_usize;
    for _ in 0..200 {
        let gamma = 10f64.powf(rng.gen_range(-0.7..1.0));
        let t = 0.9 * pwq::threshold(gamma) * rng.gen_range(0.1..1.0);
        let y0 = -t / 2.0 + rng.gen_range(-0.2..0.2);
        if pwq::psi(y0, t, gamma) <= 0.0 {
            continue;
        }
        let steps = 12_usize;
        let closed = match pwq::in_well_orbit(y0, t, gamma, steps) {
            Ok(orbit) => orbit,
            Err(pwq::PwqError::WellEscape { .. }) => continue,
            Err(e) => return Err(e.to_string()),
        };
        let simulated = crate::dynamics::run_linearized(&w, t, gamma, y0, steps)
            .map_err(|e| e.to_string())?;
        for (a, b) in closed.iter().zip(simulated.y.iter().skip(1)) {
            orbit_worst = orbit_worst.max((a - b).abs());
        }
        orbit_checked += 1;
    }
    if orbit_checked < 150 {
        return Ok((false, format!("only {orbit_checked} in-well draws valid, want >= 150")));
    }
    Ok((
        orbit_worst <= 1e-10,
        format!(
            "500 prox draws (gap {worst:.3e}) + {orbit_checked} in-well orbits (gap {orbit_worst:.3e}), allowed 1e-10"
        ),
    ))
}

/// Velocity estimates from five different start points must agree pairwise
/// within their summed error bounds, for twenty random supercritical
/// parameter draws.
fn start_independence(seed: u64) -> Check {
    let w = PeriodicPotential::piecewise_quadratic();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_excess = f64::NEG_INFINITY;
    for _ in 0..20 {
        let gamma = 10f64.powf(rng.gen_range(-0.5..0.9));
        let tg = pwq::threshold(gamma);
        let t = rng.gen_range(tg + 0.05..1.15_f64.max(tg + 0.10));
        let mut estimates = Vec::with_capacity(5);
        for _ in 0..5 {
            let y0 = rng.gen_range(-2.0..2.0);
            estimates
                .push(homogenized_velocity(&w, t, gamma, 1e-4, y0).map_err(|e| e.to_string())?);
        }
        for i in 0..estimates.len() {
            for j in (i + 1)..estimates.len() {
                let gap = (estimates[i].value - estimates[j].value).abs();
                let allowed = estimates[i].error_bound + estimates[j].error_bound;
                worst_excess = worst_excess.max(gap - allowed);
            }
        }
    }
    Ok((
        worst_excess <= 0.0,
        format!("worst (pairwise gap - summed bounds) = {worst_excess:.3e} (must be <= 0)"),
    ))
}

fn random_profile(rng: &mut ChaCha8Rng) -> PeriodicPotential {
    match rng.gen_range(0..3_u8) {
        0 => PeriodicPotential::piecewise_quadratic(),
        1 => PeriodicPotential::cosine(),
        _ => PeriodicPotential::zero(),
    }
}

/// Randomized monotonicity sweeps: selection monotonicity of the proximal
/// map, monotonicity of full trajectories, and the frozen-slope sandwich,
/// 1000 instances each with zero violations tolerated.
fn monotonicity_sweeps(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selection_violations = 0_usize;
    for _ in 0..1000 {
        let w = random_profile(&mut rng);
        let t = rng.gen_range(-1.2..1.2);
        let gamma = 10f64.powf(rng.gen_range(-1.0..1.0));
        let a = rng.gen_range(-2.0..2.0);
        let b = a + rng.gen_range(0.0..2.0);
        let ok = if rng.gen_bool(0.5) {
            let lower = ProxProblem::tilted(t, gamma, a, &w);
            let upper = ProxProblem::tilted(t, gamma, b, &w);
            prox_selection_monotone_check(&lower, &upper).map_err(|e| e.to_string())?
        } else {
            let eps = 10f64.powf(rng.gen_range(-3.0..-1.0));
            let energy = OscillatingEnergy::new(ConvexDrive::quadratic(), w.clone(), eps)
                .map_err(|e| e.to_string())?;
            let tau = eps / gamma;
            let lower = ProxProblem::energy(&energy, tau, a);
            let upper = ProxProblem::energy(&energy, tau, b);
            prox_selection_monotone_check(&lower, &upper).map_err(|e| e.to_string())?
        };
        if !ok {
            selection_violations += 1;
        }
    }

    let mut trajectory_violations = 0_usize;
    for _ in 0..1000 {
        let w = random_profile(&mut rng);
        let gamma = 10f64.powf(rng.gen_range(-0.5..0.9));
        let eps = 10f64.powf(rng.gen_range(-4.0..-1.3));
        let x0 = rng.gen_range(-1.5..1.5);
        let energy = OscillatingEnergy::new(ConvexDrive::quadratic(), w, eps)
            .map_err(|e| e.to_string())?;
        let config = MMConfig::fixed_ratio(energy, gamma, x0, 50).map_err(|e| e.to_string())?;
        match run_mm(&config) {
            Ok(_) => {}
            Err(crate::dynamics::DynamicsError::MonotonicityViolation { .. }) => {
                trajectory_violations += 1;
            }
            Err(e) => return Err(e.to_string()),
        }
    }

    let mut sandwich_violations = 0_usize;
    let mut sandwich_first = String::new();
    for _ in 0..1000 {
        let w = random_profile(&mut rng);
        let gamma = rng.gen_range(0.5..5.0);
        let eps = rng.gen_range(0.005..0.05);
        let x0 = rng.gen_range(0.2..1.2);
        let delta = 10f64.powf(rng.gen_range(-3.0..-1.0));
        let kind = w.kind();
        let energy = OscillatingEnergy::new(ConvexDrive::quadratic(), w, eps)
            .map_err(|e| e.to_string())?;
        let config = MMConfig::fixed_ratio(energy, gamma, x0, 150).map_err(|e| e.to_string())?;
        if !sandwich_check(&config, delta, 150).map_err(|e| e.to_string())? {
            if sandwich_violations == 0 {
                sandwich_first = format!(
                    " [first sandwich violation: {kind:?} gamma={gamma} eps={eps} x0={x0} delta={delta}]"
                );
            }
            sandwich_violations += 1;
        }
    }

    let total = selection_violations + trajectory_violations + sandwich_violations;
    Ok((
        total == 0,
        format!(
            "violations: selection {selection_violations}, trajectory {trajectory_violations}, sandwich {sandwich_violations} (1000 draws each){sandwich_first}"
        ),
    ))
}

/// Near the threshold the velocity decays like `1/|log(T - T_gamma)|`: the
/// products `f * |log(T - T_gamma)|` at offsets 1e-2, 1e-3, 1e-4 must agree
/// within 25%.
fn log_law() -> Check {
    let w = PeriodicPotential::piecewise_quadratic();
    let gamma = 2.0;
    let tg = pwq::threshold(gamma);
    let mut products = Vec::with_capacity(3);
    for offset in [1e-2, 1e-3, 1e-4] {
        let est = homogenized_velocity(&w, tg + offset, gamma, 1e-5, 0.0)
            .map_err(|e| e.to_string())?;
        products.push(est.value * offset.ln().abs());
    }
    let max = products.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = products.iter().cloned().fold(f64::INFINITY, f64::min);
    let variation = (max - min) / min;
    Ok((
        variation <= 0.25,
        format!(
            "products {:.4}, {:.4}, {:.4}; relative variation {variation:.3} (allowed 0.25)",
            products[0], products[1], products[2]
        ),
    ))
}

/// Small gamma: the rescaled velocity recovers the drive slope within 5%.
/// Large gamma: it lands within 5% of the measured gradient-flow speed.
fn extreme_regimes() -> Check {
    let w = PeriodicPotential::piecewise_quadratic();
    let mut detail = String::new();
    let mut passed = true;
    for z in [1.5, 2.0, 3.0] {
        let report = extreme_limits(&w, z, 0.01, 100.0).map_err(|e| e.to_string())?;
        let small_rel = (report.small_gamma_velocity - z).abs() / z;
        let large_rel = (report.large_gamma_velocity - report.g_infinity_flow).abs()
            / report.g_infinity_flow;
        passed &= small_rel <= 0.05 && large_rel <= 0.05;
        detail.push_str(&format!(
            "z={z}: small rel {small_rel:.3e}, large rel {large_rel:.3e}; "
        ));
    }
    detail.push_str("(allowed 0.05)");
    Ok((passed, detail))
}

/// Wherever a periodic orbit is detected, its rotation ratio `|p|/q` must
/// equal the measured velocity within the velocity's error bound; includes
/// a locked plateau case found by bisection on the measured velocity.
fn periodic_orbits() -> Check {
    let w = PeriodicPotential::piecewise_quadratic();
    let gamma = 2.0;

    // Pinned fixed point.
    let pinned = detect_periodic_orbit(&w, 0.499, gamma, 16).map_err(|e| e.to_string())?;
    if pinned.q != 1 || pinned.p != 0 {
        return Ok((false, format!("pinned case gave q={}, p={}", pinned.q, pinned.p)));
    }

    // Locate a slope with measured velocity 1/2 by bisection.
    let target = 0.5;
    let mut lo = 0.75_f64;
    let mut hi = 1.05_f64;
    let mut locked_t = f64::NAN;
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let est = homogenized_velocity(&w, mid, gamma, 1e-4, 0.0).map_err(|e| e.to_string())?;
        if (est.value - target).abs() <= 1e-3 {
            locked_t = mid;
            break;
        }
        if est.value < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if !locked_t.is_finite() {
        return Ok((false, "bisection did not reach measured velocity 1/2".into()));
    }
    let locked = detect_periodic_orbit(&w, locked_t, gamma, 64).map_err(|e| e.to_string())?;
    if locked.q != 2 || locked.p.unsigned_abs() != 1 || locked.residual > 1e-8 {
        return Ok((
            false,
            format!(
                "plateau case at T={locked_t:.4}: q={}, p={}, residual {:.2e}",
                locked.q, locked.p, locked.residual
            ),
        ));
    }

    // Sweep: every successful detection must match the measured velocity.
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_case = String::new();
    let mut matched = 0_usize;
    for i in 0..=10 {
        let t = 0.5 + 0.06 * i as f64;
        let report = match detect_periodic_orbit(&w, t, gamma, 128) {
            Ok(r) => r,
            Err(HomogenizationError::NotFound { .. }) => continue,
            Err(e) => return Err(e.to_string()),
        };
        let est = homogenized_velocity(&w, t, gamma, 1e-5, 0.0).map_err(|e| e.to_string())?;
        let ratio = report.p.unsigned_abs() as f64 / report.q as f64;
        let excess = (ratio - est.value).abs() - est.error_bound;
        if excess > worst_excess {
            worst_excess = excess;
            worst_case = format!(
                "T={t:.2}: q={} p={} ratio={ratio:.6} vs f={:.6}+-{:.1e}",
                report.q, report.p, est.value, est.error_bound
            );
        }
        matched += 1;
    }
    Ok((
        worst_excess <= 0.0 && matched >= 3,
        format!(
            "fixed point + plateau (T={locked_t:.4}, q=2, |p|=1) + {matched} sweep matches, worst ratio excess {worst_excess:.3e} ({worst_case})"
        ),
    ))
}

/// The discrete trajectories approach the limit run as the oscillation scale
/// shrinks: sup-distances decrease along epsilon, and a pinned start keeps
/// both trajectories within one cell width.
fn discrete_to_limit() -> Check {
    let w = PeriodicPotential::piecewise_quadratic();
    let drive = ConvexDrive::quadratic();
    let epsilons = [0.1, 0.05, 0.025, 0.0125];
    let rows = convergence_study(&drive, &w, 2.0, 1.0, 1.0, &epsilons, 1e-5)
        .map_err(|e| e.to_string())?;
    let mut decreasing = true;
    for pair in rows.windows(2) {
        decreasing &= pair[1].sup_distance <= pair[0].sup_distance + 1e-6;
    }
    let sups: Vec<String> = rows.iter().map(|r| format!("{:.4}", r.sup_distance)).collect();

    let pinned_rows = convergence_study(&drive, &w, 2.0, 0.3, 1.0, &epsilons, 1e-5)
        .map_err(|e| e.to_string())?;
    let pinned_ok = pinned_rows.iter().all(|r| r.sup_distance <= r.epsilon);

    Ok((
        decreasing && pinned_ok,
        format!(
            "sup-distances {} (decreasing: {decreasing}); pinned-start sups all <= eps: {pinned_ok}",
            sups.join(", ")
        ),
    ))
}

/// Starts below the threshold must reach a fixed point within the well
/// relaxation scale; starts above must keep strictly moving downhill for
/// 10^4 steps.
fn pinning_end_to_end() -> Check {
    let w = PeriodicPotential::piecewise_quadratic();
    let cases = [(0.5_f64, 1e-5_f64), (2.0, 1e-4), (10.0, 1e-4)];
    let mut detail = String::new();

    for (gamma, eps) in cases {
        let tg = pwq::threshold(gamma);
        let r = gamma / (2.0 + gamma);
        // Well relaxation: contraction by r per step down to the 1e-12
        // pinning tolerance, plus the ten-step quiet run and safety margin.
        let bound = 10 + (1e12_f64.ln() / (1.0 / r).ln()).ceil() as usize + 10;

        let x0 = 0.6 * tg;
        let energy = OscillatingEnergy::new(ConvexDrive::quadratic(), w.clone(), eps)
            .map_err(|e| e.to_string())?;
        let config = MMConfig::fixed_ratio(energy, gamma, x0, bound + 60)
            .map_err(|e| e.to_string())?;
        let trajectory = run_mm(&config).map_err(|e| e.to_string())?;
        match trajectory.pinned_at {
            Some(step) if step <= bound => {
                detail.push_str(&format!("gamma={gamma}: pinned at {step} <= {bound}; "));
            }
            Some(step) => {
                return Ok((
                    false,
                    format!("gamma={gamma}: pinned at {step}, allowed {bound}"),
                ));
            }
            None => {
                return Ok((false, format!("gamma={gamma}: subcritical run never pinned")));
            }
        }
        if (trajectory.final_state() - x0).abs() > eps {
            return Ok((
                false,
                format!(
                    "gamma={gamma}: relaxed state {} drifted more than one cell from {x0}",
                    trajectory.final_state()
                ),
            ));
        }
    }

    for ((gamma, eps), x0) in cases.into_iter().zip([0.5, 1.0, 1.2]) {
        let tg = pwq::threshold(gamma);
        let energy = OscillatingEnergy::new(ConvexDrive::quadratic(), w.clone(), eps)
            .map_err(|e| e.to_string())?;
        let config =
            MMConfig::fixed_ratio(energy, gamma, x0, 10_000).map_err(|e| e.to_string())?;
        let trajectory = run_mm(&config).map_err(|e| e.to_string())?;
        let final_state = trajectory.final_state();
        if trajectory.pinned_at.is_some() {
            return Ok((false, format!("gamma={gamma}: supercritical run pinned")));
        }
        if final_state >= x0 - 1e-3 {
            return Ok((
                false,
                format!("gamma={gamma}: run barely moved ({x0} -> {final_state})"),
            ));
        }
        if final_state < tg + 0.01 {
            return Ok((
                false,
                format!(
                    "gamma={gamma}: run left the supercritical regime ({final_state} < {} + 0.01), test draw invalid",
                    tg
                ),
            ));
        }
        detail.push_str(&format!("gamma={gamma}: moved {:.4}; ", x0 - final_state));
    }

    Ok((true, detail))
}
