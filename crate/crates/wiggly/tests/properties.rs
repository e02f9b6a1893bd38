//! Randomized structural properties of the proximal solver and the
//! minimizing-movement iteration: selection monotonicity, period-shift
//! equivariance, agreement between the closed-form and generic solver paths,
//! trajectory monotonicity, and the two-sided frozen-slope bracket.

use proptest::prelude::*;

use wiggly::dynamics::{run_mm, sandwich_check, MMConfig};
use wiggly::{
    prox_minimum, prox_selection_monotone_check, ConvexDrive, OscillatingEnergy,
    PeriodicPotential, ProxProblem, SolverPath,
};

/// A random 1-periodic profile: the three built-ins plus a smooth two-mode
/// tabulated one whose seam closes by construction.
fn profile(choice: usize, a: f64, b: f64) -> PeriodicPotential {
    match choice {
        0 => PeriodicPotential::piecewise_quadratic(),
        1 => PeriodicPotential::cosine(),
        2 => PeriodicPotential::zero(),
        _ => {
            let n = 64;
            let values: Vec<f64> = (0..n)
                .map(|j| {
                    let y = j as f64 / (n - 1) as f64;
                    a * (1.0 - (std::f64::consts::TAU * y).cos())
                        + b * (2.0 * std::f64::consts::TAU * y).sin()
                })
                .collect();
            PeriodicPotential::tabulated(values).expect("seam-closed table is valid")
        }
    }
}

fn profile_strategy() -> impl Strategy<Value = PeriodicPotential> {
    (0usize..4, 0.05f64..0.3, 0.0f64..0.1).prop_map(|(c, a, b)| profile(c, a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    /// Ordered proximal centers keep ordered minimizers, for both the tilted
    /// cell problem and the full oscillating energy.
    #[test]
    fn selection_is_monotone_in_the_center(
        w in profile_strategy(),
        t in -1.5f64..1.5,
        log_gamma in -1.0f64..1.0,
        c in -3.0f64..3.0,
        gap in 0.0f64..2.5,
        use_energy in any::<bool>(),
        log_eps in -2.0f64..-0.7,
    ) {
        let gamma = 10f64.powf(log_gamma);
        let ok = if use_energy {
            let eps = 10f64.powf(log_eps);
            let energy = OscillatingEnergy::new(ConvexDrive::quadratic(), w, eps).unwrap();
            let tau = eps / gamma;
            let lower = ProxProblem::energy(&energy, tau, c);
            let upper = ProxProblem::energy(&energy, tau, c + gap);
            prox_selection_monotone_check(&lower, &upper).unwrap()
        } else {
            let lower = ProxProblem::tilted(t, gamma, c, &w);
            let upper = ProxProblem::tilted(t, gamma, c + gap, &w);
            prox_selection_monotone_check(&lower, &upper).unwrap()
        };
        prop_assert!(ok, "minimizers out of order for ordered centers");
    }

    /// Shifting the center by one full period shifts the tilted minimizer by
    /// exactly one period (the profile is 1-periodic and the tilt is linear,
    /// so the whole candidate landscape translates).
    #[test]
    fn tilted_prox_is_period_shift_equivariant(
        w in profile_strategy(),
        t in -1.2f64..1.2,
        log_gamma in -1.0f64..1.0,
        c in -2.0f64..2.0,
    ) {
        let gamma = 10f64.powf(log_gamma);
        let base = ProxProblem::tilted(t, gamma, c, &w);
        let shifted = ProxProblem::tilted(t, gamma, c + 1.0, &w);
        let (m0, v0) = prox_minimum(&base).unwrap();
        let (m1, v1) = prox_minimum(&shifted).unwrap();
        // Values differ by the tilt over one period plus the quadratic
        // recentering, which cancels: v1 = v0 + t exactly in real arithmetic.
        let scale = 1.0 + v0.abs().max(v1.abs());
        if (m1 - m0 - 1.0).abs() > 1e-8 {
            // A tie split the other way is acceptable only at equal value.
            prop_assert!(
                (v1 - t - v0).abs() <= 1e-9 * scale,
                "shifted minimizer {m1} is not base {m0} + 1 and values disagree: {v0} vs {v1}"
            );
        } else {
            prop_assert!(
                (v1 - t - v0).abs() <= 1e-9 * scale,
                "minimizers shift correctly but values drift: {v0} vs {v1}"
            );
        }
    }

    /// The closed-form per-cell path and the generic scan find the same
    /// minimum (same value; same point up to exact ties).
    #[test]
    fn generic_and_auto_paths_agree(
        w in profile_strategy(),
        t in -1.2f64..1.2,
        log_gamma in -1.0f64..1.0,
        c in -2.5f64..2.5,
    ) {
        let gamma = 10f64.powf(log_gamma);
        let auto = ProxProblem::tilted(t, gamma, c, &w);
        let mut generic = auto.clone();
        generic.solver = SolverPath::Generic;
        let (ma, va) = prox_minimum(&auto).unwrap();
        let (mg, vg) = prox_minimum(&generic).unwrap();
        let scale = 1.0 + va.abs().max(vg.abs());
        prop_assert!((va - vg).abs() <= 1e-8 * scale, "paths disagree on the minimum value: {va} vs {vg}");
        if (ma - mg).abs() > 1e-6 {
            prop_assert!(
                (va - vg).abs() <= 1e-10 * scale,
                "paths picked different points {ma} vs {mg} without a value tie"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Full minimizing-movement runs never reverse direction.
    #[test]
    fn trajectories_are_monotone(
        w in profile_strategy(),
        log_gamma in -0.5f64..0.9,
        log_eps in -2.0f64..-1.0,
        x0 in -2.0f64..2.0,
    ) {
        let gamma = 10f64.powf(log_gamma);
        let eps = 10f64.powf(log_eps);
        let energy = OscillatingEnergy::new(ConvexDrive::quadratic(), w, eps).unwrap();
        let config = MMConfig::fixed_ratio(energy, gamma, x0, 60).unwrap();
        let traj = run_mm(&config).expect("monotone run must not abort");
        let mut diffs = traj.states.windows(2).map(|p| p[1] - p[0]);
        let has_up = diffs.clone().any(|d| d > 1e-10);
        let has_down = diffs.any(|d| d < -1e-10);
        prop_assert!(!(has_up && has_down), "recorded states change direction");
    }

    /// While everything stays within `delta` of the start, the full orbit is
    /// bracketed by the two frozen-slope linearized orbits.
    #[test]
    fn frozen_slope_orbits_bracket_the_full_one(
        w in profile_strategy(),
        gamma in 0.5f64..5.0,
        eps in 0.005f64..0.05,
        x0 in 0.2f64..1.2,
        log_delta in -3.0f64..-1.0,
    ) {
        let delta = 10f64.powf(log_delta);
        let energy = OscillatingEnergy::new(ConvexDrive::quadratic(), w, eps).unwrap();
        let config = MMConfig::fixed_ratio(energy, gamma, x0, 150).unwrap();
        let ok = sandwich_check(&config, delta, 150).unwrap();
        prop_assert!(ok, "frozen-slope bracket failed inside its validity window");
    }
}
