//! Randomized cross-checks of the proximal solver against a brute-force
//! scan-and-polish oracle that shares no code with the solver.

mod common;

use common::grid_argmin;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wiggly::potentials::{ConvexDrive, OscillatingEnergy, PeriodicPotential};
use wiggly::proximal::{prox_minimum, ProxProblem, SolverPath};

fn profile(rng: &mut ChaCha8Rng) -> PeriodicPotential {
    match rng.gen_range(0..3_u8) {
        0 => PeriodicPotential::piecewise_quadratic(),
        1 => PeriodicPotential::cosine(),
        _ => PeriodicPotential::zero(),
    }
}

/// Either the minimizers agree to 1e-6, or the objective values tie so
/// closely that which one the scan lands on is selection noise.
fn assert_agreement(f: &dyn Fn(f64) -> f64, got: f64, oracle: f64) {
    let scale = f(oracle).abs().max(1.0);
    assert!(
        f(got) <= f(oracle) + 1e-9 * scale,
        "solver value {} worse than oracle value {} at x={got} vs {oracle}",
        f(got),
        f(oracle)
    );
    let distance = (got - oracle).abs();
    if distance > 1e-6 {
        assert!(
            (f(got) - f(oracle)).abs() <= 1e-12 * scale,
            "minimizers {got} vs {oracle} disagree by {distance} without a value tie"
        );
    }
}

#[test]
fn tilted_minimizers_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    for _ in 0..200 {
        let w = profile(&mut rng);
        let t = rng.gen_range(-1.2..1.2);
        let gamma = 10f64.powf(rng.gen_range(-1.0..1.0));
        let y0 = rng.gen_range(-3.0..3.0);

        let problem = ProxProblem::tilted(t, gamma, y0, &w);
        let (got, _) = prox_minimum(&problem).unwrap();

        let beta = 0.5 * gamma;
        let f = |y: f64| t * y + w.value(y) + beta * (y - y0) * (y - y0);
        let radius = problem.slope_bound / (2.0 * beta) + 2.0;
        let oracle = grid_argmin(&f, y0 - radius, y0 + radius);
        assert_agreement(&f, got, oracle);
    }
}

#[test]
fn energy_minimizers_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(92);
    for _ in 0..100 {
        let w = profile(&mut rng);
        let gamma = 10f64.powf(rng.gen_range(-0.5..0.7));
        let eps = 10f64.powf(rng.gen_range(-2.3..-1.0));
        let x0 = rng.gen_range(-2.0..2.0);
        let energy = OscillatingEnergy::new(ConvexDrive::quadratic(), w, eps).unwrap();
        let tau = eps / gamma;

        let problem = ProxProblem::energy(&energy, tau, x0);
        let (got, _) = prox_minimum(&problem).unwrap();

        let beta = 0.5 / tau;
        let f = |x: f64| energy.value(x) + beta * (x - x0) * (x - x0);
        let radius = problem.slope_bound / (2.0 * beta) + 2.0 * eps + 0.5;
        let oracle = grid_argmin(&f, x0 - radius, x0 + radius);
        assert_agreement(&f, got, oracle);
    }
}

#[test]
fn generic_path_agrees_with_auto() {
    let mut rng = ChaCha8Rng::seed_from_u64(93);
    for _ in 0..150 {
        let w = profile(&mut rng);
        let t = rng.gen_range(-1.2..1.2);
        let gamma = 10f64.powf(rng.gen_range(-1.0..1.0));
        let y0 = rng.gen_range(-3.0..3.0);

        let auto = ProxProblem::tilted(t, gamma, y0, &w);
        let mut generic = auto.clone();
        generic.solver = SolverPath::Generic;
        let (xa, va) = prox_minimum(&auto).unwrap();
        let (xg, vg) = prox_minimum(&generic).unwrap();

        let scale = va.abs().max(1.0);
        assert!((va - vg).abs() <= 1e-9 * scale, "values {va} vs {vg}");
        if (xa - xg).abs() > 1e-6 {
            assert!((va - vg).abs() <= 1e-12 * scale, "paths split {xa} vs {xg} without a tie");
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(94);
    for _ in 0..50 {
        let w = profile(&mut rng);
        let gamma = 10f64.powf(rng.gen_range(-0.5..0.7));
        let eps = 10f64.powf(rng.gen_range(-2.3..-1.0));
        let x0 = rng.gen_range(-2.0..2.0);
        let energy = OscillatingEnergy::new(ConvexDrive::quadratic(), w, eps).unwrap();
        let tau = eps / gamma;

        let auto = ProxProblem::energy(&energy, tau, x0);
        let mut generic = auto.clone();
        generic.solver = SolverPath::Generic;
        let (xa, va) = prox_minimum(&auto).unwrap();
        let (xg, vg) = prox_minimum(&generic).unwrap();

        let scale = va.abs().max(1.0);
        assert!((va - vg).abs() <= 1e-9 * scale, "values {va} vs {vg}");
        if (xa - xg).abs() > 1e-6 {
            assert!((va - vg).abs() <= 1e-12 * scale, "paths split {xa} vs {xg} without a tie");
        }
    }
}

#[test]
fn tabulated_profile_matches_brute_force() {
    // A sampled asymmetric two-bump profile exercises the interpolation path.
    let n = 256;
    let values: Vec<f64> = (0..=n)
        .map(|i| {
            let y = i as f64 / n as f64;
            let s = (std::f64::consts::TAU * y).sin();
            let c = (2.0 * std::f64::consts::TAU * y).cos();
            0.15 * (1.0 - c) + 0.05 * s * s
        })
        .collect();
    let w = PeriodicPotential::tabulated(values).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(95);
    for _ in 0..40 {
        let t = rng.gen_range(-0.8..0.8);
        let gamma = 10f64.powf(rng.gen_range(-0.5..0.7));
        let y0 = rng.gen_range(-2.0..2.0);
        let problem = ProxProblem::tilted(t, gamma, y0, &w);
        let (got, _) = prox_minimum(&problem).unwrap();

        let beta = 0.5 * gamma;
        let wc = w.clone();
        let f = move |y: f64| t * y + wc.value(y) + beta * (y - y0) * (y - y0);
        let radius = problem.slope_bound / (2.0 * beta) + 2.0;
        let oracle = grid_argmin(&f, y0 - radius, y0 + radius);
        assert_agreement(&f, got, oracle);
    }
}
