//! Subcommand implementations. Each one resolves its parameters (explicit
//! flags override config-file keys, leftovers are rejected), runs the
//! corresponding library computation, and writes a single artifact with the
//! fully resolved config embedded.

use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde_json::{json, Value};

use wiggly::dynamics::{run_mm, MMConfig};
use wiggly::limit_ode::{convergence_study, integrate_limit};
use wiggly::potentials::validate_potential;
use wiggly::{
    homogenized_velocity, pinning_threshold_criterion, pinning_threshold_velocity,
    HomogenizationError, OscillatingEnergy, VelocityEstimate,
};

use crate::config::{
    fmt_f64, json17, parse_grid, resolve_drive, resolve_profile, write_output, ConfigSource,
    ResolvedConfig,
};
use crate::errors::CliError;

fn out_path(cfg: &mut ConfigSource, flag: Option<&Path>) -> Result<Option<PathBuf>, CliError> {
    let flag_text = flag.map(|p| p.to_string_lossy().into_owned());
    Ok(cfg.string("out", flag_text.as_deref())?.map(PathBuf::from))
}

fn report_to_map(report: &impl serde::Serialize) -> Result<serde_json::Map<String, Value>, CliError> {
    match serde_json::to_value(report) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(other) => Err(CliError::Solver(format!(
            "internal: report serialized to a non-object value {other}"
        ))),
        Err(e) => Err(CliError::Solver(format!("internal: report serialization failed: {e}"))),
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Oscillation-to-step ratio gamma = epsilon / tau.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Oscillation scale epsilon.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Initial state.
    #[arg(long)]
    pub x0: Option<f64>,
    /// Number of proximal steps.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Oscillation profile: pwq, cosine, zero, or a JSON profile file.
    #[arg(long)]
    pub w: Option<String>,
    /// Drive: quadratic, or poly:c0,c1,c2,... (ascending powers).
    #[arg(long)]
    pub h: Option<String>,
    /// Output file (standard output when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn simulate(args: &SimulateArgs, mut cfg: ConfigSource) -> Result<(), CliError> {
    let gamma = cfg.require_f64("gamma", args.gamma)?;
    let epsilon = cfg.require_f64("epsilon", args.epsilon)?;
    let x0 = cfg.require_f64("x0", args.x0)?;
    let steps = cfg.require_usize("steps", args.steps)?;
    let w_name = cfg.string_or("w", args.w.as_deref(), "pwq")?;
    let h_name = cfg.string_or("h", args.h.as_deref(), "quadratic")?;
    let out = out_path(&mut cfg, args.out.as_deref())?;
    cfg.finish()?;

    let w = resolve_profile(&w_name)?;
    let drive = resolve_drive(&h_name)?;
    let energy = OscillatingEnergy::new(drive, w, epsilon)?;
    let mm = MMConfig::fixed_ratio(energy, gamma, x0, steps)?;
    let trajectory = run_mm(&mm)?;

    let resolved = ResolvedConfig::new("simulate")
        .f64("gamma", gamma)
        .f64("epsilon", epsilon)
        .f64("x0", x0)
        .u64("steps", steps as u64)
        .str("w", &w_name)
        .str("h", &h_name);
    let mut content = format!("# config: {}\n", json17(&resolved.into_value()));
    content.push_str(&trajectory.to_csv());
    write_output(out.as_deref(), &content)
}

#[derive(Debug, Args)]
pub struct VelocityArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Drive slope of the linearized problem.
    #[arg(long = "T")]
    pub t: Option<f64>,
    /// Target error bound of the estimate.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Start point of the orbit.
    #[arg(long)]
    pub y0: Option<f64>,
    /// Oscillation profile: pwq, cosine, zero, or a JSON profile file.
    #[arg(long)]
    pub w: Option<String>,
    /// Output file (standard output when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn velocity(args: &VelocityArgs, mut cfg: ConfigSource) -> Result<(), CliError> {
    let gamma = cfg.require_f64("gamma", args.gamma)?;
    let t = cfg.require_f64("T", args.t)?;
    let tol = cfg.f64("tol", args.tol)?.unwrap_or(1e-4);
    let y0 = cfg.f64("y0", args.y0)?.unwrap_or(0.0);
    let w_name = cfg.string_or("w", args.w.as_deref(), "pwq")?;
    let out = out_path(&mut cfg, args.out.as_deref())?;
    cfg.finish()?;

    let w = resolve_profile(&w_name)?;
    // On budget exhaustion the artifact is still written, carrying the best
    // estimate and a true `budget_exceeded` flag; the process then exits 4.
    let (estimate, budget_exceeded) = match homogenized_velocity(&w, t, gamma, tol, y0) {
        Ok(est) => (est, false),
        Err(HomogenizationError::BudgetExceeded { estimate }) => (estimate, true),
        Err(other) => return Err(other.into()),
    };

    let resolved = ResolvedConfig::new("velocity")
        .f64("gamma", gamma)
        .f64("T", t)
        .f64("tol", tol)
        .f64("y0", y0)
        .str("w", &w_name);
    let mut doc = serde_json::Map::new();
    doc.insert("config".into(), resolved.into_value());
    doc.insert("gamma".into(), json!(estimate.gamma));
    doc.insert("T".into(), json!(estimate.t));
    doc.insert("f".into(), json!(estimate.value));
    doc.insert("err_bound".into(), json!(estimate.error_bound));
    doc.insert("iters".into(), json!(estimate.iterations));
    doc.insert("budget_exceeded".into(), json!(budget_exceeded));
    write_output(out.as_deref(), &(json17(&Value::Object(doc)) + "\n"))?;

    if budget_exceeded {
        return Err(CliError::Budget(format!(
            "iteration budget exhausted at error bound {:.2e} (target {tol:.1e}); artifact written with budget_exceeded = true",
            estimate.error_bound
        )));
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Bracketing method: criterion (escape-criterion bisection) or
    /// velocity (velocity-sign bisection).
    #[arg(long)]
    pub method: Option<String>,
    /// Target bracket width.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Oscillation profile: pwq, cosine, zero, or a JSON profile file.
    #[arg(long)]
    pub w: Option<String>,
    /// Output file (standard output when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn threshold(args: &ThresholdArgs, mut cfg: ConfigSource) -> Result<(), CliError> {
    let gamma = cfg.require_f64("gamma", args.gamma)?;
    let method = cfg.string_or("method", args.method.as_deref(), "criterion")?;
    let default_tol = if method == "velocity" { 1e-4 } else { 1e-7 };
    let tol = cfg.f64("tol", args.tol)?.unwrap_or(default_tol);
    let w_name = cfg.string_or("w", args.w.as_deref(), "pwq")?;
    let out = out_path(&mut cfg, args.out.as_deref())?;
    cfg.finish()?;

    let w = resolve_profile(&w_name)?;
    let report = match method.as_str() {
        "criterion" => pinning_threshold_criterion(&w, gamma, tol)?,
        "velocity" => pinning_threshold_velocity(&w, gamma, tol)?,
        other => {
            return Err(CliError::Config(format!(
                "unknown method {other:?}: use criterion or velocity"
            )))
        }
    };

    let resolved = ResolvedConfig::new("threshold")
        .f64("gamma", gamma)
        .str("method", &method)
        .f64("tol", tol)
        .str("w", &w_name);
    let mut doc = report_to_map(&report)?;
    doc.insert("config".into(), resolved.into_value());
    write_output(out.as_deref(), &(json17(&Value::Object(doc)) + "\n"))
}

#[derive(Debug, Args)]
pub struct PhaseArgs {
    /// Gamma grid lo:hi:n (n points, endpoints included).
    #[arg(long = "gamma-grid")]
    pub gamma_grid: Option<String>,
    /// Drive-slope grid lo:hi:n (n points, endpoints included).
    #[arg(long = "t-grid")]
    pub t_grid: Option<String>,
    /// Target error bound per cell.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Start point of each orbit.
    #[arg(long)]
    pub y0: Option<f64>,
    /// Oscillation profile: pwq, cosine, zero, or a JSON profile file.
    #[arg(long)]
    pub w: Option<String>,
    /// Output file (standard output when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn phase(args: &PhaseArgs, mut cfg: ConfigSource) -> Result<(), CliError> {
    let gamma_grid = cfg.string("gamma_grid", args.gamma_grid.as_deref())?.ok_or_else(|| {
        CliError::Config("missing parameter \"gamma_grid\": pass --gamma-grid or a config key".into())
    })?;
    let t_grid = cfg.string("t_grid", args.t_grid.as_deref())?.ok_or_else(|| {
        CliError::Config("missing parameter \"t_grid\": pass --t-grid or a config key".into())
    })?;
    let tol = cfg.f64("tol", args.tol)?.unwrap_or(1e-3);
    let y0 = cfg.f64("y0", args.y0)?.unwrap_or(0.0);
    let w_name = cfg.string_or("w", args.w.as_deref(), "pwq")?;
    let out = out_path(&mut cfg, args.out.as_deref())?;
    cfg.finish()?;

    let gammas = parse_grid(&gamma_grid)?;
    let slopes = parse_grid(&t_grid)?;
    if let Some(bad) = gammas.iter().find(|g| **g <= 0.0) {
        return Err(CliError::Config(format!("gamma grid contains nonpositive value {bad}")));
    }
    let w = resolve_profile(&w_name)?;

    // Row-major cells (gamma outer, slope inner); the parallel map keeps
    // this order in the output no matter how cells are scheduled.
    let cells: Vec<(f64, f64)> =
        gammas.iter().flat_map(|g| slopes.iter().map(move |t| (*g, *t))).collect();
    let results: Vec<Result<(VelocityEstimate, bool), HomogenizationError>> = cells
        .par_iter()
        .map(|&(gamma, t)| match homogenized_velocity(&w, t, gamma, tol, y0) {
            Ok(est) => Ok((est, false)),
            Err(HomogenizationError::BudgetExceeded { estimate }) => Ok((estimate, true)),
            Err(other) => Err(other),
        })
        .collect();

    let resolved = ResolvedConfig::new("phase")
        .str("gamma_grid", &gamma_grid)
        .str("t_grid", &t_grid)
        .f64("tol", tol)
        .f64("y0", y0)
        .str("w", &w_name);
    let mut content = format!("# config: {}\n", json17(&resolved.into_value()));
    content.push_str("gamma,T,f,err_bound,iters,pinned\n");
    let mut exhausted_cells = 0usize;
    for result in results {
        let (est, exceeded) = result.map_err(CliError::from)?;
        if exceeded {
            exhausted_cells += 1;
        }
        content.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_f64(est.gamma),
            fmt_f64(est.t),
            fmt_f64(est.value),
            fmt_f64(est.error_bound),
            est.iterations,
            est.value == 0.0
        ));
    }
    write_output(out.as_deref(), &content)?;

    if exhausted_cells > 0 {
        return Err(CliError::Budget(format!(
            "{exhausted_cells} grid cell(s) exhausted the iteration budget; their rows carry best estimates with correspondingly loose err_bound values"
        )));
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct LimitOdeArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Initial state.
    #[arg(long)]
    pub x0: Option<f64>,
    /// Integration horizon.
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    /// Local-error target per unit time.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Oscillation profile: pwq, cosine, zero, or a JSON profile file.
    #[arg(long)]
    pub w: Option<String>,
    /// Drive: quadratic, or poly:c0,c1,c2,... (ascending powers).
    #[arg(long)]
    pub h: Option<String>,
    /// Output file (standard output when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn limit_ode(args: &LimitOdeArgs, mut cfg: ConfigSource) -> Result<(), CliError> {
    let gamma = cfg.require_f64("gamma", args.gamma)?;
    let x0 = cfg.require_f64("x0", args.x0)?;
    let t_end = cfg.require_f64("t_end", args.t_end)?;
    // Tolerances much below 1e-5 push every right-hand-side query into the
    // slow near-threshold regime; 1e-5 keeps the default run interactive.
    let tol = cfg.f64("tol", args.tol)?.unwrap_or(1e-5);
    let w_name = cfg.string_or("w", args.w.as_deref(), "pwq")?;
    let h_name = cfg.string_or("h", args.h.as_deref(), "quadratic")?;
    let out = out_path(&mut cfg, args.out.as_deref())?;
    cfg.finish()?;

    let w = resolve_profile(&w_name)?;
    let drive = resolve_drive(&h_name)?;
    let run = integrate_limit(gamma, x0, t_end, &drive, &w, tol)?;

    let resolved = ResolvedConfig::new("limit-ode")
        .f64("gamma", gamma)
        .f64("x0", x0)
        .f64("t_end", t_end)
        .f64("tol", tol)
        .str("w", &w_name)
        .str("h", &h_name);
    let mut content = format!("# config: {}\n", json17(&resolved.into_value()));
    content.push_str("t,x\n");
    for (t, x) in run.times.iter().zip(&run.states) {
        content.push_str(&fmt_f64(*t));
        content.push(',');
        content.push_str(&fmt_f64(*x));
        content.push('\n');
    }
    write_output(out.as_deref(), &content)
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Initial state.
    #[arg(long)]
    pub x0: Option<f64>,
    /// Comma-separated strictly decreasing oscillation scales (at least 3).
    #[arg(long)]
    pub epsilons: Option<String>,
    /// Comparison horizon.
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    /// Tolerance for the reference integration.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Oscillation profile: pwq, cosine, zero, or a JSON profile file.
    #[arg(long)]
    pub w: Option<String>,
    /// Drive: quadratic, or poly:c0,c1,c2,... (ascending powers).
    #[arg(long)]
    pub h: Option<String>,
    /// Output file (standard output when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn compare(args: &CompareArgs, mut cfg: ConfigSource) -> Result<(), CliError> {
    let gamma = cfg.require_f64("gamma", args.gamma)?;
    let x0 = cfg.require_f64("x0", args.x0)?;
    let t_end = cfg.require_f64("t_end", args.t_end)?;
    let epsilons = cfg.f64_list("epsilons", args.epsilons.as_deref())?.ok_or_else(|| {
        CliError::Config("missing parameter \"epsilons\": pass --epsilons or a config key".into())
    })?;
    let tol = cfg.f64("tol", args.tol)?.unwrap_or(1e-5);
    let w_name = cfg.string_or("w", args.w.as_deref(), "pwq")?;
    let h_name = cfg.string_or("h", args.h.as_deref(), "quadratic")?;
    let out = out_path(&mut cfg, args.out.as_deref())?;
    cfg.finish()?;

    let w = resolve_profile(&w_name)?;
    let drive = resolve_drive(&h_name)?;
    let rows = convergence_study(&drive, &w, gamma, x0, t_end, &epsilons, tol)?;

    let resolved = ResolvedConfig::new("compare")
        .f64("gamma", gamma)
        .f64("x0", x0)
        .f64("t_end", t_end)
        .f64_list("epsilons", &epsilons)
        .f64("tol", tol)
        .str("w", &w_name)
        .str("h", &h_name);
    let mut content = format!("# config: {}\n", json17(&resolved.into_value()));
    content.push_str("epsilon,sup_distance\n");
    for row in rows {
        content.push_str(&fmt_f64(row.epsilon));
        content.push(',');
        content.push_str(&fmt_f64(row.sup_distance));
        content.push('\n');
    }
    write_output(out.as_deref(), &content)
}

#[derive(Debug, Args)]
pub struct ValidatePotentialArgs {
    /// Oscillation profile: pwq, cosine, zero, or a JSON profile file.
    #[arg(long)]
    pub w: Option<String>,
    /// Sample count for the hypothesis checks.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Output file (standard output when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn validate_potential_cmd(
    args: &ValidatePotentialArgs,
    mut cfg: ConfigSource,
) -> Result<(), CliError> {
    let w_name = cfg.string("w", args.w.as_deref())?.ok_or_else(|| {
        CliError::Config("missing parameter \"w\": pass --w or a config key".into())
    })?;
    let samples = cfg.usize("samples", args.samples)?.unwrap_or(4096);
    let out = out_path(&mut cfg, args.out.as_deref())?;
    cfg.finish()?;

    let w = resolve_profile(&w_name)?;
    // Violations are data, not failures: the report says what the profile
    // breaks, and the exit code stays 0 because the validation itself ran.
    let report = validate_potential(&w, samples)?;

    let resolved =
        ResolvedConfig::new("validate-potential").str("w", &w_name).u64("samples", samples as u64);
    let mut doc = report_to_map(&report)?;
    doc.insert("config".into(), resolved.into_value());
    write_output(out.as_deref(), &(json17(&Value::Object(doc)) + "\n"))
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Also write the outcomes as a JSON report to this path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn selftest(args: &SelftestArgs, mut cfg: ConfigSource, seed: u64) -> Result<(), CliError> {
    let out = out_path(&mut cfg, args.out.as_deref())?;
    cfg.finish()?;

    let outcomes = wiggly::run_all(seed);
    for outcome in &outcomes {
        println!("{}", outcome.line());
    }
    let passed = outcomes.iter().all(|o| o.passed);

    if let Some(path) = out {
        let mut doc = serde_json::Map::new();
        doc.insert("config".into(), ResolvedConfig::new("selftest").u64("seed", seed).into_value());
        doc.insert(
            "criteria".into(),
            serde_json::to_value(&outcomes)
                .map_err(|e| CliError::Solver(format!("internal: outcome serialization failed: {e}")))?,
        );
        doc.insert("passed".into(), json!(passed));
        write_output(Some(&path), &(json17(&Value::Object(doc)) + "\n"))?;
    }

    if passed {
        Ok(())
    } else {
        let failed: Vec<&str> =
            outcomes.iter().filter(|o| !o.passed).map(|o| o.name).collect();
        Err(CliError::Solver(format!(
            "{} of {} acceptance criteria failed: {}",
            failed.len(),
            outcomes.len(),
            failed.join(", ")
        )))
    }
}
