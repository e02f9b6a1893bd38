//! One-periodic oscillation profiles `W` and convex drives `h`, combined into
//! the oscillating energy `E(x) = h(x) + eps * W(x / eps)`.
//!
//! The standing hypotheses on an oscillation profile are: period 1, even,
//! and Lipschitz with `sup |W'| = 1`. The mean over one period is recorded as
//! metadata; normalizing it to zero would only shift energies by a constant,
//! so nothing downstream requires it. Built-in profiles satisfy the
//! hypotheses by construction (except the degenerate `zero` profile, which
//! validation flags); tabulated profiles are whatever the data says, and
//! `validate_potential` reports each hypothesis separately.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::simpson;

const TWO_PI: f64 = std::f64::consts::TAU;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    PiecewiseQuadratic,
    NormalizedCosine,
    Zero,
    Tabulated,
}

/// A 1-periodic oscillation profile.
///
/// `piecewise_quadratic` is the squared distance to the nearest integer,
/// `cosine` is `-cos(2 pi y) / (2 pi)` (normalized so `sup |W'| = 1`), `zero`
/// is the degenerate flat profile, and `tabulated` interpolates uniform
/// samples over one closed period with a monotone cubic.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicPotential {
    kind: PotentialKind,
    table: Option<CubicTable>,
    lipschitz_bound: f64,
    mean: f64,
}

impl PeriodicPotential {
    pub fn piecewise_quadratic() -> Self {
        // Mean of dist(y, Z)^2 over one period: 2 * \int_0^{1/2} y^2 dy.
        Self {
            kind: PotentialKind::PiecewiseQuadratic,
            table: None,
            lipschitz_bound: 1.0,
            mean: 1.0 / 12.0,
        }
    }

    pub fn cosine() -> Self {
        Self { kind: PotentialKind::NormalizedCosine, table: None, lipschitz_bound: 1.0, mean: 0.0 }
    }

    pub fn zero() -> Self {
        Self { kind: PotentialKind::Zero, table: None, lipschitz_bound: 0.0, mean: 0.0 }
    }

    /// Builds a profile from uniform samples over one closed period: sample
    /// `j` sits at `y = j / (values.len() - 1)`, so the first and last samples
    /// both describe the seam. A seam mismatch is kept (and later flagged by
    /// validation) rather than silently repaired.
    pub fn tabulated(values: Vec<f64>) -> Result<Self, PotentialError> {
        if values.len() < 8 {
            return Err(PotentialError::InvalidInput(format!(
                "tabulated profile needs at least 8 samples, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PotentialError::InvalidInput("tabulated samples must be finite".into()));
        }
        let table = CubicTable::new(values);
        let bound = table.derivative_sup_estimate();
        let mean = table.mean_estimate();
        Ok(Self {
            kind: PotentialKind::Tabulated,
            table: Some(table),
            // Safety factor: the sup is estimated by sampling, and the prox
            // window logic needs an upper bound, not an estimate. Window
            // expansion catches the (unlikely) remaining underestimate.
            lipschitz_bound: bound * 1.25 + 1e-6,
            mean,
        })
    }

    /// Resolves the CLI-facing names: `pwq`, `cosine`, `zero`.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "pwq" => Some(Self::piecewise_quadratic()),
            "cosine" => Some(Self::cosine()),
            "zero" => Some(Self::zero()),
            _ => None,
        }
    }

    /// Parses the JSON form `{"kind": "...", "values": [...]}`; `values` is
    /// required for (and only for) `kind = "tabulated"`.
    pub fn from_json(text: &str) -> Result<Self, PotentialError> {
        #[derive(Deserialize)]
        struct Spec {
            kind: String,
            #[serde(default)]
            values: Option<Vec<f64>>,
        }
        let spec: Spec = serde_json::from_str(text)
            .map_err(|e| PotentialError::InvalidInput(format!("bad potential JSON: {e}")))?;
        match spec.kind.as_str() {
            "tabulated" => {
                let values = spec.values.ok_or_else(|| {
                    PotentialError::InvalidInput("tabulated potential needs \"values\"".into())
                })?;
                Self::tabulated(values)
            }
            name => Self::by_name(name).ok_or_else(|| {
                PotentialError::InvalidInput(format!("unknown potential kind {name:?}"))
            }),
        }
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    /// Upper bound on `sup |W'|`, used to size proximal search windows.
    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    /// Recorded mean of the profile over one period. A nonzero mean is a
    /// harmless normalization offset (it cancels inside every argmin), so it
    /// is carried as metadata rather than subtracted away.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Whether this profile claims the normalization `sup |W'| = 1`.
    /// All built-ins claim it; the flat profile deliberately fails the claim
    /// so that validation flags it as degenerate.
    pub fn claims_unit_slope(&self) -> bool {
        self.kind != PotentialKind::Tabulated
    }

    pub fn value(&self, y: f64) -> f64 {
        match self.kind {
            PotentialKind::PiecewiseQuadratic => {
                let r = y - y.round();
                r * r
            }
            PotentialKind::NormalizedCosine => -(TWO_PI * y).cos() / TWO_PI,
            PotentialKind::Zero => 0.0,
            PotentialKind::Tabulated => {
                self.table.as_ref().expect("tabulated profile has a table").value(y - y.floor())
            }
        }
    }

    pub fn derivative(&self, y: f64) -> f64 {
        match self.kind {
            PotentialKind::PiecewiseQuadratic => 2.0 * (y - y.round()),
            PotentialKind::NormalizedCosine => (TWO_PI * y).sin(),
            PotentialKind::Zero => 0.0,
            PotentialKind::Tabulated => {
                self.table.as_ref().expect("tabulated profile has a table").derivative(y - y.floor())
            }
        }
    }

    /// Seam gap of the sample data (tabulated profiles only): |v_last - v_0|.
    fn seam_gap(&self) -> f64 {
        match &self.table {
            Some(t) => (t.values[t.values.len() - 1] - t.values[0]).abs(),
            None => 0.0,
        }
    }
}

/// Monotone cubic (Fritsch-Carlson) interpolant of uniform samples on [0, 1].
#[derive(Debug, Clone, PartialEq)]
struct CubicTable {
    values: Vec<f64>,
    tangents: Vec<f64>,
}

impl CubicTable {
    fn new(values: Vec<f64>) -> Self {
        let n = values.len() - 1; // intervals
        let h = 1.0 / n as f64;
        let secants: Vec<f64> = (0..n).map(|j| (values[j + 1] - values[j]) / h).collect();
        let mut tangents = vec![0.0; n + 1];
        let seam_matches = (values[n] - values[0]).abs() <= 1e-12;
        for j in 0..=n {
            let (sl, sr) = if j == 0 {
                (if seam_matches { secants[n - 1] } else { secants[0] }, secants[0])
            } else if j == n {
                (secants[n - 1], if seam_matches { secants[0] } else { secants[n - 1] })
            } else {
                (secants[j - 1], secants[j])
            };
            tangents[j] = if sl * sr <= 0.0 { 0.0 } else { 0.5 * (sl + sr) };
        }
        // Fritsch-Carlson limiting keeps each interval free of overshoot.
        for j in 0..n {
            let s = secants[j];
            if s == 0.0 {
                tangents[j] = 0.0;
                tangents[j + 1] = 0.0;
                continue;
            }
            let a = tangents[j] / s;
            let b = tangents[j + 1] / s;
            let r = a * a + b * b;
            if r > 9.0 {
                let t = 3.0 / r.sqrt();
                tangents[j] = t * a * s;
                tangents[j + 1] = t * b * s;
            }
        }
        Self { values, tangents }
    }

    fn locate(&self, u: f64) -> (usize, f64, f64) {
        let n = self.values.len() - 1;
        let h = 1.0 / n as f64;
        let j = ((u * n as f64).floor() as usize).min(n - 1);
        let t = (u - j as f64 * h) / h;
        (j, t, h)
    }

    fn value(&self, u: f64) -> f64 {
        let (j, t, h) = self.locate(u);
        let (v0, v1) = (self.values[j], self.values[j + 1]);
        let (d0, d1) = (self.tangents[j], self.tangents[j + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        v0 * (2.0 * t3 - 3.0 * t2 + 1.0)
            + v1 * (-2.0 * t3 + 3.0 * t2)
            + h * d0 * (t3 - 2.0 * t2 + t)
            + h * d1 * (t3 - t2)
    }

    fn derivative(&self, u: f64) -> f64 {
        let (j, t, h) = self.locate(u);
        let (v0, v1) = (self.values[j], self.values[j + 1]);
        let (d0, d1) = (self.tangents[j], self.tangents[j + 1]);
        let t2 = t * t;
        (v0 * (6.0 * t2 - 6.0 * t) + v1 * (-6.0 * t2 + 6.0 * t)) / h
            + d0 * (3.0 * t2 - 4.0 * t + 1.0)
            + d1 * (3.0 * t2 - 2.0 * t)
    }

    fn derivative_sup_estimate(&self) -> f64 {
        let mut sup = 0.0f64;
        for i in 0..16384 {
            sup = sup.max(self.derivative(i as f64 / 16384.0).abs());
        }
        for &d in &self.tangents {
            sup = sup.max(d.abs());
        }
        sup
    }

    /// Exact integral of the interpolant over [0, 1]: each Hermite segment
    /// contributes `h * ((v0 + v1)/2 + h * (d0 - d1)/12)`.
    fn mean_estimate(&self) -> f64 {
        let n = self.values.len() - 1;
        let h = 1.0 / n as f64;
        let mut total = 0.0;
        for j in 0..n {
            total += h
                * (0.5 * (self.values[j] + self.values[j + 1])
                    + h * (self.tangents[j] - self.tangents[j + 1]) / 12.0);
        }
        total
    }
}

/// A strictly convex drive with `h(0) = 0` and minimum at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConvexDrive {
    /// `h(x) = x^2 / 2`.
    Quadratic,
    /// `h(x) = sum_k coeffs[k] * x^k`, validated for convexity on a sample box.
    Polynomial { coeffs: Vec<f64> },
}

impl ConvexDrive {
    pub fn quadratic() -> Self {
        ConvexDrive::Quadratic
    }

    /// Builds a polynomial drive, checking `h(0) = 0`, `h'(0) = 0`, `h >= 0`,
    /// and strict monotonicity of `h'` on a dense grid over [-16, 16].
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self, PotentialError> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(PotentialError::InvalidInput("polynomial coefficients must be finite and nonempty".into()));
        }
        let d = ConvexDrive::Polynomial { coeffs: coeffs.clone() };
        if d.value(0.0).abs() > 1e-12 || d.derivative(0.0).abs() > 1e-12 {
            return Err(PotentialError::InvalidInput("drive must have a critical zero at the origin".into()));
        }
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=4096 {
            let x = -16.0 + 32.0 * i as f64 / 4096.0;
            if d.value(x) < -1e-12 {
                return Err(PotentialError::InvalidInput(format!("drive is negative at x = {x}")));
            }
            let dp = d.derivative(x);
            if dp <= prev {
                return Err(PotentialError::InvalidInput(format!(
                    "drive derivative is not strictly increasing near x = {x}"
                )));
            }
            prev = dp;
        }
        Ok(d)
    }

    /// Resolves `quadratic` or `poly:c0,c1,c2,...` (ascending powers).
    pub fn by_name(name: &str) -> Result<Self, PotentialError> {
        if name == "quadratic" {
            return Ok(Self::quadratic());
        }
        if let Some(list) = name.strip_prefix("poly:") {
            let coeffs: Result<Vec<f64>, _> = list.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let coeffs = coeffs
                .map_err(|e| PotentialError::InvalidInput(format!("bad coefficient in {name:?}: {e}")))?;
            return Self::polynomial(coeffs);
        }
        Err(PotentialError::InvalidInput(format!("unknown drive {name:?}")))
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            ConvexDrive::Quadratic => 0.5 * x * x,
            ConvexDrive::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for &c in coeffs.iter().rev() {
                    acc = acc * x + c;
                }
                acc
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            ConvexDrive::Quadratic => x,
            ConvexDrive::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for (k, &c) in coeffs.iter().enumerate().skip(1).rev() {
                    acc = acc * x + k as f64 * c;
                }
                acc
            }
        }
    }

    /// Curvature when the drive is exactly quadratic; `None` otherwise.
    /// Lets the proximal solver take the closed-form per-cell path.
    pub(crate) fn quadratic_curvature(&self) -> Option<f64> {
        match self {
            ConvexDrive::Quadratic => Some(1.0),
            ConvexDrive::Polynomial { .. } => None,
        }
    }

    /// Bound on `|h'|` over `[lo, hi]`; valid because `h'` is increasing.
    pub(crate) fn derivative_bound(&self, lo: f64, hi: f64) -> f64 {
        self.derivative(lo).abs().max(self.derivative(hi).abs())
    }
}

/// `E(x) = h(x) + eps * W(x / eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatingEnergy {
    pub drive: ConvexDrive,
    pub oscillation: PeriodicPotential,
    pub epsilon: f64,
}

impl OscillatingEnergy {
    pub fn new(
        drive: ConvexDrive,
        oscillation: PeriodicPotential,
        epsilon: f64,
    ) -> Result<Self, PotentialError> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(PotentialError::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self { drive, oscillation, epsilon })
    }

    pub fn value(&self, x: f64) -> f64 {
        self.drive.value(x) + self.epsilon * self.oscillation.value(x / self.epsilon)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.drive.derivative(x) + self.oscillation.derivative(x / self.epsilon)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub kind: PotentialKind,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

/// Checks the standing hypotheses on an oscillation profile and reports the
/// worst residual per check. Violations are reported, not thrown: degenerate
/// profiles are still usable, the report just says what they break.
///
/// Checks: 1-periodicity (including the sample seam for tabulated data),
/// evenness, agreement of the one-period mean with the recorded metadata
/// (composite Simpson, 2^10 panels), and the slope normalization
/// `sup |W'| = 1` for profiles that claim it (recorded-Lipschitz-bound
/// consistency otherwise).
pub fn validate_potential(
    w: &PeriodicPotential,
    samples: usize,
) -> Result<ValidationReport, PotentialError> {
    if samples < 16 {
        return Err(PotentialError::InvalidInput(format!(
            "need at least 16 validation samples, got {samples}"
        )));
    }
    let mut checks = Vec::new();

    let grid = |i: usize| -3.0 + 6.0 * i as f64 / (samples - 1) as f64;

    let mut periodicity = w.seam_gap();
    for i in 0..samples {
        let y = grid(i);
        periodicity = periodicity.max((w.value(y + 1.0) - w.value(y)).abs());
    }
    checks.push(CheckResult {
        name: "periodicity",
        passed: periodicity <= 1e-12,
        residual: periodicity,
        tolerance: 1e-12,
    });

    let mut evenness = 0.0f64;
    for i in 0..samples {
        let y = grid(i);
        evenness = evenness.max((w.value(y) - w.value(-y)).abs());
    }
    checks.push(CheckResult {
        name: "evenness",
        passed: evenness <= 1e-12,
        residual: evenness,
        tolerance: 1e-12,
    });

    // A nonzero mean is a pure normalization offset (constants cancel in
    // every argmin), so the check is consistency of the quadrature mean with
    // the recorded metadata, not literal zero-ness.
    let mean = (simpson(|y| w.value(y), 0.0, 1.0, 1 << 10) - w.mean()).abs();
    checks.push(CheckResult { name: "mean", passed: mean <= 1e-8, residual: mean, tolerance: 1e-8 });

    let dense = samples.max(4096);
    let mut sup = 0.0f64;
    for i in 0..dense {
        let y = i as f64 / dense as f64;
        sup = sup.max(w.derivative(y).abs());
    }
    if w.claims_unit_slope() {
        let residual = (sup - 1.0).abs();
        checks.push(CheckResult {
            name: "unit_slope",
            passed: residual <= 1e-3,
            residual,
            tolerance: 1e-3,
        });
    } else {
        let bound = w.lipschitz_bound();
        let excess = (sup - bound).max(0.0);
        checks.push(CheckResult {
            name: "slope_within_recorded_bound",
            passed: excess <= 1e-9,
            residual: excess,
            tolerance: 1e-9,
        });
    }

    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport { kind: w.kind(), checks, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pwq_values() {
        let w = PeriodicPotential::piecewise_quadratic();
        assert!((w.value(1.3) - 0.09).abs() < 1e-15);
        assert_eq!(w.value(0.0), 0.0);
        assert_eq!(w.value(0.5), 0.25);
        assert!((w.derivative(0.25) - 0.5).abs() < 1e-15);
        assert!((w.derivative(-0.25) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn cosine_values() {
        let w = PeriodicPotential::cosine();
        assert!((w.value(0.0) + 1.0 / TWO_PI).abs() < 1e-15);
        assert!(w.value(0.25).abs() < 1e-16);
        assert!((w.derivative(0.25) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn builtins_satisfy_hypotheses() {
        for w in [PeriodicPotential::piecewise_quadratic(), PeriodicPotential::cosine()] {
            let report = validate_potential(&w, 4096).unwrap();
            assert!(report.passed, "{report:?}");
        }
        assert!((PeriodicPotential::piecewise_quadratic().mean() - 1.0 / 12.0).abs() < 1e-15);
        let cosine = validate_potential(&PeriodicPotential::cosine(), 4096).unwrap();
        let mean = cosine.checks.iter().find(|c| c.name == "mean").unwrap();
        assert!(mean.residual <= 1e-8);
    }

    #[test]
    fn zero_profile_is_flagged() {
        let report = validate_potential(&PeriodicPotential::zero(), 1024).unwrap();
        assert!(!report.passed);
        let slope = report.checks.iter().find(|c| c.name == "unit_slope").unwrap();
        assert!(!slope.passed);
        assert!(report.checks.iter().filter(|c| c.name != "unit_slope").all(|c| c.passed));
    }

    #[test]
    fn sawtooth_fails_periodicity() {
        // W(y) = y sampled over the closed period: the seam jumps by 1.
        let vals: Vec<f64> = (0..=64).map(|j| j as f64 / 64.0).collect();
        let w = PeriodicPotential::tabulated(vals).unwrap();
        let report = validate_potential(&w, 1024).unwrap();
        let per = report.checks.iter().find(|c| c.name == "periodicity").unwrap();
        assert!(!per.passed);
        assert!((per.residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tabulated_cosine_matches_analytic() {
        let vals: Vec<f64> = (0..=256).map(|j| -((TWO_PI * j as f64 / 256.0).cos()) / TWO_PI).collect();
        let w = PeriodicPotential::tabulated(vals).unwrap();
        let exact = PeriodicPotential::cosine();
        for i in 0..1000 {
            let y = -2.0 + 4.0 * i as f64 / 1000.0;
            assert!((w.value(y) - exact.value(y)).abs() < 1e-4, "value mismatch at {y}");
            assert!((w.derivative(y) - exact.derivative(y)).abs() < 1e-2, "slope mismatch at {y}");
        }
        let report = validate_potential(&w, 2048).unwrap();
        let per = report.checks.iter().find(|c| c.name == "periodicity").unwrap();
        assert!(per.passed, "{per:?}");
    }

    #[test]
    fn tabulated_needs_enough_samples() {
        assert!(PeriodicPotential::tabulated(vec![0.0; 4]).is_err());
    }

    #[test]
    fn drive_polynomial_validation() {
        // x^2/2 + x^4/4 is admissible.
        assert!(ConvexDrive::polynomial(vec![0.0, 0.0, 0.5, 0.0, 0.25]).is_ok());
        // x^3 is not convex.
        assert!(ConvexDrive::polynomial(vec![0.0, 0.0, 0.0, 1.0]).is_err());
        // constant offset breaks h(0) = 0.
        assert!(ConvexDrive::polynomial(vec![1.0, 0.0, 0.5]).is_err());
    }

    #[test]
    fn drive_by_name() {
        let q = ConvexDrive::by_name("quadratic").unwrap();
        assert_eq!(q.value(2.0), 2.0);
        let p = ConvexDrive::by_name("poly:0,0,0.5,0,0.25").unwrap();
        assert!((p.value(1.0) - 0.75).abs() < 1e-15);
        assert!(ConvexDrive::by_name("cubic").is_err());
    }

    #[test]
    fn energy_combines_drive_and_oscillation() {
        let e = OscillatingEnergy::new(
            ConvexDrive::quadratic(),
            PeriodicPotential::piecewise_quadratic(),
            0.1,
        )
        .unwrap();
        // E(0.13) = 0.13^2/2 + 0.1 * W(1.3) = 0.00845 + 0.009
        assert!((e.value(0.13) - 0.01745).abs() < 1e-15);
        assert!((e.derivative(0.13) - (0.13 + 0.6)).abs() < 1e-12);
        assert!(OscillatingEnergy::new(
            ConvexDrive::quadratic(),
            PeriodicPotential::zero(),
            0.0
        )
        .is_err());
    }

    #[test]
    fn potential_json_roundtrip() {
        let w = PeriodicPotential::from_json(r#"{"kind": "pwq"}"#).unwrap();
        assert_eq!(w.kind(), PotentialKind::PiecewiseQuadratic);
        let t = PeriodicPotential::from_json(
            r#"{"kind": "tabulated", "values": [0.0, 0.1, 0.3, 0.4, 0.3, 0.1, 0.05, 0.02, 0.0]}"#,
        )
        .unwrap();
        assert_eq!(t.kind(), PotentialKind::Tabulated);
        assert!(PeriodicPotential::from_json(r#"{"kind": "tabulated"}"#).is_err());
        assert!(PeriodicPotential::from_json(r#"{"kind": "sine"}"#).is_err());
    }
}
