//! Memoization for velocity queries. The limit ODE integrator evaluates
//! `f_gamma` at densely repeated slopes, so repeated exact-parameter queries
//! dominate; a quantized-key map removes them.

use std::collections::HashMap;
use std::sync::RwLock;

use super::velocity::{homogenized_velocity, VelocityEstimate};
use super::HomogenizationError;
use crate::potentials::PeriodicPotential;

/// Keys are `(gamma, T)` quantized at 1e-12; the cache is tied to one
/// oscillation profile and one tolerance by construction (the caller owns
/// it), so neither appears in the key.
pub struct VelocityCache {
    map: RwLock<HashMap<(i64, i64), VelocityEstimate>>,
}

fn quantize(x: f64) -> i64 {
    (x * 1e12).round() as i64
}

impl VelocityCache {
    pub fn new() -> Self {
        Self { map: RwLock::new(HashMap::new()) }
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("velocity cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Returns the cached estimate for `(gamma, t)` or computes and stores
    /// it. Concurrent callers may duplicate the computation; the first
    /// insert wins, so every caller observes one consistent value.
    pub fn get_or_compute(
        &self,
        w: &PeriodicPotential,
        t: f64,
        gamma: f64,
        tol: f64,
    ) -> Result<VelocityEstimate, HomogenizationError> {
        let key = (quantize(gamma), quantize(t));
        if let Some(hit) = self.map.read().expect("velocity cache lock poisoned").get(&key) {
            return Ok(*hit);
        }
        let computed = homogenized_velocity(w, t, gamma, tol, 0.0)?;
        let mut map = self.map.write().expect("velocity cache lock poisoned");
        Ok(*map.entry(key).or_insert(computed))
    }
}

impl Default for VelocityCache {
    fn default() -> Self {
        Self::new()
    }
}
