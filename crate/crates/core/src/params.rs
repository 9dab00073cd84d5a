//! Tunable constants shared by the algorithms.

use crate::error::{Error, Result};

/// Constants for the randomized set-family constructions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FamilyConstants {
    /// Multiplier for the RUFF set size `d`.
    pub c_d: f64,
    /// Multiplier for the RUFF alphabet size `m`.
    pub c_m: f64,
    /// Multiplier for the CFF alphabet size.
    pub c_c: f64,
}

impl Default for FamilyConstants {
    fn default() -> Self {
        Self {
            c_d: 8.0,
            c_m: 16.0,
            c_c: 3.0 * std::f64::consts::E,
        }
    }
}

/// Everything an algorithm run may be configured with.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgoConfig {
    pub families: FamilyConstants,
    /// Gaussian-query multiplier in `ceil(c_g * k / eps * ln(k / eps + e))`.
    pub c_g: f64,
    /// Multiplier applied to every batchsize.
    pub batch_slack: f64,
    /// Total failure probability split across the count estimates of a phase.
    pub failure_budget: f64,
    /// Re-seeds of a set family after a construction failure.
    pub max_reseeds: usize,
    /// Membership-check cap for the exhaustive verifiers.
    pub verify_cap: u128,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        Self {
            families: FamilyConstants::default(),
            c_g: 40.0,
            batch_slack: 1.0,
            failure_budget: 0.01,
            max_reseeds: 3,
            verify_cap: 50_000_000,
        }
    }
}

impl AlgoConfig {
    pub fn validate(&self) -> Result<()> {
        let f = &self.families;
        for (name, v) in [
            ("c_d", f.c_d),
            ("c_m", f.c_m),
            ("c_c", f.c_c),
            ("c_g", self.c_g),
            ("batch_slack", self.batch_slack),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.failure_budget > 0.0 && self.failure_budget < 1.0) {
            return Err(Error::Config(format!(
                "failure_budget must lie in (0,1), got {}",
                self.failure_budget
            )));
        }
        Ok(())
    }

    /// Smallest batchsize meeting this config's failure budget for `universe`
    /// count estimates.
    pub fn batch(&self, ell: usize, universe: usize) -> usize {
        crate::oracle::default_batchsize_with_slack(
            ell,
            self.failure_budget,
            universe.max(1),
            self.batch_slack,
        )
    }

    /// Number of Gaussian labels per component for target accuracy `epsilon`.
    pub fn gaussian_labels(&self, k: usize, epsilon: f64) -> usize {
        let r = k as f64 / epsilon;
        (self.c_g * r * (r + std::f64::consts::E).ln()).ceil() as usize
    }
}
