//! Run configuration shared by the CLI and the verifier.
//!
//! Read from a single JSON document in which every field is optional;
//! command-line flags override file values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::SpaceParams;

/// Tolerances for each family of checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub isospectral: f64,
    pub kappa: f64,
    pub volume: f64,
    pub intertwining: f64,
    pub vertical_metric: f64,
    pub orbit_gram: f64,
    pub area: f64,
    pub angle: f64,
    pub dkappa: f64,
    pub curvature: f64,
    pub curvature_components: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            isospectral: 1e-8,
            kappa: 1e-11,
            volume: 1e-9,
            intertwining: 1e-8,
            vertical_metric: 1e-10,
            orbit_gram: 1e-9,
            area: 1e-10,
            angle: 1e-10,
            dkappa: 1e-5,
            curvature: 1e-5,
            curvature_components: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("angle", self.angle),
            ("area", self.area),
            ("curvature", self.curvature),
            ("curvature_components", self.curvature_components),
            ("dkappa", self.dkappa),
            ("intertwining", self.intertwining),
            ("isospectral", self.isospectral),
            ("kappa", self.kappa),
            ("orbit_gram", self.orbit_gram),
            ("vertical_metric", self.vertical_metric),
            ("volume", self.volume),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Sphere dimension parameter; `None` means `m + 1` for the j-maps at hand
    /// (or 4 when there are none).
    pub n: Option<usize>,
    pub p: u32,
    pub q: u32,
    pub seed: u64,
    pub samples: usize,
    pub mu_range: i64,
    pub tolerances: Tolerances,
    pub output_path: Option<String>,
    /// Finite-difference step for exterior derivatives.
    pub fd_step: f64,
    /// `a` of the stratum `|v1| = |v2| = a` used by the differential checks.
    pub stratum_a: f64,
    /// Recorded verbatim in report metadata.
    pub timestamp: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: None,
            p: 1,
            q: 1,
            seed: 0,
            samples: 200,
            mu_range: 3,
            tolerances: Tolerances::default(),
            output_path: None,
            fd_step: 1e-3,
            stratum_a: 0.4,
            timestamp: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::SchemaError {
            field: "config".into(),
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        RunConfig::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < 1 {
            return Err(Error::InvalidParameter("samples must be >= 1".into()));
        }
        if self.mu_range < 1 {
            return Err(Error::InvalidParameter("mu_range must be >= 1".into()));
        }
        for (name, tol) in self.tolerances.entries() {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "tolerance `{name}` must be positive, got {tol}"
                )));
            }
        }
        if !(self.fd_step > 0.0 && self.fd_step < 0.1) {
            return Err(Error::InvalidParameter(format!(
                "fd_step must lie in (0, 0.1), got {}",
                self.fd_step
            )));
        }
        if !(self.stratum_a > 0.0 && self.stratum_a < std::f64::consts::FRAC_1_SQRT_2) {
            return Err(Error::InvalidParameter(format!(
                "stratum_a must lie in (0, 1/sqrt(2)), got {}",
                self.stratum_a
            )));
        }
        if let Some(n) = self.n {
            SpaceParams::new(n, self.p, self.q)?;
        } else {
            SpaceParams::new(4, self.p, self.q)?;
        }
        Ok(())
    }

    /// Space parameters, taking `n = m + 1` when `n` is unset.
    pub fn params_for(&self, m: Option<usize>) -> Result<SpaceParams> {
        let n = self.n.unwrap_or_else(|| m.map_or(4, |m| m + 1));
        SpaceParams::new(n, self.p, self.q)
    }
}
