//! Numerical tolerances, loadable from a single JSON document.
//!
//! Every field has a default; a config file only needs to list overrides.

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative clipping window for PSD square roots and membership tests.
    pub psd: f64,
    /// Relative threshold above which an eigenvalue of α(T*,T) counts
    /// towards the defect rank.
    pub defect_rank: f64,
    /// Convergence tolerance for the limit gramians.
    pub gramian: f64,
    /// Repeated-squaring cap for the limit gramians.
    pub max_doublings: usize,
    /// Window size used for series, output coefficients and intertwining.
    pub window: usize,
    /// Normality threshold `‖T*T − TT*‖₂` for zero-defect operators.
    pub normality: f64,
    /// Modulus tolerance for eigenvalues of zero-defect operators.
    pub modulus: f64,
    /// Relative tolerance for the discrete concavity test.
    pub concavity: f64,
    /// Points per boundary circle for sup-norm sampling.
    pub boundary_samples: usize,
    /// Doubling stops once the sampled sup changes by less than this.
    pub boundary_refine: f64,
    /// Minimum distance between a pole and the closed annulus.
    pub pole_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            psd: 1e-10,
            defect_rank: 1e-10,
            gramian: 1e-9,
            max_doublings: 60,
            window: 64,
            normality: 1e-7,
            modulus: 1e-7,
            concavity: 1e-10,
            boundary_samples: 4096,
            boundary_refine: 1e-8,
            pole_margin: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tolerances serialize")
    }
}
