use serde::{Deserialize, Serialize};

/// Numerical thresholds shared by every module.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Deduplication radius for point sets (Euclidean).
    pub tau: f64,
    /// Allowed `|gauge - 1|` for points certified to lie on the unit sphere.
    pub eps_bnd: f64,
    /// Allowed `|gauge(x - y) - 1|` in the brute-force pair counter.
    pub eps_unit: f64,
    /// Chords shorter than this (in units of `w`) count as tangent.
    pub tau_tan: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tau: 1e-9,
            eps_bnd: 1e-11,
            eps_unit: 1e-9,
            tau_tan: 1e-7,
        }
    }
}
