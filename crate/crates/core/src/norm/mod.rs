//! Norms as gauge oracles and the boundary geometry built on them.
//!
//! A norm on `R^d` is represented by its gauge `x -> ||x||_B`, the smallest
//! `r >= 0` with `x` in `r B`. Closed-form norms evaluate the gauge directly;
//! bodies described by a membership test go through [`radial_gauge`].

mod chord;
mod kinds;
mod probe;
mod spec;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use chord::{chord_scalar, is_shadow_boundary, ChordResult};
pub use kinds::{radial_gauge, Ellipsoid, EvenPerturbation, Lp, PerturbedGauge, Table, TableTerm};
pub use probe::{require_strictly_convex, strict_convexity_probe, ConvexityVerdict};
pub use spec::{Exponent, NormSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("input vector has a non-finite coordinate")]
    NonFinite,
    #[error("expected a vector of dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("the zero vector has no boundary normalization")]
    ZeroVector,
    #[error("point is not on the unit sphere (|gauge - 1| = {residual:e})")]
    NotOnBoundary { residual: f64 },
    #[error("norm is not strictly convex: the boundary contains a segment of length {length:e}")]
    NotStrictlyConvex { length: f64 },
    #[error("chord root could not be bracketed; the oracle does not behave like a norm")]
    BracketFailure,
    #[error("invalid norm specification: {0}")]
    InvalidSpec(String),
}

/// Evaluation interface implemented by every concrete norm.
///
/// Implementations must be positively homogeneous, even and convex; none of
/// this is checked here.
pub trait Gauge: Send + Sync {
    fn dim(&self) -> usize;

    /// Gauge of `x`. Callers pass a finite vector of length `dim()`.
    fn gauge(&self, x: &[f64]) -> f64;

    /// Analytic gradient, if the implementation has one.
    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Whether the unit sphere is expected to be smooth.
    fn smooth(&self) -> bool {
        true
    }
}

/// Shared, immutable handle on a gauge with a display name.
#[derive(Clone)]
pub struct NormOracle {
    name: String,
    inner: Arc<dyn Gauge>,
}

impl fmt::Debug for NormOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NormOracle")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .finish()
    }
}

impl NormOracle {
    pub fn new<G: Gauge + 'static>(name: impl Into<String>, gauge: G) -> Self {
        NormOracle {
            name: name.into(),
            inner: Arc::new(gauge),
        }
    }

    pub fn from_arc(name: impl Into<String>, gauge: Arc<dyn Gauge>) -> Self {
        NormOracle {
            name: name.into(),
            inner: gauge,
        }
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::lp(dim, 2.0)
    }

    /// `l^p` norm; `p = f64::INFINITY` gives the max norm.
    pub fn lp(dim: usize, p: f64) -> Self {
        let lp = Lp::new(dim, p).expect("p must be at least 1");
        NormOracle::new(Exponent(p).label("lp"), lp)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn smooth(&self) -> bool {
        self.inner.smooth()
    }

    /// Unchecked gauge evaluation for hot loops.
    #[inline]
    pub fn gauge(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        self.inner.gauge(x)
    }

    pub fn grad_hint(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.inner.gradient(x)
    }

    pub fn inner(&self) -> &Arc<dyn Gauge> {
        &self.inner
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<(), NormError> {
        if x.len() != self.dim() {
            return Err(NormError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(NormError::NonFinite);
        }
        Ok(())
    }
}

/// Checked gauge evaluation.
pub fn gauge_eval(norm: &NormOracle, x: &[f64]) -> Result<f64, NormError> {
    norm.check_input(x)?;
    Ok(norm.gauge(x))
}

/// A point on (or numerically near) the unit sphere `dB`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryPoint {
    coords: Vec<f64>,
    residual: f64,
}

impl BoundaryPoint {
    /// Wraps `coords` without rescaling; the residual is measured against `norm`.
    pub fn new(norm: &NormOracle, coords: Vec<f64>) -> Result<Self, NormError> {
        norm.check_input(&coords)?;
        let residual = (norm.gauge(&coords) - 1.0).abs();
        Ok(BoundaryPoint { coords, residual })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn negated(&self) -> BoundaryPoint {
        BoundaryPoint {
            coords: self.coords.iter().map(|v| -v).collect(),
            residual: self.residual,
        }
    }
}

/// Radial normalization `x / ||x||_B`.
pub fn boundary_point(norm: &NormOracle, x: &[f64]) -> Result<BoundaryPoint, NormError> {
    norm.check_input(x)?;
    let g = norm.gauge(x);
    if g == 0.0 {
        return Err(NormError::ZeroVector);
    }
    BoundaryPoint::new(norm, x.iter().map(|v| v / g).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_gauge_of_three_four() {
        let n = NormOracle::euclidean(2);
        assert_eq!(gauge_eval(&n, &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(gauge_eval(&n, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn gauge_rejects_bad_input() {
        let n = NormOracle::euclidean(2);
        assert_eq!(gauge_eval(&n, &[f64::NAN, 1.0]), Err(NormError::NonFinite));
        assert_eq!(gauge_eval(&n, &[1.0, f64::INFINITY]), Err(NormError::NonFinite));
        assert!(matches!(
            gauge_eval(&n, &[1.0]),
            Err(NormError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn boundary_point_examples() {
        let e = NormOracle::euclidean(2);
        let b = boundary_point(&e, &[3.0, 4.0]).unwrap();
        assert!((b.coords()[0] - 0.6).abs() < 1e-15 && (b.coords()[1] - 0.8).abs() < 1e-15);

        let l1 = NormOracle::lp(2, 1.0);
        let b = boundary_point(&l1, &[2.0, 0.0]).unwrap();
        assert_eq!(b.coords(), &[1.0, 0.0]);

        // (1,1) / (1 + 1)^(1/4)
        let l4 = NormOracle::lp(2, 4.0);
        let b = boundary_point(&l4, &[1.0, 1.0]).unwrap();
        let expected = 2f64.powf(-0.25);
        assert!((b.coords()[0] - expected).abs() < 1e-15);
        assert!((b.coords()[0] - 0.840896).abs() < 1e-6);
        assert!(b.residual() < 1e-15);

        assert_eq!(boundary_point(&e, &[0.0, 0.0]), Err(NormError::ZeroVector));
    }
}
