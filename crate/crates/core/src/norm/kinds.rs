//! Concrete gauges.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Gauge, NormError};
use crate::vecops::norm2;

/// `l^p` norm for `1 <= p <= inf`.
#[derive(Clone, Debug)]
pub struct Lp {
    dim: usize,
    p: f64,
}

impl Lp {
    pub fn new(dim: usize, p: f64) -> Result<Self, NormError> {
        if dim == 0 {
            return Err(NormError::InvalidSpec("dimension must be positive".into()));
        }
        if !(p >= 1.0) {
            return Err(NormError::InvalidSpec(format!("l^p needs p >= 1, got {p}")));
        }
        Ok(Lp { dim, p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

impl Gauge for Lp {
    fn dim(&self) -> usize {
        self.dim
    }

    fn gauge(&self, x: &[f64]) -> f64 {
        let p = self.p;
        if p == 1.0 {
            x.iter().map(|v| v.abs()).sum()
        } else if p == 2.0 {
            x.iter().map(|v| v * v).sum::<f64>().sqrt()
        } else if p.is_infinite() {
            x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
        } else {
            let m = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if m == 0.0 {
                return 0.0;
            }
            m * x.iter().map(|v| (v.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
        }
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        if self.p == 1.0 || self.p.is_infinite() {
            return None;
        }
        let g = self.gauge(x);
        if g == 0.0 {
            return None;
        }
        Some(
            x.iter()
                .map(|v| v.signum() * (v.abs() / g).powf(self.p - 1.0))
                .collect(),
        )
    }

    fn smooth(&self) -> bool {
        self.p > 1.0 && self.p.is_finite()
    }
}

/// `sqrt(x^T A x)` for a symmetric positive definite `A`.
#[derive(Clone, Debug)]
pub struct Ellipsoid {
    matrix: DMatrix<f64>,
}

impl Ellipsoid {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self, NormError> {
        let d = rows.len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(NormError::InvalidSpec("ellipsoid matrix must be square and non-empty".into()));
        }
        let m = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
        if (0..d).any(|i| (0..d).any(|j| m[(i, j)] != m[(j, i)])) {
            return Err(NormError::InvalidSpec("ellipsoid matrix must be symmetric".into()));
        }
        if m.clone().cholesky().is_none() {
            return Err(NormError::InvalidSpec("ellipsoid matrix must be positive definite".into()));
        }
        Ok(Ellipsoid { matrix: m })
    }
}

impl Gauge for Ellipsoid {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn gauge(&self, x: &[f64]) -> f64 {
        let d = x.len();
        let mut q = 0.0;
        for i in 0..d {
            for j in 0..d {
                q += x[i] * self.matrix[(i, j)] * x[j];
            }
        }
        q.max(0.0).sqrt()
    }
}

/// Smooth even function on the Euclidean unit sphere with `|psi| <= 1`.
///
/// `psi(u) = sum_{i<=j} a_ij u_i u_j + sum_{i<=j} b_ij u_i^2 u_j^2` with
/// seeded coefficients scaled so that `sum |a| + sum |b| = 1`. Both families
/// are restrictions of even polynomials, so `psi(-u) == psi(u)` bit for bit.
#[derive(Clone, Debug)]
pub struct EvenPerturbation {
    dim: usize,
    quadratic: Vec<(usize, usize, f64)>,
    quartic: Vec<(usize, usize, f64)>,
}

impl EvenPerturbation {
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut quadratic = Vec::new();
        let mut quartic = Vec::new();
        for i in 0..dim {
            for j in i..dim {
                quadratic.push((i, j, rng.random_range(-1.0_f64..1.0)));
                quartic.push((i, j, rng.random_range(-1.0_f64..1.0)));
            }
        }
        let total: f64 = quadratic.iter().chain(&quartic).map(|t| t.2.abs()).sum();
        for t in quadratic.iter_mut().chain(quartic.iter_mut()) {
            t.2 /= total;
        }
        EvenPerturbation {
            dim,
            quadratic,
            quartic,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Evaluates at `x / |x|_2`; returns 0 at the origin.
    pub fn eval_direction(&self, x: &[f64]) -> f64 {
        let len = norm2(x);
        if len == 0.0 {
            return 0.0;
        }
        let u: Vec<f64> = x.iter().map(|v| v / len).collect();
        let quad: f64 = self.quadratic.iter().map(|&(i, j, c)| c * u[i] * u[j]).sum();
        let quart: f64 = self
            .quartic
            .iter()
            .map(|&(i, j, c)| c * (u[i] * u[i]) * (u[j] * u[j]))
            .sum();
        quad + quart
    }
}

/// `gauge'(x) = gauge(x) * (1 + delta * psi(x / |x|_2))`.
#[derive(Clone)]
pub struct PerturbedGauge {
    base: Arc<dyn Gauge>,
    delta: f64,
    psi: EvenPerturbation,
}

impl PerturbedGauge {
    pub fn new(base: Arc<dyn Gauge>, delta: f64, psi: EvenPerturbation) -> Result<Self, NormError> {
        if psi.dim() != base.dim() {
            return Err(NormError::InvalidSpec("perturbation dimension mismatch".into()));
        }
        if !(0.0..1.0).contains(&delta.abs()) {
            return Err(NormError::InvalidSpec(format!(
                "perturbation size must satisfy |delta| < 1, got {delta}"
            )));
        }
        Ok(PerturbedGauge { base, delta, psi })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl Gauge for PerturbedGauge {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn gauge(&self, x: &[f64]) -> f64 {
        let g = self.base.gauge(x);
        if g == 0.0 {
            return 0.0;
        }
        g * (1.0 + self.delta * self.psi.eval_direction(x))
    }

    fn smooth(&self) -> bool {
        self.base.smooth()
    }
}

/// One term `w * |<a, x>|^p` of a [`Table`] body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableTerm {
    pub a: Vec<f64>,
    pub p: f64,
    #[serde(default = "one")]
    pub w: f64,
}

fn one() -> f64 {
    1.0
}

/// Unit ball `{x : sum_k w_k |<a_k, x>|^{p_k} <= 1}`.
///
/// With mixed exponents the gauge has no closed form and is resolved by
/// radial bisection.
#[derive(Clone, Debug)]
pub struct Table {
    dim: usize,
    terms: Vec<TableTerm>,
}

impl Table {
    pub fn new(terms: Vec<TableTerm>) -> Result<Self, NormError> {
        let dim = terms.first().map(|t| t.a.len()).unwrap_or(0);
        if dim == 0 {
            return Err(NormError::InvalidSpec("table norm needs at least one term".into()));
        }
        for t in &terms {
            if t.a.len() != dim {
                return Err(NormError::InvalidSpec("table terms have mixed dimensions".into()));
            }
            if !(t.p >= 1.0) || !t.p.is_finite() {
                return Err(NormError::InvalidSpec(format!("table exponent must be finite and >= 1, got {}", t.p)));
            }
            if !(t.w > 0.0) || !t.w.is_finite() {
                return Err(NormError::InvalidSpec(format!("table weight must be positive, got {}", t.w)));
            }
        }
        let a = DMatrix::from_fn(terms.len(), dim, |i, j| terms[i].a[j]);
        if a.rank(1e-12) < dim {
            return Err(NormError::InvalidSpec(
                "table directions must span the space (otherwise the body is unbounded)".into(),
            ));
        }
        Ok(Table { dim, terms })
    }

    fn level(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let s: f64 = t.a.iter().zip(x).map(|(a, v)| a * v).sum();
                t.w * s.abs().powf(t.p)
            })
            .sum()
    }
}

impl Gauge for Table {
    fn dim(&self) -> usize {
        self.dim
    }

    fn gauge(&self, x: &[f64]) -> f64 {
        radial_gauge(x, |z| self.level(z) <= 1.0)
    }

    fn smooth(&self) -> bool {
        self.terms.iter().all(|t| t.p > 1.0)
    }
}

/// Gauge of a star-shaped body from its membership test.
///
/// Brackets `r` with `x / r` outside and inside by doubling and halving from
/// `|x|_2`, then bisects until the bracket endpoints are adjacent floats
/// (well below the `1e-13` absolute target for gauges of moderate size).
pub fn radial_gauge<F: Fn(&[f64]) -> bool>(x: &[f64], inside: F) -> f64 {
    let len = norm2(x);
    if len == 0.0 {
        return 0.0;
    }
    let mut buf = vec![0.0; x.len()];
    let mut contains = |r: f64| {
        for (b, v) in buf.iter_mut().zip(x) {
            *b = v / r;
        }
        inside(&buf)
    };
    let mut hi = len;
    let mut guard = 0;
    while !contains(hi) {
        hi *= 2.0;
        guard += 1;
        if guard > 2100 {
            return f64::INFINITY;
        }
    }
    let mut lo = hi * 0.5;
    guard = 0;
    while contains(lo) {
        hi = lo;
        lo *= 0.5;
        guard += 1;
        if guard > 2100 {
            return 0.0;
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if contains(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
