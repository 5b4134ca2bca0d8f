//! The planar construction.
//!
//! Horizontal slices of a planar unit ball `B` have length `lambda(t)` for
//! `t in [0, h]`, where `h` is the height of `B`. Picking heights `t_i` with
//! `lambda(t_i) = i w / (m + 1)`, `w = lambda(0)`, the left endpoint `p_i` of
//! slice `t_i` and `p_i + i v` with `v = (w / (m + 1)) e1` are both unit
//! vectors.
//!
//! `lambda` is non-increasing on `[0, h]`: the right endpoint `r(t)` is
//! concave and the left endpoint `l(t)` convex, so `lambda = r - l` is
//! concave; central symmetry gives `lambda(-t) = lambda(t)`, so the maximum
//! of the concave function sits at `t = 0`. Heights are therefore found by
//! plain bisection, with a scan-then-bisect fallback if sampled values ever
//! violate monotonicity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::general::{GapSpec, SpecKind};
use crate::norm::{require_strictly_convex, BoundaryPoint, NormError, NormOracle};
use crate::Tolerances;

const MONOTONE_SLACK: f64 = 1e-10;
const HEIGHT_TOL: f64 = 1e-10;
const SCAN_POINTS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Construct2dError {
    #[error("the planar construction needs a norm on R^2, got dimension {0}")]
    NotPlanar(usize),
    #[error("height {t} outside [0, {h}]")]
    OutOfRange { t: f64, h: f64 },
    #[error("m must be positive")]
    EmptyProgression,
    #[error("height search failed for target chord length {target}: best residual {residual:e}")]
    BisectionFailure { target: f64, residual: f64 },
    #[error("heights are not strictly decreasing at index {0}")]
    HeightsNotDecreasing(usize),
    #[error("p_{index} + {index} v has gauge {gauge}, off the unit sphere")]
    UnitCertificateFailed { index: usize, gauge: f64 },
    #[error(transparent)]
    Norm(#[from] NormError),
}

/// Chord lengths of horizontal slices of a planar unit ball.
#[derive(Clone, Debug)]
pub struct ChordProfile {
    norm: NormOracle,
    height: f64,
    top_x: f64,
    width: f64,
    /// Half-width of the ball along e1, used to size bracketing steps.
    reach: f64,
    /// Slices are taken in coordinates rotated by this angle.
    rotation: f64,
}

impl ChordProfile {
    pub fn new(norm: &NormOracle) -> Result<Self, Construct2dError> {
        Self::rotated(norm, 0.0)
    }

    /// Takes slices orthogonal to `(-sin a, cos a)` with chords along `(cos a, sin a)`.
    pub fn rotated(norm: &NormOracle, angle: f64) -> Result<Self, Construct2dError> {
        if norm.dim() != 2 {
            return Err(Construct2dError::NotPlanar(norm.dim()));
        }
        let mut p = ChordProfile {
            norm: norm.clone(),
            height: 0.0,
            top_x: 0.0,
            width: 0.0,
            reach: 0.0,
            rotation: angle,
        };
        p.reach = 1.0 / p.gauge_at(1.0, 0.0);
        let (top_x, height) = p.top_point();
        p.height = height;
        p.top_x = top_x;
        let (l, r) = p.endpoints_unchecked(0.0);
        p.width = r - l;
        Ok(p)
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn norm(&self) -> &NormOracle {
        &self.norm
    }

    /// Maps slice coordinates `(x, t)` to the ambient plane.
    pub fn to_plane(&self, x: f64, t: f64) -> [f64; 2] {
        let (s, c) = self.rotation.sin_cos();
        [c * x - s * t, s * x + c * t]
    }

    fn gauge_at(&self, x: f64, t: f64) -> f64 {
        self.norm.gauge(&self.to_plane(x, t))
    }

    /// Topmost point of the ball, by golden-section maximization of the height
    /// of the boundary point in direction `(cos a, sin a)` over `a in (0, pi)`.
    /// The height is unimodal in `a` because the upper boundary is the graph
    /// of a concave function.
    fn top_point(&self) -> (f64, f64) {
        let y_at = |a: f64| {
            let (s, c) = a.sin_cos();
            let g = self.gauge_at(c, s);
            (c / g, s / g)
        };
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (0.0, std::f64::consts::PI);
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = y_at(c).1;
        let mut fd = y_at(d).1;
        let mut best = if fc >= fd { y_at(c) } else { y_at(d) };
        for _ in 0..200 {
            if b - a <= 1e-15 {
                break;
            }
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = y_at(c).1;
                if fc > best.1 {
                    best = y_at(c);
                }
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = y_at(d).1;
                if fd > best.1 {
                    best = y_at(d);
                }
            }
        }
        best
    }

    /// Left and right endpoints of the slice at height `t`.
    pub fn endpoints(&self, t: f64) -> Result<(f64, f64), Construct2dError> {
        if !(0.0..=self.height).contains(&t) {
            return Err(Construct2dError::OutOfRange { t, h: self.height });
        }
        Ok(self.endpoints_unchecked(t))
    }

    fn endpoints_unchecked(&self, t: f64) -> (f64, f64) {
        // (top_x t / h, t) lies on the segment from the origin to the top point.
        let center = if self.height > 0.0 {
            self.top_x * t / self.height
        } else {
            0.0
        };
        if self.gauge_at(center, t) > 1.0 {
            return (center, center);
        }
        (self.slice_end(center, t, -1.0), self.slice_end(center, t, 1.0))
    }

    fn slice_end(&self, center: f64, t: f64, dir: f64) -> f64 {
        let inside = |x: f64| self.gauge_at(x, t) <= 1.0;
        let mut lo = center;
        let mut step = self.reach;
        let mut hi = center + dir * step;
        while inside(hi) {
            lo = hi;
            step *= 2.0;
            hi = lo + dir * step;
        }
        // Bisect between the inside point `lo` and the outside point `hi`.
        loop {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if inside(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (glo, ghi) = (self.gauge_at(lo, t), self.gauge_at(hi, t));
        if (glo - 1.0).abs() <= (ghi - 1.0).abs() {
            lo
        } else {
            hi
        }
    }

    /// `lambda(t)`.
    pub fn eval(&self, t: f64) -> Result<f64, Construct2dError> {
        let (l, r) = self.endpoints(t)?;
        Ok(r - l)
    }

    /// Largest violation of monotonicity over `samples + 1` equally spaced heights.
    pub fn monotonicity_violation(&self, samples: usize) -> f64 {
        let values: Vec<f64> = (0..=samples)
            .map(|i| {
                let t = self.height * i as f64 / samples as f64;
                let (l, r) = self.endpoints_unchecked(t);
                r - l
            })
            .collect();
        values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Height `t` with `lambda(t) = target`, for `0 < target < width`.
    fn height_for(&self, target: f64, monotone: bool) -> Result<f64, Construct2dError> {
        let lambda = |t: f64| {
            let (l, r) = self.endpoints_unchecked(t);
            r - l
        };
        let (mut lo, mut hi) = (0.0, self.height);
        if !monotone {
            // Scan for the first sample where lambda drops to the target.
            let step = self.height / SCAN_POINTS as f64;
            let mut found = false;
            for i in 1..=SCAN_POINTS {
                let t = step * i as f64;
                if lambda(t) <= target {
                    lo = t - step;
                    hi = t;
                    found = true;
                    break;
                }
            }
            if !found {
                return Err(Construct2dError::BisectionFailure {
                    target,
                    residual: f64::INFINITY,
                });
            }
        }
        // lambda(lo) > target >= lambda(hi)
        loop {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if lambda(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = if (lambda(lo) - target).abs() <= (lambda(hi) - target).abs() {
            lo
        } else {
            hi
        };
        let residual = (lambda(t) - target).abs();
        if residual > HEIGHT_TOL {
            return Err(Construct2dError::BisectionFailure { target, residual });
        }
        Ok(t)
    }
}

/// `lambda(t)` for a planar norm.
pub fn chord_length(norm: &NormOracle, t: f64) -> Result<f64, Construct2dError> {
    ChordProfile::new(norm)?.eval(t)
}

/// Heights `t_1 > ... > t_m` with `lambda(t_i) = i w / (m + 1)`.
pub fn find_heights(norm: &NormOracle, m: usize) -> Result<Vec<f64>, Construct2dError> {
    if m == 0 {
        return Err(Construct2dError::EmptyProgression);
    }
    require_strictly_convex(norm)?;
    let profile = ChordProfile::new(norm)?;
    heights_on(&profile, m)
}

fn heights_on(profile: &ChordProfile, m: usize) -> Result<Vec<f64>, Construct2dError> {
    let monotone = profile.monotonicity_violation(SCAN_POINTS) <= MONOTONE_SLACK;
    let w = profile.width();
    let heights = (1..=m)
        .map(|i| profile.height_for(i as f64 * w / (m + 1) as f64, monotone))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(i) = heights.windows(2).position(|p| p[1] >= p[0]) {
        return Err(Construct2dError::HeightsNotDecreasing(i + 1));
    }
    Ok(heights)
}

/// Generators of the planar construction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Generators2d {
    /// Left endpoints `p_1, ..., p_m`.
    pub points: Vec<Vec<f64>>,
    pub v: Vec<f64>,
    pub heights: Vec<f64>,
    pub width: f64,
}

pub fn build_2d_generators(
    norm: &NormOracle,
    m: usize,
    tol: &Tolerances,
) -> Result<Generators2d, Construct2dError> {
    build_2d_generators_rotated(norm, m, 0.0, tol)
}

/// As [`build_2d_generators`] with slices taken in rotated coordinates.
pub fn build_2d_generators_rotated(
    norm: &NormOracle,
    m: usize,
    angle: f64,
    tol: &Tolerances,
) -> Result<Generators2d, Construct2dError> {
    if m == 0 {
        return Err(Construct2dError::EmptyProgression);
    }
    require_strictly_convex(norm)?;
    let profile = ChordProfile::rotated(norm, angle)?;
    let heights = heights_on(&profile, m)?;
    let step = profile.width() / (m + 1) as f64;
    let v = profile.to_plane(step, 0.0).to_vec();
    let mut points = Vec::with_capacity(m);
    for (k, &t) in heights.iter().enumerate() {
        let i = k + 1;
        let (l, _) = profile.endpoints_unchecked(t);
        let p = BoundaryPoint::new(norm, profile.to_plane(l, t).to_vec())?;
        if p.residual() > tol.eps_bnd {
            return Err(Construct2dError::UnitCertificateFailed { index: i, gauge: norm.gauge(p.coords()) });
        }
        let q: Vec<f64> = p.coords().iter().zip(&v).map(|(a, b)| a + i as f64 * b).collect();
        let gq = norm.gauge(&q);
        if (gq - 1.0).abs() > tol.eps_bnd {
            return Err(Construct2dError::UnitCertificateFailed { index: i, gauge: gq });
        }
        points.push(p.into_coords());
    }
    Ok(Generators2d {
        points,
        v,
        heights,
        width: profile.width(),
    })
}

/// The planar GAP `{a_0 v + sum a_i p_i : a_0 < m^2, a_i in {0, 1}}` with unit
/// directions `p_i` and `p_i + i v`.
pub fn warmup_spec(norm: &NormOracle, m: usize, tol: &Tolerances) -> Result<GapSpec, Construct2dError> {
    let gens = build_2d_generators(norm, m, tol)?;
    let mut generators = gens.points.clone();
    generators.push(gens.v.clone());
    let mut ranges = vec![2u32; m];
    ranges.push((m * m) as u32);
    let mut codes = Vec::with_capacity(2 * m);
    for j in 0..m {
        let mut c = vec![0u32; m + 1];
        c[j] = 1;
        codes.push(c);
    }
    for j in 0..m {
        let mut c = vec![0u32; m + 1];
        c[j] = 1;
        c[m] = (j + 1) as u32;
        codes.push(c);
    }
    Ok(GapSpec::from_parts(SpecKind::Warmup, 2, m, generators, ranges, codes, None))
}
