//! Randomized search for line segments on the unit sphere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{NormError, NormOracle};
use crate::vecops::dist2;

/// Midpoint gauge at or above `1 - SEGMENT_EPS` certifies a boundary segment.
const SEGMENT_EPS: f64 = 1e-12;
const MIN_SEPARATION: f64 = 1e-6;
/// Pairs this far apart whose midpoint is within `NEAR_FLAT_EPS` of the
/// sphere make a smooth verdict untrustworthy.
const NEAR_FLAT_SEPARATION: f64 = 1e-3;
const NEAR_FLAT_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ConvexityVerdict {
    Strict,
    /// `a` and `b` lie on the sphere and so does their midpoint.
    SegmentFound { a: Vec<f64>, b: Vec<f64> },
    /// No segment found, but some well-separated pair had a midpoint within
    /// `1e-9` of the sphere.
    Inconclusive { min_deficit: f64 },
}

/// Samples `samples` pairs of boundary points and checks their midpoints.
///
/// Even-numbered pairs are independent uniform directions; odd-numbered pairs
/// put the second point at a Euclidean offset of 0.05 to 0.5 from the first,
/// which finds facets far faster than independent pairs while staying far
/// above the scale where smooth spheres look flat.
pub fn strict_convexity_probe(norm: &NormOracle, samples: usize, seed: u64) -> ConvexityVerdict {
    let d = norm.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_deficit = f64::INFINITY;
    let gaussian = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    };
    let normalize = |v: &[f64]| -> Option<Vec<f64>> {
        let g = norm.gauge(v);
        (g > 0.0 && g.is_finite()).then(|| v.iter().map(|c| c / g).collect())
    };
    for i in 0..samples {
        let Some(x) = normalize(&gaussian(&mut rng)) else { continue };
        let raw_y = if i % 2 == 0 {
            gaussian(&mut rng)
        } else {
            let dir = gaussian(&mut rng);
            let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            let r = rng.random_range(0.05..0.5) / len;
            x.iter().zip(&dir).map(|(a, b)| a + r * b).collect()
        };
        let Some(y) = normalize(&raw_y) else { continue };
        let sep = dist2(&x, &y);
        if sep <= MIN_SEPARATION {
            continue;
        }
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let deficit = 1.0 - norm.gauge(&mid);
        if deficit <= SEGMENT_EPS {
            return ConvexityVerdict::SegmentFound { a: x, b: y };
        }
        if sep > NEAR_FLAT_SEPARATION {
            min_deficit = min_deficit.min(deficit);
        }
    }
    if min_deficit < NEAR_FLAT_EPS {
        ConvexityVerdict::Inconclusive { min_deficit }
    } else {
        ConvexityVerdict::Strict
    }
}

pub(crate) const GATE_SAMPLES: usize = 4096;
pub(crate) const GATE_SEED: u64 = 0x5eed;

/// Rejects norms whose probe finds a boundary segment.
pub fn require_strictly_convex(norm: &NormOracle) -> Result<(), NormError> {
    match strict_convexity_probe(norm, GATE_SAMPLES, GATE_SEED) {
        ConvexityVerdict::SegmentFound { a, b } => Err(NormError::NotStrictlyConvex {
            length: dist2(&a, &b),
        }),
        _ => Ok(()),
    }
}
