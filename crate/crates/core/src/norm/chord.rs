//! The chord function `phi_w` on the unit sphere.
//!
//! For `x` on `dB` and a direction `w`, `phi_w(x)` is the nonzero scalar `s`
//! with `x - s w` back on `dB`, or 0 when the line `x + span{w}` only touches
//! the ball at `x`. Along that line `f(s) = gauge(x - s w) - 1` is convex with
//! `f(0) = 0`, so it has at most one nonzero root on each side and at most one
//! overall when the ball is strictly convex.

use serde::{Deserialize, Serialize};

use super::{BoundaryPoint, NormError, NormOracle};
use crate::Tolerances;

const INITIAL_STEP: f64 = 0.1;
const FLAT_EPS: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChordResult {
    pub value: f64,
    pub tangent: bool,
}

impl ChordResult {
    fn tangent() -> Self {
        ChordResult {
            value: 0.0,
            tangent: true,
        }
    }
}

/// `phi_w(x)`, with roots of magnitude at most `tol.tau_tan` reported as tangency.
pub fn chord_scalar(
    norm: &NormOracle,
    x: &BoundaryPoint,
    w: &[f64],
    tol: &Tolerances,
) -> Result<ChordResult, NormError> {
    norm.check_input(x.coords())?;
    norm.check_input(w)?;
    if w.iter().all(|v| *v == 0.0) {
        return Err(NormError::ZeroVector);
    }
    let residual = (norm.gauge(x.coords()) - 1.0).abs();
    if residual > tol.eps_bnd {
        return Err(NormError::NotOnBoundary { residual });
    }
    chord_root(norm, x.coords(), w, tol.tau_tan)
}

/// True iff `w` is tangent to the ball at `x` (the shadow boundary `S_w`).
pub fn is_shadow_boundary(
    norm: &NormOracle,
    x: &BoundaryPoint,
    w: &[f64],
    tau_tan: f64,
) -> Result<bool, NormError> {
    let tol = Tolerances {
        tau_tan,
        ..Tolerances::default()
    };
    Ok(chord_scalar(norm, x, w, &tol)?.tangent)
}

pub(crate) fn chord_root(
    norm: &NormOracle,
    x: &[f64],
    w: &[f64],
    tau_tan: f64,
) -> Result<ChordResult, NormError> {
    let mut buf = vec![0.0; x.len()];
    let mut f = |s: f64| {
        for ((b, xi), wi) in buf.iter_mut().zip(x).zip(w) {
            *b = xi - s * wi;
        }
        norm.gauge(&buf) - 1.0
    };
    // f(s) >= |s| gauge(w) - 2, so every root lies below this bound.
    let s_max = 4.0 / norm.gauge(w);

    // Long chords: f(sign * 0.1) <= 0 means we are still inside the ball.
    for sign in [1.0, -1.0] {
        if f(sign * INITIAL_STEP) <= 0.0 {
            let mut lo = INITIAL_STEP;
            let mut hi = 2.0 * INITIAL_STEP;
            while f(sign * hi) <= 0.0 {
                if hi > s_max {
                    return Err(NormError::BracketFailure);
                }
                lo = hi;
                hi *= 2.0;
            }
            let root = bisect(|s| f(sign * s), lo, hi);
            return finish(&mut f, sign, root, tau_tan);
        }
    }

    // Short chords: f is positive at +-0.1; look for a dip below zero closer in.
    for sign in [1.0, -1.0] {
        let mut hi = INITIAL_STEP;
        let mut s = 0.5 * INITIAL_STEP;
        while s >= 0.5 * tau_tan {
            if f(sign * s) < 0.0 {
                let root = bisect(|r| f(sign * r), s, hi);
                if root <= tau_tan {
                    return Ok(ChordResult::tangent());
                }
                return finish(&mut f, sign, root, tau_tan);
            }
            hi = s;
            s *= 0.5;
        }
    }
    Ok(ChordResult::tangent())
}

fn finish<F: FnMut(f64) -> f64>(
    f: &mut F,
    sign: f64,
    root: f64,
    tau_tan: f64,
) -> Result<ChordResult, NormError> {
    if root <= tau_tan {
        return Ok(ChordResult::tangent());
    }
    // A strictly convex ball has f < 0 strictly between 0 and the root.
    let flat = [0.25, 0.5, 0.75]
        .iter()
        .all(|q| f(sign * q * root) >= -FLAT_EPS);
    if flat {
        return Err(NormError::NotStrictlyConvex { length: root });
    }
    Ok(ChordResult {
        value: sign * root,
        tangent: false,
    })
}

/// Bisection for the sign change of `g` in `[lo, hi]` with `g(lo) <= 0 < g(hi)`.
/// Runs until the endpoints are adjacent floats and returns the one with the
/// smaller `|g|`.
fn bisect<G: FnMut(f64) -> f64>(mut g: G, mut lo: f64, mut hi: f64) -> f64 {
    let mut g_lo = g(lo);
    let mut g_hi = g(hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm <= 0.0 {
            lo = mid;
            g_lo = gm;
        } else {
            hi = mid;
            g_hi = gm;
        }
    }
    if g_lo.abs() <= g_hi.abs() {
        lo
    } else {
        hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm::boundary_point;

    fn bp(norm: &NormOracle, c: &[f64]) -> BoundaryPoint {
        BoundaryPoint::new(norm, c.to_vec()).unwrap()
    }

    #[test]
    fn euclidean_reflection() {
        let e = NormOracle::euclidean(2);
        let tol = Tolerances::default();
        let r = chord_scalar(&e, &bp(&e, &[0.6, 0.8]), &[1.0, 0.0], &tol).unwrap();
        assert!(!r.tangent);
        assert!((r.value - 1.2).abs() < 1e-14);
        let r = chord_scalar(&e, &bp(&e, &[0.6, 0.8]), &[-1.0, 0.0], &tol).unwrap();
        assert!((r.value + 1.2).abs() < 1e-14);
    }

    #[test]
    fn euclidean_pole_is_tangent() {
        let e = NormOracle::euclidean(2);
        let tol = Tolerances::default();
        let r = chord_scalar(&e, &bp(&e, &[0.0, 1.0]), &[1.0, 0.0], &tol).unwrap();
        assert_eq!(r, ChordResult { value: 0.0, tangent: true });
        assert!(is_shadow_boundary(&e, &bp(&e, &[0.0, 1.0]), &[1.0, 0.0], 1e-7).unwrap());
        assert!(!is_shadow_boundary(&e, &bp(&e, &[0.6, 0.8]), &[1.0, 0.0], 1e-7).unwrap());
    }

    #[test]
    fn l4_diagonal_chord() {
        let l4 = NormOracle::lp(2, 4.0);
        let r = chord_scalar(&l4, &bp(&l4, &[0.0, 1.0]), &[1.0, 1.0], &Tolerances::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-14, "{r:?}");
    }

    #[test]
    fn short_chord_is_found() {
        // Near the pole the chord along e1 has length 2 x1.
        let e = NormOracle::euclidean(2);
        let x = boundary_point(&e, &[1e-4, 1.0]).unwrap();
        let r = chord_scalar(&e, &x, &[1.0, 0.0], &Tolerances::default()).unwrap();
        let expected = 2.0 * x.coords()[0];
        // The slope of f at the far root is only ~1e-4 here.
        assert!((r.value - expected).abs() < 1e-11, "{} vs {}", r.value, expected);
    }

    #[test]
    fn errors() {
        let e = NormOracle::euclidean(2);
        let tol = Tolerances::default();
        let off = BoundaryPoint::new(&e, vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            chord_scalar(&e, &off, &[1.0, 0.0], &tol),
            Err(NormError::NotOnBoundary { .. })
        ));
        assert_eq!(
            chord_scalar(&e, &bp(&e, &[1.0, 0.0]), &[0.0, 0.0], &tol),
            Err(NormError::ZeroVector)
        );
        // Along a facet of the square every nearby point stays on the sphere.
        let linf = NormOracle::lp(2, f64::INFINITY);
        assert!(matches!(
            chord_scalar(&linf, &bp(&linf, &[1.0, 0.5]), &[0.0, 1.0], &tol),
            Err(NormError::NotStrictlyConvex { .. })
        ));
    }

    #[test]
    fn l4_in_three_dimensions() {
        let l4 = NormOracle::lp(3, 4.0);
        let x = boundary_point(&l4, &[0.0, 1.0, 1.0]).unwrap();
        let tol = Tolerances::default();
        // x has x1 = 0 and the ball is symmetric in x1: f(s) = (s^4 + 1)^(1/4) - 1 > 0
        // for every s != 0, so e1 is tangent here.
        let r = chord_scalar(&l4, &x, &[1.0, 0.0, 0.0], &tol).unwrap();
        assert!(r.tangent);
        for k in 1..=1000 {
            let s = k as f64 * 1e-3;
            let y = [-s, x.coords()[1], x.coords()[2]];
            assert!(l4.gauge(&y) > 1.0);
        }
        // Along (1,1,0) the chord ends at (-c, 0, c) with c = 2^(-1/4).
        let r = chord_scalar(&l4, &x, &[1.0, 1.0, 0.0], &tol).unwrap();
        assert!(!r.tangent);
        assert!((r.value - 2f64.powf(-0.25)).abs() < 1e-13, "{r:?}");
    }
}
