//! A convex body whose unit-distance graph contains `K_{d,2n}` robustly.
//!
//! `rho(x) = |x|^2 + h chi(x) cos(pi n x_1)` on `R^{d-1}` is a paraboloid
//! crinkled near the origin, and `B_0 = {(x; y) : |y| <= 16 - rho(x)}`. With
//! `q_0 = 0` and `q_j = (p_j; rho(p_j))`, the `d` translates `dB_0 - q_j` of the
//! unit sphere pass through the `2n` points
//! `x_0(k) = (a_k, 0, ..., 0, a_k^2 - 16)`, `a_k = (2k + 1) / (2n)`, and cross
//! transversally there.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::general::split_seed;
use crate::norm::{radial_gauge, EvenPerturbation, Gauge, NormError, NormOracle, PerturbedGauge};
use crate::vecops::{dist2, dot, norm2, orthonormal_complement};

pub const HEIGHT: f64 = 16.0;
pub const CENTER_RADIUS: f64 = 2.5;
pub const MAX_DELTA: f64 = 1e-2;
const HESSIAN_STEP: f64 = 1e-4;
const MIN_EIGENVALUE: f64 = 1e-6;
const H_FLOOR: f64 = 1e-12;
const FD_STEP: f64 = 1e-6;
const NEWTON_TOL: f64 = 1e-10;
const NEWTON_POLISH: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 50;
pub const RESIDUAL_TOL: f64 = 1e-10;
pub const VERIFY_TOL: f64 = 1e-9;
pub const MIN_DET: f64 = 1e-6;
pub const MIN_SEPARATION: f64 = 1e-4;
pub const MAX_ANGLE: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KdmError {
    #[error("the local model needs d >= 3, got {0}")]
    DimensionTooSmall(usize),
    #[error("n must be positive")]
    EmptyModel,
    #[error("no h >= 1e-12 makes the Hessian of rho positive definite")]
    HUnderflow,
    #[error("root {0} was lost: Newton failed to converge or merged with another root")]
    RootLost(usize),
    #[error("root {index} has Jacobian determinant {det:e}, below the 1e-6 threshold")]
    SingularRoot { index: usize, det: f64 },
    #[error("perturbation size {0} exceeds 1e-2")]
    DeltaTooLarge(f64),
    #[error(transparent)]
    Norm(#[from] NormError),
}

fn g(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// Radial smoothstep: 1 on the unit ball, 0 outside radius 2.
pub fn bump(x: &[f64]) -> f64 {
    let r = norm2(x);
    let (a, b) = (g(2.0 - r), g(r - 1.0));
    a / (a + b)
}

pub fn rho(x: &[f64], h: f64, n: usize) -> f64 {
    let sq: f64 = x.iter().map(|v| v * v).sum();
    if h == 0.0 {
        return sq;
    }
    sq + h * bump(x) * (PI * n as f64 * x[0]).cos()
}

/// Finite-difference Hessian of `rho` at `x`.
pub fn rho_hessian(x: &[f64], h: f64, n: usize) -> DMatrix<f64> {
    let k = x.len();
    let e = HESSIAN_STEP;
    let f = |dx: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(i, s) in dx {
            y[i] += s;
        }
        rho(&y, h, n)
    };
    let f0 = f(&[]);
    let mut hess = DMatrix::zeros(k, k);
    for i in 0..k {
        hess[(i, i)] = (f(&[(i, e)]) - 2.0 * f0 + f(&[(i, -e)])) / (e * e);
        for j in 0..i {
            let v = (f(&[(i, e), (j, e)]) - f(&[(i, e), (j, -e)]) - f(&[(i, -e), (j, e)]) + f(&[(i, -e), (j, -e)])) / (4.0 * e * e);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

/// Smallest Hessian eigenvalue of `rho` over grid points of the disc of radius
/// 2.5 in the `(x_1, x_2)` plane. `rho` is invariant under rotations fixing
/// the `x_1` axis, so the plane sees every orbit.
pub fn min_hessian_eigenvalue(n: usize, d: usize, h: f64, grid_step: f64) -> f64 {
    let k = d - 1;
    let steps = (2.5 / grid_step).floor() as i64;
    let rows: Vec<i64> = (-steps..=steps).collect();
    rows.par_iter()
        .map(|&i| {
            let mut worst = f64::INFINITY;
            for j in 0..=steps {
                let (a, b) = (i as f64 * grid_step, j as f64 * grid_step);
                if a * a + b * b > 2.5 * 2.5 + 1e-12 || (k == 1 && j > 0) {
                    continue;
                }
                let mut x = vec![0.0; k];
                x[0] = a;
                if k > 1 {
                    x[1] = b;
                }
                let eig = SymmetricEigen::new(rho_hessian(&x, h, n)).eigenvalues;
                worst = worst.min(eig.min());
            }
            worst
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Halves `h` from `1 / (pi n)^2` until `rho` is sampled strictly convex.
pub fn select_h(n: usize, d: usize, grid_step: f64) -> Result<f64, KdmError> {
    if n == 0 {
        return Err(KdmError::EmptyModel);
    }
    let mut h = 1.0 / (PI * n as f64).powi(2);
    while h >= H_FLOOR {
        if min_hessian_eigenvalue(n, d, h, grid_step) > MIN_EIGENVALUE {
            return Ok(h);
        }
        h *= 0.5;
    }
    Err(KdmError::HUnderflow)
}

/// Gauge of `{(x; y) : |y| <= 16 - rho(x)}` by radial bisection.
#[derive(Clone, Debug)]
pub struct LocalBody {
    d: usize,
    h: f64,
    n: usize,
}

impl LocalBody {
    pub fn contains(&self, z: &[f64]) -> bool {
        let (x, y) = z.split_at(self.d - 1);
        y[0].abs() + rho(x, self.h, self.n) <= HEIGHT
    }
}

impl Gauge for LocalBody {
    fn dim(&self) -> usize {
        self.d
    }

    fn gauge(&self, x: &[f64]) -> f64 {
        radial_gauge(x, |z| self.contains(z))
    }
}

#[derive(Clone, Debug)]
pub struct LocalModel {
    pub d: usize,
    pub n: usize,
    pub h: f64,
    /// `p_1, ..., p_{d-1}` in `{0} x R^{d-2}`.
    pub p: Vec<Vec<f64>>,
    /// `q_0 = 0` and `q_j = (p_j; rho(p_j))`.
    pub q: Vec<Vec<f64>>,
    /// Translation centers `-q_j`: the seeds satisfy `|x - c_j|_B = 1`.
    pub centers: Vec<Vec<f64>>,
    pub body: NormOracle,
}

/// `m` points in `R^{m-1}` forming a regular simplex centered at 0, at distance `r` from it.
fn regular_simplex(m: usize, r: f64) -> Vec<Vec<f64>> {
    if m == 1 {
        return vec![vec![]];
    }
    let basis = orthonormal_complement(&vec![1.0; m]);
    (0..m)
        .map(|i| {
            let mut v: Vec<f64> = vec![-1.0 / m as f64; m];
            v[i] += 1.0;
            let c: Vec<f64> = basis.iter().map(|b| dot(&v, b)).collect();
            let len = norm2(&c);
            c.iter().map(|x| r * x / len).collect()
        })
        .collect()
}

pub fn build_model(d: usize, n: usize) -> Result<LocalModel, KdmError> {
    build_model_with(d, n, 0.05)
}

pub fn build_model_with(d: usize, n: usize, grid_step: f64) -> Result<LocalModel, KdmError> {
    if d < 3 {
        return Err(KdmError::DimensionTooSmall(d));
    }
    let h = select_h(n, d, grid_step)?;
    let p: Vec<Vec<f64>> = regular_simplex(d - 1, CENTER_RADIUS)
        .into_iter()
        .map(|v| std::iter::once(0.0).chain(v).collect())
        .collect();
    let mut q = vec![vec![0.0; d]];
    for pj in &p {
        let mut v = pj.clone();
        v.push(rho(pj, h, n));
        q.push(v);
    }
    let centers = q.iter().map(|v| v.iter().map(|c| -c).collect()).collect();
    let body = NormOracle::new(format!("local-model:d{d}:n{n}"), LocalBody { d, h, n });
    Ok(LocalModel { d, n, h, p, q, centers, body })
}

impl LocalModel {
    /// `x_0(k)` for `-n <= k < n`.
    pub fn seed_points(&self) -> Vec<Vec<f64>> {
        let n = self.n as i64;
        (-n..n)
            .map(|k| {
                let a = (2 * k + 1) as f64 / (2 * n) as f64;
                let mut x = vec![0.0; self.d];
                x[0] = a;
                x[self.d - 1] = a * a - HEIGHT;
                x
            })
            .collect()
    }

    /// Normals `nu_0, ..., nu_{d-1}` of the translated surfaces at `x_0(k)`.
    pub fn normals(&self, k: i64) -> Vec<Vec<f64>> {
        let n = self.n as f64;
        let c = (2 * k + 1) as f64 / n;
        let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let mut out = Vec::with_capacity(self.d);
        let mut nu0 = vec![0.0; self.d];
        nu0[0] = c - sign * self.h * PI * n;
        nu0[self.d - 1] = -1.0;
        out.push(nu0);
        for pj in &self.p {
            let mut v: Vec<f64> = pj.iter().map(|x| 2.0 * x).collect();
            v[0] += c;
            v.push(-1.0);
            out.push(v);
        }
        out
    }
}

/// `Phi_B(x) = (|x - c_j|_B - 1)_j`.
pub fn phi_b(body: &NormOracle, centers: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let mut diff = vec![0.0; x.len()];
    centers
        .iter()
        .map(|c| {
            diff.iter_mut().zip(x.iter().zip(c)).for_each(|(v, (a, b))| *v = a - b);
            body.gauge(&diff) - 1.0
        })
        .collect()
}

/// Central-difference Jacobian of `Phi_B`; row `j` is the gradient of the `j`-th component.
pub fn jacobian(body: &NormOracle, centers: &[Vec<f64>], x: &[f64]) -> DMatrix<f64> {
    let d = x.len();
    let mut jac = DMatrix::zeros(centers.len(), d);
    for i in 0..d {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += FD_STEP;
        xm[i] -= FD_STEP;
        let (fp, fm) = (phi_b(body, centers, &xp), phi_b(body, centers, &xm));
        for j in 0..centers.len() {
            jac[(j, i)] = (fp[j] - fm[j]) / (2.0 * FD_STEP);
        }
    }
    jac
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Newton with step halving on `Phi_B(x) = 0`.
fn newton(body: &NormOracle, centers: &[Vec<f64>], start: &[f64]) -> Option<(Vec<f64>, f64)> {
    let d = start.len();
    let mut x = start.to_vec();
    let mut r = phi_b(body, centers, &x);
    let mut rn = sup(&r);
    for _ in 0..NEWTON_MAX_ITER {
        if rn <= NEWTON_POLISH {
            break;
        }
        let jac = jacobian(body, centers, &x);
        let step = jac.lu().solve(&DVector::from_iterator(d, r.iter().map(|v| -v)))?;
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + alpha * b).collect();
            let rnew = phi_b(body, centers, &xn);
            let nn = sup(&rnew);
            if nn < rn {
                x = xn;
                r = rnew;
                rn = nn;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (rn <= NEWTON_TOL).then_some((x, rn))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdmCertificate {
    pub d: usize,
    pub n: usize,
    pub h: f64,
    pub centers: Vec<Vec<f64>>,
    pub points: Vec<Vec<f64>>,
    /// Per point, `max_j ||x_k - c_j|_B - 1|`.
    pub residuals: Vec<f64>,
    pub jac_dets: Vec<f64>,
    /// Per point, the largest angle between a Jacobian row and its predicted normal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal_angles: Option<Vec<f64>>,
    /// Whether each determinant has the sign of `det(nu_0, ..., nu_{d-1})`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub det_signs_match: Option<bool>,
    pub persisted: bool,
    #[serde(default)]
    pub perturbation_seeds: Vec<u64>,
    #[serde(default)]
    pub delta: Option<f64>,
}

fn min_pairwise(points: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min(dist2(&points[i], &points[j]));
        }
    }
    best
}

/// Tracks each start point to a root of `Phi_B` and certifies it.
pub fn solve_from(model: &LocalModel, body: &NormOracle, starts: &[Vec<f64>]) -> Result<KdmCertificate, KdmError> {
    let solved: Vec<Option<(Vec<f64>, f64)>> = starts.par_iter().map(|s| newton(body, &model.centers, s)).collect();
    let mut points = Vec::with_capacity(starts.len());
    let mut residuals = Vec::with_capacity(starts.len());
    for (k, s) in solved.into_iter().enumerate() {
        let (x, r) = s.ok_or(KdmError::RootLost(k))?;
        points.push(x);
        residuals.push(r);
    }
    for i in 0..points.len() {
        for j in 0..i {
            if dist2(&points[i], &points[j]) <= MIN_SEPARATION {
                return Err(KdmError::RootLost(i));
            }
        }
    }
    let mut jac_dets = Vec::with_capacity(points.len());
    for (index, x) in points.iter().enumerate() {
        let det = jacobian(body, &model.centers, x).determinant();
        if det.abs() < MIN_DET {
            return Err(KdmError::SingularRoot { index, det });
        }
        jac_dets.push(det);
    }
    Ok(KdmCertificate {
        d: model.d,
        n: model.n,
        h: model.h,
        centers: model.centers.clone(),
        points,
        residuals,
        jac_dets,
        normal_angles: None,
        det_signs_match: None,
        persisted: false,
        perturbation_seeds: Vec::new(),
        delta: None,
    })
}

fn angle(a: &[f64], b: &[f64]) -> f64 {
    let c = (dot(a, b) / (norm2(a) * norm2(b))).clamp(-1.0, 1.0);
    c.acos()
}

/// Solves from the seed points and, when `body` is the model body, checks the
/// Jacobian rows against the predicted normals.
pub fn solve_intersections(model: &LocalModel, body: &NormOracle) -> Result<KdmCertificate, KdmError> {
    let seeds = model.seed_points();
    let mut cert = solve_from(model, body, &seeds)?;
    let mut angles = Vec::with_capacity(seeds.len());
    let mut signs = true;
    let n = model.n as i64;
    for (i, x) in cert.points.iter().enumerate() {
        let k = i as i64 - n;
        let nu = model.normals(k);
        let jac = jacobian(body, &model.centers, x);
        let worst = (0..model.d)
            .map(|j| {
                let row: Vec<f64> = jac.row(j).iter().copied().collect();
                angle(&row, &nu[j])
            })
            .fold(0.0, f64::max);
        angles.push(worst);
        let nu_det = DMatrix::from_fn(model.d, model.d, |r, c| nu[r][c]).determinant();
        signs &= nu_det.signum() == cert.jac_dets[i].signum();
    }
    cert.normal_angles = Some(angles);
    cert.det_signs_match = Some(signs);
    Ok(cert)
}

/// Perturbed body `gauge(x) (1 + delta psi(x / |x|_2))` for one trial seed.
pub fn perturbed_body(model: &LocalModel, delta: f64, seed: u64) -> Result<NormOracle, KdmError> {
    let psi = EvenPerturbation::new(model.d, seed);
    let g = PerturbedGauge::new(Arc::clone(model.body.inner()), delta, psi)?;
    Ok(NormOracle::new(format!("{}+{delta}*psi{seed}", model.body.name()), g))
}

/// Re-solves under `trials` seeded perturbations of size `delta`, starting from
/// the certified roots. Every root must survive, with its certificate, inside
/// half the minimum root separation of where it started.
pub fn perturb_and_persist(
    model: &LocalModel,
    cert: &mut KdmCertificate,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<bool, KdmError> {
    if !(delta.abs() <= MAX_DELTA) {
        return Err(KdmError::DeltaTooLarge(delta));
    }
    let seeds: Vec<u64> = (0..trials as u64).map(|t| split_seed(seed, t)).collect();
    cert.perturbation_seeds = seeds.clone();
    cert.delta = Some(delta);
    let radius = 0.5 * min_pairwise(&cert.points);
    let mut ok = true;
    if delta != 0.0 {
        for &s in &seeds {
            let body = perturbed_body(model, delta, s)?;
            match solve_from(model, &body, &cert.points) {
                Ok(c) => {
                    ok &= c.points.iter().zip(&cert.points).all(|(a, b)| dist2(a, b) < radius);
                }
                Err(_) => ok = false,
            }
            if !ok {
                break;
            }
        }
    }
    cert.persisted = ok;
    Ok(ok)
}

/// Whether `cert` exhibits `K_{d,2n}` in the unit-distance graph of `body`.
pub fn verify_kdm(cert: &KdmCertificate, model: &LocalModel, body: &NormOracle) -> bool {
    if cert.points.len() != 2 * model.n || cert.centers.len() != model.d || cert.d != model.d {
        return false;
    }
    if cert.residuals.len() != cert.points.len() || cert.residuals.iter().any(|r| !(*r <= VERIFY_TOL)) {
        return false;
    }
    for x in &cert.points {
        if phi_b(body, &cert.centers, x).iter().any(|r| !(r.abs() <= VERIFY_TOL)) {
            return false;
        }
    }
    let all: Vec<Vec<f64>> = cert.centers.iter().chain(&cert.points).cloned().collect();
    min_pairwise(&all) > MIN_SEPARATION
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_plateaus() {
        assert_eq!(bump(&[0.5, 0.0]), 1.0);
        assert_eq!(bump(&[2.5, 0.0]), 0.0);
        assert!((bump(&[1.5, 0.0]) - 0.5).abs() < 1e-15);
        assert_eq!(bump(&[0.0, 0.0, 0.0]), 1.0);
    }

    #[test]
    fn paraboloid_hessian() {
        let hess = rho_hessian(&[0.3, -0.2], 0.0, 1);
        let eig = SymmetricEigen::new(hess).eigenvalues;
        assert!((eig.min() - 2.0).abs() < 1e-6 && (eig.max() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn h_shrinks_with_n() {
        let h1 = select_h(1, 3, 0.05).unwrap();
        let h4 = select_h(4, 3, 0.05).unwrap();
        assert!(min_hessian_eigenvalue(1, 3, h1, 0.05) > 1e-6);
        assert!(h4 < h1);
    }

    #[test]
    fn model_geometry() {
        let model = build_model(4, 3).unwrap();
        for pj in &model.p {
            assert_eq!(pj[0], 0.0);
            assert!((norm2(pj) - 2.5).abs() < 1e-12);
        }
        let top = [0.0, 0.0, 0.0, HEIGHT - rho(&[0.0; 3], model.h, 3)];
        assert!((model.body.gauge(&top) - 1.0).abs() < 1e-15);
        for x in model.seed_points() {
            assert!(sup(&phi_b(&model.body, &model.centers, &x)) <= 1e-10);
        }
    }

    #[test]
    fn seed_layout() {
        let model = build_model(3, 2).unwrap();
        let firsts: Vec<f64> = model.seed_points().iter().map(|x| x[0]).collect();
        assert_eq!(firsts, vec![-0.75, -0.25, 0.25, 0.75]);
        for x in model.seed_points() {
            assert_eq!(x[2], x[0] * x[0] - 16.0);
        }
    }

    #[test]
    fn k34_certificate() {
        let model = build_model(3, 2).unwrap();
        let mut cert = solve_intersections(&model, &model.body).unwrap();
        assert_eq!(cert.points.len(), 4);
        assert!(cert.residuals.iter().all(|r| *r <= 1e-10));
        assert!(cert.jac_dets.iter().all(|d| d.abs() >= 1e-6));
        assert!(cert.normal_angles.as_ref().unwrap().iter().all(|a| *a <= MAX_ANGLE));
        assert_eq!(cert.det_signs_match, Some(true));
        assert!(verify_kdm(&cert, &model, &model.body));
        assert!(perturb_and_persist(&model, &mut cert, 0.0, 3, 1).unwrap());
        assert!(matches!(perturb_and_persist(&model, &mut cert, 0.5, 1, 1), Err(KdmError::DeltaTooLarge(_))));

        let mut bad = cert.clone();
        bad.residuals[0] = 1e-3;
        assert!(!verify_kdm(&bad, &model, &model.body));
        let mut moved = cert.clone();
        moved.points[1][0] += 1e-3;
        assert!(!verify_kdm(&moved, &model, &model.body));
    }

    #[test]
    fn rejects_low_dimension() {
        assert!(matches!(build_model(2, 3), Err(KdmError::DimensionTooSmall(2))));
    }
}
