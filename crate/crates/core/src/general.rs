//! The construction in arbitrary dimension.
//!
//! Fix independent directions `w_1, ..., w_{d-1}` and a unit `w_d` orthogonal
//! to them. The map `Phi = (phi_{w_1}, ..., phi_{w_{d-1}})` sends the upper
//! half of the unit sphere to `R^{d-1}`. Points `p_1, ..., p_m` with
//! `Phi(p_j) = (1 + j lambda) t` make every `q_ij = p_j - (1 + j lambda) t_i w_i`
//! a unit vector, and these together with the `p_j` are the unit directions of
//! a GAP with `m + 2d - 2` generators.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::norm::{boundary_point, chord_scalar, require_strictly_convex, BoundaryPoint, NormError, NormOracle};
use crate::vecops::{dist2, dot, norm2, orthonormal_complement};
use crate::Tolerances;

/// Minimum Euclidean separation between distinct unit directions.
pub const SEPARATION: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneralError {
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("no admissible seed point after {budget} samples")]
    SeedExhausted { budget: usize },
    #[error("Newton iteration did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("AP-point search failed: {0}")]
    ApSearchFailed(String),
    #[error("direction {index} has gauge {gauge}, off the unit sphere")]
    UnitCertificateFailed { index: usize, gauge: f64 },
    #[error("invalid GAP specification: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Norm(#[from] NormError),
}

/// Chord directions `ws` and the unit normal `wd` of their span.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub ws: Vec<Vec<f64>>,
    pub wd: Vec<f64>,
}

impl Frame {
    /// `ws = (e_1, ..., e_{d-1})`, `wd = e_d`.
    pub fn standard(d: usize) -> Frame {
        let ws = (0..d - 1).map(|i| crate::vecops::unit_vector(d, i)).collect();
        Frame {
            ws,
            wd: crate::vecops::unit_vector(d, d - 1),
        }
    }

    /// Completes `d - 1` independent vectors in `R^d` with a unit normal.
    pub fn new(ws: Vec<Vec<f64>>) -> Result<Frame, GeneralError> {
        let d = ws.len() + 1;
        if ws.iter().any(|w| w.len() != d) {
            return Err(GeneralError::InvalidFrame(format!("expected {} vectors in R^{d}", d - 1)));
        }
        // Gram-Schmidt on ws followed by the standard basis.
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
        let push = |v: &[f64], basis: &mut Vec<Vec<f64>>| -> bool {
            let mut u = v.to_vec();
            for _ in 0..2 {
                for b in basis.iter() {
                    let c = dot(&u, b);
                    u.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let n = norm2(&u);
            if n <= 1e-10 * norm2(v).max(1.0) {
                return false;
            }
            basis.push(u.iter().map(|x| x / n).collect());
            true
        };
        for w in &ws {
            if !push(w, &mut basis) {
                return Err(GeneralError::InvalidFrame("directions are linearly dependent".into()));
            }
        }
        for i in 0..d {
            if basis.len() == d {
                break;
            }
            push(&crate::vecops::unit_vector(d, i), &mut basis);
        }
        let wd = basis.pop().expect("basis has d vectors");
        Ok(Frame { ws, wd })
    }

    pub fn dim(&self) -> usize {
        self.wd.len()
    }
}

/// `Phi(x) = (phi_{w_1}(x), ..., phi_{w_{d-1}}(x))`; tangent directions give 0.
pub fn phi_map(
    norm: &NormOracle,
    x: &BoundaryPoint,
    ws: &[Vec<f64>],
    tol: &Tolerances,
) -> Result<Vec<f64>, NormError> {
    ws.iter()
        .map(|w| chord_scalar(norm, x, w, tol).map(|c| c.value))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedConfig {
    pub eps_coord: f64,
    pub eta: f64,
    pub budget: usize,
}

impl Default for SeedConfig {
    fn default() -> Self {
        SeedConfig {
            eps_coord: 1e-3,
            eta: 1e-3,
            budget: 100_000,
        }
    }
}

/// Rejection-samples a boundary point `x` with `<x, wd> > eta` and every
/// coordinate of `Phi(x)` at least `eps_coord` in magnitude.
pub fn seed_target(
    norm: &NormOracle,
    frame: &Frame,
    cfg: &SeedConfig,
    seed: u64,
    tol: &Tolerances,
) -> Result<(BoundaryPoint, Vec<f64>), GeneralError> {
    let d = norm.dim();
    if frame.dim() != d {
        return Err(GeneralError::InvalidFrame(format!("frame lives in R^{}, norm in R^{d}", frame.dim())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cfg.budget {
        let g: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let Ok(mut x) = boundary_point(norm, &g) else { continue };
        if dot(x.coords(), &frame.wd) < 0.0 {
            x = x.negated();
        }
        if dot(x.coords(), &frame.wd) <= cfg.eta || x.residual() > tol.eps_bnd {
            continue;
        }
        let t = match phi_map(norm, &x, &frame.ws, tol) {
            Ok(t) => t,
            Err(e @ NormError::NotStrictlyConvex { .. }) => return Err(e.into()),
            Err(_) => continue,
        };
        if t.iter().all(|v| v.abs() >= cfg.eps_coord) {
            return Ok((x, t));
        }
    }
    Err(GeneralError::SeedExhausted { budget: cfg.budget })
}

/// Gnomonic chart of the upper half-sphere: `z -> (wd + sum z_i b_i) / gauge`,
/// with `b_i` an orthonormal basis of `wd^perp`.
#[derive(Clone, Debug)]
pub struct BoundaryChart {
    wd: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

impl BoundaryChart {
    pub fn new(wd: &[f64]) -> Self {
        BoundaryChart {
            wd: wd.to_vec(),
            basis: orthonormal_complement(wd),
        }
    }

    pub fn point(&self, norm: &NormOracle, z: &[f64]) -> Result<BoundaryPoint, NormError> {
        let mut y = self.wd.clone();
        for (zi, b) in z.iter().zip(&self.basis) {
            y.iter_mut().zip(b).for_each(|(a, c)| *a += zi * c);
        }
        boundary_point(norm, &y)
    }

    /// Chart coordinates of `x`; requires `<x, wd> > 0`.
    pub fn coords(&self, x: &[f64]) -> Vec<f64> {
        let h = dot(x, &self.wd);
        self.basis.iter().map(|b| dot(x, b) / h).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub fd_step: f64,
    pub tol: f64,
    /// Iteration continues past `tol` while the residual keeps shrinking.
    pub polish_tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            fd_step: 1e-6,
            tol: 1e-10,
            polish_tol: 1e-14,
            max_iter: 50,
        }
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Solves `Phi(x) = target` on the boundary chart, starting from `x_init`.
pub fn solve_on_boundary(
    norm: &NormOracle,
    frame: &Frame,
    target: &[f64],
    x_init: &BoundaryPoint,
    opts: &NewtonOptions,
    tol: &Tolerances,
) -> Result<BoundaryPoint, GeneralError> {
    let k = frame.ws.len();
    if target.len() != k {
        return Err(GeneralError::InvalidFrame(format!("target has {} entries, frame {k}", target.len())));
    }
    if dot(x_init.coords(), &frame.wd) <= 0.0 {
        return Err(GeneralError::InvalidFrame("initial point is not on the wd side".into()));
    }
    let chart = BoundaryChart::new(&frame.wd);
    let residual = |z: &[f64]| -> Option<(BoundaryPoint, Vec<f64>)> {
        let p = chart.point(norm, z).ok()?;
        let phi = phi_map(norm, &p, &frame.ws, tol).ok()?;
        let r: Vec<f64> = phi.iter().zip(target).map(|(a, b)| a - b).collect();
        Some((p, r))
    };
    let mut z = chart.coords(x_init.coords());
    let (mut p, mut r) = residual(&z).ok_or(GeneralError::NoConvergence { residual: f64::INFINITY })?;
    let mut rn = sup(&r);
    for _ in 0..opts.max_iter {
        if rn <= opts.polish_tol {
            break;
        }
        let mut jac = DMatrix::<f64>::zeros(k, k);
        let mut ok = true;
        for c in 0..k {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[c] += opts.fd_step;
            zm[c] -= opts.fd_step;
            match (residual(&zp), residual(&zm)) {
                (Some((_, rp)), Some((_, rm))) => {
                    for row in 0..k {
                        jac[(row, c)] = (rp[row] - rm[row]) / (2.0 * opts.fd_step);
                    }
                }
                _ => ok = false,
            }
        }
        if !ok {
            break;
        }
        let Some(step) = jac.lu().solve(&DVector::from_iterator(k, r.iter().map(|v| -v))) else {
            break;
        };
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let zn: Vec<f64> = z.iter().zip(step.iter()).map(|(a, b)| a + alpha * b).collect();
            if let Some((pn, rnew)) = residual(&zn) {
                let nn = sup(&rnew);
                if nn < rn {
                    z = zn;
                    p = pn;
                    r = rnew;
                    rn = nn;
                    improved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if rn <= opts.tol {
        Ok(p)
    } else {
        Err(GeneralError::NoConvergence { residual: rn })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApConfig {
    pub lambda0: f64,
    pub lambda_min: f64,
    pub reseeds: usize,
    pub seed: SeedConfig,
    pub newton: NewtonOptions,
}

impl Default for ApConfig {
    fn default() -> Self {
        ApConfig {
            lambda0: 0.01,
            lambda_min: 1e-8,
            reseeds: 8,
            seed: SeedConfig::default(),
            newton: NewtonOptions::default(),
        }
    }
}

/// Points `p_1, ..., p_m` on the sphere with `Phi(p_j) = (1 + j lambda) t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApWitness {
    pub ws: Vec<Vec<f64>>,
    pub wd: Vec<f64>,
    pub t: Vec<f64>,
    pub lambda: f64,
    pub points: Vec<Vec<f64>>,
}

impl ApWitness {
    /// Largest `|Phi(p_j) - (1 + j lambda) t|` over all `j` and coordinates.
    pub fn phi_residual(&self, norm: &NormOracle, tol: &Tolerances) -> Result<f64, NormError> {
        let mut worst: f64 = 0.0;
        for (j, p) in self.points.iter().enumerate() {
            let bp = BoundaryPoint::new(norm, p.clone())?;
            let phi = phi_map(norm, &bp, &self.ws, tol)?;
            let s = 1.0 + (j + 1) as f64 * self.lambda;
            for (a, b) in phi.iter().zip(&self.t) {
                worst = worst.max((a - s * b).abs());
            }
        }
        Ok(worst)
    }
}

/// Independent stream seed derived from `seed`.
pub(crate) fn split_seed(seed: u64, attempt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed.wrapping_add(attempt.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeds a target `t`, then tracks `(1 + j lambda) t` for `j = 1..m`, halving
/// `lambda` on failure and drawing a fresh seed when it underflows.
pub fn find_ap_points(
    norm: &NormOracle,
    frame: &Frame,
    m: usize,
    seed: u64,
    cfg: &ApConfig,
    tol: &Tolerances,
) -> Result<ApWitness, GeneralError> {
    if m == 0 {
        return Err(GeneralError::ApSearchFailed("m must be positive".into()));
    }
    if norm.dim() < 2 {
        return Err(GeneralError::ApSearchFailed("dimension must be at least 2".into()));
    }
    require_strictly_convex(norm)?;
    let mut last = String::new();
    for attempt in 0..=cfg.reseeds {
        let (x_seed, t) = match seed_target(norm, frame, &cfg.seed, split_seed(seed, attempt as u64), tol) {
            Ok(s) => s,
            Err(GeneralError::SeedExhausted { budget }) => {
                return Err(GeneralError::ApSearchFailed(format!("seed sampling exhausted after {budget} samples")))
            }
            Err(e) => return Err(e),
        };
        let mut lambda = cfg.lambda0 / (m * m) as f64;
        while lambda >= cfg.lambda_min {
            match find_ap_points_at(norm, frame, m, &t, lambda, &x_seed, cfg, tol) {
                Ok(w) => return Ok(w),
                Err(e) => last = e.to_string(),
            }
            lambda *= 0.5;
        }
    }
    Err(GeneralError::ApSearchFailed(format!(
        "lambda fell below {} for {} seeds; last failure: {last}",
        cfg.lambda_min,
        cfg.reseeds + 1
    )))
}

/// Continuation for a fixed `t` and `lambda` starting from `x_init`.
#[allow(clippy::too_many_arguments)]
pub fn find_ap_points_at(
    norm: &NormOracle,
    frame: &Frame,
    m: usize,
    t: &[f64],
    lambda: f64,
    x_init: &BoundaryPoint,
    cfg: &ApConfig,
    tol: &Tolerances,
) -> Result<ApWitness, GeneralError> {
    let mut x = x_init.clone();
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(m);
    for j in 1..=m {
        let s = 1.0 + j as f64 * lambda;
        let target: Vec<f64> = t.iter().map(|v| s * v).collect();
        x = solve_on_boundary(norm, frame, &target, &x, &cfg.newton, tol)?;
        if dot(x.coords(), &frame.wd) <= cfg.seed.eta {
            return Err(GeneralError::ApSearchFailed(format!("p_{j} left the wd > eta region")));
        }
        if points.iter().any(|q| dist2(q, x.coords()) <= SEPARATION) {
            return Err(GeneralError::ApSearchFailed(format!("p_{j} coincides with an earlier point")));
        }
        points.push(x.coords().to_vec());
    }
    Ok(ApWitness {
        ws: frame.ws.clone(),
        wd: frame.wd.clone(),
        t: t.to_vec(),
        lambda,
        points,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecKind {
    Proposition,
    Warmup,
    Custom,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
}

/// A GAP `{sum a_i v_i : 0 <= a_i < k_i}` with distinguished lattice codes
/// whose images are unit vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSpec {
    pub d: usize,
    pub m: usize,
    pub kind: SpecKind,
    pub generators: Vec<Vec<f64>>,
    pub ranges: Vec<u32>,
    pub codes: Vec<Vec<u32>>,
    pub directions: Vec<Vec<f64>>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl GapSpec {
    pub fn from_parts(
        kind: SpecKind,
        d: usize,
        m: usize,
        generators: Vec<Vec<f64>>,
        ranges: Vec<u32>,
        codes: Vec<Vec<u32>>,
        provenance: Option<Provenance>,
    ) -> GapSpec {
        let directions = codes.iter().map(|c| realize(&generators, c, d)).collect();
        GapSpec {
            d,
            m,
            kind,
            generators,
            ranges,
            codes,
            directions,
            provenance: provenance.unwrap_or_default(),
        }
    }

    pub fn custom(generators: Vec<Vec<f64>>, ranges: Vec<u32>, codes: Vec<Vec<u32>>) -> Result<GapSpec, GeneralError> {
        let d = generators.first().map_or(0, |g| g.len());
        let spec = GapSpec::from_parts(SpecKind::Custom, d, 0, generators, ranges, codes, None);
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), GeneralError> {
        let bad = |s: String| Err(GeneralError::InvalidSpec(s));
        if self.d == 0 || self.generators.is_empty() {
            return bad("no generators".into());
        }
        if self.generators.iter().any(|g| g.len() != self.d || g.iter().any(|v| !v.is_finite())) {
            return bad(format!("generators must be finite vectors in R^{}", self.d));
        }
        if self.ranges.len() != self.generators.len() {
            return bad(format!("{} ranges for {} generators", self.ranges.len(), self.generators.len()));
        }
        if self.ranges.contains(&0) {
            return bad("ranges must be positive".into());
        }
        if self.codes.iter().any(|c| c.len() != self.generators.len()) {
            return bad("code length differs from the number of generators".into());
        }
        if self.directions.len() != self.codes.len() {
            return bad("one direction per code required".into());
        }
        Ok(())
    }

    /// Number of lattice tuples, `prod k_i`, saturating.
    pub fn lattice_size(&self) -> u64 {
        self.ranges.iter().fold(1u64, |a, &k| a.saturating_mul(k as u64))
    }

    /// Largest `|gauge(u) - 1|` over the stored directions.
    pub fn unit_residual(&self, norm: &NormOracle) -> f64 {
        self.directions
            .iter()
            .map(|u| (norm.gauge(u) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest Euclidean gap between a stored direction and its recomputed code image.
    pub fn code_residual(&self) -> f64 {
        self.codes
            .iter()
            .zip(&self.directions)
            .map(|(c, u)| dist2(&realize(&self.generators, c, self.d), u))
            .fold(0.0, f64::max)
    }
}

fn realize(generators: &[Vec<f64>], code: &[u32], d: usize) -> Vec<f64> {
    let mut u = vec![0.0; d];
    for (g, &c) in generators.iter().zip(code) {
        if c != 0 {
            u.iter_mut().zip(g).for_each(|(a, b)| *a += c as f64 * b);
        }
    }
    u
}

/// `(2, ..., 2, m, ..., m, m^2, ..., m^2)` with `m`, `d - 1`, `d - 1` entries.
pub fn proposition_ranges(d: usize, m: usize) -> Vec<u32> {
    let mut r = vec![2u32; m];
    r.extend(std::iter::repeat_n(m as u32, d - 1));
    r.extend(std::iter::repeat_n((m * m) as u32, d - 1));
    r
}

/// `e_j` for every `j`, then `e_j + e_{m+i} + j e_{m+d-1+i}` ordered by `j`, then `i`.
pub fn proposition_codes(d: usize, m: usize) -> Vec<Vec<u32>> {
    let n = m + 2 * (d - 1);
    let mut codes = Vec::with_capacity(d * m);
    for j in 0..m {
        let mut c = vec![0u32; n];
        c[j] = 1;
        codes.push(c);
    }
    for j in 0..m {
        for i in 0..d - 1 {
            let mut c = vec![0u32; n];
            c[j] = 1;
            c[m + i] = 1;
            c[m + d - 1 + i] = (j + 1) as u32;
            codes.push(c);
        }
    }
    codes
}

/// Generator system `(p_1..p_m, -t_i w_i, -lambda t_i w_i)` with certified unit directions.
pub fn assemble_generators(
    norm: &NormOracle,
    m: usize,
    witness: &ApWitness,
    tol: &Tolerances,
) -> Result<GapSpec, GeneralError> {
    let d = norm.dim();
    if witness.points.len() != m || witness.ws.len() != d - 1 || witness.t.len() != d - 1 {
        return Err(GeneralError::InvalidSpec("witness does not match (d, m)".into()));
    }
    let mut generators = witness.points.clone();
    for (ti, w) in witness.t.iter().zip(&witness.ws) {
        generators.push(w.iter().map(|v| -ti * v).collect());
    }
    for (ti, w) in witness.t.iter().zip(&witness.ws) {
        generators.push(w.iter().map(|v| -witness.lambda * ti * v).collect());
    }
    let provenance = Provenance {
        norm: Some(norm.name().to_string()),
        seed: None,
        lambda: Some(witness.lambda),
        t: Some(witness.t.clone()),
    };
    let spec = GapSpec::from_parts(
        SpecKind::Proposition,
        d,
        m,
        generators,
        proposition_ranges(d, m),
        proposition_codes(d, m),
        Some(provenance),
    );
    for (index, u) in spec.directions.iter().enumerate() {
        let gauge = norm.gauge(u);
        if (gauge - 1.0).abs() > tol.eps_bnd {
            return Err(GeneralError::UnitCertificateFailed { index, gauge });
        }
    }
    Ok(spec)
}

/// Seeds, searches and assembles the generator system for `(norm, m)` in the standard frame.
pub fn proposition_spec(norm: &NormOracle, m: usize, seed: u64, cfg: &ApConfig, tol: &Tolerances) -> Result<GapSpec, GeneralError> {
    let frame = Frame::standard(norm.dim());
    let mut last = None;
    // Retry with fresh seeds when a witness misses the unit certificate.
    for attempt in 0..4u64 {
        let s = if attempt == 0 { seed } else { split_seed(seed, 1000 + attempt) };
        let witness = find_ap_points(norm, &frame, m, s, cfg, tol)?;
        match assemble_generators(norm, m, &witness, tol) {
            Ok(mut spec) => {
                spec.provenance.seed = Some(seed);
                return Ok(spec);
            }
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum OverlapCertificate {
    Ok { count: usize },
    /// `case` numbers follow the proof: 1 opposite signs, 2 two `p`'s,
    /// 3 a `p` and a `q`, 4 `q_ij` and `q_ij'`, 5 `q_ij` and `q_i'j'`.
    Violation { case: u8, indices: [(usize, Sign); 2] },
}

impl OverlapCertificate {
    pub fn is_ok(&self) -> bool {
        matches!(self, OverlapCertificate::Ok { .. })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Role {
    P,
    Q(usize),
    Other,
}

fn role(spec: &GapSpec, idx: usize) -> Role {
    match spec.kind {
        SpecKind::Custom => Role::Other,
        _ if idx < spec.m => Role::P,
        SpecKind::Proposition => Role::Q((idx - spec.m) % (spec.d - 1)),
        SpecKind::Warmup => Role::Q(0),
    }
}

/// Checks that the `2|U|` vectors `+-u` are pairwise separated by more than `1e-8`.
pub fn verify_non_overlapping(spec: &GapSpec) -> OverlapCertificate {
    let n = spec.directions.len();
    let signed = |i: usize, s: Sign| -> Vec<f64> {
        let u = &spec.directions[i];
        match s {
            Sign::Plus => u.clone(),
            Sign::Minus => u.iter().map(|v| -v).collect(),
        }
    };
    for a in 0..n {
        for b in a..n {
            for (sa, sb) in [(Sign::Plus, Sign::Plus), (Sign::Plus, Sign::Minus)] {
                if a == b && sa == sb {
                    continue;
                }
                if dist2(&signed(a, sa), &signed(b, sb)) > SEPARATION {
                    continue;
                }
                let case = if sa != sb {
                    1
                } else {
                    match (role(spec, a), role(spec, b)) {
                        (Role::P, Role::Q(_)) | (Role::Q(_), Role::P) => 3,
                        (Role::Q(i), Role::Q(k)) if i == k => 4,
                        (Role::Q(_), Role::Q(_)) => 5,
                        _ => 2,
                    }
                };
                return OverlapCertificate::Violation {
                    case,
                    indices: [(a, sa), (b, sb)],
                };
            }
        }
    }
    OverlapCertificate::Ok { count: 2 * n }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn phi_on_the_sphere_is_twice_the_coordinates() {
        let e = NormOracle::euclidean(3);
        let f = Frame::standard(3);
        let x = BoundaryPoint::new(&e, vec![0.6, 0.0, 0.8]).unwrap();
        let phi = phi_map(&e, &x, &f.ws, &tol()).unwrap();
        assert!((phi[0] - 1.2).abs() < 1e-12 && phi[1] == 0.0);
        let x = BoundaryPoint::new(&e, vec![0.36, 0.48, 0.8]).unwrap();
        let phi = phi_map(&e, &x, &f.ws, &tol()).unwrap();
        assert!((phi[0] - 0.72).abs() < 1e-12 && (phi[1] - 0.96).abs() < 1e-12);
    }

    #[test]
    fn phi_is_symmetric_on_l4_diagonal() {
        let n = NormOracle::lp(3, 4.0);
        let x = boundary_point(&n, &[1.0, 1.0, 1.0]).unwrap();
        let phi = phi_map(&n, &x, &Frame::standard(3).ws, &tol()).unwrap();
        assert!((phi[0] - phi[1]).abs() < 1e-10);
        // Oracle: x - s e1 = (a - s, a, a) on the sphere means (s - a)^4 = a^4, s = 2a.
        assert!((phi[0] - 2.0 * x.coords()[0]).abs() < 1e-10);
    }

    #[test]
    fn frame_completion() {
        let f = Frame::new(vec![vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0]]).unwrap();
        assert!((norm2(&f.wd) - 1.0).abs() < 1e-14);
        for w in &f.ws {
            assert!(dot(w, &f.wd).abs() < 1e-14);
        }
        assert!(Frame::new(vec![vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]]).is_err());
        assert_eq!(Frame::standard(2).wd, vec![0.0, 1.0]);
    }

    #[test]
    fn seed_sampler_postconditions() {
        let e = NormOracle::euclidean(3);
        let f = Frame::standard(3);
        let cfg = SeedConfig {
            eps_coord: 0.1,
            eta: 0.1,
            budget: 100_000,
        };
        let (x, t) = seed_target(&e, &f, &cfg, 42, &tol()).unwrap();
        assert!(x.coords()[2] >= 0.1);
        assert!(t.iter().all(|v| v.abs() >= 0.1));
        assert!((t[0] - 2.0 * x.coords()[0]).abs() < 1e-12);

        let e2 = NormOracle::euclidean(2);
        let (x, t) = seed_target(&e2, &Frame::standard(2), &SeedConfig::default(), 3, &tol()).unwrap();
        assert!(x.coords()[1] > 1e-3 && t[0].abs() >= 1e-3);

        let none = SeedConfig { budget: 0, ..SeedConfig::default() };
        assert_eq!(
            seed_target(&e, &f, &none, 1, &tol()),
            Err(GeneralError::SeedExhausted { budget: 0 })
        );
    }

    #[test]
    fn newton_inverts_phi_on_the_sphere() {
        let e = NormOracle::euclidean(3);
        let f = Frame::standard(3);
        let init = boundary_point(&e, &[0.21, 0.21, 0.95]).unwrap();
        let p = solve_on_boundary(&e, &f, &[0.42, 0.42], &init, &NewtonOptions::default(), &tol()).unwrap();
        let expected = [0.21, 0.21, (1.0f64 - 0.0882).sqrt()];
        assert!(dist2(p.coords(), &expected) < 1e-10, "{:?}", p.coords());

        let e2 = NormOracle::euclidean(2);
        let init = boundary_point(&e2, &[0.3, 0.9]).unwrap();
        let p = solve_on_boundary(&e2, &Frame::standard(2), &[1.0], &init, &NewtonOptions::default(), &tol()).unwrap();
        assert!(dist2(p.coords(), &[0.5, 3f64.sqrt() / 2.0]) < 1e-10);
    }

    #[test]
    fn newton_reports_unreachable_targets() {
        let e = NormOracle::euclidean(3);
        let init = boundary_point(&e, &[0.21, 0.21, 0.95]).unwrap();
        let r = solve_on_boundary(&e, &Frame::standard(3), &[5.0, 5.0], &init, &NewtonOptions::default(), &tol());
        assert!(matches!(r, Err(GeneralError::NoConvergence { .. })));
    }

    #[test]
    fn explicit_progression_on_the_sphere() {
        let e = NormOracle::euclidean(3);
        let f = Frame::standard(3);
        let init = boundary_point(&e, &[0.2, 0.2, 0.9]).unwrap();
        let w = find_ap_points_at(&e, &f, 4, &[0.4, 0.4], 0.05, &init, &ApConfig::default(), &tol()).unwrap();
        for (k, p) in w.points.iter().enumerate() {
            let c = (1.0 + 0.05 * (k + 1) as f64) * 0.2;
            let expected = [c, c, (1.0 - 2.0 * c * c).sqrt()];
            assert!(dist2(p, &expected) < 1e-8);
        }
        assert!(w.phi_residual(&e, &tol()).unwrap() <= 1e-9);
    }

    #[test]
    fn witness_invariants_hold() {
        let tol = tol();
        for (norm, m) in [(NormOracle::euclidean(2), 1), (NormOracle::lp(3, 3.0), 4)] {
            let f = Frame::standard(norm.dim());
            let w = find_ap_points(&norm, &f, m, 11, &ApConfig::default(), &tol).unwrap();
            assert_eq!(w.points.len(), m);
            assert!(w.t.iter().all(|v| v.abs() >= 1e-3));
            assert!(w.points.iter().all(|p| dot(p, &f.wd) > 1e-3));
            assert!(w.phi_residual(&norm, &tol).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn proposition_layout() {
        assert_eq!(proposition_ranges(2, 3), vec![2, 2, 2, 3, 9]);
        let codes = proposition_codes(3, 4);
        assert_eq!(codes.len(), 12);
        assert_eq!(codes[4 + 2 * 2 + 1], vec![0, 0, 1, 0, 0, 1, 0, 3]);
    }

    #[test]
    fn assembled_spec_for_l3() {
        let n = NormOracle::lp(3, 3.0);
        let tol = tol();
        let spec = proposition_spec(&n, 4, 5, &ApConfig::default(), &tol).unwrap();
        assert_eq!(spec.generators.len(), 4 + 4);
        assert_eq!(spec.directions.len(), 12);
        assert!(spec.unit_residual(&n) <= tol.eps_bnd);
        assert!(spec.code_residual() <= 1e-10);
        assert_eq!(verify_non_overlapping(&spec), OverlapCertificate::Ok { count: 24 });
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<GapSpec>(&json).unwrap(), spec);
    }

    #[test]
    fn overlap_cases() {
        let ok = GapSpec::custom(
            vec![vec![0.0, 1.0], vec![0.6, 0.8]],
            vec![2, 2],
            vec![vec![1, 0], vec![0, 1]],
        )
        .unwrap();
        assert!(verify_non_overlapping(&ok).is_ok());
        let anti = GapSpec::custom(
            vec![vec![0.6, 0.8], vec![-0.6, -0.8]],
            vec![2, 2],
            vec![vec![1, 0], vec![0, 1]],
        )
        .unwrap();
        assert!(matches!(verify_non_overlapping(&anti), OverlapCertificate::Violation { case: 1, .. }));

        let mut spec = GapSpec::from_parts(
            SpecKind::Proposition,
            3,
            2,
            vec![vec![0.0; 3]; 6],
            proposition_ranges(3, 2),
            proposition_codes(3, 2),
            None,
        );
        let dirs = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.6, 0.8, 0.0],
            [0.0, 0.6, 0.8],
            [0.8, 0.0, 0.6],
        ];
        let reset = |spec: &mut GapSpec| {
            spec.directions = dirs.iter().map(|d| d.to_vec()).collect();
        };
        reset(&mut spec);
        assert!(verify_non_overlapping(&spec).is_ok());
        let mut expect = |a: usize, b: usize, case: u8| {
            reset(&mut spec);
            spec.directions[b] = spec.directions[a].clone();
            match verify_non_overlapping(&spec) {
                OverlapCertificate::Violation { case: c, .. } => assert_eq!(c, case, "{a} {b}"),
                ok => panic!("{ok:?}"),
            }
        };
        // indices: 0, 1 are p's; 2 + 2j + i is q_{i, j}
        expect(0, 1, 2);
        expect(0, 3, 3);
        expect(2, 4, 4);
        expect(2, 3, 5);
    }
}
