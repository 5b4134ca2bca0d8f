//! Assembling `n`-point sets from translated copies of the GAP sets `S_m`.
//!
//! With `s_m = |S_m|` and `s_0 = 1`, any `n` splits greedily as
//! `n = s_{m_1} + ... + s_{m_r}` with `m_1 >= ... >= m_r`. The union of
//! generically translated copies `x_i + S_{m_i}` has exactly `n` points and at
//! least `t_{m_1} + ... + t_{m_r}` unit distances.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gap::{count_directional, count_pairwise, materialize, n_log2_n, GapError, PointSet, DEFAULT_CAP};
use crate::general::{proposition_spec, split_seed, ApConfig, GapSpec, GeneralError};
use crate::norm::{require_strictly_convex, strict_convexity_probe, ConvexityVerdict, NormError, NormOracle};
use crate::Tolerances;

const OFFSET_RETRIES: usize = 100;
const BOX_SCALE: f64 = 100.0;
/// Copies and degenerate points are kept this many dedup radii apart.
const GAP_FACTOR: f64 = 10.0;
const RATIO_DROP: f64 = 0.02;
pub const CACHE_ENV: &str = "UDF_CACHE_DIR";
const DEGENERATE_PROBE_SEED: u64 = 1;

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("n must be positive")]
    EmptyTarget,
    #[error("the degenerate construction needs an even n, got {0}")]
    OddTarget(usize),
    #[error("no admissible offset for copy {copy} after {retries} draws")]
    OffsetExhausted { copy: usize, retries: usize },
    #[error("composed set has {got} points, expected {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("size table for m = {m} says {expected} points, materialization gave {got}")]
    TableMismatch { m: usize, expected: u64, got: u64 },
    #[error("no boundary segment found; the norm looks strictly convex")]
    NotDegenerate,
    #[error("boundary segment of length {length:e} cannot hold {n} points at spacing {spacing:e}")]
    SegmentTooShort { length: f64, n: usize, spacing: f64 },
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    General(#[from] GeneralError),
    #[error(transparent)]
    Gap(#[from] GapError),
    #[error("size-table cache: {0}")]
    Cache(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeEntry {
    pub m: usize,
    /// `|S_m|`
    pub s: u64,
    /// Certified unit distances in `S_m`.
    pub t: u64,
    pub seed: u64,
    pub lambda: Option<f64>,
    pub t_vec: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeTable {
    pub norm: String,
    pub d: usize,
    pub seed: u64,
    pub entries: Vec<SizeEntry>,
}

/// Seed used for `S_m` under the table seed `seed`.
pub fn spec_seed(seed: u64, m: usize) -> u64 {
    split_seed(seed, 0x5_0000 + m as u64)
}

/// Builds and certifies `S_m`. `m = 0` is the single point at the origin.
pub fn build_part(norm: &NormOracle, m: usize, seed: u64, tol: &Tolerances) -> Result<(Option<GapSpec>, PointSet), ComposeError> {
    if m == 0 {
        return Ok((None, PointSet::from_points(norm.dim(), tol.tau, [vec![0.0; norm.dim()]])));
    }
    let spec = proposition_spec(norm, m, spec_seed(seed, m), &ApConfig::default(), tol)?;
    let ps = materialize(&spec, tol.tau, DEFAULT_CAP)?;
    Ok((Some(spec), ps))
}

impl SizeTable {
    fn empty(norm: &NormOracle, seed: u64) -> Self {
        SizeTable {
            norm: norm.name().to_string(),
            d: norm.dim(),
            seed,
            entries: vec![SizeEntry {
                m: 0,
                s: 1,
                t: 0,
                seed,
                lambda: None,
                t_vec: None,
            }],
        }
    }

    pub fn sizes(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.s).collect()
    }

    /// Whether the table reaches past `n`, so that no larger `m` can matter.
    pub fn covers(&self, n: u64) -> bool {
        self.entries.last().is_some_and(|e| e.s > n)
    }

    /// Extends the table with `S_1, S_2, ...` until some `s_m` exceeds `n`.
    pub fn extend_to(&mut self, norm: &NormOracle, n: u64, tol: &Tolerances) -> Result<(), ComposeError> {
        while !self.covers(n) {
            let m = self.entries.len();
            let (spec, ps) = build_part(norm, m, self.seed, tol)?;
            let spec = spec.expect("m >= 1");
            let report = count_directional(&ps, &spec.directions, tol);
            self.entries.push(SizeEntry {
                m,
                s: ps.len() as u64,
                t: report.total,
                seed: spec_seed(self.seed, m),
                lambda: spec.provenance.lambda,
                t_vec: spec.provenance.t.clone(),
            });
        }
        Ok(())
    }

    pub fn build(norm: &NormOracle, seed: u64, n: u64, tol: &Tolerances) -> Result<Self, ComposeError> {
        let mut table = SizeTable::empty(norm, seed);
        table.extend_to(norm, n, tol)?;
        Ok(table)
    }

    pub fn cache_path(dir: &Path, key: &str, d: usize, seed: u64) -> PathBuf {
        let clean: String = key
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
            .collect();
        dir.join(format!("sizes-{clean}-d{d}-seed{seed}.json"))
    }

    /// Reads the cached table if present and consistent, extends it to `n`,
    /// and writes it back.
    pub fn load_or_build(
        norm: &NormOracle,
        seed: u64,
        n: u64,
        cache: Option<&CacheKey>,
        tol: &Tolerances,
    ) -> Result<Self, ComposeError> {
        let Some(cache) = cache else {
            return Self::build(norm, seed, n, tol);
        };
        let path = Self::cache_path(&cache.dir, &cache.key, norm.dim(), seed);
        let mut table = fs::read_to_string(&path)
            .ok()
            .and_then(|s| serde_json::from_str::<SizeTable>(&s).ok())
            .filter(|t| t.norm == norm.name() && t.d == norm.dim() && t.seed == seed && t.entries.first().is_some_and(|e| e.s == 1))
            .unwrap_or_else(|| SizeTable::empty(norm, seed));
        if !table.covers(n) {
            table.extend_to(norm, n, tol)?;
            fs::create_dir_all(&cache.dir).map_err(|e| ComposeError::Cache(e.to_string()))?;
            let json = serde_json::to_string_pretty(&table).map_err(|e| ComposeError::Cache(e.to_string()))?;
            fs::write(&path, json).map_err(|e| ComposeError::Cache(format!("{}: {e}", path.display())))?;
        }
        Ok(table)
    }
}

/// Where a size table is persisted and under which name.
#[derive(Clone, Debug)]
pub struct CacheKey {
    pub dir: PathBuf,
    pub key: String,
}

impl CacheKey {
    /// `UDF_CACHE_DIR`, if set.
    pub fn from_env(key: impl Into<String>) -> Option<CacheKey> {
        std::env::var_os(CACHE_ENV).map(|dir| CacheKey {
            dir: PathBuf::from(dir),
            key: key.into(),
        })
    }
}

/// Greedy split of `n` into table sizes: repeatedly the largest `m` with
/// `s_m` at most what remains. Requires `sizes[0] == 1`.
pub fn decompose(n: u64, sizes: &[u64]) -> Vec<usize> {
    assert_eq!(sizes.first(), Some(&1), "the table must start with s_0 = 1");
    let mut parts = Vec::new();
    let mut rest = n;
    let mut top = sizes.len() - 1;
    while rest > 0 {
        while sizes[top] > rest {
            top -= 1;
        }
        parts.push(top);
        rest -= sizes[top];
    }
    parts
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartReport {
    pub m: usize,
    pub offset: Vec<f64>,
    pub size: u64,
    pub total: u64,
    /// `t_m` from the size table.
    pub certified: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionReport {
    pub norm: String,
    pub d: usize,
    pub n: u64,
    pub seed: u64,
    pub decomposition: Vec<usize>,
    pub parts: Vec<PartReport>,
    /// Sum of within-copy directional counts.
    pub total: u64,
    /// `sum_i t_{m_i}`.
    pub certified_sum: u64,
    pub ratio: f64,
    pub target: f64,
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug)]
pub struct Composition {
    pub points: PointSet,
    pub report: CompositionReport,
    pub table: SizeTable,
}

fn boxes_apart(a: &(Vec<f64>, Vec<f64>), b: &(Vec<f64>, Vec<f64>), gap: f64) -> bool {
    (0..a.0.len()).any(|k| a.0[k] - b.1[k] > gap || b.0[k] - a.1[k] > gap)
}

fn shifted(bbox: &(Vec<f64>, Vec<f64>), x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        bbox.0.iter().zip(x).map(|(a, b)| a + b).collect(),
        bbox.1.iter().zip(x).map(|(a, b)| a + b).collect(),
    )
}

/// Union of translated copies of `S_{m_i}` with exactly `n` points.
pub fn compose_pointset(
    norm: &NormOracle,
    n: u64,
    seed: u64,
    cache: Option<&CacheKey>,
    tol: &Tolerances,
) -> Result<Composition, ComposeError> {
    if n == 0 {
        return Err(ComposeError::EmptyTarget);
    }
    require_strictly_convex(norm)?;
    let d = norm.dim();
    let table = SizeTable::load_or_build(norm, seed, n, cache, tol)?;
    let parts = decompose(n, &table.sizes());

    let mut sets: BTreeMap<usize, (Option<GapSpec>, PointSet)> = BTreeMap::new();
    for &m in &parts {
        if sets.contains_key(&m) {
            continue;
        }
        let (spec, ps) = build_part(norm, m, seed, tol)?;
        let expected = table.entries[m].s;
        if ps.len() as u64 != expected {
            return Err(ComposeError::TableMismatch { m, expected, got: ps.len() as u64 });
        }
        sets.insert(m, (spec, ps));
    }

    let side = BOX_SCALE * sets[&parts[0]].1.diameter().max(1.0);
    let gap = GAP_FACTOR * tol.tau;
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, 0xC0FF_EE00));
    let mut placed: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(parts.len());
    let mut offsets: Vec<Vec<f64>> = Vec::with_capacity(parts.len());
    for (copy, &m) in parts.iter().enumerate() {
        let bbox = sets[&m].1.bbox();
        let mut found = None;
        for _ in 0..OFFSET_RETRIES {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..side)).collect();
            let b = shifted(&bbox, &x);
            if placed.iter().all(|p| boxes_apart(p, &b, gap)) {
                found = Some((x, b));
                break;
            }
        }
        let (x, b) = found.ok_or(ComposeError::OffsetExhausted { copy, retries: OFFSET_RETRIES })?;
        placed.push(b);
        offsets.push(x);
    }

    let copies: Vec<(PointSet, u64)> = parts
        .par_iter()
        .zip(&offsets)
        .map(|(&m, x)| {
            let (spec, base) = &sets[&m];
            let moved = PointSet::from_points(d, tol.tau, base.points().map(|p| p.iter().zip(x).map(|(a, b)| a + b).collect::<Vec<f64>>()));
            let total = match spec {
                Some(s) => count_directional(&moved, &s.directions, tol).total,
                None => 0,
            };
            (moved, total)
        })
        .collect();

    let mut union = PointSet::new(d, tol.tau);
    for (ps, _) in &copies {
        for p in ps.points() {
            union.insert(p);
        }
    }
    if union.len() as u64 != n {
        return Err(ComposeError::SizeMismatch { expected: n as usize, got: union.len() });
    }
    let part_reports: Vec<PartReport> = parts
        .iter()
        .zip(&offsets)
        .zip(&copies)
        .map(|((&m, x), (ps, total))| PartReport {
            m,
            offset: x.clone(),
            size: ps.len() as u64,
            total: *total,
            certified: table.entries[m].t,
        })
        .collect();
    let total: u64 = part_reports.iter().map(|p| p.total).sum();
    let certified_sum = part_reports.iter().map(|p| p.certified).sum();
    let report = CompositionReport {
        norm: norm.name().to_string(),
        d,
        n,
        seed,
        decomposition: parts,
        parts: part_reports,
        total,
        certified_sum,
        ratio: if n >= 2 { total as f64 / n_log2_n(n) } else { 0.0 },
        target: d as f64 / 2.0,
        tolerances: *tol,
    };
    Ok(Composition {
        points: union,
        report,
        table,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub n: u64,
    pub total: u64,
    pub ratio: f64,
    pub target: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub norm: String,
    pub d: usize,
    pub seed: u64,
    pub rows: Vec<RatioRow>,
    /// Values of `n` where the ratio fell by more than 0.02 from the previous row.
    pub drops: Vec<u64>,
}

impl RatioReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,total,ratio,target\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.n, r.total, r.ratio, r.target));
        }
        out
    }
}

pub fn ratio_rows(reports: &[CompositionReport]) -> (Vec<RatioRow>, Vec<u64>) {
    let rows: Vec<RatioRow> = reports
        .iter()
        .map(|r| RatioRow {
            n: r.n,
            total: r.total,
            ratio: r.ratio,
            target: r.target,
        })
        .collect();
    let drops = rows
        .windows(2)
        .filter(|w| w[0].ratio - w[1].ratio > RATIO_DROP)
        .map(|w| w[1].n)
        .collect();
    (rows, drops)
}

pub fn ratio_report(
    norm: &NormOracle,
    n_list: &[u64],
    seed: u64,
    cache: Option<&CacheKey>,
    tol: &Tolerances,
) -> Result<RatioReport, ComposeError> {
    let reports = n_list
        .iter()
        .map(|&n| compose_pointset(norm, n, seed, cache, tol).map(|c| c.report))
        .collect::<Result<Vec<_>, _>>()?;
    let (rows, drops) = ratio_rows(&reports);
    Ok(RatioReport {
        norm: norm.name().to_string(),
        d: norm.dim(),
        seed,
        rows,
        drops,
    })
}

#[derive(Clone, Debug)]
pub struct DegenerateConstruction {
    pub points: PointSet,
    /// Midpoint of the boundary segment.
    pub x: Vec<f64>,
    /// Half of the segment; `x + s y` is a unit vector for `|s| <= 1`.
    pub y: Vec<f64>,
    pub count: u64,
}

/// Farthest `s` along `dir` from `base` with the gauge still at most `1 + 1e-12`.
fn extend_segment(norm: &NormOracle, base: &[f64], dir: &[f64]) -> f64 {
    let on = |s: f64| {
        let p: Vec<f64> = base.iter().zip(dir).map(|(a, b)| a + s * b).collect();
        norm.gauge(&p) <= 1.0 + 1e-12
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while on(hi) {
        lo = hi;
        hi *= 2.0;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            return lo;
        }
        if on(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// `n / 2` points on each of the segments `(0, y)` and `(x, x + y)`, where
/// `x + [-1, 1] y` lies on the unit sphere. Every cross pair is at unit distance.
pub fn degenerate_construction(
    norm: &NormOracle,
    n: usize,
    samples: usize,
    tol: &Tolerances,
) -> Result<DegenerateConstruction, ComposeError> {
    if n == 0 {
        return Err(ComposeError::EmptyTarget);
    }
    if n % 2 == 1 {
        return Err(ComposeError::OddTarget(n));
    }
    let ConvexityVerdict::SegmentFound { a, b } = strict_convexity_probe(norm, samples, DEGENERATE_PROBE_SEED) else {
        return Err(ComposeError::NotDegenerate);
    };
    let mid: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect();
    let len = a.iter().zip(&b).map(|(p, q)| (q - p) * (q - p)).sum::<f64>().sqrt();
    let dir: Vec<f64> = a.iter().zip(&b).map(|(p, q)| (q - p) / len).collect();
    let back: Vec<f64> = dir.iter().map(|v| -v).collect();
    let (up, down) = (extend_segment(norm, &mid, &dir), extend_segment(norm, &mid, &back));
    let half = 0.5 * (up + down);
    let center = 0.5 * (up - down);
    let x: Vec<f64> = mid.iter().zip(&dir).map(|(m, v)| m + center * v).collect();
    let y: Vec<f64> = dir.iter().map(|v| half * v).collect();

    let spacing = GAP_FACTOR * tol.tau;
    if 2.0 * half < n as f64 * spacing {
        return Err(ComposeError::SegmentTooShort { length: 2.0 * half, n, spacing });
    }
    let k = n / 2;
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..k {
        let s = (i + 1) as f64 / (k + 1) as f64;
        pts.push(y.iter().map(|v| s * v).collect());
        pts.push(x.iter().zip(&y).map(|(a, b)| a + s * b).collect());
    }
    let points = PointSet::from_points(norm.dim(), tol.tau, &pts);
    if points.len() != n {
        return Err(ComposeError::SizeMismatch { expected: n, got: points.len() });
    }
    let count = count_pairwise(&points, norm, tol.eps_unit)?;
    Ok(DegenerateConstruction { points, x, y, count })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greedy_decomposition() {
        let sizes = [1, 2, 5, 12];
        assert_eq!(decompose(20, &sizes), vec![3, 2, 1, 0]);
        assert_eq!(decompose(4, &sizes), vec![1, 1]);
        assert_eq!(decompose(1, &sizes), vec![0]);
        assert_eq!(decompose(24, &sizes), vec![3, 3]);
    }

    #[test]
    fn single_part_matches_single_spec() {
        let tol = Tolerances::default();
        let e = NormOracle::euclidean(2);
        let table = SizeTable::build(&e, 0, 216, &tol).unwrap();
        assert_eq!(table.sizes()[..4], [1, 2, 32, 216]);
        let c = compose_pointset(&e, 216, 0, None, &tol).unwrap();
        assert_eq!(c.report.decomposition, vec![3]);
        assert_eq!(c.points.len(), 216);
        let (spec, ps) = build_part(&e, 3, 0, &tol).unwrap();
        let direct = count_directional(&ps, &spec.unwrap().directions, &tol);
        assert_eq!(c.report.total, direct.total);
    }

    #[test]
    fn composition_meets_certified_sum() {
        let tol = Tolerances::default();
        let n = NormOracle::lp(2, 3.0);
        let c = compose_pointset(&n, 300, 4, None, &tol).unwrap();
        assert_eq!(c.points.len(), 300);
        assert!(c.report.total >= c.report.certified_sum);
        let sizes: u64 = c.report.decomposition.iter().map(|&m| c.table.entries[m].s).sum();
        assert_eq!(sizes, 300);
    }

    #[test]
    fn cache_round_trip() {
        let tol = Tolerances::default();
        let dir = std::env::temp_dir().join(format!("udf-cache-test-{}", std::process::id()));
        let key = CacheKey { dir: dir.clone(), key: "lp:2".into() };
        let e = NormOracle::euclidean(2);
        let a = SizeTable::load_or_build(&e, 3, 40, Some(&key), &tol).unwrap();
        let path = SizeTable::cache_path(&dir, "lp:2", 2, 3);
        assert!(path.exists());
        let b = SizeTable::load_or_build(&e, 3, 40, Some(&key), &tol).unwrap();
        assert_eq!(a, b);
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn errors() {
        let tol = Tolerances::default();
        let e = NormOracle::euclidean(2);
        assert!(matches!(compose_pointset(&e, 0, 0, None, &tol), Err(ComposeError::EmptyTarget)));
        assert!(matches!(
            compose_pointset(&NormOracle::lp(2, f64::INFINITY), 10, 0, None, &tol),
            Err(ComposeError::Norm(NormError::NotStrictlyConvex { .. }))
        ));
        assert!(matches!(degenerate_construction(&e, 10, 4096, &tol), Err(ComposeError::NotDegenerate)));
        assert!(matches!(
            degenerate_construction(&NormOracle::lp(2, 1.0), 7, 4096, &tol),
            Err(ComposeError::OddTarget(7))
        ));
    }

    #[test]
    fn square_and_diamond_facets() {
        let tol = Tolerances::default();
        let sq = degenerate_construction(&NormOracle::lp(2, f64::INFINITY), 20, 10_000, &tol).unwrap();
        assert!(sq.count >= 100);
        let dm = degenerate_construction(&NormOracle::lp(2, 1.0), 40, 10_000, &tol).unwrap();
        assert!(dm.count >= 400);
    }
}
