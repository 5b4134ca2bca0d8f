//! GAP point sets and unit-distance counting.

use std::hash::Hasher;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet, FxHasher};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::general::{GapSpec, SpecKind};
use crate::norm::NormOracle;
use crate::Tolerances;

pub const DEFAULT_CAP: u64 = 1 << 24;
pub const PAIRWISE_LIMIT: usize = 20_000;
/// Grid cells are this many dedup radii wide.
const CELL_FACTOR: f64 = 1024.0;
/// Merges closer than this many radii are reported as near-collisions.
const NEAR_FACTOR: f64 = 10.0;
const NONE: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GapError {
    #[error("GAP has {size} lattice tuples, above the cap of {cap}")]
    Overflow { size: u64, cap: u64 },
    #[error("pairwise counting is quadratic; {n} points exceed the limit of {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
}

/// Spatial hash over cells of side `1024 tau`. Each cell keeps an intrusive
/// linked list of point indices.
#[derive(Clone, Debug)]
struct PointIndex {
    cell: f64,
    heads: FxHashMap<u64, u32>,
    next: Vec<u32>,
}

impl PointIndex {
    fn new(tau: f64, capacity: usize) -> Self {
        let mut heads = FxHashMap::default();
        heads.reserve(capacity);
        PointIndex {
            cell: tau * CELL_FACTOR,
            heads,
            next: Vec::with_capacity(capacity),
        }
    }

    fn key_of(cells: &[i64]) -> u64 {
        let mut h = FxHasher::default();
        for c in cells {
            h.write_i64(*c);
        }
        h.finish()
    }

    fn insert(&mut self, x: &[f64], id: u32) {
        let cells: Vec<i64> = x.iter().map(|v| (v / self.cell).floor() as i64).collect();
        let key = Self::key_of(&cells);
        let prev = self.heads.insert(key, id).unwrap_or(NONE);
        debug_assert_eq!(self.next.len(), id as usize);
        self.next.push(prev);
    }

    /// Calls `f` on every stored index whose cell could hold a point within
    /// `r` of `x`. Only axes where `x` sits within `r` of a cell face get a
    /// neighbouring cell probed.
    fn for_candidates(&self, x: &[f64], r: f64, mut f: impl FnMut(u32)) {
        let d = x.len();
        let mut base = Vec::with_capacity(d);
        let mut extra = Vec::with_capacity(d);
        for v in x {
            let s = v / self.cell;
            let c = s.floor();
            base.push(c as i64);
            let frac = (s - c) * self.cell;
            extra.push(if frac < r {
                -1
            } else if self.cell - frac < r {
                1
            } else {
                0
            });
        }
        let active: Vec<usize> = (0..d).filter(|&i| extra[i] != 0).collect();
        let mut cells = base.clone();
        for mask in 0u32..(1 << active.len()) {
            for (bit, &axis) in active.iter().enumerate() {
                cells[axis] = base[axis] + if mask >> bit & 1 == 1 { extra[axis] } else { 0 };
            }
            if let Some(&head) = self.heads.get(&Self::key_of(&cells)) {
                let mut i = head;
                while i != NONE {
                    f(i);
                    i = self.next[i as usize];
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaterializeStats {
    pub generated: u64,
    pub merged: u64,
    /// Points that survived but had a neighbour in `(tau, 10 tau]`.
    pub near_collisions: u64,
}

/// Points pairwise more than `tau` apart, with a lookup index.
#[derive(Clone, Debug)]
pub struct PointSet {
    d: usize,
    coords: Vec<f64>,
    tau: f64,
    index: PointIndex,
    origin_spec: Option<GapSpec>,
    stats: MaterializeStats,
}

impl PointSet {
    pub fn new(d: usize, tau: f64) -> Self {
        Self::with_capacity(d, tau, 0)
    }

    fn with_capacity(d: usize, tau: f64, n: usize) -> Self {
        PointSet {
            d,
            coords: Vec::with_capacity(n * d),
            tau,
            index: PointIndex::new(tau, n),
            origin_spec: None,
            stats: MaterializeStats::default(),
        }
    }

    /// Builds a set from arbitrary points, merging any within `tau` of an earlier one.
    pub fn from_points<I, P>(d: usize, tau: f64, points: I) -> Self
    where
        I: IntoIterator<Item = P>,
        P: AsRef<[f64]>,
    {
        let mut ps = PointSet::new(d, tau);
        for p in points {
            ps.insert(p.as_ref());
        }
        ps
    }

    /// Inserts `x` unless a stored point lies within `tau`. Returns whether it was added.
    pub fn insert(&mut self, x: &[f64]) -> bool {
        assert_eq!(x.len(), self.d, "point dimension");
        self.stats.generated += 1;
        let (tau, near) = (self.tau, self.tau * NEAR_FACTOR);
        let mut best = f64::INFINITY;
        self.index.for_candidates(x, near, |i| {
            let i = i as usize;
            let q = &self.coords[i * self.d..(i + 1) * self.d];
            let dist = q.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            best = best.min(dist);
        });
        if best <= tau {
            self.stats.merged += 1;
            return false;
        }
        if best <= near {
            self.stats.near_collisions += 1;
        }
        let id = self.len() as u32;
        self.coords.extend_from_slice(x);
        self.index.insert(x, id);
        true
    }

    /// Whether some stored point lies within `tau` of `x`.
    pub fn contains(&self, x: &[f64]) -> bool {
        let mut hit = false;
        self.index.for_candidates(x, self.tau, |i| {
            if !hit {
                let i = i as usize;
                let q = &self.coords[i * self.d..(i + 1) * self.d];
                hit = q.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() <= self.tau;
            }
        });
        hit
    }

    pub fn len(&self) -> usize {
        if self.d == 0 {
            0
        } else {
            self.coords.len() / self.d
        }
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.d.max(1))
    }

    pub fn origin_spec(&self) -> Option<&GapSpec> {
        self.origin_spec.as_ref()
    }

    pub fn stats(&self) -> MaterializeStats {
        self.stats
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bbox(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.d];
        let mut hi = vec![f64::NEG_INFINITY; self.d];
        for p in self.points() {
            for k in 0..self.d {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Euclidean diameter of the bounding box.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bbox();
        lo.iter().zip(&hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
    }
}

/// Enumerates every lattice tuple of `spec` and keeps one representative per `tau`-ball.
pub fn materialize(spec: &GapSpec, tau: f64, cap: u64) -> Result<PointSet, GapError> {
    spec.validate().map_err(|e| GapError::InvalidInstance(e.to_string()))?;
    let size = spec.lattice_size();
    if size > cap {
        return Err(GapError::Overflow { size, cap });
    }
    let d = spec.d;
    let mut ps = PointSet::with_capacity(d, tau, size as usize);
    let mut a = vec![0u32; spec.ranges.len()];
    let mut x = vec![0.0; d];
    for _ in 0..size {
        x.iter_mut().for_each(|v| *v = 0.0);
        for (g, &ai) in spec.generators.iter().zip(&a) {
            if ai != 0 {
                let s = ai as f64;
                x.iter_mut().zip(g).for_each(|(v, gi)| *v += s * gi);
            }
        }
        ps.insert(&x);
        // mixed-radix increment
        for (ai, &k) in a.iter_mut().zip(&spec.ranges) {
            *ai += 1;
            if *ai < k {
                break;
            }
            *ai = 0;
        }
    }
    ps.origin_spec = Some(spec.clone());
    Ok(ps)
}

/// Exact rational in lowest terms, with a float rendering for readers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalValue {
    pub numer: String,
    pub denom: String,
    pub approx: f64,
}

impl From<&BigRational> for RationalValue {
    fn from(r: &BigRational) -> Self {
        RationalValue {
            numer: r.numer().to_string(),
            denom: r.denom().to_string(),
            approx: r.to_f64().unwrap_or(f64::NAN),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionCount {
    pub direction: Vec<f64>,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitDistanceReport {
    pub set_size: u64,
    pub per_direction: Vec<DirectionCount>,
    pub total: u64,
    /// `|S| sum_c prod_i (1 - c_i / k_i)`.
    pub lemma_bound: Option<RationalValue>,
    pub lemma_bound_ceil: Option<u64>,
    /// `ceil(d (m - 2) |S| / 2)`, clamped at zero.
    pub prop_bound: Option<u64>,
    pub pairwise_total: Option<u64>,
    /// `total / (n log2 n)`.
    pub ratio: f64,
    pub merged: u64,
    pub near_collisions: u64,
    pub tolerances: Tolerances,
}

impl UnitDistanceReport {
    pub fn meets_lemma_bound(&self) -> bool {
        self.lemma_bound_ceil.is_none_or(|b| self.total >= b)
    }

    pub fn meets_prop_bound(&self) -> bool {
        self.prop_bound.is_none_or(|b| self.total >= b)
    }
}

pub fn n_log2_n(n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    n as f64 * (n as f64).log2()
}

/// Ceiling of a non-negative rational.
pub fn ceil_u64(r: &BigRational) -> u64 {
    r.ceil().to_integer().to_u64().unwrap_or(0)
}

/// `ceil(d (m - 2) s / 2)`, or 0 when `m < 2`.
pub fn proposition_bound(d: usize, m: usize, s: u64) -> u64 {
    if m <= 2 {
        return 0;
    }
    let num = d as u128 * (m as u128 - 2) * s as u128;
    num.div_ceil(2) as u64
}

/// Counts `x` in `ps` with `x + u` in `ps`, for each `u`.
pub fn count_directional(ps: &PointSet, directions: &[Vec<f64>], tol: &Tolerances) -> UnitDistanceReport {
    let per: Vec<u64> = directions
        .par_iter()
        .map(|u| {
            ps.coords
                .par_chunks(ps.d.max(1) * 4096)
                .map(|chunk| {
                    let mut y = vec![0.0; ps.d];
                    chunk
                        .chunks_exact(ps.d)
                        .filter(|x| {
                            y.iter_mut().zip(x.iter().zip(u)).for_each(|(v, (a, b))| *v = a + b);
                            ps.contains(&y)
                        })
                        .count() as u64
                })
                .sum()
        })
        .collect();
    let total = per.iter().sum();
    let set_size = ps.len() as u64;
    let (mut lemma_bound, mut lemma_bound_ceil, mut prop_bound) = (None, None, None);
    if let Some(spec) = &ps.origin_spec {
        let b = grid_bound(spec, set_size);
        lemma_bound_ceil = Some(ceil_u64(&b));
        lemma_bound = Some(RationalValue::from(&b));
        if spec.kind == SpecKind::Proposition {
            prop_bound = Some(proposition_bound(spec.d, spec.m, set_size));
        }
    }
    UnitDistanceReport {
        set_size,
        per_direction: directions
            .iter()
            .zip(&per)
            .map(|(u, &count)| DirectionCount {
                direction: u.clone(),
                count,
            })
            .collect(),
        total,
        lemma_bound,
        lemma_bound_ceil,
        prop_bound,
        pairwise_total: None,
        ratio: if set_size >= 2 { total as f64 / n_log2_n(set_size) } else { 0.0 },
        merged: ps.stats.merged,
        near_collisions: ps.stats.near_collisions,
        tolerances: *tol,
    }
}

/// Unordered pairs `{x, y}` with `|gauge(x - y) - 1| <= eps_unit`.
pub fn count_pairwise(ps: &PointSet, norm: &NormOracle, eps_unit: f64) -> Result<u64, GapError> {
    let n = ps.len();
    if n > PAIRWISE_LIMIT {
        return Err(GapError::TooLarge { n, limit: PAIRWISE_LIMIT });
    }
    if norm.dim() != ps.d {
        return Err(GapError::InvalidInstance(format!("norm on R^{}, points in R^{}", norm.dim(), ps.d)));
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let x = ps.point(i);
            let mut diff = vec![0.0; ps.d];
            let mut c = 0u64;
            for j in i + 1..n {
                diff.iter_mut().zip(x.iter().zip(ps.point(j))).for_each(|(v, (a, b))| *v = a - b);
                if (norm.gauge(&diff) - 1.0).abs() <= eps_unit {
                    c += 1;
                }
            }
            c
        })
        .sum())
}

/// `(|X + [0, k-c-1] x|, |X + [0, k-1] x|)` by exact enumeration.
pub fn sumset_sizes(set: &[Vec<i64>], x: &[i64], k: u32, c: u32) -> Result<(usize, usize), GapError> {
    if c < 2 || c > k {
        return Err(GapError::InvalidInstance(format!("need 2 <= c <= k, got c = {c}, k = {k}")));
    }
    if set.is_empty() {
        return Err(GapError::InvalidInstance("X is empty".into()));
    }
    if set.iter().any(|p| p.len() != x.len()) {
        return Err(GapError::InvalidInstance("X and x live in different dimensions".into()));
    }
    let span = |len: u32| -> usize {
        let mut seen: FxHashSet<Vec<i64>> = FxHashSet::default();
        for p in set {
            for a in 0..len as i64 {
                seen.insert(p.iter().zip(x).map(|(u, v)| u + a * v).collect());
            }
        }
        seen.len()
    };
    Ok((span(k - c), span(k)))
}

/// Whether `|X + [0, k-c-1] x| >= (1 - c/k) |X + [0, k-1] x|`.
pub fn sumset_ratio_check(set: &[Vec<i64>], x: &[i64], k: u32, c: u32) -> Result<bool, GapError> {
    let (small, large) = sumset_sizes(set, x, k, c)?;
    Ok(k as u128 * small as u128 >= (k - c) as u128 * large as u128)
}

/// `size * sum_{c in U} prod_i max(0, 1 - c_i / k_i)` in exact arithmetic.
pub fn grid_bound(spec: &GapSpec, size: u64) -> BigRational {
    let mut sum = BigRational::zero();
    for code in &spec.codes {
        let mut term = BigRational::from_integer(BigInt::from(1));
        for (&c, &k) in code.iter().zip(&spec.ranges) {
            if c == 0 {
                continue;
            }
            if c >= k {
                term = BigRational::zero();
                break;
            }
            term *= BigRational::new(BigInt::from(k - c), BigInt::from(k));
        }
        sum += term;
    }
    sum * BigRational::from_integer(BigInt::from(size))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::general::GapSpec;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn square() -> GapSpec {
        GapSpec::custom(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![2, 2],
            vec![vec![1, 0], vec![0, 1]],
        )
        .unwrap()
    }

    #[test]
    fn unit_square() {
        let ps = materialize(&square(), 1e-9, DEFAULT_CAP).unwrap();
        assert_eq!(ps.len(), 4);
        let r = count_directional(&ps, &square().directions, &tol());
        assert_eq!(r.per_direction.iter().map(|d| d.count).collect::<Vec<_>>(), vec![2, 2]);
        assert_eq!(r.total, 4);
        assert_eq!(r.lemma_bound_ceil, Some(4));
        assert_eq!(count_pairwise(&ps, &NormOracle::euclidean(2), 1e-9).unwrap(), 4);
        assert_eq!(grid_bound(&square(), 4), BigRational::from_integer(4.into()));
    }

    #[test]
    fn forced_collision() {
        let spec = GapSpec::custom(vec![vec![1.0, 0.0], vec![1.0, 0.0]], vec![2, 2], vec![]).unwrap();
        let ps = materialize(&spec, 1e-9, DEFAULT_CAP).unwrap();
        assert_eq!(ps.len(), 3);
        assert_eq!(ps.stats().merged, 1);
    }

    #[test]
    fn overflow_cap() {
        let spec = GapSpec::custom(vec![vec![1.0], vec![0.5]], vec![1000, 1000], vec![]).unwrap();
        assert_eq!(
            materialize(&spec, 1e-9, 1000).unwrap_err(),
            GapError::Overflow { size: 1_000_000, cap: 1000 }
        );
    }

    #[test]
    fn near_neighbours_across_cell_faces() {
        // Pairs straddling a cell boundary must still merge.
        let cell = 1e-9 * CELL_FACTOR;
        let a = [3.0 * cell - 2e-10, 0.0];
        let b = [3.0 * cell + 2e-10, 0.0];
        let ps = PointSet::from_points(2, 1e-9, [a, b]);
        assert_eq!(ps.len(), 1);
        let c = [-2e-10, -2e-10];
        let e = [2e-10, 2e-10];
        let ps = PointSet::from_points(2, 1e-9, [c, e]);
        assert_eq!(ps.len(), 1);
        let ps = PointSet::from_points(2, 1e-9, [[0.0, 0.0], [5e-9, 0.0]]);
        assert_eq!((ps.len(), ps.stats().near_collisions), (2, 1));
    }

    #[test]
    fn pairwise_basics() {
        let ps = PointSet::from_points(2, 1e-9, [[0.0, 0.0], [0.6, 0.8]]);
        assert_eq!(count_pairwise(&ps, &NormOracle::euclidean(2), 1e-9).unwrap(), 1);
        let many = PointSet::from_points(1, 1e-9, (0..20_001).map(|i| [i as f64]));
        assert!(matches!(
            count_pairwise(&many, &NormOracle::euclidean(1), 1e-9),
            Err(GapError::TooLarge { .. })
        ));
    }

    #[test]
    fn sumset_examples() {
        assert_eq!(sumset_sizes(&[vec![0]], &[1], 4, 2).unwrap(), (2, 4));
        assert!(sumset_ratio_check(&[vec![0]], &[1], 4, 2).unwrap());
        assert!(sumset_ratio_check(&[vec![0], vec![1]], &[1], 4, 1).is_err());
        assert!(sumset_ratio_check(&[], &[1], 4, 2).is_err());
        assert!(sumset_ratio_check(&[vec![0]], &[1], 4, 4).unwrap());
    }

    #[test]
    fn proposition_bound_rounding() {
        assert_eq!(proposition_bound(3, 5, 7), 32); // 63 / 2
        assert_eq!(proposition_bound(2, 2, 100), 0);
        assert_eq!(proposition_bound(2, 1, 100), 0);
    }
}
