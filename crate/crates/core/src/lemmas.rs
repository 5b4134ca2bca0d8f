//! Seeded fuzzing of the two counting lemmas.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gap::{ceil_u64, count_directional, grid_bound, materialize, sumset_ratio_check, DEFAULT_CAP};
use crate::general::{verify_non_overlapping, GapSpec};
use crate::Tolerances;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SumsetInstance {
    pub set: Vec<Vec<i64>>,
    pub x: Vec<i64>,
    pub k: u32,
    pub c: u32,
}

impl SumsetInstance {
    /// `|X| <= 50`, `d <= 3`, `2 <= c <= k <= 12`, coordinates in `[-6, 6]`.
    pub fn random(rng: &mut impl Rng) -> Self {
        let d = rng.random_range(1..=3);
        let size = rng.random_range(1..=50);
        let set = (0..size)
            .map(|_| (0..d).map(|_| rng.random_range(-6..=6)).collect())
            .collect();
        let x = (0..d).map(|_| rng.random_range(-3..=3)).collect();
        let k = rng.random_range(2..=12);
        let c = rng.random_range(2..=k);
        SumsetInstance { set, x, k, c }
    }

    pub fn holds(&self) -> bool {
        sumset_ratio_check(&self.set, &self.x, self.k, self.c).unwrap_or(false)
    }
}

/// Drops elements of `X` one at a time while `fails` keeps holding.
pub fn minimize_sumset(mut inst: SumsetInstance, fails: impl Fn(&SumsetInstance) -> bool) -> SumsetInstance {
    let mut i = 0;
    while i < inst.set.len() && inst.set.len() > 1 {
        let mut smaller = inst.clone();
        smaller.set.remove(i);
        if fails(&smaller) {
            inst = smaller;
        } else {
            i += 1;
        }
    }
    inst
}

/// A GAP with small integer generators, ranges in `[2, 4]` and codes whose
/// images are non-overlapping.
pub fn random_grid_instance(rng: &mut impl Rng) -> GapSpec {
    loop {
        let d = rng.random_range(1..=3);
        let g = rng.random_range(1..=4);
        let generators: Vec<Vec<f64>> = (0..g)
            .map(|_| (0..d).map(|_| rng.random_range(-3..=3) as f64).collect())
            .collect();
        let ranges: Vec<u32> = (0..g).map(|_| rng.random_range(2..=4)).collect();
        let count = rng.random_range(1..=3);
        let codes: Vec<Vec<u32>> = (0..count)
            .map(|_| ranges.iter().map(|&k| rng.random_range(0..=k)).collect())
            .collect();
        let Ok(spec) = GapSpec::custom(generators, ranges, codes) else { continue };
        if spec.directions.iter().all(|u| u.iter().any(|v| *v != 0.0)) && verify_non_overlapping(&spec).is_ok() {
            return spec;
        }
    }
}

/// `(directional total, ceil(grid bound))` for an integer GAP.
pub fn grid_counts(spec: &GapSpec, tol: &Tolerances) -> (u64, u64) {
    let ps = materialize(spec, tol.tau, DEFAULT_CAP).expect("small instance");
    let total = count_directional(&ps, &spec.directions, tol).total;
    (total, ceil_u64(&grid_bound(spec, ps.len() as u64)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzSummary {
    pub case: String,
    pub instances: usize,
    pub failures: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<serde_json::Value>,
}

impl FuzzSummary {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

pub fn fuzz_sumset(budget: usize, seed: u64) -> FuzzSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut counterexample = None;
    for _ in 0..budget {
        let inst = SumsetInstance::random(&mut rng);
        if !inst.holds() {
            failures += 1;
            if counterexample.is_none() {
                let small = minimize_sumset(inst, |i| !i.holds());
                counterexample = serde_json::to_value(small).ok();
            }
        }
    }
    FuzzSummary {
        case: "sumset".into(),
        instances: budget,
        failures,
        counterexample,
    }
}

pub fn fuzz_grid(budget: usize, seed: u64, tol: &Tolerances) -> FuzzSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6_7269_64);
    let mut failures = 0;
    let mut counterexample = None;
    for _ in 0..budget {
        let spec = random_grid_instance(&mut rng);
        let (total, bound) = grid_counts(&spec, tol);
        if total < bound {
            failures += 1;
            if counterexample.is_none() {
                counterexample = serde_json::to_value(&spec).ok();
            }
        }
    }
    FuzzSummary {
        case: "grid".into(),
        instances: budget,
        failures,
        counterexample,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sumset_fuzz_is_clean() {
        let s = fuzz_sumset(200, 3);
        assert!(s.passed() && s.counterexample.is_none());
    }

    #[test]
    fn grid_fuzz_is_clean() {
        assert!(fuzz_grid(100, 3, &Tolerances::default()).passed());
    }

    #[test]
    fn minimizer_shrinks_against_a_false_predicate() {
        let inst = SumsetInstance {
            set: vec![vec![0], vec![5], vec![9], vec![2]],
            x: vec![1],
            k: 4,
            c: 2,
        };
        // Pretend any instance containing 9 is a counterexample.
        let small = minimize_sumset(inst, |i| i.set.contains(&vec![9]));
        assert_eq!(small.set, vec![vec![9]]);
    }
}
