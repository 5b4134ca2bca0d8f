//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use udf_core::composer::{compose_pointset, degenerate_construction, ratio_rows};
use udf_core::construct2d::{find_heights, warmup_spec};
use udf_core::gap::{
    ceil_u64, count_directional, count_pairwise, grid_bound, materialize, proposition_bound, sumset_sizes,
    DEFAULT_CAP,
};
use udf_core::general::{proposition_spec, verify_non_overlapping, ApConfig, GapSpec};
use udf_core::kdm::{build_model, perturb_and_persist, solve_intersections, verify_kdm};
use udf_core::lemmas::SumsetInstance;
use udf_core::norm::{boundary_point, chord_scalar, NormOracle, NormSpec};
use udf_core::Tolerances;

const NORMS: [&str; 4] = ["l2", "lp:1.5", "lp:3", "perturbed:2:0.03:5"];

/// Seed-0 ratios `total / (n log2 n)` for the Euclidean plane at n = 2^10, 2^12, 2^14.
const PINNED_RATIOS: [(u64, f64); 3] = [(1024, 0.3265625), (4096, 0.349_243_164_062_5), (16384, 0.350_673_130_580_357)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn norm(spec: &str, d: usize) -> NormOracle {
    NormSpec::parse(spec).unwrap().build(d).unwrap()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Per-spec facts shared by criteria 1, 2, 4 and 5.
struct SpecRun {
    label: String,
    proposition: bool,
    size: u64,
    size_cap: u128,
    total: u64,
    prop_bound: u64,
    grid_ceil: u64,
    pairwise: Option<u64>,
    min_separation: f64,
    worst_gauge: f64,
    certified: bool,
    vectors: usize,
    expected_vectors: usize,
    elapsed: Duration,
}

fn run_spec(label: String, n: &NormOracle, spec: &GapSpec, started: Instant, tol: &Tolerances) -> SpecRun {
    let ps = materialize(spec, tol.tau, DEFAULT_CAP).unwrap();
    let report = count_directional(&ps, &spec.directions, tol);
    let size = ps.len() as u64;
    let pairwise = (size <= 20_000).then(|| count_pairwise(&ps, n, tol.eps_unit).unwrap());

    let mut signed: Vec<Vec<f64>> = Vec::new();
    for u in &spec.directions {
        signed.push(u.clone());
        signed.push(u.iter().map(|v| -v).collect());
    }
    let mut min_separation = f64::INFINITY;
    for i in 0..signed.len() {
        for j in i + 1..signed.len() {
            min_separation = min_separation.min(dist2(&signed[i], &signed[j]));
        }
    }
    let worst_gauge = spec.directions.iter().map(|u| (n.gauge(u) - 1.0).abs()).fold(0.0, f64::max);
    let (d, m) = (spec.d as u32, spec.m as u32);
    SpecRun {
        label,
        proposition: spec.provenance.lambda.is_some(),
        size,
        size_cap: 2u128.pow(m) * (m as u128).pow(3 * (d - 1)),
        total: report.total,
        prop_bound: proposition_bound(spec.d, spec.m, size),
        grid_ceil: ceil_u64(&grid_bound(spec, size)),
        pairwise,
        min_separation,
        worst_gauge,
        certified: verify_non_overlapping(spec).is_ok(),
        vectors: signed.len(),
        expected_vectors: 2 * spec.directions.len(),
        elapsed: started.elapsed(),
    }
}

fn constructed_specs(tol: &Tolerances) -> Vec<SpecRun> {
    let mut runs = Vec::new();
    for spec_name in NORMS {
        for (d, max_m) in [(2usize, 10usize), (3, 6)] {
            let n = norm(spec_name, d);
            for m in 1..=max_m {
                let t = Instant::now();
                let spec = proposition_spec(&n, m, 0, &ApConfig::default(), tol).unwrap();
                runs.push(run_spec(format!("{spec_name} d={d} m={m}"), &n, &spec, t, tol));
            }
            if d == 2 {
                for m in 1..=max_m {
                    let t = Instant::now();
                    let spec = warmup_spec(&n, m, tol).unwrap();
                    runs.push(run_spec(format!("{spec_name} warmup m={m}"), &n, &spec, t, tol));
                }
            }
        }
    }
    runs
}

fn criterion_1(runs: &[SpecRun]) -> Outcome {
    let props: Vec<&SpecRun> = runs.iter().filter(|r| r.proposition).collect();
    let bad: Vec<&str> = props
        .iter()
        .filter(|r| r.total < r.prop_bound || r.size as u128 > r.size_cap || r.elapsed >= Duration::from_secs(60))
        .map(|r| r.label.as_str())
        .collect();
    let slowest = props.iter().map(|r| r.elapsed).max().unwrap_or_default();
    let tightest = props
        .iter()
        .filter(|r| r.prop_bound > 0)
        .map(|r| r.total as f64 / r.prop_bound as f64)
        .fold(f64::INFINITY, f64::min);
    outcome(
        bad.is_empty(),
        format!(
            "{} specs, min total/bound {tightest:.4}, slowest {:.1}s, failing {bad:?}",
            props.len(),
            slowest.as_secs_f64()
        ),
    )
}

fn criterion_2(runs: &[SpecRun]) -> Outcome {
    let bad: Vec<&str> = runs.iter().filter(|r| r.total < r.grid_ceil).map(|r| r.label.as_str()).collect();
    outcome(bad.is_empty(), format!("{} specs, failing {bad:?}", runs.len()))
}

/// `|X + [0, len-1] x|` with an ordered set.
fn span(inst: &SumsetInstance, len: u32) -> usize {
    let mut seen = BTreeSet::new();
    for p in &inst.set {
        for a in 0..len as i64 {
            seen.insert(p.iter().zip(&inst.x).map(|(u, v)| u + a * v).collect::<Vec<i64>>());
        }
    }
    seen.len()
}

fn criterion_3() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures = 0;
    let mut disagreements = 0;
    for _ in 0..1000 {
        let inst = SumsetInstance::random(&mut rng);
        let (short, long) = (span(&inst, inst.k - inst.c), span(&inst, inst.k));
        if sumset_sizes(&inst.set, &inst.x, inst.k, inst.c).unwrap() != (short, long) {
            disagreements += 1;
        }
        if (inst.k as u64) * (short as u64) < ((inst.k - inst.c) as u64) * (long as u64) {
            failures += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        failures == 0 && disagreements == 0 && secs < 10.0,
        format!("1000 instances, {failures} violations, {disagreements} enumeration mismatches, {secs:.2}s"),
    )
}

fn criterion_4(runs: &[SpecRun], tol: &Tolerances) -> Outcome {
    let checked: Vec<&SpecRun> = runs.iter().filter(|r| r.pairwise.is_some()).collect();
    let bad: Vec<&str> = checked
        .iter()
        .filter(|r| r.pairwise.unwrap() < r.total)
        .map(|r| r.label.as_str())
        .collect();
    let square = GapSpec::custom(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![2, 2], vec![vec![1, 0], vec![0, 1]]).unwrap();
    let ps = materialize(&square, tol.tau, DEFAULT_CAP).unwrap();
    let directional = count_directional(&ps, &square.directions, tol).total;
    let pairwise = count_pairwise(&ps, &NormOracle::euclidean(2), tol.eps_unit).unwrap();
    outcome(
        bad.is_empty() && directional == 4 && pairwise == 4,
        format!(
            "{} specs with |S| <= 2e4, failing {bad:?}; unit square directional {directional}, pairwise {pairwise}",
            checked.len()
        ),
    )
}

fn criterion_5(runs: &[SpecRun]) -> Outcome {
    let props: Vec<&SpecRun> = runs.iter().filter(|r| r.proposition).collect();
    let bad: Vec<&str> = props
        .iter()
        .filter(|r| !r.certified || r.vectors != r.expected_vectors || r.min_separation <= 1e-8 || r.worst_gauge > 1e-11)
        .map(|r| r.label.as_str())
        .collect();
    let sep = props.iter().map(|r| r.min_separation).fold(f64::INFINITY, f64::min);
    let gauge = props.iter().map(|r| r.worst_gauge).fold(0.0, f64::max);
    outcome(
        bad.is_empty(),
        format!("min separation {sep:.3e}, max |gauge - 1| {gauge:.1e}, failing {bad:?}"),
    )
}

fn criterion_6(tol: &Tolerances) -> Outcome {
    let n = NormOracle::euclidean(2);
    let mut reports = Vec::new();
    let mut problems = Vec::new();
    for (target, _) in PINNED_RATIOS {
        let c = compose_pointset(&n, target, 0, None, tol).unwrap();
        if c.points.len() as u64 != target {
            problems.push(format!("n={target}: {} points", c.points.len()));
        }
        if c.report.total < c.report.certified_sum {
            problems.push(format!("n={target}: total below certified sum"));
        }
        reports.push(c.report);
    }
    let (rows, _) = ratio_rows(&reports);
    for w in rows.windows(2) {
        if w[1].ratio < w[0].ratio {
            problems.push(format!("ratio fell at n={}", w[1].n));
        }
    }
    for (row, (_, pinned)) in rows.iter().zip(PINNED_RATIOS) {
        if (row.ratio - pinned).abs() > 0.01 * pinned {
            problems.push(format!("n={}: ratio {} vs pinned {pinned}", row.n, row.ratio));
        }
    }
    let ratios: Vec<String> = rows.iter().map(|r| format!("{}:{:.5}", r.n, r.ratio)).collect();
    outcome(problems.is_empty(), format!("ratios {} {problems:?}", ratios.join(" ")))
}

fn criterion_7(tol: &Tolerances) -> Outcome {
    let t = Instant::now();
    let n = NormOracle::lp(2, f64::INFINITY);
    let c = degenerate_construction(&n, 100, 4096, tol).unwrap();
    let pts: Vec<&[f64]> = c.points.points().collect();
    let mut count = 0u64;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let dmax = (pts[i][0] - pts[j][0]).abs().max((pts[i][1] - pts[j][1]).abs());
            if (dmax - 1.0).abs() <= tol.eps_unit {
                count += 1;
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        pts.len() == 100 && count >= 2500 && count == c.count && secs < 5.0,
        format!("{} points, {count} unit pairs (library {}), {secs:.2}s", pts.len(), c.count),
    )
}

fn criterion_8() -> Outcome {
    let t = Instant::now();
    let mut problems = Vec::new();
    let mut summary = Vec::new();
    for (d, n) in [(3usize, 1usize), (3, 2), (4, 3)] {
        let model = build_model(d, n).unwrap();
        let mut cert = match solve_intersections(&model, &model.body) {
            Ok(c) => c,
            Err(e) => {
                problems.push(format!("({d},{n}): {e}"));
                continue;
            }
        };
        let pts = &cert.points;
        let distinct = (0..pts.len()).all(|i| (i + 1..pts.len()).all(|j| dist2(&pts[i], &pts[j]) > 1e-6));
        let body = &model.body;
        let residual = pts
            .iter()
            .flat_map(|x| {
                cert.centers.iter().map(move |c| {
                    let diff: Vec<f64> = x.iter().zip(c).map(|(a, b)| a - b).collect();
                    (body.gauge(&diff) - 1.0).abs()
                })
            })
            .fold(0.0, f64::max);
        let min_det = cert.jac_dets.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        let angle = cert.normal_angles.clone().unwrap_or_default().into_iter().fold(0.0, f64::max);
        let verified = verify_kdm(&cert, &model, &model.body);
        let persisted = perturb_and_persist(&model, &mut cert, 1e-3, 5, 0).unwrap();
        let ok = cert.points.len() == 2 * n
            && distinct
            && residual <= 1e-10
            && min_det >= 1e-6
            && angle <= 1e-4
            && verified
            && persisted;
        if !ok {
            problems.push(format!(
                "({d},{n}): roots {} distinct {distinct} residual {residual:e} det {min_det:e} angle {angle:e} verified {verified} persisted {persisted}",
                cert.points.len()
            ));
        }
        summary.push(format!("K_{{{d},{}}} det>={min_det:.1e}", 2 * n));
    }
    let secs = t.elapsed().as_secs_f64();
    if secs >= 120.0 {
        problems.push(format!("took {secs:.1}s"));
    }
    outcome(problems.is_empty(), format!("{} {problems:?} {secs:.2}s", summary.join(", ")))
}

fn criterion_9(tol: &Tolerances) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_chord: f64 = 0.0;
    for i in 0..1000 {
        let d = 2 + i % 2;
        let n = NormOracle::euclidean(d);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let Ok(p) = boundary_point(&n, &x) else { continue };
        let r = chord_scalar(&n, &p, &w, tol).unwrap();
        let ww: f64 = w.iter().map(|v| v * v).sum();
        let exact = 2.0 * p.coords().iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / ww;
        let err = if r.tangent { exact.abs() * ww.sqrt() - tol.tau_tan } else { (r.value - exact).abs() };
        worst_chord = worst_chord.max(err);
    }
    let n = NormOracle::euclidean(2);
    let mut worst_height: f64 = 0.0;
    for m in 1..=10 {
        let t = find_heights(&n, m).unwrap();
        for (i, ti) in t.iter().enumerate() {
            let q = (i + 1) as f64 / (m + 1) as f64;
            worst_height = worst_height.max((ti - (1.0 - q * q).sqrt()).abs());
        }
    }
    outcome(
        worst_chord <= 1e-10 && worst_height <= 1e-9,
        format!("chord error {worst_chord:.2e} over 1000 points, height error {worst_height:.2e} for m <= 10"),
    )
}

fn main() {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    if filter.as_deref().is_some_and(|f| !"acceptance".contains(f)) {
        return;
    }
    let tol = Tolerances::default();
    let t = Instant::now();
    let runs = constructed_specs(&tol);
    let build_secs = t.elapsed().as_secs_f64();
    let results = [
        ("proposition bound", criterion_1(&runs)),
        ("grid-count lemma", criterion_2(&runs)),
        ("sumset lemma fuzz", criterion_3()),
        ("pairwise oracle", criterion_4(&runs, &tol)),
        ("non-overlapping directions", criterion_5(&runs)),
        ("composition", criterion_6(&tol)),
        ("segment fallback", criterion_7(&tol)),
        ("local model", criterion_8()),
        ("chord closed forms", criterion_9(&tol)),
    ];
    println!("acceptance: {} constructed specs in {build_secs:.1}s", runs.len());
    for (i, (name, o)) in results.iter().enumerate() {
        println!("criterion {} {}: {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed = results.iter().filter(|(_, o)| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
