use std::fs;

use serde::Serialize;
use udf_core::composer::{
    compose_pointset, degenerate_construction, ratio_rows, CacheKey, ComposeError, RatioReport,
};
use udf_core::construct2d::{warmup_spec, Construct2dError};
use udf_core::gap::{count_pairwise, materialize, GapError, PointSet, DEFAULT_CAP, PAIRWISE_LIMIT};
use udf_core::general::{proposition_spec, verify_non_overlapping, ApConfig, GapSpec, OverlapCertificate};
use udf_core::io::{points_csv, svg_plot, PointsDocument};
use udf_core::kdm::{
    build_model, perturb_and_persist, solve_intersections, verify_kdm, KdmCertificate, MAX_ANGLE, MAX_DELTA,
    MIN_DET, RESIDUAL_TOL,
};
use udf_core::lemmas::{fuzz_grid, fuzz_sumset, FuzzSummary};
use udf_core::norm::{require_strictly_convex, NormError, NormOracle, NormSpec};
use udf_core::{gap, Tolerances};

use crate::args::{Cases, ComposeArgs, ConstructArgs, KdmArgs, LemmaArgs, Method, NormArgs};
use crate::manifest::{sha256_hex, Outputs};
use crate::Failure;

const PROBE_SAMPLES: usize = 4096;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        pass,
        detail,
    }
}

fn report_checks(checks: &[Check]) -> bool {
    for c in checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    checks.iter().all(|c| c.pass)
}

/// Reads `--norm`, following `@path`.
pub fn read_norm_spec(raw: &str) -> Result<NormSpec, Failure> {
    let text = match raw.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read norm file {path}: {e}")))?,
        None => raw.to_string(),
    };
    NormSpec::parse(&text).map_err(|e| Failure::Usage(e.to_string()))
}

fn build_norm(a: &NormArgs) -> Result<NormOracle, Failure> {
    if a.d < 2 {
        return Err(Failure::Usage(format!("--d must be at least 2, got {}", a.d)));
    }
    read_norm_spec(&a.norm)?.build(a.d).map_err(|e| Failure::Usage(e.to_string()))
}

fn usage_or_runtime(e: NormError) -> Failure {
    match e {
        NormError::InvalidSpec(_) | NormError::DimensionMismatch { .. } => Failure::Usage(e.to_string()),
        other => Failure::Runtime(other.to_string()),
    }
}

fn materialize_checked(spec: &GapSpec, tol: &Tolerances) -> Result<PointSet, Failure> {
    materialize(spec, tol.tau, DEFAULT_CAP).map_err(|e| match e {
        GapError::Overflow { .. } | GapError::TooLarge { .. } => Failure::Usage(format!("{e}; choose a smaller m")),
        other => Failure::Runtime(other.to_string()),
    })
}

#[derive(Serialize)]
struct ConstructReport<'a> {
    norm: &'a str,
    method: Method,
    report: &'a gap::UnitDistanceReport,
    checks: &'a [Check],
}

pub fn construct(a: &ConstructArgs, out: &mut Outputs) -> Result<bool, Failure> {
    if a.m == 0 {
        return Err(Failure::Usage("--m must be at least 1".into()));
    }
    let norm = build_norm(&a.norm)?;
    let tol = a.run.tolerances();
    match require_strictly_convex(&norm) {
        Ok(()) => {}
        Err(NormError::NotStrictlyConvex { length }) => {
            return Err(Failure::Usage(format!(
                "the unit sphere contains a segment of length {length:e}; use `compose` for non-strictly-convex norms"
            )))
        }
        Err(e) => return Err(usage_or_runtime(e)),
    }
    let spec = match a.method {
        Method::General => proposition_spec(&norm, a.m, a.run.seed, &ApConfig::default(), &tol)
            .map_err(|e| Failure::Certificate(format!("construction failed: {e}")))?,
        Method::Warmup => {
            if a.norm.d != 2 {
                return Err(Failure::Usage("--method warmup needs --d 2".into()));
            }
            warmup_spec(&norm, a.m, &tol).map_err(|e| match e {
                Construct2dError::Norm(e) => usage_or_runtime(e),
                other => Failure::Certificate(format!("construction failed: {other}")),
            })?
        }
    };
    let ps = materialize_checked(&spec, &tol)?;
    let mut report = gap::count_directional(&ps, &spec.directions, &tol);
    if ps.len() <= PAIRWISE_LIMIT {
        report.pairwise_total = Some(count_pairwise(&ps, &norm, tol.eps_unit).map_err(|e| Failure::Runtime(e.to_string()))?);
    }

    let residual = spec.unit_residual(&norm);
    let mut checks = vec![
        check("unit directions", residual <= tol.eps_bnd, format!("max |gauge(u) - 1| = {residual:e}")),
        match verify_non_overlapping(&spec) {
            OverlapCertificate::Ok { count } => check("non-overlapping", true, format!("{count} directions")),
            v => check("non-overlapping", false, format!("{v:?}")),
        },
        check(
            "grid-count lemma",
            report.meets_lemma_bound(),
            format!("total {} vs bound {}", report.total, report.lemma_bound_ceil.unwrap_or(0)),
        ),
    ];
    if let Some(b) = report.prop_bound {
        checks.push(check("proposition bound", report.total >= b, format!("total {} vs bound {b}", report.total)));
    }
    if let Some(p) = report.pairwise_total {
        checks.push(check("pairwise oracle", p >= report.total, format!("pairwise {p} vs directional {}", report.total)));
    }
    println!(
        "{}: d = {}, m = {}, |S| = {}, unit distances = {}, merged = {}, near collisions = {}",
        norm.name(),
        spec.d,
        spec.m,
        report.set_size,
        report.total,
        report.merged,
        report.near_collisions
    );

    out.document("spec.json", "gap_spec", &spec)?;
    out.write("points.csv", &points_csv(&ps))?;
    if a.json_points {
        out.document("points.json", "points", &PointsDocument::from_set(&ps))?;
    }
    if let Some(svg) = svg_plot(&ps, Some(&norm), &[vec![0.0; 2]]) {
        out.write("plot.svg", &svg)?;
    }
    out.document(
        "report.json",
        "unit_distance_report",
        &ConstructReport {
            norm: norm.name(),
            method: a.method,
            report: &report,
            checks: &checks,
        },
    )?;
    Ok(report_checks(&checks))
}

#[derive(Serialize)]
struct DegenerateReport<'a> {
    norm: &'a str,
    n: usize,
    x: &'a [f64],
    y: &'a [f64],
    count: u64,
    bound: u64,
    tolerances: Tolerances,
}

/// Key for the size-table cache: canonical norm JSON and dimension.
pub fn cache_key(norm_json: &str, d: usize) -> String {
    sha256_hex(format!("{norm_json}|d={d}").as_bytes())[..16].to_string()
}

pub fn compose(a: &ComposeArgs, out: &mut Outputs) -> Result<bool, Failure> {
    if a.n.contains(&0) {
        return Err(Failure::Usage("--n values must be positive".into()));
    }
    let norm = build_norm(&a.norm)?;
    let tol = a.run.tolerances();
    match require_strictly_convex(&norm) {
        Ok(()) => {}
        Err(NormError::NotStrictlyConvex { .. }) => return compose_degenerate(a, &norm, &tol, out),
        Err(e) => return Err(usage_or_runtime(e)),
    }

    let key = cache_key(&read_norm_spec(&a.norm.norm)?.to_json(), a.norm.d);
    let cache = CacheKey::from_env(key);
    let mut reports = Vec::with_capacity(a.n.len());
    let mut checks = Vec::new();
    for &n in &a.n {
        let c = compose_pointset(&norm, n, a.run.seed, cache.as_ref(), &tol).map_err(|e| match e {
            ComposeError::EmptyTarget => Failure::Usage(e.to_string()),
            ComposeError::Cache(_) => Failure::Runtime(e.to_string()),
            other => Failure::Certificate(format!("composition failed for n = {n}: {other}")),
        })?;
        checks.push(check(
            &format!("n = {n} size"),
            c.points.len() as u64 == n,
            format!("{} points", c.points.len()),
        ));
        checks.push(check(
            &format!("n = {n} count"),
            c.report.total >= c.report.certified_sum,
            format!("total {} vs certified sum {}", c.report.total, c.report.certified_sum),
        ));
        out.document(&format!("composition-n{n}.json"), "composition_report", &c.report)?;
        out.write(&format!("points-n{n}.csv"), &points_csv(&c.points))?;
        reports.push(c.report);
    }
    let (rows, drops) = ratio_rows(&reports);
    let ratio = RatioReport {
        norm: norm.name().to_string(),
        d: norm.dim(),
        seed: a.run.seed,
        rows,
        drops,
    };
    println!("n,total,ratio,target");
    for r in &ratio.rows {
        println!("{},{},{:.6},{:.6}", r.n, r.total, r.ratio, r.target);
    }
    if !ratio.drops.is_empty() {
        eprintln!("warning: ratio dropped at n = {:?}", ratio.drops);
    }
    out.write("ratio.csv", &ratio.to_csv())?;
    out.document("ratio.json", "ratio_report", &ratio)?;
    Ok(report_checks(&checks))
}

fn compose_degenerate(a: &ComposeArgs, norm: &NormOracle, tol: &Tolerances, out: &mut Outputs) -> Result<bool, Failure> {
    if let Some(n) = a.n.iter().find(|n| *n % 2 == 1) {
        return Err(Failure::Usage(format!(
            "{} is not strictly convex; the segment construction needs even n, got {n}",
            norm.name()
        )));
    }
    println!("{} is not strictly convex: using the boundary-segment construction", norm.name());
    let mut checks = Vec::new();
    for &n in &a.n {
        let n = n as usize;
        let c = degenerate_construction(norm, n, PROBE_SAMPLES, tol)
            .map_err(|e| Failure::Certificate(format!("segment construction failed for n = {n}: {e}")))?;
        let bound = (n as u64 / 2).pow(2);
        println!("n = {n}: {} unit distances", c.count);
        checks.push(check(&format!("n = {n} pairwise count"), c.count >= bound, format!("{} vs (n/2)^2 = {bound}", c.count)));
        out.document(
            &format!("degenerate-n{n}.json"),
            "degenerate_report",
            &DegenerateReport {
                norm: norm.name(),
                n,
                x: &c.x,
                y: &c.y,
                count: c.count,
                bound,
                tolerances: *tol,
            },
        )?;
        out.write(&format!("points-n{n}.csv"), &points_csv(&c.points))?;
        if let Some(svg) = svg_plot(&c.points, Some(norm), &[vec![0.0; 2]]) {
            out.write(&format!("plot-n{n}.svg"), &svg)?;
        }
    }
    Ok(report_checks(&checks))
}

#[derive(Serialize)]
struct KdmReport<'a> {
    certificate: &'a KdmCertificate,
    checks: &'a [Check],
    tolerances: Tolerances,
}

pub fn kdm(a: &KdmArgs, out: &mut Outputs) -> Result<bool, Failure> {
    if a.d < 3 {
        return Err(Failure::Usage(format!("the local model needs --d >= 3, got {}", a.d)));
    }
    if a.m < 2 || a.m % 2 == 1 {
        return Err(Failure::Usage(format!("--m must be a positive even number, got {}", a.m)));
    }
    if !(a.delta.abs() <= MAX_DELTA) {
        return Err(Failure::Usage(format!("--delta must satisfy |delta| <= {MAX_DELTA}, got {}", a.delta)));
    }
    if a.trials == 0 {
        return Err(Failure::Usage("--trials must be positive".into()));
    }
    let n = a.m / 2;
    let model = build_model(a.d, n).map_err(|e| Failure::Certificate(e.to_string()))?;
    let mut cert = solve_intersections(&model, &model.body).map_err(|e| Failure::Certificate(e.to_string()))?;
    let verified = verify_kdm(&cert, &model, &model.body);
    let persisted = perturb_and_persist(&model, &mut cert, a.delta, a.trials, a.run.seed)
        .map_err(|e| Failure::Certificate(e.to_string()))?;

    let worst = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let min_det = cert.jac_dets.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    let angle = cert.normal_angles.as_deref().map(worst).unwrap_or(f64::INFINITY);
    let checks = vec![
        check("roots", cert.points.len() == a.m, format!("{} of {}", cert.points.len(), a.m)),
        check("residuals", worst(&cert.residuals) <= RESIDUAL_TOL, format!("max {:e}", worst(&cert.residuals))),
        check("transversality", min_det >= MIN_DET, format!("min |det| = {min_det:e}")),
        check("normals", angle <= MAX_ANGLE, format!("max angle {angle:e} rad")),
        check("orientation", cert.det_signs_match == Some(true), format!("{:?}", cert.det_signs_match)),
        check("unit-distance graph", verified, format!("K_{{{},{}}}", a.d, a.m)),
        check("persistence", persisted, format!("delta = {}, {} trials", a.delta, a.trials)),
    ];
    println!("K_{{{},{}}} local model, h = {:e}", a.d, a.m, model.h);
    out.document(
        "kdm.json",
        "kdm_certificate",
        &KdmReport {
            certificate: &cert,
            checks: &checks,
            tolerances: a.run.tolerances(),
        },
    )?;
    Ok(report_checks(&checks))
}

#[derive(Serialize)]
struct LemmaReport<'a> {
    seed: u64,
    budget: usize,
    cases: &'a [FuzzSummary],
    tolerances: Tolerances,
}

pub fn verify_lemmas(a: &LemmaArgs, out: &mut Outputs) -> Result<bool, Failure> {
    let tol = a.run.tolerances();
    let mut cases = Vec::new();
    if matches!(a.cases, Cases::All | Cases::Sumset) {
        cases.push(fuzz_sumset(a.budget, a.run.seed));
    }
    if matches!(a.cases, Cases::All | Cases::Grid) {
        cases.push(fuzz_grid(a.budget, a.run.seed, &tol));
    }
    for c in &cases {
        println!(
            "{} {}: {} instances, {} failures",
            if c.passed() { "PASS" } else { "FAIL" },
            c.case,
            c.instances,
            c.failures
        );
        if let Some(ce) = &c.counterexample {
            eprintln!("counterexample ({}): {ce}", c.case);
        }
    }
    out.document(
        "lemmas.json",
        "lemma_report",
        &LemmaReport {
            seed: a.run.seed,
            budget: a.budget,
            cases: &cases,
            tolerances: tol,
        },
    )?;
    Ok(cases.iter().all(FuzzSummary::passed))
}
