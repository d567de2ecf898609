//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::Rng;

use fraclab_core::constants::{FROSTMAN_CONSTANT, INCIDENCE_CONSTANT};
use fraclab_core::duality::{
    dual_plane, dual_point, exact_dual_point, exact_in_dual_plane, exact_incidence_equivalent, verify_duality_relations,
    DualityContext,
};
use fraclab_core::experiments::{execute, incidence_case, incidence_case_specs, sharpness_scale, ExperimentConfig, ExperimentSummary};
use fraclab_core::geometry::sample_grassmannian;
use fraclab_core::incidence::{count_incidences, count_incidences_brute};
use fraclab_core::rng::indexed_rng;
use fraclab_core::delta_sets::{gen_random_regular_set, gen_random_separated_lines, gen_sharpness_construction, SharpnessParams};
use fraclab_core::{AffinePlane, PlaneFamily, PointCloud};

const SHARPNESS_RUNTIME: Duration = Duration::from_secs(120);
const LINE_SLOPE_TOL: f64 = 0.1;
const RATIO_SLOPE_TOL: f64 = 0.15;
const ROUND_TRIP_TOL: f64 = 1e-12;
const DUALITY_PAIRS: usize = 100_000;
const ORACLE_PRODUCT_CAP: usize = 100_000;
const LARGE_INSTANCE: usize = 100_000;
const LARGE_RADIUS: f64 = 1e-3;
const LARGE_RUNTIME: Duration = Duration::from_secs(10);

type Outcome = Result<String, String>;

fn report(results: &mut Vec<bool>, id: usize, name: &str, f: impl FnOnce() -> Outcome) {
    let start = Instant::now();
    let out = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
        .unwrap_or_else(|e| Err(format!("panicked: {:?}", e.downcast_ref::<String>().map(String::as_str).or(e.downcast_ref::<&str>().copied()))));
    let secs = start.elapsed().as_secs_f64();
    match &out {
        Ok(msg) => println!("PASS [{id:>2}] {name}: {msg} ({secs:.1}s)"),
        Err(msg) => println!("FAIL [{id:>2}] {name}: {msg} ({secs:.1}s)"),
    }
    results.push(out.is_ok());
}

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn run(c: ExperimentConfig) -> Result<ExperimentSummary, String> {
    execute(&c).map(|o| o.summary).map_err(|e| e.to_string())
}

fn failed_checks(s: &ExperimentSummary) -> Vec<String> {
    s.checks.iter().filter(|c| !c.pass).map(|c| format!("{}={:.4}", c.name, c.value)).collect()
}

fn sharpness_exponents() -> Outcome {
    let start = Instant::now();
    let s = run(ExperimentConfig::new("sharpness-incidence"))?;
    let elapsed = start.elapsed();
    let lines = s.fits["lines"].slope;
    let floor = s.checks.iter().find(|c| c.name.starts_with("min |L(p)|")).map(|c| c.value).unwrap_or(0.0);
    ensure(
        (lines + 1.25).abs() <= LINE_SLOPE_TOL && floor > 0.0 && s.pass && elapsed < SHARPNESS_RUNTIME,
        format!("|L| slope {lines:.3} (want -1.25 ± {LINE_SLOPE_TOL}), min |L(p)| δ^s = {floor:.2}, {:.1}s", elapsed.as_secs_f64()),
    )
}

fn frostman_constants() -> Outcome {
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for (s, t) in [(0.5, 1.5), (0.25, 1.25)] {
        let mut k6 = 0.0;
        for k in 6..=10 {
            let c = sharpness_scale(s, t, k).map_err(|e| e.to_string())?.frostman_constant;
            if k == 6 {
                k6 = c;
            }
            worst = worst.max(c);
        }
        if FROSTMAN_CONSTANT > 10.0 * k6 {
            return Err(format!("frozen constant {FROSTMAN_CONSTANT} exceeds 10x the k=6 value {k6:.3} at t={t}"));
        }
        detail.push(format!("k=6 value {k6:.2} at t={t}"));
    }
    ensure(
        worst <= FROSTMAN_CONSTANT,
        format!("max best_constant {worst:.3} <= {FROSTMAN_CONSTANT} ({})", detail.join(", ")),
    )
}

fn incidence_bound() -> Outcome {
    let specs = incidence_case_specs();
    let mut worst = (0.0f64, String::new());
    for (kind, s, t, k) in &specs {
        let c = incidence_case(kind, *s, *t, *k, 0).map_err(|e| e.to_string())?;
        if c.ratio > worst.0 {
            worst = (c.ratio, c.label);
        }
    }
    let s = run(ExperimentConfig::new("sharpness-incidence"))?;
    let slope = s.fits["ratio"].slope;
    ensure(
        specs.len() == 20 && worst.0 <= INCIDENCE_CONSTANT && slope.abs() <= RATIO_SLOPE_TOL,
        format!(
            "{} instances, max |I|/rhs = {:.3} ({}) <= A = {INCIDENCE_CONSTANT}; sharpness ratio slope {slope:.3}",
            specs.len(),
            worst.0,
            worst.1
        ),
    )
}

fn radial_identity() -> Outcome {
    let mut parts = Vec::new();
    let mut bad = Vec::new();
    for m in ["cloud", "disc"] {
        let mut c = ExperimentConfig::new("radial-identity");
        c.measure = Some(m.into());
        let s = run(c)?;
        let first: Vec<String> = s
            .checks
            .iter()
            .filter(|c| c.name.ends_with("error at h=delta/4"))
            .map(|c| format!("{:.1e}", c.value))
            .collect();
        parts.push(format!("{m} errors at δ/4 [{}]", first.join(", ")));
        bad.extend(failed_checks(&s));
    }
    ensure(bad.is_empty(), format!("{}; monotone over 3 halvings{}", parts.join("; "), if bad.is_empty() { String::new() } else { format!("; failed {bad:?}") }))
}

fn simple(id: &str, measure: Option<&str>) -> Outcome {
    let mut c = ExperimentConfig::new(id);
    c.measure = measure.map(str::to_string);
    let s = run(c)?;
    let vals: Vec<String> = s.checks.iter().map(|c| format!("{} {:.4}", c.name, c.value)).collect();
    ensure(s.pass, vals.join(", "))
}

fn ball_scaling() -> Outcome {
    let a = simple("ball-scaling", Some("lebesgue"));
    let b = simple("ball-scaling", Some("cantor"));
    match (a, b) {
        (Ok(x), Ok(y)) => Ok(format!("lebesgue: {x}; cantor: {y}")),
        (x, y) => Err(format!("lebesgue: {x:?}; cantor: {y:?}")),
    }
}

fn in_ball<R: Rng>(rng: &mut R, d: usize, r: f64) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-r..r)).collect();
        if x.iter().map(|c| c * c).sum::<f64>() <= r * r {
            return x;
        }
    }
}

fn duality() -> Outcome {
    type Q = Ratio<i64>;
    // Rational fixtures: points on and off D(c), in d = 2, 3, 4.
    let mut fixtures = 0;
    for d in 2..=4usize {
        for a in -4i64..=4 {
            for b in 1i64..=3 {
                let c: Vec<Q> = (0..d).map(|i| Q::new(a + i as i64, b + i as i64)).collect();
                let mut x: Vec<Q> = (0..d - 1).map(|i| Q::new(b - i as i64, 2 + a.abs())).collect();
                let level = (0..d - 1).fold(c[d - 1], |acc, i| acc + c[i] * x[i]);
                for last in [level, level + Q::new(1, 7)] {
                    x.push(last);
                    let inc = exact_in_dual_plane(&c, &x);
                    if !exact_incidence_equivalent(&x, &c) || inc != exact_in_dual_plane(&x, &exact_dual_point(&c)) || inc != (last == level) {
                        return Err(format!("rational fixture failed: c={c:?} x={x:?}"));
                    }
                    x.pop();
                    fixtures += 1;
                }
            }
        }
    }
    let ctx = DualityContext::new(2).map_err(|e| e.to_string())?;
    let mut rng = indexed_rng(2024, 0);
    let pts: Vec<Vec<f64>> = (0..1000).map(|_| in_ball(&mut rng, 2, 2.0)).collect();
    let mut planes = Vec::new();
    while planes.len() < DUALITY_PAIRS / 1000 {
        let v = dual_plane(&in_ball(&mut rng, 2, 0.5));
        if ctx.contains(&v).map_err(|e| e.to_string())? {
            planes.push(v);
        }
    }
    let rep = verify_duality_relations(
        &PointCloud::from_points(&pts).map_err(|e| e.to_string())?,
        &PlaneFamily::new(planes, 0.0).map_err(|e| e.to_string())?,
        &ctx,
    )
    .map_err(|e| e.to_string())?;
    let mut worst_rt = 0.0f64;
    for d in 2..=4 {
        let ctx = DualityContext::new(d).map_err(|e| e.to_string())?;
        let mut rng = indexed_rng(77, d as u64);
        for _ in 0..10_000 {
            let x = in_ball(&mut rng, d, 1.0);
            let y = dual_point(&dual_plane(&x), &ctx).map_err(|e| e.to_string())?;
            for i in 0..d {
                let want = if i + 1 < d { -x[i] } else { x[i] };
                worst_rt = worst_rt.max((y[i] - want).abs());
            }
        }
    }
    let pipeline = run(ExperimentConfig::new("duality-pipeline"))?;
    ensure(
        rep.pairs == DUALITY_PAIRS && rep.factor3_violations == 0 && rep.incidence_mismatches == 0 && worst_rt <= ROUND_TRIP_TOL && pipeline.pass,
        format!(
            "{fixtures} rational fixtures exact; {} pairs, {} factor-3 violations (worst factor {:.3}); round trip max error {worst_rt:.1e}; pipeline {}",
            rep.pairs,
            rep.factor3_violations,
            rep.worst_factor,
            if pipeline.pass { "passes" } else { "fails" }
        ),
    )
}

fn oracle_instances() -> Vec<(String, PointCloud, PlaneFamily, f64)> {
    let mut out = Vec::new();
    for k in 6..=8 {
        let inst = gen_sharpness_construction(SharpnessParams::new(0.25, 1.25, k, 1.0).unwrap()).unwrap();
        let delta = inst.params.delta();
        out.push((format!("sharpness k={k}"), inst.points, inst.lines, delta));
    }
    for (i, t) in [1.25, 1.5, 1.75].into_iter().enumerate() {
        for k in [5u32, 6] {
            let p = gen_random_regular_set(2, t, k, 100 + i as u64).unwrap();
            let delta = 2f64.powi(-(k as i32));
            let cap = (ORACLE_PRODUCT_CAP / p.len()).max(1);
            let l = gen_random_separated_lines(&p, cap, delta, 200 + i as u64).unwrap();
            out.push((format!("regular t={t} k={k}"), p, l, delta));
        }
    }
    for (d, n) in [(3usize, 1usize), (3, 2), (4, 1), (4, 2), (4, 3)] {
        let mut rng = indexed_rng(300 + d as u64, n as u64);
        let pts: Vec<Vec<f64>> = (0..400).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let planes: Vec<AffinePlane> = sample_grassmannian(d, n, 250, 400 + d as u64)
            .unwrap()
            .iter()
            .map(|v| {
                let o: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                AffinePlane::through(&o, &v.basis_vectors()).unwrap()
            })
            .collect();
        out.push((
            format!("random d={d} n={n}"),
            PointCloud::from_points(&pts).unwrap(),
            PlaneFamily::new(planes, 0.0).unwrap(),
            0.05,
        ));
    }
    out
}

fn oracle_and_speed() -> Outcome {
    let mut checked = 0;
    for (name, p, v, r) in oracle_instances() {
        if p.len() * v.len() > ORACLE_PRODUCT_CAP {
            continue;
        }
        let fast = count_incidences(&p, &v, r).map_err(|e| e.to_string())?;
        let slow = count_incidences_brute(&p, &v, r).map_err(|e| e.to_string())?;
        if !fast.pairs().eq(slow.pairs()) {
            return Err(format!("indexed and brute force differ on {name}"));
        }
        checked += 1;
    }
    let mut rng = indexed_rng(9, 0);
    let coords: Vec<f64> = (0..2 * LARGE_INSTANCE).map(|_| rng.random::<f64>()).collect();
    let p = PointCloud::from_coords(2, coords).map_err(|e| e.to_string())?;
    let lines: Vec<AffinePlane> = (0..LARGE_INSTANCE)
        .map(|_| {
            let th = rng.random_range(0.0..std::f64::consts::PI);
            let (x, y) = (rng.random::<f64>(), rng.random::<f64>());
            AffinePlane::line2(th, -x * th.sin() + y * th.cos())
        })
        .collect();
    let v = PlaneFamily::new(lines, 0.0).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let pairs = count_incidences(&p, &v, LARGE_RADIUS).map_err(|e| e.to_string())?.len();
    let took = start.elapsed();
    ensure(
        checked >= 10 && took < LARGE_RUNTIME,
        format!(
            "{checked} instances match brute force exactly; 10^5 x 10^5 at r={LARGE_RADIUS}: {pairs} pairs in {:.2}s on {} thread(s)",
            took.as_secs_f64(),
            fraclab_core::par::current_threads()
        ),
    )
}

/// Exit code 1 (a tolerance check failed) is still a complete run; only errors abort.
fn cli(args: &[&str], threads: usize, dir: &Path) -> Result<(Option<i32>, Vec<u8>), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fraclab"))
        .args(args)
        .arg("--threads")
        .arg(threads.to_string())
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    let code = out.status.code();
    if !matches!(code, Some(0 | 1)) {
        return Err(format!("{args:?} exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr)));
    }
    Ok((code, out.stdout))
}

fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn determinism() -> Outcome {
    let script: &[&[&str]] = &[
        &["generate", "sharpness", "--k", "7", "--out", "g"],
        &["generate", "regular", "--t", "1.5", "--k", "7", "--seed", "5", "--out", "r"],
        &["generate", "lines", "--points", "r/points.csv", "--count", "3000", "--seed", "6", "--out", "r"],
        &["generate", "cantor-ball", "--s", "1.5", "--k", "4", "--out", "cb"],
        &["incidences", "--points", "g/points.csv", "--planes", "g/lines.csv", "--r", "0.0078125", "--tally", "g/tally.csv"],
        &["incidences", "--points", "r/points.csv", "--planes", "r/lines.csv", "--r", "0.0078125"],
        &["validate", "--points", "r/points.csv", "--delta", "0.0078125", "--s", "1.5", "--out", "r/frostman.json"],
        &["project", "--grid", "cb/measure.grid", "--p", "2,4", "--planes", "24", "--seed", "3"],
        &["identity", "radial", "--grid", "cb/measure.grid", "--samples", "2000", "--planes", "60", "--seed", "4"],
        &["identity", "mattila", "--field", "offset-bump", "--rotations", "64"],
        &["duality", "map", "--direction", "backward", "--in", "g/lines.csv", "--out", "dual.csv"],
        &["experiment", "sharpness-incidence", "--out", "exp"],
        &["experiment", "projection-lp", "--measure", "cantor-ball", "--out", "exp"],
        &["experiment", "mattila", "--out", "exp"],
        &["experiment", "duality-pipeline", "--k-max", "7", "--out", "exp"],
    ];
    let many = 4;
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut stdout_a = Vec::new();
    let mut stdout_b = Vec::new();
    for args in script {
        stdout_a.push(cli(args, 1, a.path())?);
        stdout_b.push(cli(args, many, b.path())?);
    }
    for (args, (x, y)) in script.iter().zip(stdout_a.iter().zip(&stdout_b)) {
        if x != y {
            return Err(format!("exit code or stdout of {args:?} depends on the thread count"));
        }
    }
    let (fa, fb) = (tree_bytes(a.path()), tree_bytes(b.path()));
    if fa.len() != fb.len() {
        return Err("different output file sets".into());
    }
    for ((na, xa), (nb, xb)) in fa.iter().zip(&fb) {
        if na != nb || xa != xb {
            return Err(format!("{na} differs between --threads 1 and --threads {many}"));
        }
    }
    let bytes: usize = fa.iter().map(|f| f.1.len()).sum();
    Ok(format!("{} commands, {} files ({bytes} bytes) identical for --threads 1 and {many}", script.len(), fa.len()))
}

fn main() {
    let mut results = Vec::new();
    report(&mut results, 1, "sharpness construction exponents", sharpness_exponents);
    report(&mut results, 2, "frozen Frostman constant", frostman_constants);
    report(&mut results, 3, "incidence bound with frozen constant", incidence_bound);
    report(&mut results, 4, "radial/orthogonal identity", radial_identity);
    report(&mut results, 5, "Mattila identity", || simple("mattila", None));
    report(&mut results, 6, "ball integral scaling", ball_scaling);
    report(&mut results, 7, "restricted-plane dichotomy", || simple("projection-lp", Some("cantor-ball")));
    report(&mut results, 8, "point/plane duality", duality);
    report(&mut results, 9, "oracle equivalence and throughput", oracle_and_speed);
    report(&mut results, 10, "thread-count determinism", determinism);
    let passed = results.iter().filter(|&&r| r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
