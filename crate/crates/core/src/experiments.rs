//! Named scaling experiments with CSV tables and JSON summaries.
//!
//! Every experiment is a pure function of its resolved configuration: the same
//! config and seed give byte-identical files at any thread count.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constants::{R_D, SHARPNESS_NET_CONSTANT};
use crate::delta_sets::{
    gen_cantor_times_ball, gen_product_cantor, gen_random_regular_set, gen_random_separated_lines, gen_sharpness_construction,
    validate_frostman_set, SharpnessParams,
};
use crate::duality::{dualize_furstenberg_config, DualityContext};
use crate::error::{input, Result};
use crate::geometry::{AffinePlane, PlaneFamily, PointCloud, Resolution};
use crate::incidence::{count_incidences, incidence_bound_rhs};
use crate::io::write_json;
use crate::projections::{
    ball_integral_scaling, mattila_constant, mattila_identity_check, mollify_point_cloud, projection_lp_integral,
    radial_identity_check_at, restricted_lp_contribution, FnField, GridMeasure, MattilaConfig, MollifierSpec,
    PlaneSampling, RadialConfig, RotationSampling,
};
use crate::rng::{derive_seed, indexed_rng};
use crate::stats::{fit_loglog_slope, SlopeFit};

pub const EXPERIMENTS: [&str; 6] = [
    "sharpness-incidence",
    "projection-lp",
    "radial-identity",
    "mattila",
    "ball-scaling",
    "duality-pipeline",
];

/// Tolerances declared by the experiments.
pub mod tol {
    pub const SHARPNESS_LINE_SLOPE: f64 = 0.1;
    pub const SHARPNESS_RATIO_SLOPE: f64 = 0.15;
    /// `min_p |L(p)| δ^s` floor: each of the `2J + 1 >= 2 δ^-s` directions has a
    /// net line within `δ` of every point.
    pub const SHARPNESS_DEGREE_FLOOR: f64 = 1.0;
    pub const DISC_SIGMAS: f64 = 3.0;
    pub const RESTRICTED_SLOPE: f64 = 0.15;
    pub const RADIAL_RELATIVE: f64 = 0.02;
    pub const MATTILA_INVARIANT: f64 = 0.01;
    pub const MATTILA_GENERAL: f64 = 0.02;
    pub const BALL_LEBESGUE: f64 = 0.1;
    pub const BALL_CANTOR: f64 = 0.15;
    pub const FIBER_DISTANCE: f64 = 6.0;
}

/// Experiment id plus optional parameters; unset fields take per-experiment defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub measure: Option<String>,
    pub s: Option<f64>,
    pub t: Option<f64>,
    pub p: Option<Vec<f64>>,
    pub q: Option<Vec<f64>>,
    pub d: Option<usize>,
    pub n: Option<usize>,
    pub k_min: Option<u32>,
    pub k_max: Option<u32>,
    pub seed: Option<u64>,
    pub planes: Option<usize>,
    pub samples: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: &str) -> Self {
        ExperimentConfig {
            experiment: experiment.to_string(),
            ..Default::default()
        }
    }

    /// Fills every unset field with the default of the chosen experiment.
    pub fn resolved(&self) -> Result<ExperimentConfig> {
        let mut c = self.clone();
        let given = c.measure.clone();
        let measure = |m: &str| Some(given.clone().unwrap_or_else(|| m.to_string()));
        match c.experiment.as_str() {
            "sharpness-incidence" | "duality-pipeline" => {
                let (k0, k1) = if c.experiment == "duality-pipeline" { (6, 8) } else { (6, 10) };
                c.s = c.s.or(Some(0.5));
                c.t = c.t.or(Some(1.5));
                c.k_min = c.k_min.or(Some(k0));
                c.k_max = c.k_max.or(Some(k1));
            }
            "projection-lp" => {
                c.measure = measure("disc");
                let cantor = c.measure.as_deref() == Some("cantor-ball");
                c.s = c.s.or(Some(1.5));
                c.p = c.p.take().or(Some(if cantor { vec![2.0, 4.0] } else { vec![2.0] }));
                c.k_min = c.k_min.or(Some(if cantor { 3 } else { 7 }));
                c.k_max = c.k_max.or(Some(if cantor { 6 } else { 9 }));
                c.planes = c.planes.or(Some(if cantor { 16 } else { 64 }));
            }
            "radial-identity" => {
                c.measure = measure("cloud");
                c.q = c.q.take().or(Some(vec![1.0, 2.0]));
                // δ = 2^-k; the lattice runs from δ/4 down to δ/32.
                c.k_min = c.k_min.or(Some(5));
                c.k_max = c.k_max.or(c.k_min);
                c.samples = c.samples.or(Some(10_000));
                c.planes = c.planes.or(Some(360));
            }
            "mattila" => {
                c.k_min = c.k_min.or(Some(5));
                c.k_max = c.k_max.or(Some(8));
                c.planes = c.planes.or(Some(256));
            }
            "ball-scaling" => {
                c.measure = measure("lebesgue");
                c.p = c.p.take().or(Some(vec![2.0]));
                c.k_min = c.k_min.or(Some(4));
                c.k_max = c.k_max.or(Some(8));
            }
            other => return input(format!("unknown experiment '{other}' (known: {})", EXPERIMENTS.join(", "))),
        }
        c.seed = c.seed.or(Some(0));
        c.d = c.d.or(Some(2));
        c.n = c.n.or(Some(1));
        if c.k_min > c.k_max {
            return input("k_min exceeds k_max");
        }
        Ok(c)
    }

    fn k_range(&self) -> std::ops::RangeInclusive<u32> {
        self.k_min.unwrap_or(0)..=self.k_max.unwrap_or(0)
    }
}

/// An exponent from the theory, stated as a formula and a number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predicted {
    pub quantity: String,
    pub formula: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// `|value - target| <= tolerance`.
    pub fn near(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            target,
            tolerance,
            pass: (value - target).abs() <= tolerance,
        }
    }

    /// `value >= target`.
    pub fn at_least(name: impl Into<String>, value: f64, target: f64) -> Self {
        Check {
            name: name.into(),
            value,
            target,
            tolerance: 0.0,
            pass: value >= target,
        }
    }

    /// `value <= target`.
    pub fn at_most(name: impl Into<String>, value: f64, target: f64) -> Self {
        Check {
            name: name.into(),
            value,
            target,
            tolerance: 0.0,
            pass: value <= target,
        }
    }
}

/// Rows of stringified numbers under a fixed header.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

macro_rules! row {
    ($($v:expr),* $(,)?) => { vec![$($v.to_string()),*] };
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub predicted: Vec<Predicted>,
    pub fits: BTreeMap<String, SlopeFit>,
    pub values: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Result of [`execute`] before anything is written.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub table: Table,
    pub summary: ExperimentSummary,
}

#[derive(Default)]
struct Builder {
    predicted: Vec<Predicted>,
    fits: BTreeMap<String, SlopeFit>,
    values: BTreeMap<String, f64>,
    checks: Vec<Check>,
}

impl Builder {
    fn predict(&mut self, quantity: &str, formula: &str, value: f64) {
        self.predicted.push(Predicted {
            quantity: quantity.into(),
            formula: formula.into(),
            value,
        });
    }

    fn finish(self, config: ExperimentConfig, table: Table) -> ExperimentOutput {
        let pass = self.checks.iter().all(|c| c.pass);
        ExperimentOutput {
            table,
            summary: ExperimentSummary {
                experiment: config.experiment.clone(),
                config,
                predicted: self.predicted,
                fits: self.fits,
                values: self.values,
                checks: self.checks,
                pass,
            },
        }
    }
}

/// Runs the experiment without touching the file system.
pub fn execute(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let c = config.resolved()?;
    match c.experiment.as_str() {
        "sharpness-incidence" => sharpness_incidence(c),
        "projection-lp" => match c.measure.as_deref() {
            Some("disc") => projection_lp_disc(c),
            Some("cantor-ball") => projection_lp_cantor_ball(c),
            m => input(format!("projection-lp measure must be disc or cantor-ball, got {m:?}")),
        },
        "radial-identity" => radial_identity(c),
        "mattila" => mattila(c),
        "ball-scaling" => ball_scaling(c),
        "duality-pipeline" => duality_pipeline(c),
        _ => unreachable!("resolved() rejects unknown ids"),
    }
}

/// Runs the experiment and writes `<id>.csv` and `<id>.json` to `out_dir`
/// (or the config's own directory, or the current directory).
pub fn run_experiment(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ExperimentSummary> {
    let out = execute(config)?;
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let id = &out.summary.experiment;
    out.table.write_csv(&dir.join(format!("{id}.csv")))?;
    write_json(&dir.join(format!("{id}.json")), &out.summary)?;
    Ok(out.summary)
}

/// Per-scale measurements of the sharpness construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpnessScale {
    pub k: u32,
    pub delta: f64,
    pub points: usize,
    pub lines: usize,
    pub incidences: usize,
    /// Bound with `ε = 0`, `C_F = 1`.
    pub bound_rhs: f64,
    pub ratio: f64,
    pub min_point_degree: usize,
    pub frostman_constant: f64,
}

/// Builds the construction at `δ = 2^-k` and counts `δ`-incidences.
pub fn sharpness_scale(s: f64, t: f64, k: u32) -> Result<SharpnessScale> {
    let inst = gen_sharpness_construction(SharpnessParams::new(s, t, k, SHARPNESS_NET_CONSTANT)?)?;
    let delta = inst.params.delta();
    let tally = count_incidences(&inst.points, &inst.lines, delta)?;
    let rhs = incidence_bound_rhs(inst.points.len(), inst.lines.len(), delta, 2, 1, t, 1.0, 0.0)?;
    let frost = validate_frostman_set(&inst.points, delta, t)?;
    Ok(SharpnessScale {
        k,
        delta,
        points: inst.points.len(),
        lines: inst.lines.len(),
        incidences: tally.len(),
        bound_rhs: rhs,
        ratio: tally.len() as f64 / rhs,
        min_point_degree: tally.per_point_counts().into_iter().min().unwrap_or(0),
        frostman_constant: frost.best_constant,
    })
}

/// One point/line instance for the frozen incidence constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncidenceCase {
    pub label: String,
    pub t: f64,
    pub k: u32,
    pub points: usize,
    pub lines: usize,
    pub incidences: usize,
    /// Bound with `ε = 0.1`, `C_F = 1`.
    pub bound_rhs: f64,
    pub ratio: f64,
}

/// Exponent loss used in the frozen-constant comparison.
pub const INCIDENCE_EPS: f64 = 0.1;

/// The twenty fixed instances: both sharpness families at `k = 6..10`, then
/// random `(δ, t)`-regular sets with random `δ`-separated lines.
pub fn incidence_case_specs() -> Vec<(&'static str, f64, f64, u32)> {
    let mut out = Vec::new();
    for (s, t) in [(0.5, 1.5), (0.25, 1.25)] {
        for k in 6..=10 {
            out.push(("sharpness", s, t, k));
        }
    }
    for i in 0..10u32 {
        out.push(("random", 0.0, [1.25, 1.5, 1.75][i as usize % 3], 6 + i / 3));
    }
    out
}

/// Counts `δ`-incidences for one entry of [`incidence_case_specs`].
pub fn incidence_case(kind: &str, s: f64, t: f64, k: u32, seed: u64) -> Result<IncidenceCase> {
    let delta = Resolution::new(k).delta;
    let (points, lines) = match kind {
        "sharpness" => {
            let inst = gen_sharpness_construction(SharpnessParams::new(s, t, k, SHARPNESS_NET_CONSTANT)?)?;
            (inst.points, inst.lines)
        }
        "random" => {
            let sub = derive_seed(seed, &format!("incidence t={t} k={k}"));
            let pts = gen_random_regular_set(2, t, k, sub)?;
            let count = delta.powf(-t).ceil() as usize;
            let lines = gen_random_separated_lines(&pts, count, delta, derive_seed(sub, "lines"))?;
            (pts, lines)
        }
        other => return input(format!("unknown instance kind {other:?}")),
    };
    let tally = count_incidences(&points, &lines, delta)?;
    let rhs = incidence_bound_rhs(points.len(), lines.len(), delta, 2, 1, t, 1.0, INCIDENCE_EPS)?;
    Ok(IncidenceCase {
        label: if kind == "sharpness" { format!("sharpness s={s} t={t} k={k}") } else { format!("random t={t} k={k}") },
        t,
        k,
        points: points.len(),
        lines: lines.len(),
        incidences: tally.len(),
        bound_rhs: rhs,
        ratio: tally.len() as f64 / rhs,
    })
}

fn sharpness_incidence(c: ExperimentConfig) -> Result<ExperimentOutput> {
    let (s, t) = (c.s.unwrap_or(0.5), c.t.unwrap_or(1.5));
    let eta = (1.0 - s) * (t - 1.0);
    let mut b = Builder::default();
    b.predict("|L| vs delta", "-(2s + eta), eta = (1 - s)(t - 1)", -(2.0 * s + eta));
    b.predict("|I| / bound_rhs vs delta", "0", 0.0);
    b.predict("furstenberg dimension", "2s + (1 - s)(t - 1)", 2.0 * s + eta);
    let mut table = Table::new(&[
        "k", "delta", "points", "lines", "incidences", "bound_rhs", "ratio", "min_point_degree", "frostman_constant",
    ]);
    let mut scales = Vec::new();
    for k in c.k_range() {
        let r = sharpness_scale(s, t, k)?;
        table.push(row![r.k, r.delta, r.points, r.lines, r.incidences, r.bound_rhs, r.ratio, r.min_point_degree, r.frostman_constant]);
        scales.push(r);
    }
    let lines = fit_loglog_slope(&scales.iter().map(|r| (r.delta, r.lines as f64)).collect::<Vec<_>>())?;
    let ratio = fit_loglog_slope(&scales.iter().map(|r| (r.delta, r.ratio)).collect::<Vec<_>>())?;
    let degree = scales
        .iter()
        .map(|r| r.min_point_degree as f64 * r.delta.powf(s))
        .fold(f64::INFINITY, f64::min);
    b.checks.push(Check::near("line count slope", lines.slope, -(2.0 * s + eta), tol::SHARPNESS_LINE_SLOPE));
    b.checks.push(Check::near("incidence ratio slope", ratio.slope, 0.0, tol::SHARPNESS_RATIO_SLOPE));
    b.checks.push(Check::at_least("min |L(p)| delta^s", degree, tol::SHARPNESS_DEGREE_FLOOR));
    b.values.insert("max_frostman_constant".into(), scales.iter().map(|r| r.frostman_constant).fold(0.0, f64::max));
    b.fits.insert("lines".into(), lines);
    b.fits.insert("ratio".into(), ratio);
    Ok(b.finish(c, table))
}

/// Uniform probability density on the unit disc sampled at spacing `h`.
pub fn disc_measure(h: f64) -> Result<GridMeasure> {
    let mut mu = shifted_disc(h, [0.0, 0.0])?;
    mu.normalize(1.0);
    Ok(mu)
}

/// Density `1/π` on the unit disc sampled at the nodes `shift + h Z^2`.
///
/// Averaged over a uniform shift in `[0, h)^2` this is exactly the normalized
/// disc, so independent shifts give independent unbiased discretizations.
pub fn shifted_disc(h: f64, shift: [f64; 2]) -> Result<GridMeasure> {
    let m = (1.0 / h).ceil() as usize + 1;
    let origin = vec![shift[0] - m as f64 * h, shift[1] - m as f64 * h];
    GridMeasure::from_fn(h, origin, vec![2 * m + 1; 2], |x| {
        if x[0] * x[0] + x[1] * x[1] <= 1.0 {
            1.0 / PI
        } else {
            0.0
        }
    })
}

/// Normalized disc with the boundary cells at their approximate coverage
/// fraction `clamp(1/2 + (1 - |x|)/h, 0, 1)`.
pub fn coverage_disc(h: f64) -> Result<GridMeasure> {
    let m = (1.0 / h).ceil() as usize + 1;
    let origin = vec![-(m as f64) * h; 2];
    let mut mu = GridMeasure::from_fn(h, origin, vec![2 * m + 1; 2], |x| {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        (0.5 + (1.0 - r) / h).clamp(0.0, 1.0)
    })?;
    mu.normalize(1.0);
    Ok(mu)
}

/// `∫ ‖π_θ σ‖_2^2 dθ` for the normalized disc.
pub const DISC_L2_PROJECTION: f64 = 16.0 / (3.0 * PI * PI);

/// Estimates `∫ ‖π_θ σ‖_2^2 dθ` for the disc by `<π_θ μ_U, π_θ μ_U'>` with two
/// independent random lattice shifts per random angle.
///
/// The plain `‖π_θ μ‖_2^2` of one discretization carries the squared lattice
/// noise as a positive bias; the cross term does not. The multilinear kernel
/// keeps the smoothing bias small, and the random shifts absorb its aliasing.
pub fn disc_l2_cross(h: f64, planes: usize, seed: u64) -> Result<crate::projections::McEstimate> {
    use crate::projections::{project_measure_with, Splat};
    use rand::Rng;
    if planes < 2 {
        return input("need at least two planes");
    }
    let values = (0..planes)
        .map(|i| {
            let mut rng = indexed_rng(seed, i as u64);
            let theta = rng.random_range(0.0..PI);
            let line = AffinePlane::line2(theta, 0.0);
            let mut f = Vec::with_capacity(2);
            for _ in 0..2 {
                let shift = [rng.random::<f64>() * h, rng.random::<f64>() * h];
                f.push(project_measure_with(&shifted_disc(h, shift)?, &line, Splat::Linear)?);
            }
            let off = ((f[1].origin[0] - f[0].origin[0]) / h).round() as i64;
            let mut acc = 0.0;
            for (i, a) in f[0].values.iter().enumerate() {
                let j = i as i64 - off;
                if j >= 0 && (j as usize) < f[1].values.len() {
                    acc += a * f[1].values[j as usize];
                }
            }
            Ok(acc * h)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(crate::projections::McEstimate::from_values(values))
}

fn projection_lp_disc(c: ExperimentConfig) -> Result<ExperimentOutput> {
    let seed = c.seed.unwrap_or(0);
    let planes = c.planes.unwrap_or(64);
    let ps = c.p.clone().unwrap_or_default();
    let mut b = Builder::default();
    b.predict("disc projection L^2", "16 / (3 pi^2)", DISC_L2_PROJECTION);
    let mut table = Table::new(&["k", "h", "p", "estimator", "mean", "std_error"]);
    let mut cross_last = None;
    for k in c.k_range() {
        let h = Resolution::new(k).delta;
        let mu = disc_measure(h)?;
        for &p in &ps {
            let est = projection_lp_integral(
                &mu,
                1,
                p,
                PlaneSampling::Random {
                    count: planes,
                    seed: derive_seed(seed, &format!("disc-{k}")),
                },
            )?;
            table.push(row![k, h, p, "plain", est.mean, est.std_error]);
            if p == 2.0 {
                let cross = disc_l2_cross(h, planes, derive_seed(seed, &format!("disc-cross-{k}")))?;
                table.push(row![k, h, p, "cross", cross.mean, cross.std_error]);
                cross_last = Some(cross);
            }
        }
    }
    if let Some(est) = cross_last {
        b.values.insert("mean_p2".into(), est.mean);
        b.values.insert("std_error_p2".into(), est.std_error);
        b.checks.push(Check::near(
            "disc p=2 within 3 sigma",
            est.mean,
            DISC_L2_PROJECTION,
            tol::DISC_SIGMAS * est.std_error,
        ));
    }
    Ok(b.finish(c, table))
}

/// Slope of the restricted-plane `L^p` contribution, `1 + (s - 1)(1 - p)`.
pub fn restricted_slope(s: f64, p: f64) -> f64 {
    1.0 + (s - 1.0) * (1.0 - p)
}

/// Per-scale restricted contributions for the Cantor × interval measure.
pub fn restricted_series(s: f64, p: f64, ks: std::ops::RangeInclusive<u32>, angles: usize) -> Result<Vec<(u32, f64, f64)>> {
    let mut out = Vec::new();
    for k in ks {
        let cb = gen_cantor_times_ball(2, s, k)?;
        let delta = cb.measure.h();
        // Lines parallel to the Cantor axis see the Cantor factor undiluted.
        let axis = 0.0;
        let rc = restricted_lp_contribution(&cb.measure, axis, delta, p, angles)?;
        out.push((k, delta, rc.contribution));
    }
    Ok(out)
}

fn projection_lp_cantor_ball(c: ExperimentConfig) -> Result<ExperimentOutput> {
    let s = c.s.unwrap_or(1.5);
    let angles = c.planes.unwrap_or(16);
    let mut b = Builder::default();
    let mut table = Table::new(&["k", "delta", "p", "contribution"]);
    let pstar = 1.0 + 1.0 / (s - 1.0);
    b.predict("critical p", "1 + 1/(s - 1)", pstar);
    let mut slopes = Vec::new();
    for p in c.p.clone().unwrap_or_default() {
        let pred = restricted_slope(s, p);
        b.predict(&format!("restricted contribution slope p={p}"), "1 + (s - 1)(1 - p)", pred);
        let series = restricted_series(s, p, c.k_range(), angles)?;
        for &(k, delta, v) in &series {
            table.push(row![k, delta, p, v]);
        }
        let fit = fit_loglog_slope(&series.iter().map(|r| (r.1, r.2)).collect::<Vec<_>>())?;
        b.checks.push(Check::near(format!("slope p={p}"), fit.slope, pred, tol::RESTRICTED_SLOPE));
        slopes.push((p, fit.slope));
        b.fits.insert(format!("p={p}"), fit);
    }
    for w in slopes.windows(2) {
        let ((p0, s0), (p1, s1)) = (w[0], w[1]);
        if p0 < pstar && pstar < p1 {
            b.checks.push(Check::at_least(
                format!("sign flip between p={p0} and p={p1}"),
                if s0 > 0.0 && s1 < 0.0 { 1.0 } else { 0.0 },
                1.0,
            ));
        }
    }
    Ok(b.finish(c, table))
}

/// `n` random points in `[0,1]^2`, thinned to pairwise distance at least `delta`.
pub fn random_separated_cloud(n: usize, delta: f64, seed: u64) -> Result<PointCloud> {
    use rand::Rng;
    let mut rng = indexed_rng(seed, 0);
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut tries = 0;
    while pts.len() < n {
        tries += 1;
        if tries > 1000 * n {
            return input("could not place separated points");
        }
        let p = vec![rng.random::<f64>(), rng.random::<f64>()];
        if pts.iter().all(|q| crate::geometry::dist(q, &p) >= delta) {
            pts.push(p);
        }
    }
    PointCloud::from_points(&pts)
}

/// One row of the radial identity sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialLevel {
    pub h: f64,
    pub q: f64,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub relative_error: f64,
}

/// The test measure at lattice spacing `h`: a mollified 50-point cloud or the
/// coverage-weighted disc.
pub fn radial_measure(measure: &str, delta: f64, h: f64, seed: u64) -> Result<GridMeasure> {
    match measure {
        "cloud" => {
            let cloud = random_separated_cloud(50, delta, derive_seed(seed, "cloud"))?;
            let mut mu = mollify_point_cloud(&cloud, &MollifierSpec::new(1.0, delta)?, h)?;
            mu.normalize(1.0);
            Ok(mu)
        }
        "disc" => coverage_disc(h),
        other => input(format!("radial measure must be cloud or disc, got {other}")),
    }
}

/// `count` independent draws from the continuous test measure: the mollified
/// cloud (bump `i mod 50`, offset by rejection from the radial profile) or the
/// uniform disc.
pub fn radial_draws(measure: &str, delta: f64, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    use rand::Rng;
    let cloud = match measure {
        "cloud" => Some(random_separated_cloud(50, delta, derive_seed(seed, "cloud"))?),
        "disc" => None,
        other => return input(format!("radial measure must be cloud or disc, got {other}")),
    };
    let spec = MollifierSpec::new(1.0, delta)?;
    let draw_seed = derive_seed(seed, "radial-draws");
    Ok(crate::par::map_range(count, |i| {
        let mut rng = indexed_rng(draw_seed, i as u64);
        match &cloud {
            Some(cloud) => {
                let p = cloud.point(i % cloud.len());
                let (reach, top) = (spec.support_radius(), spec.profile(0.0, 2));
                loop {
                    let u = [rng.random_range(-reach..reach), rng.random_range(-reach..reach)];
                    let r = (u[0] * u[0] + u[1] * u[1]).sqrt();
                    if rng.random::<f64>() * top < spec.profile(r, 2) {
                        break vec![p[0] + u[0], p[1] + u[1]];
                    }
                }
            }
            None => loop {
                let u = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                if u[0] * u[0] + u[1] * u[1] <= 1.0 {
                    break u.to_vec();
                }
            },
        }
    }))
}

/// Relative errors at `h = δ/4, δ/8, δ/16, δ/32` for every `q`, all levels
/// sharing one set of draws. Rows are ordered by level, then `q`.
pub fn radial_sweep(measure: &str, delta: f64, qs: &[f64], samples: usize, planes: usize, seed: u64) -> Result<Vec<RadialLevel>> {
    let xs = radial_draws(measure, delta, samples, seed)?;
    let mut out = Vec::new();
    for level in 2..=5 {
        let h = delta / (1u32 << level) as f64;
        let mu = radial_measure(measure, delta, h, seed)?;
        let reps = radial_identity_check_at(
            &mu,
            qs,
            &RadialConfig {
                n: 1,
                samples,
                planes,
                seed: derive_seed(seed, "radial"),
                ..RadialConfig::default()
            },
            &xs,
        )?;
        for rep in reps {
            out.push(RadialLevel {
                h,
                q: rep.q,
                lhs: rep.lhs,
                lhs_se: rep.lhs_se,
                rhs: rep.rhs,
                relative_error: rep.relative_error,
            });
        }
    }
    Ok(out)
}

fn radial_identity(c: ExperimentConfig) -> Result<ExperimentOutput> {
    let measure = c.measure.clone().unwrap_or_default();
    let seed = c.seed.unwrap_or(0);
    let mut b = Builder::default();
    b.predict("radial identity", "int |mu_x|_q^q dmu = int |pi mu|_{q+1}^{q+1} dgamma", 0.0);
    let mut table = Table::new(&["k", "h", "q", "lhs", "lhs_se", "rhs", "relative_error"]);
    for k in c.k_range() {
        let delta = Resolution::new(k).delta;
        let qs = c.q.clone().unwrap_or_default();
        let rows = radial_sweep(&measure, delta, &qs, c.samples.unwrap_or(10_000), c.planes.unwrap_or(360), seed)?;
        for l in &rows {
            table.push(row![k, l.h, l.q, l.lhs, l.lhs_se, l.rhs, l.relative_error]);
        }
        for &q in &qs {
            let levels: Vec<&RadialLevel> = rows.iter().filter(|l| l.q == q).collect();
            let (first, last) = (levels[0], levels[levels.len() - 1]);
            b.checks.push(Check::at_most(format!("k={k} q={q} error at h=delta/4"), first.relative_error, tol::RADIAL_RELATIVE));
            let monotone = levels.windows(2).all(|w| w[1].relative_error < w[0].relative_error);
            b.checks.push(Check::at_least(format!("k={k} q={q} error decreases"), if monotone { 1.0 } else { 0.0 }, 1.0));
            b.values.insert(format!("k={k} q={q} finest error"), last.relative_error);
        }
    }
    Ok(b.finish(c, table))
}

/// Test functions for the Mattila identity, all supported in the unit ball.
pub fn mattila_fields() -> Vec<(&'static str, bool, FnField<fn(&[f64]) -> f64>)> {
    fn bump(x: &[f64]) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1];
        if r2 < 1.0 {
            (1.0 - r2).powi(3)
        } else {
            0.0
        }
    }
    fn ring(x: &[f64]) -> f64 {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let u = (r - 0.6) / 0.35;
        if u.abs() < 1.0 {
            (1.0 - u * u).powi(2)
        } else {
            0.0
        }
    }
    fn offset(x: &[f64]) -> f64 {
        let (a, b) = ((x[0] - 0.35) / 0.45, (x[1] + 0.2) / 0.3);
        let r2 = a * a + b * b;
        if r2 < 1.0 {
            (1.0 - r2).powi(3)
        } else {
            0.0
        }
    }
    vec![
        ("radial-bump", true, FnField { d: 2, radius: 1.0, f: bump as fn(&[f64]) -> f64 }),
        ("ring", true, FnField { d: 2, radius: 1.0, f: ring as fn(&[f64]) -> f64 }),
        ("offset-bump", false, FnField { d: 2, radius: 1.0, f: offset as fn(&[f64]) -> f64 }),
    ]
}

fn mattila(c: ExperimentConfig) -> Result<ExperimentOutput> {
    let rotations = c.planes.unwrap_or(256);
    let mut b = Builder::default();
    let cst = mattila_constant(2, 1);
    b.predict("c(2,1)", "|S^0| / |S^1| = 1/pi", cst);
    let mut table = Table::new(&["k", "h", "function", "lhs", "rhs", "ratio"]);
    let fields = mattila_fields();
    let mut finest = BTreeMap::new();
    for k in c.k_range() {
        let h = Resolution::new(k).delta;
        for (name, invariant, f) in &fields {
            let rep = mattila_identity_check(
                f,
                &MattilaConfig {
                    n: 1,
                    rotations: RotationSampling::Equispaced { count: rotations },
                    h,
                },
            )?;
            let ratio = rep.ratio.unwrap_or(f64::NAN);
            table.push(row![k, h, name, rep.lhs, rep.rhs, ratio]);
            finest.insert(*name, (*invariant, ratio));
        }
    }
    for (name, (invariant, ratio)) in finest {
        let tolerance = if invariant { tol::MATTILA_INVARIANT } else { tol::MATTILA_GENERAL };
        b.checks.push(Check::near(format!("{name} relative"), ratio / cst - 1.0, 0.0, tolerance));
        b.values.insert(format!("{name} ratio"), ratio);
    }
    Ok(b.finish(c, table))
}

/// Lebesgue measure on `[0,1]^2` or the product Cantor measure (digits {0,1,3} of 4),
/// both on the lattice of spacing `2^-10`.
pub fn ball_measure(measure: &str) -> Result<(GridMeasure, f64)> {
    match measure {
        "lebesgue" => {
            let h = Resolution::new(10).delta;
            let n = (1.0 / h).round() as usize;
            let mut mu = GridMeasure::from_fn(h, vec![h / 2.0; 2], vec![n; 2], |_| 1.0)?;
            mu.normalize(1.0);
            Ok((mu, 2.0))
        }
        "cantor" => {
            let (_, mu) = gen_product_cantor(2, 4, &[0, 1, 3], 5)?;
            Ok((mu, 2.0 * crate::delta_sets::cantor_dimension(4, 3)))
        }
        other => input(format!("ball measure must be lebesgue or cantor, got {other}")),
    }
}

fn ball_scaling(c: ExperimentConfig) -> Result<ExperimentOutput> {
    let measure = c.measure.clone().unwrap_or_default();
    let (mu, s) = ball_measure(&measure)?;
    let d = 2.0;
    let tolerance = if measure == "lebesgue" { tol::BALL_LEBESGUE } else { tol::BALL_CANTOR };
    let deltas: Vec<f64> = c.k_range().map(|k| Resolution::new(k).delta).collect();
    let mut b = Builder::default();
    let mut table = Table::new(&["delta", "p", "integral"]);
    for p in c.p.clone().unwrap_or_default() {
        b.predict(&format!("ball integral slope p={p}"), "d - s + p s", d - s + p * s);
        let sc = ball_integral_scaling(&mu, p, s, &deltas)?;
        for (dl, v) in sc.deltas.iter().zip(&sc.integrals) {
            table.push(row![dl, p, v]);
        }
        b.checks.push(Check::near(format!("slope p={p}"), sc.fit.slope, sc.predicted_slope, tolerance));
        b.fits.insert(format!("p={p}"), sc.fit);
    }
    b.values.insert("s".into(), s);
    Ok(b.finish(c, table))
}

/// One scale of the dualization pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityScale {
    pub k: u32,
    pub delta: f64,
    pub planes: usize,
    pub fiber_points: usize,
    pub min_fiber: usize,
    pub min_dual_degree: usize,
    /// Points of `P_D` whose dual degree falls below their fiber size.
    pub degree_deficits: usize,
    pub max_fiber_distance: f64,
    pub point_separation: f64,
    pub plane_separation: f64,
}

/// The sharpness lines whose `δ`-fibers hold at least `δ^-s` points, scaled
/// by `λ` about `(1/2, 1/2)` into `B(V_0, r_d)`, dualized, and recounted at
/// radius `6λδ`.
pub fn duality_scale(s: f64, t: f64, k: u32) -> Result<DualityScale> {
    const LAMBDA: f64 = 0.25;
    let inst = gen_sharpness_construction(SharpnessParams::new(s, t, k, SHARPNESS_NET_CONSTANT)?)?;
    let delta = inst.params.delta();
    let tally = count_incidences(&inst.points, &inst.lines, delta)?;
    let shrink = |x: &[f64]| vec![LAMBDA * (x[0] - 0.5), LAMBDA * (x[1] - 0.5)];
    let need = delta.powf(-s).ceil() as usize;
    let kept: Vec<usize> = (0..inst.lines.len()).filter(|&v| tally.plane_points(v).len() >= need).collect();
    let planes: Vec<AffinePlane> = kept
        .iter()
        .map(|&v| {
            let l = &inst.lines.planes[v];
            AffinePlane::through(&shrink(l.offset()), &[l.basis_vector(0).to_vec()])
        })
        .collect::<Result<_>>()?;
    let fibers: Vec<PointCloud> = kept
        .iter()
        .map(|&v| {
            let pts: Vec<f64> = tally
                .plane_points(v)
                .iter()
                .flat_map(|&i| shrink(inst.points.point(i as usize)))
                .collect();
            PointCloud::new(2, pts, LAMBDA * inst.points.separation, 2.0)
        })
        .collect::<Result<_>>()?;
    let d_small = LAMBDA * delta;
    let family = PlaneFamily::new(planes, LAMBDA * inst.lines.separation)?;
    let ctx = DualityContext::with_radius(2, R_D)?;
    let dual = dualize_furstenberg_config(&family, &fibers, d_small, &ctx)?;
    let back = count_incidences(&dual.points, &dual.planes, tol::FIBER_DISTANCE * d_small)?;
    let degrees = back.per_point_counts();
    let deficits = degrees
        .iter()
        .zip(&dual.point_planes)
        .filter(|(deg, fiber)| **deg < fiber.len())
        .count();
    Ok(DualityScale {
        k,
        delta,
        planes: family.len(),
        fiber_points: dual.planes.len(),
        min_fiber: dual.point_planes.iter().map(Vec::len).min().unwrap_or(0),
        min_dual_degree: degrees.iter().copied().min().unwrap_or(0),
        degree_deficits: deficits,
        max_fiber_distance: dual.max_fiber_distance,
        point_separation: dual.point_separation / d_small,
        plane_separation: dual.plane_separation / d_small,
    })
}

fn duality_pipeline(c: ExperimentConfig) -> Result<ExperimentOutput> {
    let (s, t) = (c.s.unwrap_or(0.5), c.t.unwrap_or(1.5));
    let mut b = Builder::default();
    b.predict("dual degree floor", "|V_D(p)| >= c delta^-s", -s);
    b.predict("fiber distance", "dist(p, D(x)) <= 6 delta", tol::FIBER_DISTANCE);
    let mut table = Table::new(&[
        "k",
        "delta",
        "planes",
        "fiber_points",
        "min_fiber",
        "min_dual_degree",
        "degree_deficits",
        "max_fiber_distance",
        "point_separation",
        "plane_separation",
    ]);
    let mut floor = f64::INFINITY;
    for k in c.k_range() {
        let r = duality_scale(s, t, k)?;
        table.push(row![
            r.k,
            r.delta,
            r.planes,
            r.fiber_points,
            r.min_fiber,
            r.min_dual_degree,
            r.degree_deficits,
            r.max_fiber_distance,
            r.point_separation,
            r.plane_separation
        ]);
        b.checks.push(Check::at_most(format!("k={k} fiber distance / delta"), r.max_fiber_distance, tol::FIBER_DISTANCE));
        b.checks.push(Check::at_most(format!("k={k} degree deficits"), r.degree_deficits as f64, 0.0));
        b.checks.push(Check::at_least(format!("k={k} point separation / delta"), r.point_separation, f64::MIN_POSITIVE));
        floor = floor.min(r.min_dual_degree as f64 * r.delta.powf(s));
    }
    b.checks.push(Check::at_least("min |V_D(p)| delta^s", floor, tol::SHARPNESS_DEGREE_FLOOR));
    Ok(b.finish(c, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_id_is_rejected() {
        assert!(execute(&ExperimentConfig::new("nope")).is_err());
    }

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::new("sharpness-incidence").resolved().unwrap();
        assert_eq!((c.k_min, c.k_max, c.s, c.t), (Some(6), Some(10), Some(0.5), Some(1.5)));
    }
}
