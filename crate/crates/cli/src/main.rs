//! `fraclab` command line driver.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use fraclab_core::delta_sets::{
    gen_cantor_times_ball, gen_product_cantor, gen_random_regular_set, gen_random_separated_lines,
    gen_sharpness_construction, validate_frostman_set, SharpnessParams,
};
use fraclab_core::duality::{dual_plane, dual_point, verify_duality_relations, DualityContext};
use fraclab_core::experiments::{mattila_fields, run_experiment, ExperimentConfig};
use fraclab_core::incidence::{count_incidences, count_incidences_brute};
use fraclab_core::io::{load_grid, load_planes, load_points, save_grid, save_planes, save_points, save_tally, write_json};
use fraclab_core::projections::{
    lp_norm_pow, mattila_identity_check, project_measure, projection_lp_integral, radial_identity_check, MattilaConfig,
    PlaneSampling, RadialConfig, RotationSampling,
};
use fraclab_core::{AffinePlane, PlaneFamily, PointCloud};

#[derive(Parser)]
#[command(name = "fraclab", version, about = "Discretized fractal geometry experiments")]
struct Cli {
    /// Root seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Output file or directory; JSON results go to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate point sets, line families or lattice measures.
    Generate(GenerateArgs),
    /// Check the (δ, s, C)-set condition of a point file.
    Validate {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        s: f64,
    },
    /// Count r-incidences between points and planes.
    Incidences {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        planes: PathBuf,
        #[arg(long)]
        r: f64,
        /// Also run the double loop and compare.
        #[arg(long)]
        brute: bool,
        /// Write the incident pairs as CSV.
        #[arg(long)]
        tally: Option<PathBuf>,
    },
    /// L^p norms of projections of a lattice measure.
    Project {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        p: Vec<f64>,
        /// Project onto the line at this angle (d = 2).
        #[arg(long, conflicts_with = "planes")]
        angle: Option<f64>,
        /// Average over this many random lines instead.
        #[arg(long)]
        planes: Option<usize>,
    },
    /// Check an integral identity.
    Identity {
        #[command(subcommand)]
        which: IdentityCommand,
    },
    /// Point/hyperplane duality.
    Duality {
        #[command(subcommand)]
        which: DualityCommand,
    },
    /// Run a named experiment and write `<id>.csv` and `<id>.json`.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    kind: GenKind,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long, default_value_t = 6)]
    k: u32,
    #[arg(long, default_value_t = 4)]
    base: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,1,3")]
    digits: Vec<usize>,
    /// Point file the random lines pass through.
    #[arg(long)]
    points: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Sharpness,
    Regular,
    Lines,
    Cantor,
    CantorBall,
}

#[derive(Subcommand)]
enum IdentityCommand {
    /// Radial slices against orthogonal projections.
    Radial {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 360)]
        planes: usize,
    },
    /// Rotation average of a test function against its integral (d = 2, n = 1).
    Mattila {
        #[arg(long, default_value = "radial-bump")]
        field: String,
        #[arg(long, default_value_t = 256)]
        rotations: usize,
        #[arg(long, default_value_t = 1.0 / 256.0)]
        h: f64,
    },
}

#[derive(Subcommand)]
enum DualityCommand {
    /// Incidence preservation and the distance comparison on all pairs.
    Check {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        planes: PathBuf,
    },
    /// Map points to planes (forward) or planes to points (backward).
    Map {
        #[arg(long, value_enum)]
        direction: Direction,
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    Forward,
    Backward,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment id; optional when --config names one.
    id: Option<String>,
    /// JSON config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    measure: Option<String>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    q: Option<Vec<f64>>,
    #[arg(long)]
    k_min: Option<u32>,
    #[arg(long)]
    k_max: Option<u32>,
    #[arg(long)]
    planes: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn init_threads(threads: usize) -> Result<()> {
    #[cfg(feature = "parallel")]
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("building the thread pool")?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

/// Writes `value` to `out` or prints it.
fn emit(out: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    match out {
        Some(p) => write_json(p, value)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{}", serde_json::to_string_pretty(value)?)?;
        }
    }
    Ok(())
}

fn out_dir(out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}

/// Returns whether every declared tolerance passed.
fn run(cli: Cli) -> Result<bool> {
    init_threads(cli.threads)?;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Generate(g) => generate(g, cli.seed, out).map(|_| true),
        Command::Validate { points, delta, s } => {
            let p = load_points(&points)?;
            let rep = validate_frostman_set(&p, delta, s)?;
            emit(out, &serde_json::to_value(rep)?)?;
            Ok(true)
        }
        Command::Incidences { points, planes, r, brute, tally } => {
            let p = load_points(&points)?;
            let v = load_planes(&planes)?;
            let t = count_incidences(&p, &v, r)?;
            let mut agree = true;
            if brute {
                let b = count_incidences_brute(&p, &v, r)?;
                agree = b.pairs().eq(t.pairs());
            }
            if let Some(path) = tally {
                save_tally(&path, &t)?;
            }
            let counts = t.per_point_counts();
            emit(
                out,
                &json!({
                    "points": p.len(),
                    "planes": v.len(),
                    "r": r,
                    "incidences": t.len(),
                    "min_point_degree": counts.iter().min(),
                    "max_point_degree": counts.iter().max(),
                    "brute_force_agrees": if brute { Some(agree) } else { None },
                }),
            )?;
            Ok(agree)
        }
        Command::Project { grid, p, angle, planes } => {
            let mu = load_grid(&grid)?;
            let mut rows = Vec::new();
            for &pp in &p {
                if let Some(count) = planes {
                    let est = projection_lp_integral(&mu, 1, pp, PlaneSampling::Random { count, seed: cli.seed })?;
                    rows.push(json!({ "p": pp, "planes": count, "mean": est.mean, "std_error": est.std_error }));
                } else {
                    if mu.d() != 2 {
                        bail!("--angle projects planar measures; use --planes in higher dimension");
                    }
                    let line = AffinePlane::line2(angle.unwrap_or(0.0), 0.0);
                    let g = project_measure(&mu, &line)?;
                    rows.push(json!({ "p": pp, "angle": angle.unwrap_or(0.0), "norm_pow": lp_norm_pow(&g, pp)?, "mass": g.total_mass() }));
                }
            }
            emit(out, &json!({ "mass": mu.total_mass(), "results": rows }))?;
            Ok(true)
        }
        Command::Identity { which } => identity(which, cli.seed, out),
        Command::Duality { which } => duality(which, out),
        Command::Experiment(a) => experiment(a, cli.seed, out),
    }
}

fn generate(g: GenerateArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    let dir = out_dir(out);
    match g.kind {
        GenKind::Sharpness => {
            let (s, t) = (g.s.unwrap_or(0.5), g.t.unwrap_or(1.5));
            let inst = gen_sharpness_construction(SharpnessParams::new(s, t, g.k, fraclab_core::constants::SHARPNESS_NET_CONSTANT)?)?;
            save_points(&dir.join("points.csv"), &inst.points)?;
            save_planes(&dir.join("lines.csv"), &inst.lines)?;
        }
        GenKind::Regular => {
            let t = g.t.context("--t is required")?;
            save_points(&dir.join("points.csv"), &gen_random_regular_set(g.d, t, g.k, seed)?)?;
        }
        GenKind::Lines => {
            let p = load_points(&g.points.context("--points is required")?)?;
            let delta = g.delta.unwrap_or(p.separation);
            save_planes(&dir.join("lines.csv"), &gen_random_separated_lines(&p, g.count, delta, seed)?)?;
        }
        GenKind::Cantor => {
            let (p, mu) = gen_product_cantor(g.d, g.base, &g.digits, g.k)?;
            save_points(&dir.join("points.csv"), &p)?;
            save_grid(&dir.join("measure.grid"), &mu)?;
        }
        GenKind::CantorBall => {
            let cb = gen_cantor_times_ball(g.d, g.s.unwrap_or(1.5), g.k)?;
            save_grid(&dir.join("measure.grid"), &cb.measure)?;
        }
    }
    Ok(())
}

fn identity(which: IdentityCommand, seed: u64, out: Option<&Path>) -> Result<bool> {
    match which {
        IdentityCommand::Radial { grid, q, samples, planes } => {
            let mu = load_grid(&grid)?;
            let cfg = RadialConfig { samples, planes, seed, ..RadialConfig::default() };
            let rep = radial_identity_check(&mu, q, &cfg)?;
            emit(out, &serde_json::to_value(rep)?)?;
            Ok(true)
        }
        IdentityCommand::Mattila { field, rotations, h } => {
            let fields = mattila_fields();
            let Some((_, _, f)) = fields.iter().find(|(name, _, _)| *name == field) else {
                let names: Vec<&str> = fields.iter().map(|x| x.0).collect();
                bail!("unknown field {field:?} (known: {})", names.join(", "));
            };
            let cfg = MattilaConfig { n: 1, rotations: RotationSampling::Equispaced { count: rotations }, h };
            let rep = mattila_identity_check(f, &cfg)?;
            emit(out, &serde_json::to_value(rep)?)?;
            Ok(true)
        }
    }
}

fn duality(which: DualityCommand, out: Option<&Path>) -> Result<bool> {
    match which {
        DualityCommand::Check { points, planes } => {
            let p = load_points(&points)?;
            let v = load_planes(&planes)?;
            let ctx = DualityContext::new(p.d())?;
            let rep = verify_duality_relations(&p, &v, &ctx)?;
            let ok = rep.factor3_violations == 0 && rep.incidence_mismatches == 0;
            emit(out, &serde_json::to_value(rep)?)?;
            Ok(ok)
        }
        DualityCommand::Map { direction, input } => {
            let Some(target) = out else {
                bail!("--out is required for duality map");
            };
            match direction {
                Direction::Forward => {
                    let p = load_points(&input)?;
                    let planes: Vec<AffinePlane> = p.iter().map(dual_plane).collect();
                    save_planes(target, &PlaneFamily::new(planes, 0.0)?)?;
                }
                Direction::Backward => {
                    let v = load_planes(&input)?;
                    let d = v.planes.first().context("no planes in input")?.d();
                    let ctx = DualityContext::new(d)?;
                    let pts: Vec<Vec<f64>> = v.planes.iter().map(|w| dual_point(w, &ctx)).collect::<Result<_, _>>()?;
                    save_points(target, &PointCloud::from_points(&pts)?)?;
                }
            }
            Ok(true)
        }
    }
}

fn experiment(a: ExperimentArgs, seed: u64, out: Option<&Path>) -> Result<bool> {
    let mut c = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<ExperimentConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(id) = a.id {
        c.experiment = id;
    }
    if c.experiment.is_empty() {
        bail!("name an experiment or pass --config");
    }
    c.measure = a.measure.or(c.measure);
    c.s = a.s.or(c.s);
    c.t = a.t.or(c.t);
    c.p = a.p.or(c.p);
    c.q = a.q.or(c.q);
    c.k_min = a.k_min.or(c.k_min);
    c.k_max = a.k_max.or(c.k_max);
    c.planes = a.planes.or(c.planes);
    c.samples = a.samples.or(c.samples);
    c.seed = c.seed.or(Some(seed));
    let summary = run_experiment(&c, out)?;
    for check in &summary.checks {
        eprintln!("{} {}: {} (target {})", if check.pass { "PASS" } else { "FAIL" }, check.name, check.value, check.target);
    }
    Ok(summary.pass)
}
