//! The `riesz` command line: one subcommand per estimator family, line-JSON
//! records on stdout (or `--out`), one summary line per estimate on stderr.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical
//! failure of the model, 3 failed self-verification.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::estimators::{
    analytic_reference, draw_samples, estimate_conditional, estimate_density, estimate_density_field,
    estimate_density_grad, estimate_theta, sobolev_norm_one, tail_bound_check, theoretical_constants,
    EstimatorConfig, Truncation,
};
use crate::geometry::{
    bell_path_integral, build_grid_field, energy_distance, graph_distance, riesz_distance, FieldSource,
    GridField, Threshold,
};
use crate::localize::{localized_density, BumpParams, Domain};
use crate::malliavin::MultiIndex;
use crate::scenarios::{get_scenario, Scenario};
use crate::verify::{self, Mode};

mod config;
mod output;

pub use config::{DistanceConfig, GridConfig, LocalizeConfig, OutputConfig, RunConfig, SEED_ENV};
pub use output::{config_hash, Emitter, Record};

const DEFAULT_SCENARIO: &str = "gauss-identity-d2";

#[derive(Parser, Debug)]
#[command(name = "riesz", version, about = "Monte Carlo densities of Gaussian functionals via Riesz-transform representations")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML run configuration; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    scenario: Option<String>,
    /// Sample count
    #[arg(long = "n", global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `auto`, `off` or a radius
    #[arg(long = "r-min", global = true)]
    r_min: Option<Truncation>,
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true)]
    chunk: Option<usize>,
    /// Worker threads; defaults to every available core
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Line-JSON destination instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress the summaries on stderr
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Args, Debug, Clone, Default)]
struct GridArgs {
    #[arg(long, allow_hyphen_values = true)]
    lo: Option<Point>,
    #[arg(long, allow_hyphen_values = true)]
    hi: Option<Point>,
    /// Points per axis
    #[arg(long)]
    res: Option<usize>,
    /// Positivity cutoff relative to the grid maximum
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SourceKind {
    Analytic,
    Estimated,
    Samples,
}

#[derive(Args, Debug, Clone)]
struct FieldArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Density behind the field; analytic when the scenario has one
    #[arg(long, value_enum)]
    source: Option<SourceKind>,
    /// Sample file (one comma-separated point per line) for `--source samples`
    #[arg(long)]
    samples: Option<PathBuf>,
    /// KDE bandwidth for `--source samples`; Silverman's rule otherwise
    #[arg(long)]
    bandwidth: Option<f64>,
    /// CSV node dump of the field
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Density at points, or on a grid with `--grid`
    Density {
        #[arg(long = "x", allow_hyphen_values = true)]
        x: Vec<Point>,
        #[arg(long)]
        grid: bool,
        #[command(flatten)]
        grid_args: GridArgs,
        /// CSV grid dump: coordinates, value, stderr
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// First-order density derivative
    Grad {
        #[arg(long = "x", required = true, allow_hyphen_values = true)]
        x: Vec<Point>,
        /// 1-based coordinate of the derivative
        #[arg(long, default_value_t = 1)]
        axis: usize,
    },
    /// Conditional expectation E[G | F = x]
    CondExp {
        #[arg(long = "x", required = true, allow_hyphen_values = true)]
        x: Vec<Point>,
        /// Name from the scenario's G catalog
        #[arg(long, default_value = "f1")]
        g: String,
    },
    /// Θ_p over a probe grid and the Sobolev norm of 1
    Theta {
        #[command(flatten)]
        probes: GridArgs,
    },
    /// k_{d,p}, K_{d,p} and, given a norm, the Θ and sup bounds
    Constants {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        norm: Option<f64>,
    },
    /// Tail bound p(x) ≤ Θ_{p̄}(d + ‖1‖) μ(B₂(x))^a
    Tails {
        #[arg(long = "x", required = true, allow_hyphen_values = true)]
        x: Vec<Point>,
        #[arg(long, default_value_t = 0.2)]
        a: f64,
        #[command(flatten)]
        probes: GridArgs,
    },
    /// Semi-distance, graph distance and energy distance on a grid field
    Distance {
        #[arg(long = "x", allow_hyphen_values = true)]
        x: Point,
        #[arg(long = "y", allow_hyphen_values = true)]
        y: Point,
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        segments: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Path integral of the score along a polyline
    Bell {
        /// Vertices separated by `;`, e.g. `0,0;1,0;1,1`
        #[arg(long, allow_hyphen_values = true)]
        path: PathArg,
        #[command(flatten)]
        field: FieldArgs,
    },
    /// Localized density on a box (`--lo`, `--hi`) or ball (`--center`, `--radius`)
    Localize {
        #[arg(long = "x", required = true, allow_hyphen_values = true)]
        x: Vec<Point>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        lo: Option<Point>,
        #[arg(long, allow_hyphen_values = true)]
        hi: Option<Point>,
        #[arg(long, allow_hyphen_values = true)]
        center: Option<Point>,
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Acceptance suite with a pass/fail table
    Verify {
        /// Reduced sample sizes
        #[arg(long)]
        quick: bool,
    },
}

fn parse_point(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
        .collect()
}

/// Comma-separated coordinates.
#[derive(Clone, Debug, PartialEq)]
struct Point(Vec<f64>);

impl FromStr for Point {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        parse_point(s).map(Point)
    }
}

/// Vertices separated by `;`.
#[derive(Clone, Debug, PartialEq)]
struct PathArg(Vec<Vec<f64>>);

impl FromStr for PathArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let v = s.split(';').map(parse_point).collect::<std::result::Result<Vec<_>, _>>()?;
        if v.len() < 2 {
            return Err("need at least two vertices".into());
        }
        if v.iter().any(|p| p.len() != v[0].len()) {
            return Err("vertices differ in dimension".into());
        }
        Ok(PathArg(v))
    }
}

fn points(v: &[Point]) -> Vec<Vec<f64>> {
    v.iter().map(|p| p.0.clone()).collect()
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_env(std::env::var(SEED_ENV).ok().as_deref())?;
    let est = &mut cfg.estimator;
    if let Some(n) = common.n {
        est.n = n;
    }
    if let Some(s) = common.seed {
        est.seed = s;
    }
    if let Some(t) = common.r_min {
        est.truncation = t;
    }
    if let Some(p) = common.p {
        est.p = p;
    }
    if let Some(c) = common.chunk {
        est.chunk = c;
    }
    if let Some(w) = common.workers {
        est.workers = w;
    }
    if common.scenario.is_some() {
        cfg.scenario = common.scenario.clone();
    }
    if common.out.is_some() {
        cfg.output.json = common.out.clone();
    }
    Ok(cfg)
}

struct Ctx {
    cfg: RunConfig,
    emit: Emitter,
}

impl Ctx {
    fn scenario(&self) -> Result<Scenario> {
        get_scenario(self.scenario_id(), &self.cfg.scenario_params)
    }

    fn scenario_id(&self) -> &str {
        self.cfg.scenario.as_deref().unwrap_or(DEFAULT_SCENARIO)
    }

    fn est(&self) -> &EstimatorConfig {
        &self.cfg.estimator
    }

    fn estimate(&mut self, r: &crate::estimators::EstimateResult, x: &[f64], label: &str) -> Result<()> {
        let rec = Record::estimate(r, self.scenario_id(), x, self.cfg.estimator.p);
        let summary = format!("{label} {:?}: {r}", x);
        self.emit.record(&rec, &summary)
    }

    fn plain(&mut self, rec: Record, summary: String) -> Result<()> {
        let rec = rec.with_scenario(&self.scenario_id().to_string());
        self.emit.record(&rec, &summary)
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let mut cfg = resolve(&cli.common)?;
    apply_command_overrides(&mut cfg, &cli.command);
    cfg.validate()?;
    if let Command::Verify { quick } = cli.command {
        let mode = if quick { Mode::Quick } else { Mode::Full };
        let outcomes = verify::run_suite(mode, cfg.estimator.workers);
        verify::print_table(&outcomes, &mut std::io::stdout())?;
        return Ok(if outcomes.iter().all(|o| o.passed) { 0 } else { 3 });
    }
    let canonical = format!("{}|{:?}", serde_json::to_string(&cfg).expect("config serializes"), cli.command);
    let sink: Box<dyn Write> = match &cfg.output.json {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(std::io::stdout()),
    };
    let emit = Emitter::new(sink, cfg.estimator.seed, &canonical)?.quiet(cli.common.quiet);
    let mut ctx = Ctx { cfg, emit };
    dispatch(&mut ctx, cli.command)?;
    ctx.emit.finish()?;
    Ok(0)
}

fn apply_command_overrides(cfg: &mut RunConfig, cmd: &Command) {
    let grid = match cmd {
        Command::Density { grid_args, .. } => Some(grid_args),
        Command::Theta { probes } | Command::Tails { probes, .. } => Some(probes),
        Command::Distance { field, .. } | Command::Bell { field, .. } => Some(&field.grid),
        _ => None,
    };
    if let Some(g) = grid {
        if g.lo.is_some() {
            cfg.grid.lo = g.lo.clone().map(|p| p.0);
        }
        if g.hi.is_some() {
            cfg.grid.hi = g.hi.clone().map(|p| p.0);
        }
        if g.res.is_some() {
            cfg.grid.res = g.res;
        }
        if g.threshold.is_some() {
            cfg.grid.threshold = g.threshold;
        }
    }
    match cmd {
        Command::Density { csv: Some(c), .. } => cfg.output.csv = Some(c.clone()),
        Command::Distance { field, segments, iterations, .. } => {
            if let Some(s) = segments {
                cfg.distance.segments = *s;
            }
            if let Some(i) = iterations {
                cfg.distance.iterations = *i;
            }
            if field.csv.is_some() {
                cfg.output.csv = field.csv.clone();
            }
        }
        Command::Bell { field, .. } if field.csv.is_some() => cfg.output.csv = field.csv.clone(),
        Command::Localize { eps, lo, hi, center, radius, .. } => {
            let l = &mut cfg.localize;
            if let Some(e) = eps {
                l.eps = *e;
            }
            if lo.is_some() || hi.is_some() {
                l.lo = lo.clone().map(|p| p.0);
                l.hi = hi.clone().map(|p| p.0);
                l.center = None;
                l.radius = None;
            }
            if center.is_some() || radius.is_some() {
                l.center = center.clone().map(|p| p.0);
                l.radius = *radius;
                l.lo = None;
                l.hi = None;
            }
        }
        _ => {}
    }
}

/// Box and resolution from the config, defaulting to `[−3, 3]^d`.
fn grid_points(cfg: &GridConfig, d: usize, default_res: usize) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let lo = cfg.lo.clone().unwrap_or_else(|| vec![-3.0; d]);
    let hi = cfg.hi.clone().unwrap_or_else(|| vec![3.0; d]);
    if lo.len() != d || hi.len() != d {
        return Err(Error::Config { path: "grid.lo/grid.hi".into(), reason: format!("need {d} coordinates") });
    }
    Ok((lo, hi, cfg.res.unwrap_or(default_res)))
}

fn lattice(lo: &[f64], hi: &[f64], res: usize) -> Vec<Vec<f64>> {
    let d = lo.len();
    let count = res.pow(d as u32);
    (0..count)
        .map(|mut idx| {
            (0..d)
                .map(|k| {
                    let i = idx % res;
                    idx /= res;
                    if res == 1 {
                        0.5 * (lo[k] + hi[k])
                    } else {
                        lo[k] + (hi[k] - lo[k]) * i as f64 / (res - 1) as f64
                    }
                })
                .collect()
        })
        .collect()
}

fn check_dim(x: &[f64], d: usize) -> Result<()> {
    if x.len() != d {
        return Err(Error::Dimension { expected: d, got: x.len() });
    }
    Ok(())
}

fn dispatch(ctx: &mut Ctx, cmd: Command) -> Result<()> {
    match cmd {
        Command::Density { x, grid, .. } => {
            let x = points(&x);
            let sc = ctx.scenario()?;
            if sc.local_only {
                eprintln!("note: {} lives on a subdomain; `localize` gives the supported estimate", sc.id);
            }
            for xi in &x {
                check_dim(xi, sc.d())?;
                let r = estimate_density(&sc.f, xi, ctx.est())?;
                ctx.estimate(&r, xi, "density at")?;
            }
            if grid || x.is_empty() && ctx.cfg.grid.res.is_some() {
                let (lo, hi, res) = grid_points(&ctx.cfg.grid, sc.d(), 21)?;
                let pts = lattice(&lo, &hi, res);
                let results = estimate_density_field(&sc.f, &pts, ctx.est())?;
                for (p, r) in pts.iter().zip(&results) {
                    ctx.estimate(r, p, "density at")?;
                }
                if let Some(path) = ctx.cfg.output.csv.clone() {
                    let mut w = BufWriter::new(File::create(path)?);
                    let mut header: Vec<String> = (0..sc.d()).map(|k| format!("x{k}")).collect();
                    header.extend(["value".into(), "stderr".into()]);
                    writeln!(w, "{}", header.join(","))?;
                    for (p, r) in pts.iter().zip(&results) {
                        let coords: Vec<String> = p.iter().map(|v| v.to_string()).collect();
                        let se = r.stderr.map_or("nan".to_string(), |s| s.to_string());
                        writeln!(w, "{},{},{}", coords.join(","), r.value, se)?;
                    }
                    w.flush()?;
                }
            } else if x.is_empty() {
                return Err(Error::Config { path: "--x".into(), reason: "give a point or --grid".into() });
            }
        }
        Command::Grad { x, axis } => {
            let x = points(&x);
            let sc = ctx.scenario()?;
            if axis == 0 || axis > sc.d() {
                return Err(Error::Config { path: "--axis".into(), reason: format!("must be in 1..={}", sc.d()) });
            }
            let alpha = MultiIndex::new(&[axis - 1]);
            for xi in &x {
                check_dim(xi, sc.d())?;
                let r = estimate_density_grad(&sc.f, xi, &alpha, ctx.est())?;
                ctx.estimate(&r, xi, &format!("d/dx{axis} density at"))?;
            }
        }
        Command::CondExp { x, g } => {
            let x = points(&x);
            let sc = ctx.scenario()?;
            let ge = sc.g(&g)?.clone();
            for xi in &x {
                check_dim(xi, sc.d())?;
                let r = estimate_conditional(&sc.f, &ge, xi, ctx.est())?;
                ctx.estimate(&r, xi, &format!("E[{g} | F = x] at"))?;
            }
        }
        Command::Theta { .. } => {
            let sc = ctx.scenario()?;
            let (lo, hi, res) = grid_points(&ctx.cfg.grid, sc.d(), 7)?;
            let probes = lattice(&lo, &hi, res);
            let p = ctx.est().p;
            let t = estimate_theta(&sc.f, p, &probes, ctx.est())?;
            let arg = probes[t.argmax].clone();
            ctx.estimate(&t.result, &arg, &format!("theta_{p} (max over {} probes) at", probes.len()))?;
            let norm = sobolev_norm_one(&sc.f, p, ctx.est())?;
            ctx.estimate(&norm, &[], "norm of 1 in W^{1,p}, upper bound")?;
            if let Ok(c) = theoretical_constants(sc.d(), p) {
                let b = c.theta_bound(norm.value);
                ctx.plain(
                    Record { p: Some(p), ..Record::plain("theta_bound", Value::Null, b) },
                    format!("theta bound d K ||1||^k = {b:.6e}"),
                )?;
            }
        }
        Command::Constants { d, norm } => {
            let p = ctx.est().p;
            let c = theoretical_constants(d, p)?;
            let x = json!({"d": d});
            ctx.emit.record(
                &Record { p: Some(p), ..Record::plain("k", x.clone(), c.k) },
                &format!("k = {}", c.k),
            )?;
            ctx.emit.record(
                &Record { p: Some(p), ..Record::plain("K", x.clone(), c.big_k) },
                &format!("K = {}", c.big_k),
            )?;
            if let Some(n) = norm {
                let (tb, sb) = (c.theta_bound(n), c.sup_bound(n));
                ctx.emit.record(
                    &Record { p: Some(p), ..Record::plain("theta_bound", x.clone(), tb) },
                    &format!("theta_bound = {tb}"),
                )?;
                ctx.emit.record(
                    &Record { p: Some(p), ..Record::plain("sup_bound", x, sb) },
                    &format!("sup_bound = {sb}"),
                )?;
            }
        }
        Command::Tails { x, a, .. } => {
            let x = points(&x);
            let sc = ctx.scenario()?;
            let (lo, hi, res) = grid_points(&ctx.cfg.grid, sc.d(), 7)?;
            let probes = lattice(&lo, &hi, res);
            let p = ctx.est().p;
            for xi in &x {
                check_dim(xi, sc.d())?;
                let t = tail_bound_check(&sc.f, xi, a, p, &probes, ctx.est())?;
                let rec = Record {
                    kind: "tail".into(),
                    x: Value::from(xi.clone()),
                    stderr: Some(t.lhs_stderr),
                    n: Some(ctx.est().n as u64),
                    p: Some(p),
                    seed: Some(ctx.est().seed),
                    ..Record::plain("tail", Value::Null, t.lhs)
                };
                let verdict = if t.holds { "holds" } else { "violated" };
                ctx.plain(
                    rec,
                    format!(
                        "tail at {xi:?}: p = {:.4e} ± {:.1e} vs bound {:.4e} ± {:.1e} (theta = {:.4}, ||1|| = {:.4}, mass = {:.4e}): {verdict}",
                        t.lhs, t.lhs_stderr, t.rhs, t.rhs_stderr, t.theta, t.norm, t.ball_mass
                    ),
                )?;
                let rec = Record {
                    x: Value::from(xi.clone()),
                    stderr: Some(t.rhs_stderr),
                    p: Some(t.p_bar),
                    seed: Some(ctx.est().seed),
                    ..Record::plain("tail_bound", Value::Null, t.rhs)
                };
                ctx.plain(rec, format!("tail bound with p_bar = {:.4}", t.p_bar))?;
            }
        }
        Command::Distance { x, y, field, .. } => {
            let (x, y) = (x.0, y.0);
            let f = build_field(ctx, &field)?;
            check_dim(&x, f.d)?;
            check_dim(&y, f.d)?;
            let pair = json!([x, y]);
            let d = riesz_distance(&f, &x, &y)?.value();
            let g = graph_distance(&f, &x, &y)?.value();
            let (m, it) = (ctx.cfg.distance.segments, ctx.cfg.distance.iterations);
            let e = energy_distance(&f, &x, &y, m, it)?.value();
            ctx.plain(Record::plain("distance", pair.clone(), d), format!("d({x:?}, {y:?}) = {d:.6}"))?;
            ctx.plain(Record::plain("graph_distance", pair.clone(), g), format!("grid graph distance = {g:.6}"))?;
            ctx.plain(
                Record::plain("energy_distance", pair, e),
                format!("energy distance ({m} legs, {it} sweeps) = {e:.6}"),
            )?;
            dump_field(ctx, &f)?;
        }
        Command::Bell { path, field } => {
            let path = path.0;
            let f = build_field(ctx, &field)?;
            for v in &path {
                check_dim(v, f.d)?;
            }
            let b = bell_path_integral(&f, &path)?;
            let (start, end) = (&path[0], &path[path.len() - 1]);
            let delta = match (f.interp_logp(start), f.interp_logp(end)) {
                (Some(a), Some(z)) => z - a,
                _ => f64::NAN,
            };
            ctx.plain(
                Record::plain("bell", json!(path), b),
                format!("integral of the score along the path = {b:.6}; ln p(end) - ln p(start) = {delta:.6}"),
            )?;
            dump_field(ctx, &f)?;
        }
        Command::Localize { x, .. } => {
            let x = points(&x);
            let sc = ctx.scenario()?;
            let l = &ctx.cfg.localize;
            let domain = match (&l.lo, &l.hi, &l.center, l.radius) {
                (Some(lo), Some(hi), _, _) => Domain::Box { lo: lo.clone(), hi: hi.clone() },
                (_, _, Some(c), Some(r)) => Domain::Ball { center: c.clone(), radius: r },
                _ => {
                    return Err(Error::Config {
                        path: "localize".into(),
                        reason: "give a box (lo, hi) or a ball (center, radius)".into(),
                    })
                }
            };
            let params = BumpParams::new(l.eps, domain)?;
            for xi in &x {
                check_dim(xi, sc.d())?;
                let r = localized_density(&sc.f, xi, &params, ctx.est())?;
                ctx.estimate(&r, xi, "localized density at")?;
                if let Ok(Some(exact)) = analytic_reference(&sc.id, xi) {
                    eprintln!("  analytic value {exact:.7}");
                }
            }
        }
        Command::Verify { .. } => unreachable!("handled before dispatch"),
    }
    Ok(())
}

fn build_field(ctx: &Ctx, args: &FieldArgs) -> Result<GridField> {
    let sc = ctx.scenario()?;
    let d = sc.d();
    if d > 3 {
        return Err(Error::Config { path: "scenario".into(), reason: "grid fields need d ≤ 3".into() });
    }
    let (lo, hi, res) = grid_points(&ctx.cfg.grid, d, 61)?;
    let threshold = ctx.cfg.grid.threshold.map_or(Threshold::default(), Threshold::Relative);
    let kind = args.source.unwrap_or(if sc.analytic.is_some() { SourceKind::Analytic } else { SourceKind::Estimated });
    match kind {
        SourceKind::Analytic => {
            let a = sc.analytic.as_ref().ok_or_else(|| Error::Config {
                path: "--source".into(),
                reason: format!("{} has no closed-form density", sc.id),
            })?;
            build_grid_field(FieldSource::Analytic(a), &lo, &hi, res, threshold)
        }
        SourceKind::Estimated => {
            build_grid_field(FieldSource::Estimated { f: &sc.f, cfg: ctx.est() }, &lo, &hi, res, threshold)
        }
        SourceKind::Samples => {
            let samples = match &args.samples {
                Some(path) => read_samples(path, d)?,
                None => draw_samples(&sc.f, ctx.est())?,
            };
            build_grid_field(FieldSource::Samples { samples: &samples, bandwidth: args.bandwidth }, &lo, &hi, res, threshold)
        }
    }
}

fn read_samples(path: &std::path::Path, d: usize) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let row = parse_point(t).map_err(|reason| Error::Config {
            path: format!("{}:{}", path.display(), i + 1),
            reason,
        })?;
        if row.len() != d {
            return Err(Error::Config {
                path: format!("{}:{}", path.display(), i + 1),
                reason: format!("expected {d} columns, got {}", row.len()),
            });
        }
        out.push(row);
    }
    Ok(out)
}

fn dump_field(ctx: &Ctx, f: &GridField) -> Result<()> {
    if let Some(path) = &ctx.cfg.output.csv {
        let mut w = BufWriter::new(File::create(path)?);
        f.write_csv(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(run(["riesz", "constants", "--d", "2", "--p", "4", "--quiet"]), 0);
        assert_eq!(run(["riesz", "constants", "--d", "2", "--p", "2", "--quiet"]), 1);
        assert_eq!(run(["riesz", "no-such-command"]), 1);
        assert_eq!(run(["riesz", "density", "--x", "0,0", "--n", "0"]), 1);
        assert_eq!(run(["riesz", "--help"]), 0);
    }

    #[test]
    fn degenerate_model_exits_2() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        // det σ = 1 never exceeds 2 · (tr σ / d)^d = 2, so every draw is rejected
        std::fs::write(&path, "[estimator]\ndet_threshold = 2.0\nN = 200\n").unwrap();
        let code = run([
            "riesz", "density", "--scenario", "gauss-identity-d1", "--x", "0", "--quiet", "--out",
            dir.path().join("o.jsonl").to_str().unwrap(), "--config", path.to_str().unwrap(),
        ]);
        assert_eq!(code, 2);
        let missing = run(["riesz", "density", "--x", "0", "--config", "/nonexistent.toml"]);
        assert_eq!(missing, 1);
    }

    #[test]
    fn path_parsing() {
        let v: PathArg = "0,0;1,0;1,1".parse().unwrap();
        assert_eq!(v.0, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]]);
        assert!("0,0;1".parse::<PathArg>().is_err());
        assert!("0,0".parse::<PathArg>().is_err());
        assert!("0,x".parse::<Point>().is_err());
    }

    #[test]
    fn lattice_covers_the_box() {
        let pts = lattice(&[-1.0, 0.0], &[1.0, 2.0], 3);
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], vec![-1.0, 0.0]);
        assert_eq!(pts[8], vec![1.0, 2.0]);
    }
}
