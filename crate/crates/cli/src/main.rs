mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use besovlab::besov::besov_seminorm;
use besovlab::geometry::{
    boundary_cardinality, coarea_h, fractional_perimeter, inner_neighborhood_measures, minkowski_fit, PointSet,
};
use besovlab::heat::{heat_kernel, model_from_json, model_to_json, SpectralHeatModel};
use besovlab::mmspace::{self, io, MetricMeasureSpace};
use besovlab::verify::{run_suite, Suite};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use config::{GridBound, RadiusGridSpec, RunConfig, TimeGridSpec};
use output::{read_field, read_report_doc, read_set, reports_to_csv, write_atomic, write_json, write_table, ReportDoc};

#[derive(Parser)]
#[command(name = "besovlab", version, about = "Heat semigroup Besov seminorms and fractal geometry on finite spaces")]
struct Cli {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: BESOVLAB_WORKERS, then all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for randomized checks (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Radius grid `r_min:r_max[:count]`; each bound a number or a rule
    /// (`bulk`, `mesh`, `diameter`).
    #[arg(long, global = true)]
    rgrid: Option<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build and inspect spaces.
    #[command(subcommand)]
    Space(SpaceCmd),
    /// Spectral heat models and kernels.
    #[command(subcommand)]
    Heat(HeatCmd),
    /// Heat Besov seminorms of fields.
    #[command(subcommand)]
    Besov(BesovCmd),
    /// Perimeters, Minkowski measures, coarea, boundaries.
    #[command(subcommand)]
    Geom(GeomCmd),
    /// Functional-inequality check suites.
    #[command(subcommand)]
    Verify(VerifyCmd),
    /// Re-emit a verification report as JSON or CSV.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Gasket,
    Carpet,
    Circle,
    Interval,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Exact,
    Empirical,
    All,
}

#[derive(Subcommand)]
enum SpaceCmd {
    /// Build a space and write it as JSON.
    Build {
        #[arg(long, value_enum)]
        kind: Kind,
        /// Refinement level (gasket, carpet).
        #[arg(long)]
        level: Option<u32>,
        /// Point count (circle, interval).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print point count, dimensions and hash.
    Info {
        #[arg(long)]
        space: PathBuf,
    },
}

#[derive(Subcommand)]
enum HeatCmd {
    /// Diagonalize the generator and cache the model.
    Decompose {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Heat kernel at one time as CSV `x,y,value`.
    Kernel {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum BesovCmd {
    /// Heat seminorm profile of a field.
    Norm {
        #[arg(long)]
        model: PathBuf,
        /// CSV `point_id,value`.
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        alpha: f64,
        /// `t_min:t_max:points_per_decade`; each bound a number or a rule
        /// (`bulk`, `exact`, `spectral`).
        #[arg(long)]
        tgrid: Option<String>,
        /// Profile CSV `t,value`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON summary; printed when omitted.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GeomCmd {
    /// Fractional perimeter profile of a set.
    Perimeter {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        set: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Inner Minkowski measures and their scaling fit.
    Minkowski {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        set: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Level-set integral of a field.
    Coarea {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        alpha: f64,
        /// Largest radius (default diameter/4).
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Boundary point count of a set.
    Boundary {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        set: PathBuf,
    },
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// Run a check suite.
    Run {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long)]
        space: PathBuf,
        /// Cached model; decomposed on the fly when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        /// Also write the reports as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Random functions per randomized exact check.
        #[arg(long)]
        trials: Option<usize>,
    },
}

fn load_space(path: &Path) -> Result<MetricMeasureSpace<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading space {}", path.display()))?;
    io::from_json(&text).with_context(|| format!("loading space {}", path.display()))
}

fn load_model(path: &Path) -> Result<SpectralHeatModel<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
    model_from_json(&text).with_context(|| format!("loading model {}", path.display()))
}

fn parse_tgrid(spec: &str, base: &TimeGridSpec) -> Result<TimeGridSpec> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() > 3 || parts.iter().any(|p| p.is_empty()) {
        bail!("--tgrid expects t_min:t_max[:points_per_decade], got {spec:?}");
    }
    let mut g = base.clone();
    g.t_min = GridBound::parse(parts[0]);
    if let Some(p) = parts.get(1) {
        g.t_max = GridBound::parse(p);
    }
    if let Some(p) = parts.get(2) {
        g.points_per_decade = p.parse().with_context(|| format!("points per decade {p:?}"))?;
    }
    Ok(g)
}

fn parse_rgrid(spec: &str, base: &RadiusGridSpec) -> Result<RadiusGridSpec> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() > 3 || parts.iter().any(|p| p.is_empty()) {
        bail!("--rgrid expects r_min:r_max[:count], got {spec:?}");
    }
    let mut g = base.clone();
    g.r_min = GridBound::parse(parts[0]);
    if let Some(p) = parts.get(1) {
        g.r_max = GridBound::parse(p);
    }
    if let Some(p) = parts.get(2) {
        g.count = p.parse().with_context(|| format!("radius count {p:?}"))?;
    }
    Ok(g)
}

fn point_set(space: &MetricMeasureSpace<f64>, path: &Path) -> Result<PointSet<f64>> {
    Ok(PointSet::new(space, read_set(path)?)?)
}

#[derive(Serialize)]
struct NormSummary {
    p: f64,
    alpha: f64,
    sup: f64,
    argsup_t: f64,
    boundary_flag: bool,
    flags: Vec<String>,
}

#[derive(Serialize)]
struct MinkowskiDoc {
    profile: besovlab::geometry::GeomProfile,
    fit: besovlab::ScalingFit,
}

#[derive(Serialize)]
struct SpaceInfo {
    name: String,
    kind: String,
    points: usize,
    d_h: f64,
    d_w: Option<f64>,
    diameter: f64,
    mesh: f64,
    hash: String,
}

/// Returns the process exit code for a command that ran to completion.
fn run(cli: Cli) -> Result<u8> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(spec) = &cli.rgrid {
        cfg.rgrid = parse_rgrid(spec, &cfg.rgrid)?;
    }
    if let Some(n) = cfg.worker_count(cli.workers)? {
        if n == 0 {
            bail!("worker count must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("starting the worker pool")?;
    }
    match cli.cmd {
        Cmd::Space(SpaceCmd::Build { kind, level, n, out }) => {
            let space: MetricMeasureSpace<f64> = match kind {
                Kind::Gasket => mmspace::build_gasket(level.context("--level is required for a gasket")?)?,
                Kind::Carpet => mmspace::build_carpet(level.context("--level is required for a carpet")?)?,
                Kind::Circle => mmspace::build_circle_grid(n.context("--n is required for a circle")?)?,
                Kind::Interval => mmspace::build_interval_grid(n.context("--n is required for an interval")?)?,
            };
            write_atomic(&out, io::to_json(&space)?.as_bytes())?;
            println!("space {}: {} points -> {}", space.meta.name, space.len(), out.display());
        }
        Cmd::Space(SpaceCmd::Info { space }) => {
            let s = load_space(&space)?;
            let info = SpaceInfo {
                name: s.meta.name.clone(),
                kind: s.meta.kind.as_str().to_string(),
                points: s.len(),
                d_h: s.d_h(),
                d_w: s.meta.d_w,
                diameter: s.meta.diameter,
                mesh: s.meta.mesh,
                hash: io::space_hash(&s)?,
            };
            print!("{}", besovlab::report::to_json_string(&info)?);
        }
        Cmd::Heat(HeatCmd::Decompose { space, out }) => {
            let s = load_space(&space)?;
            let m = SpectralHeatModel::from_space(&s)?;
            write_atomic(&out, model_to_json(&m)?.as_bytes())?;
            println!(
                "model: {} modes, lambda_1 = {:.6e}, lambda_max = {:.6e} -> {}",
                m.len(),
                m.lambda_1(),
                m.lambda_max(),
                out.display()
            );
        }
        Cmd::Heat(HeatCmd::Kernel { model, t, out }) => {
            let m = load_model(&model)?;
            let k = heat_kernel(&m, t)?;
            let n = k.n;
            write_table(
                &out,
                &["x", "y", "value"],
                (0..n * n).map(|i| vec![(i / n) as f64, (i % n) as f64, k.values[i]]),
            )?;
            println!("kernel at t = {t:e}: {n}x{n} -> {}", out.display());
        }
        Cmd::Besov(BesovCmd::Norm { model, field, p, alpha, tgrid, out, summary }) => {
            let m = load_model(&model)?;
            let f = read_field(&field, m.len())?;
            let spec = match tgrid {
                Some(s) => parse_tgrid(&s, &cfg.tgrid)?,
                None => cfg.tgrid.clone(),
            };
            let grid = spec.resolve(&m)?;
            let prof = besov_seminorm(&m, &f, p, alpha, &grid)?;
            if let Some(out) = out {
                write_table(&out, &["t", "value"], prof.samples.iter().map(|(t, v)| vec![*t, *v]))?;
            }
            let doc = NormSummary {
                p: prof.p,
                alpha: prof.alpha,
                sup: prof.sup,
                argsup_t: prof.argsup_t,
                boundary_flag: prof.boundary_flag,
                flags: prof.flags.clone(),
            };
            match summary {
                Some(path) => write_json(&path, &doc)?,
                None => print!("{}", besovlab::report::to_json_string(&doc)?),
            }
            println!("besov norm: sup = {:.10e} at t = {:.4e} over {} times", prof.sup, prof.argsup_t, grid.len());
        }
        Cmd::Geom(cmd) => geom(cmd, &cfg)?,
        Cmd::Verify(VerifyCmd::Run { suite, space, model, report, csv, trials }) => {
            let s = load_space(&space)?;
            let m = match model {
                Some(p) => load_model(&p)?,
                None => SpectralHeatModel::from_space(&s)?,
            };
            m.check_space(&s)?;
            let mut sc = cfg.suite_config();
            if let Some(t) = trials {
                sc.trials = t;
            }
            let suite = match suite {
                SuiteArg::Exact => Suite::Exact,
                SuiteArg::Empirical => Suite::Empirical,
                SuiteArg::All => Suite::All,
            };
            let doc = ReportDoc { checks: run_suite(&s, &m, suite, &sc)? };
            for c in &doc.checks {
                println!("{}", c.summary());
            }
            write_json(&report, &doc)?;
            if let Some(path) = csv {
                write_atomic(&path, &reports_to_csv(&doc.checks)?)?;
            }
            let failed = doc.exact_failures();
            println!("{} checks, {failed} exact failures -> {}", doc.checks.len(), report.display());
            if failed > 0 {
                return Ok(1);
            }
        }
        Cmd::Report { input, format, out } => {
            let doc = read_report_doc(&input)?;
            match format {
                Format::Json => write_json(&out, &doc)?,
                Format::Csv => write_atomic(&out, &reports_to_csv(&doc.checks)?)?,
            }
            println!("{} checks -> {}", doc.checks.len(), out.display());
        }
    }
    Ok(0)
}

fn geom(cmd: GeomCmd, cfg: &RunConfig) -> Result<()> {
    match cmd {
        GeomCmd::Perimeter { space, set, alpha, out } => {
            let s = load_space(&space)?;
            let e = point_set(&s, &set)?;
            let prof = fractional_perimeter(&s, &e, alpha, &cfg.rgrid.resolve(&s)?)?;
            write_json(&out, &prof)?;
            println!("perimeter: sup = {:.10e} over {} radii", prof.sup, prof.grid.len());
        }
        GeomCmd::Minkowski { space, set, out } => {
            let s = load_space(&space)?;
            let e = point_set(&s, &set)?;
            let grid = cfg.rgrid.resolve(&s)?;
            let values = inner_neighborhood_measures(&s, &e, &grid)?;
            let fit = minkowski_fit(&s, &e, &grid)?;
            let profile = besovlab::geometry::GeomProfile {
                quantity: "inner_neighborhood_measure".into(),
                sup: values.iter().cloned().fold(0.0, f64::max),
                grid,
                values,
                flags: Vec::new(),
            };
            println!("minkowski: slope = {:.6} (R^2 {:.4})", fit.slope, fit.r_squared);
            write_json(&out, &MinkowskiDoc { profile, fit })?;
        }
        GeomCmd::Coarea { space, field, alpha, radius, out } => {
            let s = load_space(&space)?;
            let u = read_field(&field, s.len())?;
            let r = radius.unwrap_or(s.meta.diameter / 4.0);
            let h = coarea_h(&s, &u, alpha, r, None)?;
            write_json(&out, &h)?;
            println!("coarea: integral = {:.10e} over {} levels", h.integral, h.s.len());
        }
        GeomCmd::Boundary { space, set } => {
            let s = load_space(&space)?;
            let e = point_set(&s, &set)?;
            println!("boundary: {}", boundary_cardinality(&s, &e)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
