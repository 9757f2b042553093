//! `fracshape` command-line tool.
//!
//! Exit codes: 0 success (a solve that did not converge still counts), 2 bad input,
//! 3 violated invariant, 4 internal error.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use fracshape::curve::{DiscreteCurve, TangentField};
use fracshape::experiments::{self, BallOptions, BenchOptions, ExperimentReport, Inequality, ShrinkingCircleOptions, VanishingOptions};
use fracshape::geodesic::{self, SolveOptions};
use fracshape::metric::{self, MetricParams};
use fracshape::spectral::{self, SobolevOrder};
use fracshape::{io, Error};
use serde_json::{json, Map, Value};

use config::{Flags, Format, GridDefaults, Settings, Variant};

const EXPERIMENTS: [&str; 4] = ["shrinking-circle", "vanishing-distance", "bench", "ball-equivalence"];

#[derive(Debug, Parser)]
#[command(name = "fracshape", version, about = "Fractional Sobolev metrics on closed curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    flags: Flags,

    /// TOML file with defaults for any of the flags above (flags win)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Norms of a tangent field on a curve (the curve's own samples when no field is given)
    Norm {
        curve: PathBuf,
        #[arg(long)]
        field: Option<PathBuf>,
    },
    /// Upper bound on the geodesic distance between two curves by energy minimization
    Distance {
        c0: PathBuf,
        c1: PathBuf,
        /// Also write the optimal path as JSON
        #[arg(long)]
        path_out: Option<PathBuf>,
    },
    /// Run one of: shrinking-circle, vanishing-distance, bench, ball-equivalence
    Experiment {
        name: String,
        /// Inequality for `bench`
        #[arg(long, default_value = "composition")]
        which: String,
        /// Trials for `bench`
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Fixed exponent a for `bench` (composition and products)
        #[arg(long)]
        a: Option<f64>,
        /// Refinement levels for `vanishing-distance`
        #[arg(long, default_value_t = 3)]
        levels: usize,
        /// Samples for `ball-equivalence`
        #[arg(long, default_value_t = 500)]
        samples: usize,
        /// Also write one CSV per plot series next to the output file
        #[arg(long)]
        plots: bool,
    },
}

/// A failure tagged with its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn classify(error: anyhow::Error) -> Failure {
    let code = match error.downcast_ref::<Error>() {
        Some(Error::ImmersionViolation { .. }) => 3,
        Some(Error::GenerationFailure(_) | Error::InnerSolveFailure(_)) => 4,
        Some(_) => 2,
        // Everything raised by the CLI itself is about its input.
        None => 2,
    };
    Failure { code, error }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FRACSHAPE_LOG", "error")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
        Err(_) => ExitCode::from(4),
    }
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    let grid = match &cli.command {
        Command::Experiment { name, which, .. } => experiment_grid(name, which),
        _ => GridDefaults { n: 64, m: 8 },
    };
    let settings = Settings::resolve(cli.flags, cli.config.as_deref(), grid).map_err(|error| Failure { code: 2, error })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(settings.jobs)
        .build_global()
        .map_err(|e| Failure { code: 4, error: anyhow!(e) })?;
    log::info!("settings: {settings:?}");
    let out = match cli.command {
        Command::Norm { curve, field } => cmd_norm(&settings, &curve, field.as_deref()),
        Command::Distance { c0, c1, path_out } => cmd_distance(&settings, &c0, &c1, path_out.as_deref()),
        Command::Experiment { name, which, trials, a, levels, samples, plots } => {
            let extra = ExperimentArgs { which, trials, a, levels, samples, plots };
            cmd_experiment(&settings, &name, &extra)
        }
    };
    out.map_err(classify)
}

fn experiment_grid(name: &str, which: &str) -> GridDefaults {
    match name {
        "shrinking-circle" => GridDefaults { n: 64, m: 512 },
        "vanishing-distance" => GridDefaults { n: 16, m: 4 },
        "bench" if which.replace('-', "_") == "composition" => GridDefaults { n: 1024, m: 8 },
        "bench" => GridDefaults { n: 256, m: 8 },
        _ => GridDefaults { n: 64, m: 8 },
    }
}

fn params(s: &Settings) -> Result<MetricParams> {
    Ok(match s.variant {
        Variant::Full => MetricParams::full(s.q)?,
        Variant::Homogeneous => MetricParams::homogeneous(s.q)?,
    })
}

fn emit(s: &Settings, text: &str) -> Result<()> {
    match &s.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// `{"header": settings, "command": .., <body>}` or the CSV equivalent.
fn key_values(s: &Settings, command: &str, header_extra: Map<String, Value>, body: Vec<(&str, Value)>) -> String {
    let mut header = s.header();
    header.extend(header_extra);
    match s.format {
        Format::Json => {
            let mut doc = Map::new();
            doc.insert("command".into(), json!(command));
            doc.insert("header".into(), Value::Object(header));
            for (k, v) in body {
                doc.insert(k.into(), v);
            }
            let mut text = serde_json::to_string_pretty(&Value::Object(doc)).expect("json");
            text.push('\n');
            text
        }
        Format::Csv => {
            let mut text = String::from("kind,name,value\n");
            let _ = writeln!(text, "command,{command},");
            for (k, v) in &header {
                let _ = writeln!(text, "header,{k},{}", csv_value(v));
            }
            for (k, v) in body {
                let _ = writeln!(text, "result,{k},{}", csv_value(&v));
            }
            text
        }
    }
}

fn csv_value(v: &Value) -> String {
    let s = match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s
    }
}

/// For commands reading curves, `--n` must match the files and otherwise records their size.
fn match_grid(s: &Settings, path: &Path, n: usize) -> Result<Settings> {
    if s.n_given && s.n != n {
        return Err(Error::GridMismatch(format!("{} has N = {n} but --n {} was requested", path.display(), s.n)).into());
    }
    Ok(Settings { n, ..s.clone() })
}

fn cmd_norm(s: &Settings, curve_path: &Path, field_path: Option<&Path>) -> Result<()> {
    let curve = io::read_curve(curve_path)?;
    let s = &match_grid(s, curve_path, curve.len())?;
    let field = match field_path {
        Some(p) => io::read_function(p)?,
        None => curve.position().clone(),
    };
    let h = TangentField::new(&curve, field)?;
    let q = SobolevOrder::new(s.q)?;
    let hom = metric::gq_dot(&curve, &h, &h, q)?.max(0.0).sqrt();
    let full = metric::gq(&curve, &h, &h, q)?.max(0.0).sqrt();
    let selected = metric::norm(&curve, &h, params(s)?)?;
    let f = h.as_function();
    let mut extra = Map::new();
    extra.insert("curve".into(), json!(curve_path.display().to_string()));
    extra.insert("field".into(), json!(field_path.map(|p| p.display().to_string())));
    let body = vec![
        ("norm", json!(selected)),
        ("invariant_full", json!(full)),
        ("invariant_homogeneous", json!(hom)),
        ("sobolev_full", json!(spectral::hq_norm(f, q))),
        ("sobolev_homogeneous", json!(spectral::hq_dot_seminorm(f, q))),
        ("length", json!(curve.length())),
        ("grid_size", json!(curve.len())),
    ];
    emit(s, &key_values(s, "norm", extra, body))
}

fn cmd_distance(s: &Settings, p0: &Path, p1: &Path, path_out: Option<&Path>) -> Result<()> {
    let (c0, c1): (DiscreteCurve, DiscreteCurve) = (io::read_curve(p0)?, io::read_curve(p1)?);
    if c0.len() != c1.len() || c0.dim() != c1.dim() {
        return Err(Error::GridMismatch(format!(
            "{} has N = {}, d = {}; {} has N = {}, d = {}",
            p0.display(),
            c0.len(),
            c0.dim(),
            p1.display(),
            c1.len(),
            c1.dim()
        ))
        .into());
    }
    let s = &match_grid(s, p0, c0.len())?;
    let params = params(s)?;
    let opts = SolveOptions { steps: s.m, max_iter: s.max_iter, tol: s.tol, ..SolveOptions::default() };
    let (path, report) = geodesic::solve_bvp(&c0, &c1, params, &opts)?;
    if !report.converged {
        log::warn!("energy minimization stopped after {} iterations without converging", report.iterations);
    }
    if let Some(p) = path_out {
        std::fs::write(p, io::path_to_json(&path)).with_context(|| format!("cannot write {}", p.display()))?;
    }
    let mut extra = Map::new();
    extra.insert("c0".into(), json!(p0.display().to_string()));
    extra.insert("c1".into(), json!(p1.display().to_string()));
    extra.insert("path_out".into(), json!(path_out.map(|p| p.display().to_string())));
    let mut body = vec![
        ("distance_upper_bound", json!(report.distance_upper_bound)),
        ("energy", json!(report.energy)),
        ("iterations", json!(report.iterations)),
        ("converged", json!(report.converged)),
        ("line_search_stalled", json!(report.line_search_stalled)),
        ("min_speed_along_path", json!(report.min_speed_along_path)),
        ("min_length_along_path", json!(report.min_length_along_path)),
    ];
    if s.q >= 1.0 && s.variant == Variant::Full {
        body.push(("srv_lower_bound", json!(metric::srv_lower_bound(&c0, &c1)?)));
    }
    emit(s, &key_values(s, "distance", extra, body))
}

struct ExperimentArgs {
    which: String,
    trials: usize,
    a: Option<f64>,
    levels: usize,
    samples: usize,
    plots: bool,
}

fn cmd_experiment(s: &Settings, name: &str, x: &ExperimentArgs) -> Result<()> {
    let mut report = match name {
        "shrinking-circle" => {
            let opts = ShrinkingCircleOptions { timing: s.timing, ..ShrinkingCircleOptions::new(s.q, s.m, s.n) };
            experiments::shrinking_circle_with(&opts)?
        }
        "vanishing-distance" => {
            let opts = VanishingOptions {
                n0: s.n,
                m0: s.m,
                max_iter: s.max_iter,
                timing: s.timing,
                ..VanishingOptions::new(s.q, s.seed, x.levels)
            };
            experiments::vanishing_distance_probe_with(&opts)?
        }
        "bench" => {
            let which: Inequality = x.which.parse()?;
            let opts = BenchOptions {
                n: s.n,
                a: x.a,
                timing: s.timing,
                ..BenchOptions::new(which, x.trials, s.seed)
            };
            experiments::inequality_bench_with(&opts)?
        }
        "ball-equivalence" => {
            let opts = BallOptions { n: s.n, steps: s.m, samples: x.samples, timing: s.timing, ..BallOptions::new(s.q, s.seed) };
            experiments::ball_equivalence_probe_with(&opts)?
        }
        other => bail!("unknown experiment {other:?}; available: {}", EXPERIMENTS.join(", ")),
    };
    record_header(&mut report, s, x, name);
    let text = match s.format {
        Format::Json => report.to_json() + "\n",
        Format::Csv => report.to_csv(),
    };
    emit(s, &text)?;
    if x.plots {
        let dir = s.out.as_deref().and_then(Path::parent).unwrap_or(Path::new("."));
        for (stem, csv) in report.plot_files() {
            let p = dir.join(format!("{stem}.csv"));
            std::fs::write(&p, csv).with_context(|| format!("cannot write {}", p.display()))?;
        }
    }
    Ok(())
}

/// Stores every CLI setting under `cli.*` in the report parameters.
fn record_header(report: &mut ExperimentReport, s: &Settings, x: &ExperimentArgs, name: &str) {
    let mut header = s.header();
    if name == "bench" {
        header.insert("which".into(), json!(x.which));
        header.insert("trials".into(), json!(x.trials));
        header.insert("a".into(), json!(x.a));
    }
    if name == "vanishing-distance" {
        header.insert("levels".into(), json!(x.levels));
    }
    if name == "ball-equivalence" {
        header.insert("samples".into(), json!(x.samples));
    }
    header.insert("plots".into(), json!(x.plots));
    report.parameters.insert("cli".into(), Value::Object(header));
}
