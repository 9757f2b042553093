//! Run configuration: command-line flags layered over an optional TOML file over defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Full,
    Homogeneous,
}

/// Flags shared by every command. All are optional here so that a config file can fill
/// the gaps; [`Settings::resolve`] applies the defaults.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Flags {
    /// Sobolev order q [default: 1.0]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub q: Option<f64>,
    /// Grid size N, a power of two ≥ 8 [default: depends on the command]
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Time steps M [default: 8; 512 for shrinking-circle]
    #[arg(long, global = true)]
    pub m: Option<usize>,
    /// Seed for all randomness [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Relative gradient tolerance of the energy minimization [default: 1e-6]
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    /// Iteration cap of the energy minimization [default: 500]
    #[arg(long = "max-iter", global = true)]
    pub max_iter: Option<usize>,
    /// Worker threads, 0 for one per core [default: 0]
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output format [default: json]
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// Output file; standard output when absent [default: -]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Metric variant [default: full]
    #[arg(long, value_enum, global = true)]
    pub variant: Option<Variant>,
    /// Record wall-clock runtimes (breaks byte-identical output) [default: false]
    #[arg(long, global = true)]
    #[serde(default)]
    pub timing: bool,
}

impl Flags {
    /// Fields set here win over those in `lower`.
    fn over(self, lower: Flags) -> Flags {
        Flags {
            q: self.q.or(lower.q),
            n: self.n.or(lower.n),
            m: self.m.or(lower.m),
            seed: self.seed.or(lower.seed),
            tol: self.tol.or(lower.tol),
            max_iter: self.max_iter.or(lower.max_iter),
            jobs: self.jobs.or(lower.jobs),
            format: self.format.or(lower.format),
            out: self.out.or(lower.out),
            variant: self.variant.or(lower.variant),
            timing: self.timing || lower.timing,
        }
    }
}

/// Resolved, validated settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub q: f64,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    pub jobs: usize,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub variant: Variant,
    pub timing: bool,
    pub config: Option<PathBuf>,
    /// `--n` was given explicitly (flag or config file).
    pub n_given: bool,
}

/// Per-command defaults for the grid flags.
#[derive(Debug, Clone, Copy)]
pub struct GridDefaults {
    pub n: usize,
    pub m: usize,
}

pub fn read_config(path: &Path) -> Result<Flags> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("malformed config {}", path.display()))
}

impl Settings {
    pub fn resolve(flags: Flags, config: Option<&Path>, grid: GridDefaults) -> Result<Self> {
        let file = match config {
            Some(p) => read_config(p)?,
            None => Flags::default(),
        };
        let f = flags.over(file);
        let n_given = f.n.is_some();
        let s = Settings {
            q: f.q.unwrap_or(1.0),
            n: f.n.unwrap_or(grid.n),
            m: f.m.unwrap_or(grid.m),
            seed: f.seed.unwrap_or(0),
            tol: f.tol.unwrap_or(1e-6),
            max_iter: f.max_iter.unwrap_or(500),
            jobs: f.jobs.unwrap_or(0),
            format: f.format.unwrap_or(Format::Json),
            out: f.out,
            variant: f.variant.unwrap_or(Variant::Full),
            timing: f.timing,
            config: config.map(Path::to_path_buf),
            n_given,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if !(self.q.is_finite() && self.q >= 0.0) {
            bail!("--q must be a finite number ≥ 0, got {}", self.q);
        }
        if self.n < 8 || !self.n.is_power_of_two() {
            bail!("--n must be a power of two ≥ 8, got {}", self.n);
        }
        if self.m == 0 {
            bail!("--m must be positive");
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            bail!("--tol must be positive, got {}", self.tol);
        }
        if self.max_iter == 0 {
            bail!("--max-iter must be positive");
        }
        Ok(())
    }

    /// Every setting, for the report header.
    pub fn header(&self) -> Map<String, Value> {
        let mut h = Map::new();
        h.insert("q".into(), json!(self.q));
        h.insert("n".into(), json!(self.n));
        h.insert("m".into(), json!(self.m));
        h.insert("seed".into(), json!(self.seed));
        h.insert("tol".into(), json!(self.tol));
        h.insert("max_iter".into(), json!(self.max_iter));
        h.insert("jobs".into(), json!(self.jobs));
        h.insert("format".into(), json!(self.format));
        h.insert("out".into(), json!(self.out.as_ref().map_or("-".into(), |p| p.display().to_string())));
        h.insert("variant".into(), json!(self.variant));
        h.insert("timing".into(), json!(self.timing));
        h.insert("config".into(), json!(self.config.as_ref().map(|p| p.display().to_string())));
        h
    }
}
