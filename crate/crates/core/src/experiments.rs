//! Scripted numerical experiments with machine-readable reports.
//!
//! Every report is a deterministic function of its parameters and seed. Trials are
//! spread over the rayon pool and collected by trial index.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::curve::{self, circle, random_curve_with, random_diffeo, random_diffeo_with, rng_for, CurveSpec, DiffeoSpec, DiscreteCurve, TangentField};
use crate::error::{Error, Result};
use crate::geodesic::{self, PathGrid, SolveOptions};
use crate::metric::{self, MetricParams};
use crate::spectral::{self, SampledFunction, SobolevOrder, SpectralCoeffs};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    /// The mathematical statement being checked.
    pub statement: String,
    pub passed: bool,
    pub detail: String,
}

/// Plot data: one `(x, y)` column pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub parameters: BTreeMap<String, Value>,
    pub results: Vec<NamedValue>,
    pub assertions: Vec<Assertion>,
    pub series: Vec<Series>,
    /// Wall-clock seconds; only filled in on request because it breaks byte-identical output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

impl ExperimentReport {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            parameters: BTreeMap::new(),
            results: Vec::new(),
            assertions: Vec::new(),
            series: Vec::new(),
            runtime_seconds: None,
        }
    }

    fn param(&mut self, key: &str, value: Value) {
        self.parameters.insert(key.to_string(), value);
    }

    fn record(&mut self, name: impl Into<String>, value: f64) {
        self.results.push(NamedValue { name: name.into(), value });
    }

    fn check(&mut self, name: &str, statement: &str, passed: bool, detail: String) {
        self.assertions.push(Assertion { name: name.into(), statement: statement.into(), passed, detail });
    }

    fn series(&mut self, name: &str, x_label: &str, y_label: &str, x: Vec<f64>, y: Vec<f64>) {
        self.series.push(Series { name: name.into(), x_label: x_label.into(), y_label: y_label.into(), x, y });
    }

    /// All assertions hold.
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }

    pub fn result(&self, name: &str) -> Option<f64> {
        self.results.iter().find(|r| r.name == name).map(|r| r.value)
    }

    pub fn series_named(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Flat CSV: `kind,name,value,detail`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,name,value,detail\n");
        out.push_str(&format!("experiment,{},,\n", self.name));
        for (k, v) in &self.parameters {
            let _ = writeln!(out, "parameter,{k},{},", csv_field(&v.to_string()));
        }
        for r in &self.results {
            let _ = writeln!(out, "result,{},{:.16e},", r.name, r.value);
        }
        for a in &self.assertions {
            let _ = writeln!(out, "assertion,{},{},{}", a.name, a.passed, csv_field(&a.detail));
        }
        if let Some(t) = self.runtime_seconds {
            let _ = writeln!(out, "runtime,seconds,{t},");
        }
        out
    }

    /// `(file stem, csv text)` for each series.
    pub fn plot_files(&self) -> Vec<(String, String)> {
        self.series
            .iter()
            .map(|s| (format!("{}_{}", self.name, s.name), crate::io::xy_csv(&s.x_label, &s.y_label, &s.x, &s.y)))
            .collect()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn timed(mut report: ExperimentReport, start: Instant, timing: bool) -> ExperimentReport {
    if timing {
        report.runtime_seconds = Some(start.elapsed().as_secs_f64());
    }
    report
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Adaptive Simpson quadrature.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, floor: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, floor, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, floor, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // Local tolerances are never pushed below rounding of the total.
    let floor = 1e-16 * whole.abs();
    rec(f, a, b, fa, fm, fb, whole, tol, floor, 40)
}

// ---------------------------------------------------------------------------
// Shrinking circle

/// `G^q` speed of the unit-rate radial shrinking of a circle of radius `r`:
/// `sqrt(2π(r + r^{1−2q}))`, or `sqrt(2πr)` at `q = 0`.
pub fn shrinking_circle_speed(q: f64, r: f64) -> f64 {
    if q == 0.0 {
        (TWO_PI * r).sqrt()
    } else {
        (TWO_PI * (r + r.powf(1.0 - 2.0 * q))).sqrt()
    }
}

/// `∫_ε^1` of [`shrinking_circle_speed`] in the radius.
pub fn shrinking_circle_oracle(q: f64, eps: f64) -> f64 {
    // r = e^s smooths the endpoint singularity.
    // Written as sqrt(r²·speed²) so that r^{1−2q} cannot overflow for tiny r.
    let f = |s: f64| {
        let r3 = (3.0 * s).exp();
        let extra = if q == 0.0 { 0.0 } else { ((3.0 - 2.0 * q) * s).exp() };
        (TWO_PI * (r3 + extra)).sqrt()
    };
    integrate(&f, eps.ln(), 0.0, 1e-13)
}

/// Global constant `K` in `lim_{ε→0} L(ε) ≤ K/(3/2 − q)`.
///
/// `sqrt(a + b) ≤ sqrt a + sqrt b` gives `L ≤ sqrt(2π)(2/3 + 1/(3/2 − q)) ≤ 2 sqrt(2π)/(3/2 − q)`.
pub const SHRINKING_CIRCLE_K: f64 = 5.013_256_549_262_001;

#[derive(Debug, Clone)]
pub struct ShrinkingCircleOptions {
    pub q: f64,
    pub steps: usize,
    pub n: usize,
    /// Exponents `m` of `ε_m = 2^{−m}`.
    pub exponents: Vec<u32>,
    pub timing: bool,
}

impl ShrinkingCircleOptions {
    pub fn new(q: f64, steps: usize, n: usize) -> Self {
        Self { q, steps, n, exponents: (2..=12).collect(), timing: false }
    }
}

/// Discrete `G^q` length of `r ↦ r·(cos 2πθ, sin 2πθ)` from `r = 1` to `r = ε`.
///
/// The radii are spaced geometrically, `r_k = ε^{k/M}`; length does not depend on the
/// time parametrization and the geometric spacing resolves the blow-up at `r → 0`.
pub fn shrinking_circle_length(q: f64, eps: f64, steps: usize, n: usize) -> Result<f64> {
    let params = MetricParams::full(q)?;
    let base = circle(n, 2, 1.0)?;
    let curves = (0..=steps)
        .map(|k| base.scaled(eps.powf(k as f64 / steps as f64)))
        .collect::<Result<Vec<_>>>()?;
    geodesic::path_length(&PathGrid::new(curves)?, params)
}

pub fn shrinking_circle(q: f64, steps: usize, n: usize) -> Result<ExperimentReport> {
    shrinking_circle_with(&ShrinkingCircleOptions::new(q, steps, n))
}

pub fn shrinking_circle_with(opts: &ShrinkingCircleOptions) -> Result<ExperimentReport> {
    let start = Instant::now();
    let q = SobolevOrder::new(opts.q)?.value();
    if opts.exponents.len() < 3 {
        return Err(Error::Configuration("shrinking circle needs at least 3 values of ε".into()));
    }
    let mut report = ExperimentReport::new("shrinking-circle");
    report.param("q", json!(q));
    report.param("m", json!(opts.steps));
    report.param("n", json!(opts.n));
    report.param("epsilon_exponents", json!(opts.exponents));
    report.param("seeds", json!([]));

    let eps: Vec<f64> = opts.exponents.iter().map(|&m| 2f64.powi(-(m as i32))).collect();
    let lengths = eps
        .par_iter()
        .map(|&e| shrinking_circle_length(q, e, opts.steps, opts.n))
        .collect::<Result<Vec<_>>>()?;
    let oracle: Vec<f64> = eps.iter().map(|&e| shrinking_circle_oracle(q, e)).collect();
    let max_rel = lengths.iter().zip(&oracle).map(|(l, o)| ((l - o) / o).abs()).fold(0.0, f64::max);
    report.record("max_relative_error_vs_oracle", max_rel);
    report.check(
        "oracle_agreement",
        "the discrete path length matches the quadrature of sqrt(2π)·sqrt((1−t) + (1−t)^{1−2q})",
        max_rel <= 0.01,
        format!("max relative deviation {max_rel:.3e} (tolerance 1e-2)"),
    );
    let log_eps: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    report.series("length_vs_epsilon", "epsilon", "length", eps.clone(), lengths.clone());
    report.series("oracle_vs_epsilon", "epsilon", "length", eps.clone(), oracle.clone());

    let increments: Vec<f64> = lengths.windows(2).map(|w| w[1] - w[0]).collect();
    let last = lengths.len() - 1;
    if q < 1.5 {
        // Geometric tail: Aitken extrapolation with the last increment ratio.
        let extrapolate = |k: usize| {
            let rho = increments[k - 1] / increments[k - 2];
            (lengths[k] + increments[k - 1] * rho / (1.0 - rho), rho)
        };
        let (limit, rho) = extrapolate(last);
        let (previous, _) = extrapolate(last - 1);
        let bound = SHRINKING_CIRCLE_K / (1.5 - q);
        let oracle_limit = shrinking_circle_oracle(q, 1e-300);
        report.record("increment_ratio", rho);
        report.record("length_limit", limit);
        report.record("oracle_limit", oracle_limit);
        report.record("K", SHRINKING_CIRCLE_K);
        report.record("limit_bound", bound);
        let settled = rho < 1.0 && ((limit - previous) / limit).abs() < 1e-2;
        report.check(
            "lengths_converge",
            "for q < 3/2 a circle shrinks to a point along a path of finite G^q length",
            settled && limit.is_finite(),
            format!("increment ratio {rho:.4}, extrapolated limits {previous:.6} → {limit:.6}"),
        );
        report.check(
            "limit_bound",
            "the length of the shrinking path is at most K/(3/2 − q)",
            limit <= bound,
            format!("limit {limit:.6} ≤ {bound:.6} with K = 2·sqrt(2π)"),
        );
    } else if q > 1.5 {
        let x: Vec<f64> = log_eps[1..].to_vec();
        let y: Vec<f64> = increments.iter().map(|d| d.ln()).collect();
        let slope = fit_slope(&x, &y);
        let expected = (3.0 - 2.0 * q) / 2.0;
        let rel = ((slope - expected) / expected).abs();
        report.record("growth_slope", slope);
        report.record("expected_slope", expected);
        report.series("increment_vs_epsilon", "epsilon", "length_increment", eps[1..].to_vec(), increments.clone());
        report.check(
            "growth_slope",
            "for q > 3/2 partial lengths grow like ε^{(3−2q)/2}",
            rel <= 0.05,
            format!("log–log slope of length increments {slope:.5} vs {expected:.5} (relative deviation {rel:.3e}, tolerance 5e-2)"),
        );
    } else {
        let slopes: Vec<f64> = increments
            .iter()
            .zip(log_eps.windows(2))
            .map(|(d, w)| d / (w[0] - w[1]))
            .collect();
        let (a, b) = (slopes[slopes.len() - 2], slopes[slopes.len() - 1]);
        let rel = ((b - a) / b).abs();
        report.record("log_slope", b);
        report.series("log_slope_vs_epsilon", "epsilon", "dL/dlog(1/eps)", eps[1..].to_vec(), slopes.clone());
        report.check(
            "logarithmic_growth",
            "at q = 3/2 partial lengths grow logarithmically in 1/ε",
            rel < 0.05,
            format!("slope of L against log(1/ε): {a:.6} → {b:.6}"),
        );
    }
    Ok(timed(report, start, opts.timing))
}

// ---------------------------------------------------------------------------
// Vanishing-distance probe

#[derive(Debug, Clone)]
pub struct VanishingOptions {
    pub q: f64,
    pub seed: u64,
    pub levels: usize,
    /// Spatial grid at level 0.
    pub n0: usize,
    /// Time steps at level 0.
    pub m0: usize,
    pub max_iter: usize,
    /// Amplitude of the random diffeomorphism.
    pub amplitude: f64,
    /// Use the identity instead of a random diffeomorphism.
    pub identity: bool,
    pub timing: bool,
}

impl VanishingOptions {
    pub fn new(q: f64, seed: u64, levels: usize) -> Self {
        Self { q, seed, levels, n0: 16, m0: 4, max_iter: 300, amplitude: 0.6, identity: false, timing: false }
    }
}

/// Level data of the vanishing-distance probe.
#[derive(Debug, Clone)]
struct Level {
    n: usize,
    m: usize,
    restricted: f64,
    unrestricted: f64,
    converged: bool,
    path: PathGrid,
}

pub fn vanishing_distance_probe(q: f64, seed: u64, levels: usize) -> Result<ExperimentReport> {
    vanishing_distance_probe_with(&VanishingOptions::new(q, seed, levels))
}

pub fn vanishing_distance_probe_with(opts: &VanishingOptions) -> Result<ExperimentReport> {
    let start = Instant::now();
    let q = SobolevOrder::new(opts.q)?.value();
    if opts.levels < 3 {
        return Err(Error::Configuration(format!("the probe needs at least 3 levels, got {}", opts.levels)));
    }
    let params = MetricParams::full(q)?;
    let mut report = ExperimentReport::new("vanishing-distance");
    report.param("q", json!(q));
    report.param("levels", json!(opts.levels));
    report.param("n0", json!(opts.n0));
    report.param("m0", json!(opts.m0));
    report.param("max_iter", json!(opts.max_iter));
    report.param("amplitude", json!(opts.amplitude));
    report.param("identity", json!(opts.identity));
    report.param("seeds", json!([opts.seed]));

    let mut levels: Vec<Level> = Vec::new();
    for k in 0..opts.levels {
        let (n, m) = (opts.n0 << k, opts.m0 << k);
        let c0 = circle(n, 2, 1.0)?;
        let phi = if opts.identity {
            curve::DiffeoSample::identity(n)?
        } else {
            random_diffeo(opts.seed, &DiffeoSpec::new(n, opts.amplitude))?
        };
        let solve = SolveOptions { steps: m, max_iter: opts.max_iter, tol: 1e-9, ..SolveOptions::default() };
        let (rpath, rrep) = geodesic::solve_bvp_reparametrization(&c0, &phi, params, &solve)?;
        // Unrestricted solve warm-started from the better of the restricted optimum and
        // the refined optimum of the previous level.
        let mut start_path = rpath.clone();
        if let Some(prev) = levels.last() {
            if let Ok(p) = geodesic::refine_path(&prev.path.upsample_space(2)?, 2) {
                if geodesic::path_energy(&p, params)? < geodesic::path_energy(&start_path, params)? {
                    start_path = p;
                }
            }
        }
        let (upath, urep) = geodesic::solve_bvp_from(&start_path, params, &solve)?;
        log::info!(
            "level {k}: N = {n}, M = {m}, restricted {:.6}, unrestricted {:.6}",
            rrep.distance_upper_bound,
            urep.distance_upper_bound
        );
        levels.push(Level {
            n,
            m,
            restricted: rrep.distance_upper_bound,
            unrestricted: urep.distance_upper_bound,
            converged: rrep.converged && urep.converged,
            path: upath,
        });
    }
    let upper: Vec<f64> = levels.iter().map(|l| l.restricted.min(l.unrestricted)).collect();
    for (k, l) in levels.iter().enumerate() {
        report.record(format!("level{k}_n"), l.n as f64);
        report.record(format!("level{k}_m"), l.m as f64);
        report.record(format!("level{k}_restricted"), l.restricted);
        report.record(format!("level{k}_unrestricted"), l.unrestricted);
        report.record(format!("level{k}_upper_bound"), upper[k]);
        report.record(format!("level{k}_converged"), if l.converged { 1.0 } else { 0.0 });
    }
    let ratios: Vec<f64> = upper.windows(2).map(|w| w[1] / w[0]).collect();
    for (k, r) in ratios.iter().enumerate() {
        report.record(format!("ratio{}", k + 1), *r);
    }
    report.series("upper_bound_vs_level", "level", "upper_bound", (0..upper.len()).map(|k| k as f64).collect(), upper.clone());

    let last = levels.last().expect("at least 3 levels");
    let c0 = last.path.start();
    let c1 = last.path.end();
    let bracket = metric::distance_lower_bound(c0, c1)?;
    report.record("lower_bound_bracket", bracket);

    if opts.identity {
        let max = upper.iter().fold(0.0f64, |a, b| a.max(*b));
        report.check("zero_for_identity", "equal endpoints are at distance zero", max == 0.0, format!("max upper bound {max:e}"));
    } else if q <= 0.5 {
        let decreasing = ratios.iter().all(|&r| r <= 0.8);
        report.check(
            "collapse_trend",
            "for q ≤ 1/2 the distance between c0 and c0∘φ vanishes (evidence: upper bounds shrink under refinement)",
            decreasing,
            format!("upper bounds {upper:?}, level ratios {ratios:?} (required ≤ 0.8)"),
        );
    } else {
        let (a, b) = (upper[upper.len() - 2], upper[upper.len() - 1]);
        let change = ((b - a) / a).abs();
        report.record("last_relative_change", change);
        report.check(
            "stabilizes",
            "for q > 1/2 the distance between distinct curves is positive (upper bounds settle under refinement)",
            change < 0.05,
            format!("last two upper bounds {a:.6} → {b:.6}, relative change {change:.3e} (tolerance 5e-2)"),
        );
        let floor = positive_floor(&last.path, params)?;
        report.record("empirical_embedding_constant", floor.embedding_constant);
        report.record("floor_constant", floor.constant);
        report.record("floor", floor.constant * bracket);
        report.check(
            "positive_floor",
            "dist(c0, c1) ≥ C·min{‖c0−c1‖_∞, diam_max}·min{diam_max^{1/2}, 1} with C > 0",
            b > 0.0 && b >= floor.constant * bracket,
            format!(
                "final upper bound {b:.6} ≥ {:.6} = {:.4} × bracket {bracket:.6}",
                floor.constant * bracket,
                floor.constant
            ),
        );
    }
    Ok(timed(report, start, opts.timing))
}

struct Floor {
    embedding_constant: f64,
    constant: f64,
}

/// Lower-bound constant of the non-degeneracy argument, with the embedding constant
/// measured on the path itself: `‖c_1 − c_0‖_∞ ≤ Σ Δt ‖ḣ_m‖_∞ ≤ C_emb·max{ℓ^{-1/2}, ℓ^{q−1/2}}·L`.
fn positive_floor(path: &PathGrid, params: MetricParams) -> Result<Floor> {
    let q = params.q;
    let dt = path.dt();
    let ell = path.start().diameter().min(1.0).min(path.min_length());
    let mut c_emb = 0.0f64;
    let mut ell_used = ell;
    for w in path.curves().windows(2) {
        let mid = DiscreteCurve::new(w[0].position().lin_comb(0.5, w[1].position(), 0.5)?)?;
        let vel = w[1].position().lin_comb(1.0 / dt, w[0].position(), -1.0 / dt)?;
        let l = ell.min(mid.length());
        ell_used = ell_used.min(l);
        let h = TangentField::new(&mid, vel.clone())?;
        let bound = metric::embedding_bound(&mid, &h, q, l)?;
        if bound > 0.0 {
            c_emb = c_emb.max(vel.sup_norm() / bound);
        }
    }
    let scale = ell_used.powf(-0.5).max(ell_used.powf(q.value() - 0.5));
    let constant = if c_emb > 0.0 { 1.0 / (c_emb * scale) } else { 0.0 };
    Ok(Floor { embedding_constant: c_emb, constant })
}

// ---------------------------------------------------------------------------
// Inequality bench

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    Nesting,
    ProductFull,
    ProductHom,
    ProductLinfty,
    Composition,
    InvariantNesting,
    HomVsFull,
    Embedding,
    Diameter,
}

impl Inequality {
    pub const ALL: [Inequality; 9] = [
        Inequality::Nesting,
        Inequality::ProductFull,
        Inequality::ProductHom,
        Inequality::ProductLinfty,
        Inequality::Composition,
        Inequality::InvariantNesting,
        Inequality::HomVsFull,
        Inequality::Embedding,
        Inequality::Diameter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Inequality::Nesting => "nesting",
            Inequality::ProductFull => "product_full",
            Inequality::ProductHom => "product_hom",
            Inequality::ProductLinfty => "product_linfty",
            Inequality::Composition => "composition",
            Inequality::InvariantNesting => "invariant_nesting",
            Inequality::HomVsFull => "hom_vs_full",
            Inequality::Embedding => "embedding",
            Inequality::Diameter => "diameter",
        }
    }

    /// Inequalities with a known constant; the others only get an empirical constant.
    pub fn has_exact_constant(self) -> bool {
        !matches!(self, Inequality::ProductFull | Inequality::ProductHom | Inequality::ProductLinfty | Inequality::Embedding)
    }

    fn statement(self) -> &'static str {
        match self {
            Inequality::Nesting => "‖f‖_{Ḣ^a} ≤ ‖f‖_{Ḣ^b} for 0 < a ≤ b",
            Inequality::ProductFull => "‖f·g‖_{H^a} ≲ ‖f‖_{H^a}‖g‖_{H^b} for b > 1/2, 0 ≤ a ≤ b",
            Inequality::ProductHom => {
                "‖f·g‖_{Ḣ^a} ≲ |f̂(0)|‖g‖_{Ḣ^a} + |ĝ(0)|‖f‖_{Ḣ^a} + ‖f‖_{Ḣ^a}‖g‖_{Ḣ^b} for b > 1/2, 0 ≤ a ≤ b"
            }
            Inequality::ProductLinfty => "‖f·g‖_{Ḣ^a} ≲ ‖f‖_{Ḣ^a}‖g‖_∞ + ‖f‖_∞‖g‖_{Ḣ^a} for 0 ≤ a ≤ 1",
            Inequality::Composition => "‖f∘φ‖_{Ḣ^a} ≤ ‖(φ^{-1})_θ‖_∞^{(1−a)/2} ‖φ_θ‖_∞^{a/2} ‖f‖_{Ḣ^a} for 0 ≤ a ≤ 1",
            Inequality::InvariantNesting => "‖h‖_{Ġ^{q1}_c} ≤ l_c^{q2−q1} ‖h‖_{Ġ^{q2}_c} for q1 ≤ q2",
            Inequality::HomVsFull => "‖h‖_{Ġ^1_c} ≤ ‖h‖_{G^q_c} for q ≥ 1",
            Inequality::Embedding => "‖h‖_∞ ≤ C sqrt((1/ℓ)(‖h‖²_{G^0_c} + ℓ^{2q}‖h‖²_{Ġ^q_c})) for ℓ ∈ (0, l_c]",
            Inequality::Diameter => "l_{c1} ≤ diam(c0) implies diam(c0)/4 ≤ ‖c0 − c1‖_∞",
        }
    }
}

impl FromStr for Inequality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Inequality::ALL
            .into_iter()
            .find(|w| w.name() == s.replace('-', "_"))
            .ok_or_else(|| {
                let names: Vec<_> = Inequality::ALL.iter().map(|w| w.name()).collect();
                Error::Configuration(format!("unknown inequality {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub which: Inequality,
    pub trials: usize,
    pub seed: u64,
    /// Grid size; random functions are band-limited to `n/8`.
    pub n: usize,
    /// Fixed exponent `a` (composition and products); drawn at random when `None`,
    /// except for composition, which then cycles through 1/4, 1/2, 3/4, 1.
    pub a: Option<f64>,
    /// Fixed order `q` for the metric inequalities; drawn at random when `None`.
    pub q: Option<f64>,
    /// Allowed violation for the inequalities with a known constant.
    pub slack: f64,
    pub timing: bool,
}

impl BenchOptions {
    pub fn new(which: Inequality, trials: usize, seed: u64) -> Self {
        let n = if which == Inequality::Composition { 1024 } else { 256 };
        Self { which, trials, seed, n, a: None, q: None, slack: 1e-6, timing: false }
    }
}

/// One trial: `lhs ≤ C · rhs` with `C = 1` for the exact inequalities.
#[derive(Debug, Clone, Copy)]
struct Trial {
    lhs: f64,
    rhs: f64,
}

/// Random real trigonometric polynomial with modes `1..=max_mode` decaying like `m^{−decay}`
/// plus a random mean.
pub fn random_trig_poly<R: Rng>(rng: &mut R, n: usize, dim: usize, max_mode: usize, decay: f64) -> Result<SampledFunction> {
    spectral::check_grid_size(n)?;
    if 2 * max_mode >= n {
        return Err(Error::Configuration(format!("mode {max_mode} is not resolved on {n} nodes")));
    }
    let coeffs: Vec<f64> = (0..(2 * max_mode + 1) * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    // a cos + b sin = Re((a − ib) e^{iθ}).
    let mut hat = vec![Complex64::new(0.0, 0.0); n * dim];
    for k in 0..dim {
        hat[k] = Complex64::new(coeffs[k], 0.0);
        for m in 1..=max_mode {
            let w = 0.5 * (m as f64).powf(-decay);
            let z = Complex64::new(coeffs[(2 * m - 1) * dim + k], -coeffs[2 * m * dim + k]) * w;
            hat[m * dim + k] = z;
            hat[(n - m) * dim + k] = z.conj();
        }
    }
    Ok(spectral::fourier_inverse(&SpectralCoeffs::from_raw(n, dim, hat)))
}

fn sup_fine(f: &SampledFunction) -> Result<f64> {
    Ok(spectral::upsample(f, 4)?.sup_norm())
}

fn product(f: &SampledFunction, g: &SampledFunction) -> Result<SampledFunction> {
    f.check_same_shape(g)?;
    let data = f.as_slice().iter().zip(g.as_slice()).map(|(a, b)| a * b).collect();
    SampledFunction::new(f.dim(), data)
}

fn run_trial(which: Inequality, opts: &BenchOptions, n: usize, index: usize) -> Result<Trial> {
    let mut rng = rng_for(opts.seed, index as u64);
    let band = (n / 8).max(1);
    let decay = rng.gen_range(0.5..2.5);
    match which {
        Inequality::Nesting => {
            let f = random_trig_poly(&mut rng, n, 2, band, decay)?;
            let b = rng.gen_range(0.01..3.0);
            let a = opts.a.unwrap_or_else(|| rng.gen_range(0.0..b)).min(b);
            Ok(Trial {
                lhs: spectral::hq_dot_seminorm(&f, SobolevOrder::new(a)?),
                rhs: spectral::hq_dot_seminorm(&f, SobolevOrder::new(b)?),
            })
        }
        Inequality::ProductFull | Inequality::ProductHom => {
            let f = random_trig_poly(&mut rng, n, 1, band, decay)?;
            let decay_g = rng.gen_range(0.5..2.5);
            let g = random_trig_poly(&mut rng, n, 1, band, decay_g)?;
            let b = rng.gen_range(0.51..2.5);
            let a = opts.a.unwrap_or_else(|| rng.gen_range(0.0..b)).min(b);
            let (qa, qb) = (SobolevOrder::new(a)?, SobolevOrder::new(b)?);
            let fg = product(&f, &g)?;
            if which == Inequality::ProductFull {
                Ok(Trial { lhs: spectral::hq_norm(&fg, qa), rhs: spectral::hq_norm(&f, qa) * spectral::hq_norm(&g, qb) })
            } else {
                let (f0, g0) = (f.mean()[0].abs(), g.mean()[0].abs());
                let fa = spectral::hq_dot_seminorm(&f, qa);
                let rhs = f0 * spectral::hq_dot_seminorm(&g, qa) + g0 * fa + fa * spectral::hq_dot_seminorm(&g, qb);
                Ok(Trial { lhs: spectral::hq_dot_seminorm(&fg, qa), rhs })
            }
        }
        Inequality::ProductLinfty => {
            let f = random_trig_poly(&mut rng, n, 1, band, decay)?;
            let decay_g = rng.gen_range(0.5..2.5);
            let g = random_trig_poly(&mut rng, n, 1, band, decay_g)?;
            let a = SobolevOrder::new(opts.a.unwrap_or_else(|| rng.gen_range(0.0..=1.0)))?;
            let fg = product(&f, &g)?;
            let rhs = spectral::hq_dot_seminorm(&f, a) * sup_fine(&g)? + sup_fine(&f)? * spectral::hq_dot_seminorm(&g, a);
            Ok(Trial { lhs: spectral::hq_dot_seminorm(&fg, a), rhs })
        }
        Inequality::Composition => {
            let a = opts.a.unwrap_or([0.25, 0.5, 0.75, 1.0][index % 4]);
            composition_trial(&mut rng, n, a)
        }
        Inequality::InvariantNesting | Inequality::HomVsFull | Inequality::Embedding => {
            let spec = CurveSpec { decay: rng.gen_range(1.5..3.5), ..CurveSpec::new(n, 2) };
            let c = random_curve_with(&mut rng, &spec)?.scaled(rng.gen_range(0.2..5.0))?;
            let h = TangentField::new(&c, random_trig_poly(&mut rng, n, 2, band, decay)?)?;
            match which {
                Inequality::InvariantNesting => {
                    let q2 = opts.q.unwrap_or_else(|| rng.gen_range(0.0..2.5));
                    let q1 = rng.gen_range(0.0..=q2);
                    let (s1, s2) = (SobolevOrder::new(q1)?, SobolevOrder::new(q2)?);
                    let lhs = metric::gq_dot(&c, &h, &h, s1)?.max(0.0).sqrt();
                    let rhs = c.length().powf(q2 - q1) * metric::gq_dot(&c, &h, &h, s2)?.max(0.0).sqrt();
                    Ok(Trial { lhs, rhs })
                }
                Inequality::HomVsFull => {
                    let q = SobolevOrder::new(opts.q.unwrap_or_else(|| rng.gen_range(1.0..2.5)))?;
                    let lhs = metric::gq_dot(&c, &h, &h, SobolevOrder::new(1.0)?)?.max(0.0).sqrt();
                    Ok(Trial { lhs, rhs: metric::gq(&c, &h, &h, q)?.max(0.0).sqrt() })
                }
                _ => {
                    let q = SobolevOrder::new(opts.q.unwrap_or(0.75))?;
                    let ell = c.length() * rng.gen_range(0.01..=1.0);
                    Ok(Trial { lhs: sup_fine(h.as_function())?, rhs: metric::embedding_bound(&c, &h, q, ell)? })
                }
            }
        }
        Inequality::Diameter => {
            let c0 = random_curve_with(&mut rng, &CurveSpec::new(n, 2))?.scaled(rng.gen_range(0.2..5.0))?;
            let diam = c0.diameter();
            let c1 = random_curve_with(&mut rng, &CurveSpec::new(n, 2))?;
            let target = diam * rng.gen_range(0.05..=1.0);
            let c1 = c1.scaled(target / c1.length())?;
            let centre = c0.position().mean();
            let shift: Vec<f64> = centre
                .iter()
                .zip(c1.position().mean())
                .map(|(a, b)| a - b + diam * rng.gen_range(-0.3..0.3))
                .collect();
            let c1 = c1.translated(&shift)?;
            Ok(Trial { lhs: 0.25 * diam, rhs: curve::sup_distance(&c0, &c1)? })
        }
    }
}

/// `f` band-limited to `n/8` (exactly represented on `n/2` nodes) composed with a random
/// three-mode diffeomorphism, sampled on `4n` nodes.
fn composition_trial<R: Rng>(rng: &mut R, n: usize, a: f64) -> Result<Trial> {
    let coarse = (n / 2).max(8);
    let band = (n / 8).max(2) - 1;
    let decay = rng.gen_range(0.0..2.0);
    let f = random_trig_poly(rng, coarse, 2, band, decay)?;
    let qa = SobolevOrder::new(a)?;
    let norm = spectral::hq_dot_seminorm(&f, qa);
    let f = f.scaled(1.0 / norm);
    // The diffeo has three modes, so a 16-node representation is exact.
    let amplitude = rng.gen_range(0.05..0.9);
    let phi = random_diffeo_with(rng, &DiffeoSpec::new(16, amplitude))?;
    let fine = 4 * n;
    // f is band-limited far below the upsampled Nyquist frequency, so local Lagrange
    // interpolation on the upsampled grid is accurate to rounding.
    let dense = spectral::upsample(&f, 16)?;
    let mut data = vec![0.0; fine * 2];
    let (mut dmax, mut dmin) = (0.0f64, f64::INFINITY);
    for (i, out) in data.chunks_exact_mut(2).enumerate() {
        let (x, d) = phi.eval(i as f64 / fine as f64);
        dmax = dmax.max(d);
        dmin = dmin.min(d);
        lagrange_periodic(&dense, x, out);
    }
    let composed = SampledFunction::new(2, data)?;
    let lhs = spectral::hq_dot_seminorm(&composed, qa);
    let rhs = (1.0 / dmin).powf((1.0 - a) / 2.0) * dmax.powf(a / 2.0);
    Ok(Trial { lhs, rhs })
}

/// Degree-11 Lagrange interpolation of periodic samples at `x`.
fn lagrange_periodic(f: &SampledFunction, x: f64, out: &mut [f64]) {
    const HALF: i64 = 6;
    let n = f.len() as i64;
    let t = x.rem_euclid(1.0) * n as f64;
    let base = t.floor() as i64 - HALF + 1;
    out.iter_mut().for_each(|o| *o = 0.0);
    for k in 0..2 * HALF {
        let mut w = 1.0;
        for l in 0..2 * HALF {
            if l != k {
                w *= (t - (base + l) as f64) / (k - l) as f64;
            }
        }
        let p = f.point((base + k).rem_euclid(n) as usize);
        out.iter_mut().zip(p).for_each(|(o, v)| *o += w * v);
    }
}

fn run_trials(which: Inequality, opts: &BenchOptions, n: usize) -> Result<Vec<Trial>> {
    (0..opts.trials).into_par_iter().map(|i| run_trial(which, opts, n, i)).collect()
}

pub fn inequality_bench(which: Inequality, trials: usize, seed: u64) -> Result<ExperimentReport> {
    inequality_bench_with(&BenchOptions::new(which, trials, seed))
}

pub fn inequality_bench_with(opts: &BenchOptions) -> Result<ExperimentReport> {
    let start = Instant::now();
    if opts.trials == 0 {
        return Err(Error::Configuration("trials must be ≥ 1".into()));
    }
    spectral::check_grid_size(opts.n)?;
    let which = opts.which;
    let mut report = ExperimentReport::new("bench");
    report.param("which", json!(which.name()));
    report.param("trials", json!(opts.trials));
    report.param("n", json!(opts.n));
    report.param("a", json!(opts.a));
    report.param("q", json!(opts.q));
    report.param("slack", json!(opts.slack));
    report.param("seeds", json!([opts.seed]));

    let trials = run_trials(which, opts, opts.n)?;
    let ratios: Vec<f64> = trials.iter().map(|t| if t.rhs > 0.0 { t.lhs / t.rhs } else if t.lhs > 0.0 { f64::INFINITY } else { 0.0 }).collect();
    let max_ratio = ratios.iter().fold(0.0f64, |a, b| a.max(*b));
    report.record("max_ratio", max_ratio);
    report.record("mean_ratio", ratios.iter().sum::<f64>() / ratios.len() as f64);
    report.series("ratio_by_trial", "trial", "lhs/rhs", (0..ratios.len()).map(|i| i as f64).collect(), ratios.clone());

    if which.has_exact_constant() {
        let violations = trials.iter().filter(|t| t.lhs > t.rhs * (1.0 + opts.slack) + violation_floor(which)).count();
        let worst = trials.iter().map(|t| t.lhs - t.rhs).fold(f64::NEG_INFINITY, f64::max);
        report.record("violations", violations as f64);
        report.record("worst_excess", worst);
        report.check(
            "no_violations",
            which.statement(),
            violations == 0,
            format!("{violations} of {} trials exceed the bound (slack {:e}); max lhs/rhs {max_ratio:.6}", opts.trials, opts.slack),
        );
    } else {
        let doubled = run_trials(which, opts, 2 * opts.n)?;
        let max2 = doubled.iter().map(|t| t.lhs / t.rhs).fold(0.0f64, f64::max);
        let change = max2 / max_ratio;
        report.record("max_ratio_doubled_grid", max2);
        report.record("empirical_constant", max_ratio.max(max2));
        report.check(
            "stable_constant",
            which.statement(),
            max_ratio.is_finite() && change < 2.0 && change > 0.5,
            format!("empirical constant {max_ratio:.6} at n = {}, {max2:.6} at n = {}", opts.n, 2 * opts.n),
        );
    }
    if which == Inequality::ProductHom {
        // With a constant factor the estimate is an identity.
        let mut rng = rng_for(opts.seed, u64::MAX);
        let g = random_trig_poly(&mut rng, opts.n, 1, opts.n / 8, 1.0)?;
        let f = SampledFunction::constant(opts.n, &[rng.gen_range(0.5..2.0)])?;
        let a = SobolevOrder::new(opts.a.unwrap_or(0.5))?;
        let lhs = spectral::hq_dot_seminorm(&product(&f, &g)?, a);
        let rhs = f.mean()[0].abs() * spectral::hq_dot_seminorm(&g, a);
        let rel = ((lhs - rhs) / rhs).abs();
        report.record("constant_factor_deviation", rel);
        report.check(
            "constant_factor_identity",
            "for constant f the product estimate reduces to |f̂(0)|‖g‖_{Ḣ^a}",
            rel < 1e-12,
            format!("relative deviation {rel:e}"),
        );
    }
    Ok(timed(report, start, opts.timing))
}

/// Absolute slack on top of the relative one.
fn violation_floor(which: Inequality) -> f64 {
    match which {
        Inequality::Diameter => 1e-9,
        _ => 1e-12,
    }
}

// ---------------------------------------------------------------------------
// Ball equivalence

#[derive(Debug, Clone)]
pub struct BallOptions {
    pub q: f64,
    pub seed: u64,
    /// Samples of the smaller run; the comparison run uses twice as many.
    pub samples: usize,
    pub n: usize,
    /// Radius of the metric ball around the unit circle.
    pub radius: f64,
    /// Time steps of the paths certifying ball membership.
    pub steps: usize,
    pub timing: bool,
}

impl BallOptions {
    pub fn new(q: f64, seed: u64) -> Self {
        Self { q, seed, samples: 500, n: 64, radius: 1.0, steps: 8, timing: false }
    }
}

/// `‖h‖_{G^q_c}/‖h‖_{H^q}` for `h = e_k cos(2πnθ)` on the constant-speed circle of length `l`.
pub fn circle_mode_ratio(q: f64, length: f64, mode: u32) -> f64 {
    let w = TWO_PI * mode as f64;
    let hom = if mode == 0 { 0.0 } else { length.powf(1.0 - 2.0 * q) * w.powf(2.0 * q) };
    ((length + hom) / (1.0 + w * w).powf(q)).sqrt()
}

/// Ratio `‖h‖_{G^q_c}/‖h‖_{H^q}`.
pub fn norm_ratio(c: &DiscreteCurve, h: &TangentField, q: SobolevOrder) -> Result<f64> {
    let g = metric::gq(c, h, h, q)?.max(0.0).sqrt();
    Ok(g / spectral::hq_norm(h.as_function(), q))
}

/// A random curve inside the `G^q` ball of radius `radius` around `base`, certified by
/// the length of the straight path from `base`. Returns the curve and that length.
fn ball_sample<R: Rng>(rng: &mut R, base: &DiscreteCurve, params: MetricParams, radius: f64, steps: usize) -> Result<(DiscreteCurve, f64)> {
    let n = base.len();
    let dir = random_trig_poly(rng, n, 2, 4, 1.5)?;
    let target = radius * rng.gen::<f64>().sqrt();
    let mut scale = 0.1;
    for _ in 0..30 {
        let end = DiscreteCurve::new(base.position().lin_comb(1.0, &dir, scale)?);
        let path = end.and_then(|e| PathGrid::linear(base, &e, steps).map(|p| (e, p)));
        match path {
            Ok((end, p)) => {
                let len = geodesic::path_length(&p, params)?;
                if len <= radius && (len - target).abs() <= 0.05 * radius {
                    return Ok((end, len));
                }
                scale *= if len > 0.0 { (target / len).clamp(0.25, 4.0) } else { 2.0 };
            }
            Err(_) => scale *= 0.5,
        }
    }
    // Fall back to a tiny step, which is always inside the ball.
    let end = DiscreteCurve::new(base.position().lin_comb(1.0, &dir, 1e-3 * scale)?)?;
    let len = geodesic::path_length(&PathGrid::linear(base, &end, steps)?, params)?;
    Ok((end, len))
}

pub fn ball_equivalence_probe(q: f64, seed: u64) -> Result<ExperimentReport> {
    ball_equivalence_probe_with(&BallOptions::new(q, seed))
}

pub fn ball_equivalence_probe_with(opts: &BallOptions) -> Result<ExperimentReport> {
    let start = Instant::now();
    if opts.q <= 1.5 {
        return Err(Error::Domain(format!("ball equivalence needs q > 3/2, got {}", opts.q)));
    }
    if opts.samples == 0 {
        return Err(Error::Configuration("samples must be ≥ 1".into()));
    }
    let q = SobolevOrder::new(opts.q)?;
    let params = MetricParams::full(opts.q)?;
    let mut report = ExperimentReport::new("ball-equivalence");
    report.param("q", json!(opts.q));
    report.param("n", json!(opts.n));
    report.param("m", json!(opts.steps));
    report.param("samples", json!(opts.samples));
    report.param("radius", json!(opts.radius));
    report.param("seeds", json!([opts.seed]));

    let base = circle(opts.n, 2, 1.0)?;
    // Closed-form single-mode ratios on the base circle.
    let modes: Vec<u32> = (0..=8).collect();
    let mut max_dev = 0.0f64;
    let mut measured_modes = Vec::new();
    for &k in &modes {
        let h = TangentField::new(
            &base,
            SampledFunction::from_fn(opts.n, 2, |t, o| {
                o[0] = (TWO_PI * k as f64 * t).cos();
                o[1] = 0.0;
            })?,
        )?;
        let measured = norm_ratio(&base, &h, q)?;
        let exact = circle_mode_ratio(opts.q, base.length(), k);
        max_dev = max_dev.max(((measured - exact) / exact).abs());
        measured_modes.push(measured);
    }
    report.series("mode_ratio_on_circle", "mode", "ratio", modes.iter().map(|&k| k as f64).collect(), measured_modes.clone());
    report.record("circle_mode_max_deviation", max_dev);
    report.check(
        "circle_closed_form",
        "on the unit circle ‖h‖_{G^q}/‖h‖_{H^q} is the weight ratio ((l + l^{1−2q}(2πn)^{2q})/(1 + (2πn)²)^q)^{1/2}",
        max_dev < 1e-10,
        format!("max relative deviation {max_dev:e} over modes 0..=8"),
    );
    let monotone = measured_modes[1..].windows(2).all(|w| w[1] <= w[0]) || measured_modes[1..].windows(2).all(|w| w[1] >= w[0]);
    report.record("mode_trend_monotone", if monotone { 1.0 } else { 0.0 });

    let total = 2 * opts.samples;
    let samples = (0..total)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let mut rng = rng_for(opts.seed, i as u64);
            let (c, dist) = ball_sample(&mut rng, &base, params, opts.radius, opts.steps)?;
            let decay = rng.gen_range(1.0..3.0);
            let h = TangentField::new(&c, random_trig_poly(&mut rng, opts.n, 2, opts.n / 8, decay)?)?;
            Ok((norm_ratio(&c, &h, q)?, dist))
        })
        .collect::<Result<Vec<_>>>()?;
    let interval = |k: usize| {
        samples[..k].iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), (r, _)| (lo.min(*r), hi.max(*r)))
    };
    let (lo1, hi1) = interval(opts.samples);
    let (lo2, hi2) = interval(total);
    let max_dist = samples.iter().map(|s| s.1).fold(0.0f64, f64::max);
    let alpha1 = hi1.max(1.0 / lo1);
    let alpha2 = hi2.max(1.0 / lo2);
    report.record("ratio_min", lo1);
    report.record("ratio_max", hi1);
    report.record("ratio_min_doubled", lo2);
    report.record("ratio_max_doubled", hi2);
    report.record("alpha", alpha1);
    report.record("alpha_doubled", alpha2);
    report.record("max_certified_distance", max_dist);
    let hist: Vec<f64> = samples.iter().map(|s| s.0).collect();
    report.series("ratio_samples", "sample", "ratio", (0..hist.len()).map(|i| i as f64).collect(), hist);
    let change_lo = ((lo2 - lo1) / lo1).abs();
    let change_hi = ((hi2 - hi1) / hi1).abs();
    report.check(
        "inside_ball",
        "sampled curves lie in the metric ball",
        max_dist <= opts.radius,
        format!("largest certifying path length {max_dist:.6} ≤ radius {}", opts.radius),
    );
    report.check(
        "bounded_ratios",
        "on a G^q metric ball α^{-1}‖h‖_{H^q} ≤ ‖h‖_{G^q_c} ≤ α‖h‖_{H^q}",
        lo1 > 0.0 && hi1.is_finite() && change_lo < 0.1 && change_hi < 0.1,
        format!(
            "[{lo1:.6}, {hi1:.6}] with {} samples, [{lo2:.6}, {hi2:.6}] with {total}; endpoint changes {change_lo:.3e}, {change_hi:.3e}",
            opts.samples
        ),
    );
    Ok(timed(report, start, opts.timing))
}
