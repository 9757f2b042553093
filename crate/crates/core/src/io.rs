//! File formats.
//!
//! Curves: JSON `{"n": N, "d": d, "samples": [[x, y, ...], ...]}` or CSV with one
//! node per row. Paths: JSON `{"m", "n", "d", "times", "curves"}`. Floats are written
//! so that they parse back to the identical `f64`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curve::DiscreteCurve;
use crate::error::{Error, Result};
use crate::geodesic::PathGrid;
use crate::spectral::SampledFunction;

#[derive(Debug, Serialize, Deserialize)]
struct CurveFile {
    n: usize,
    d: usize,
    samples: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PathFile {
    m: usize,
    n: usize,
    d: usize,
    times: Vec<f64>,
    curves: Vec<Vec<Vec<f64>>>,
}

fn samples(f: &SampledFunction) -> Vec<Vec<f64>> {
    f.points().map(<[f64]>::to_vec).collect()
}

fn from_samples(n: usize, d: usize, rows: &[Vec<f64>]) -> Result<SampledFunction> {
    if rows.len() != n {
        return Err(Error::Parse(format!("header says n = {n} but {} samples given", rows.len())));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != d) {
        return Err(Error::Parse(format!("sample {bad} has {} coordinates, expected d = {d}", rows[bad].len())));
    }
    SampledFunction::from_points(rows)
}

pub fn function_to_json(f: &SampledFunction) -> String {
    serde_json::to_string(&CurveFile { n: f.len(), d: f.dim(), samples: samples(f) }).expect("finite samples")
}

/// Parses sampled data (curve or tangent field) from the JSON curve format.
pub fn function_from_json(text: &str) -> Result<SampledFunction> {
    let file: CurveFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    from_samples(file.n, file.d, &file.samples)
}

pub fn function_to_csv(f: &SampledFunction) -> String {
    let mut out = String::new();
    for p in f.points() {
        let row: Vec<String> = p.iter().map(|x| format!("{x:.16e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn function_from_csv(text: &str) -> Result<SampledFunction> {
    let rows = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .enumerate()
        .map(|(i, line)| {
            line.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| Error::Parse(format!("row {i}: {e}"))))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let d = rows.first().map_or(0, Vec::len);
    from_samples(rows.len(), d, &rows)
}

pub fn curve_to_json(c: &DiscreteCurve) -> String {
    function_to_json(c.position())
}

pub fn curve_from_json(text: &str) -> Result<DiscreteCurve> {
    DiscreteCurve::new(function_from_json(text)?)
}

/// Reads a curve or field, choosing the format from the extension (`.csv` or JSON).
pub fn read_function(path: &Path) -> Result<SampledFunction> {
    let text = std::fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => function_from_csv(&text),
        _ => function_from_json(&text),
    }
}

pub fn read_curve(path: &Path) -> Result<DiscreteCurve> {
    DiscreteCurve::new(read_function(path)?)
}

pub fn path_to_json(p: &PathGrid) -> String {
    let file = PathFile {
        m: p.steps(),
        n: p.grid_size(),
        d: p.dim(),
        times: p.times().to_vec(),
        curves: p.curves().iter().map(|c| samples(c.position())).collect(),
    };
    serde_json::to_string(&file).expect("finite samples")
}

pub fn path_from_json(text: &str) -> Result<PathGrid> {
    let file: PathFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if file.curves.len() != file.m + 1 || file.times.len() != file.m + 1 {
        return Err(Error::Parse(format!("path header says m = {} but has {} curves", file.m, file.curves.len())));
    }
    let positions = file
        .curves
        .iter()
        .map(|rows| from_samples(file.n, file.d, rows))
        .collect::<Result<Vec<_>>>()?;
    PathGrid::from_positions(positions)
}

/// Two-column plot data with a header line.
pub fn xy_csv(x_label: &str, y_label: &str, xs: &[f64], ys: &[f64]) -> String {
    let mut out = format!("{x_label},{y_label}\n");
    for (x, y) in xs.iter().zip(ys) {
        let _ = writeln!(out, "{x:.16e},{y:.16e}");
    }
    out
}
