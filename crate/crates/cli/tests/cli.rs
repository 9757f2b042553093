use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fracshape(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracshape")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn write_circle(dir: &Path, name: &str, n: usize, r: f64) -> PathBuf {
    let samples: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let s = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            vec![r * s.cos(), r * s.sin()]
        })
        .collect();
    let path = dir.join(name);
    std::fs::write(&path, serde_json::json!({ "n": n, "d": 2, "samples": samples }).to_string()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unit_circle_homogeneous_norm_has_closed_form() {
    let dir = TempDir::new().unwrap();
    let c = write_circle(dir.path(), "c.json", 64, 1.0);
    let v = stdout_json(&fracshape(&["norm", s(&c), "--q", "1", "--variant", "homogeneous"]));
    // h = c: one mode of unit amplitude, so ‖h‖² = l^{1−2q} (2π)^{2q} with l = 2π.
    let expected = (2.0 * std::f64::consts::PI).sqrt();
    assert!((v["norm"].as_f64().unwrap() - expected).abs() < 1e-12 * expected);
    assert_eq!(v["header"]["variant"], "homogeneous");
}

#[test]
fn malformed_json_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"n\": 8, \"d\": 2, \"samples\": [").unwrap();
    let out = fracshape(&["norm", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_immersed_curve_is_an_invariant_violation() {
    let dir = TempDir::new().unwrap();
    let n = 16;
    let samples: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let s = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            vec![1.0 - s.cos(), s.sin() - s.sin() * s.cos()]
        })
        .collect();
    let cusp = dir.path().join("cusp.json");
    std::fs::write(&cusp, serde_json::json!({ "n": n, "d": 2, "samples": samples }).to_string()).unwrap();
    let out = fracshape(&["norm", s(&cusp)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ImmersionViolation"));
}

#[test]
fn identical_files_are_at_distance_zero() {
    let dir = TempDir::new().unwrap();
    let c = write_circle(dir.path(), "c.json", 32, 1.5);
    let v = stdout_json(&fracshape(&["distance", s(&c), s(&c)]));
    assert_eq!(v["distance_upper_bound"].as_f64(), Some(0.0));
    assert_eq!(v["converged"], true);
}

#[test]
fn circles_upper_bound_dominates_srv_bound() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (write_circle(dir.path(), "a.json", 16, 1.0), write_circle(dir.path(), "b.json", 16, 2.0));
    let path = dir.path().join("path.json");
    let v = stdout_json(&fracshape(&["distance", s(&a), s(&b), "--q", "1", "--m", "6", "--path-out", s(&path)]));
    let upper = v["distance_upper_bound"].as_f64().unwrap();
    let srv = v["srv_lower_bound"].as_f64().unwrap();
    assert!(upper >= srv && srv > 0.0, "{upper} < {srv}");
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(saved["m"], 6);
}

#[test]
fn mismatched_grids_are_an_input_error() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (write_circle(dir.path(), "a.json", 16, 1.0), write_circle(dir.path(), "b.json", 32, 2.0));
    assert_eq!(fracshape(&["distance", s(&a), s(&b)]).status.code(), Some(2));
    assert_eq!(fracshape(&["norm", s(&a), "--n", "32"]).status.code(), Some(2));
}

#[test]
fn bad_flags_are_input_errors() {
    let dir = TempDir::new().unwrap();
    let c = write_circle(dir.path(), "c.json", 16, 1.0);
    assert_eq!(fracshape(&["norm", s(&c), "--q", "-1"]).status.code(), Some(2));
    assert_eq!(fracshape(&["norm", s(&c), "--format", "xml"]).status.code(), Some(2));
    assert_eq!(fracshape(&["experiment", "bench", "--which", "nope"]).status.code(), Some(2));
}

#[test]
fn unknown_experiment_lists_the_available_ones() {
    let out = fracshape(&["experiment", "circle-shrinking"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["shrinking-circle", "vanishing-distance", "bench", "ball-equivalence"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn shrinking_circle_reports_oracle_comparison() {
    let v = stdout_json(&fracshape(&["experiment", "shrinking-circle", "--q", "1.0"]));
    let results = v["results"].as_array().unwrap();
    let err = results.iter().find(|r| r["name"] == "max_relative_error_vs_oracle").unwrap()["value"].as_f64().unwrap();
    assert!(err < 1e-2);
    assert!(v["assertions"].as_array().unwrap().iter().all(|a| a["passed"] == true));
    assert_eq!(v["parameters"]["cli"]["m"], 512);
}

#[test]
fn composition_bench_has_no_violations() {
    let v = stdout_json(&fracshape(&["experiment", "bench", "--which", "composition", "--trials", "200"]));
    let a = v["assertions"].as_array().unwrap().iter().find(|a| a["name"] == "no_violations").unwrap();
    assert_eq!(a["passed"], true, "{}", a["detail"]);
    assert_eq!(v["parameters"]["n"], 1024);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = ["experiment", "bench", "--which", "product-full", "--trials", "50", "--seed", "9"];
    let (a, b) = (fracshape(&args), fracshape(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let other = fracshape(&["experiment", "bench", "--which", "product-full", "--trials", "50", "--seed", "10"]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn job_count_does_not_change_results() {
    let run = |jobs: &str| {
        let mut v = stdout_json(&fracshape(&["experiment", "bench", "--which", "nesting", "--trials", "40", "--jobs", jobs]));
        v["parameters"]["cli"].as_object_mut().unwrap().remove("jobs");
        v
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn flags_override_config_which_overrides_defaults() {
    let dir = TempDir::new().unwrap();
    let c = write_circle(dir.path(), "c.json", 16, 1.0);
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "q = 2.0\nmax-iter = 7\nseed = 3\n").unwrap();
    let v = stdout_json(&fracshape(&["norm", s(&c), "--config", s(&cfg), "--q", "0.5"]));
    let h = &v["header"];
    assert_eq!(h["q"], 0.5);
    assert_eq!(h["max_iter"], 7);
    assert_eq!(h["seed"], 3);
    assert_eq!(h["tol"], 1e-6);

    std::fs::write(&cfg, "qq = 1.0\n").unwrap();
    assert_eq!(fracshape(&["norm", s(&c), "--config", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn header_records_every_flag() {
    let dir = TempDir::new().unwrap();
    let c = write_circle(dir.path(), "c.json", 16, 1.0);
    let v = stdout_json(&fracshape(&["norm", s(&c)]));
    let help = String::from_utf8(fracshape(&["--help"]).stdout).unwrap();
    for flag in ["q", "n", "m", "seed", "tol", "max-iter", "jobs", "format", "out", "variant", "timing", "config"] {
        assert!(help.contains(&format!("--{flag}")), "--{flag} missing from help");
        assert!(v["header"].get(flag.replace('-', "_")).is_some(), "{flag} missing from header");
    }
}

#[test]
fn csv_output_and_out_file() {
    let dir = TempDir::new().unwrap();
    let c = write_circle(dir.path(), "c.json", 16, 1.0);
    let out = dir.path().join("norm.csv");
    let run = fracshape(&["norm", s(&c), "--format", "csv", "--out", s(&out)]);
    assert!(run.status.success());
    assert!(run.stdout.is_empty());
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("kind,name,value\n"));
    assert!(text.lines().any(|l| l.starts_with("result,norm,")));
}
