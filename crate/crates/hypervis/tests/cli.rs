//! End-to-end runs of the `hypervis` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hypervis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypervis"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn small_visvol(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "estimate", "visvol", "--dim", "2", "--gamma", "1.5", "--grain", "fixed:0.5", "--reps", "50", "--rays",
        "20", "--cutoff", "10", "--seed", "9", "--out",
    ];
    args.push(out.to_str().unwrap());
    args.extend_from_slice(extra);
    hypervis(&args)
}

#[test]
fn same_seed_gives_byte_identical_json() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    assert!(small_visvol(&a, &["--no-runtime"]).status.success());
    assert!(small_visvol(&b, &["--no-runtime"]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let rec: Value = serde_json::from_slice(&std::fs::read(&a).unwrap()).unwrap();
    assert_eq!(rec["quantity"], "visvol");
    assert_eq!(rec["grain_kind"], "fixed");
    assert_eq!(rec["n_reps"], 50);
    assert!(rec["runtime_ms"].is_null());
    assert!(rec["z_score"].is_number());
    let closed = rec["closed_form"].as_f64().unwrap();
    assert!((closed - 4.35164966).abs() < 1e-6);
}

#[test]
fn timed_json_differs_only_in_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    assert!(small_visvol(&a, &[]).status.success());
    assert!(small_visvol(&b, &[]).status.success());
    let strip = |p: &Path| {
        let mut v: Value = serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap();
        assert!(v["runtime_ms"].is_u64());
        v.as_object_mut().unwrap().remove("runtime_ms");
        v
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn csv_has_header_and_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    assert!(small_visvol(&path, &["--format", "csv"]).status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("quantity,dim,gamma,grain_kind,grain_params,estimate,stderr"));
    assert!(lines[0].ends_with("seed,runtime_ms"));
    assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
}

#[test]
fn subcritical_visvol_is_refused() {
    let out = hypervis(&["estimate", "visvol", "--gamma", "0.9", "--grain", "fixed:0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("d - 1"), "{}", stderr(&out));
}

#[test]
fn bad_grain_is_a_parse_error() {
    let out = hypervis(&["estimate", "visvol", "--grain", "square:1"]);
    assert!(!out.status.success());
}

#[test]
fn boolean_cdf_passes_at_seed_42() {
    let out = hypervis(&[
        "estimate", "cdf_boolean", "--dim", "2", "--gamma", "1.5", "--grain", "fixed:0.5", "--reps", "10000",
        "--seed", "42",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rec: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(rec["pass"], true);
    assert_eq!(rec["n"], 10000);
    assert!((rec["critical_1pct"].as_f64().unwrap() - 0.01628).abs() < 1e-12);
}

#[test]
fn formula_check_passes() {
    let out = hypervis(&["estimate", "formula_check"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rec: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(rec["pass"], true);
}

#[test]
fn formulas_and_constants() {
    let value = |args: &[&str]| -> f64 {
        let out = hypervis(args);
        assert!(out.status.success(), "{}", stderr(&out));
        stdout(&out).trim().parse().unwrap()
    };
    assert!((value(&["formula", "ell", "2", "0", "1"]) - 3.412276265285).abs() < 1e-10);
    assert!((value(&["formula", "threshold", "2", "0.5"]) - 0.959517).abs() < 1e-6);
    assert!((value(&["formula", "zero-cell", "2", "2"]) - 10.1155882).abs() < 1e-6);
    assert!((value(&["formula", "sinh-exp", "2", "2"]) - 1.0 / 3.0).abs() < 1e-12);
    assert!((value(&["formula", "crofton", "2", "1", "1"]) - 2.0 / std::f64::consts::PI).abs() < 1e-11);

    let sub = hypervis(&["formula", "mean-visvol", "2", "0.5", "fixed:0.5"]);
    assert_eq!(stdout(&sub).trim(), "inf");

    let list = stdout(&hypervis(&["formula", "list"]));
    assert!(list.lines().any(|l| l.starts_with("ell-identity")));

    let wrong = hypervis(&["formula", "ell", "2", "0"]);
    assert_eq!(wrong.status.code(), Some(2));

    let c = stdout(&hypervis(&["constants", "--dim", "2"]));
    assert!(c.contains("kappa_d 3.14159265359"), "{c}");
    assert!(c.contains("omega_d 6.28318530718"), "{c}");
}

#[test]
fn render_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let grains = dir.path().join("g.svg");
    let out = hypervis(&[
        "render", "--model", "boolean", "--gamma", "0.5", "--window", "3", "--out", grains.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let svg = std::fs::read_to_string(&grains).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains(r#"viewBox="-1.05 -1.05 2.1 2.1""#));
    assert!(svg.matches("fill-opacity=\"0.25\"").count() > 3);

    let planes = dir.path().join("h.svg");
    let out = hypervis(&[
        "render", "--model", "hyperplanes", "--gamma", "0.5", "--window", "3", "--out", planes.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(std::fs::read_to_string(&planes).unwrap().contains("<path"));

    let out = hypervis(&["render", "--dim", "3", "--out", dir.path().join("x.svg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_file_error() {
    let out = hypervis(&["render", "--out", "/nonexistent-dir/x.svg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("file error"));
}

#[test]
fn verify_reports_every_criterion() {
    let out = hypervis(&["verify"]);
    let text = stdout(&out);
    assert!(out.status.success(), "{text}");
    let lines: Vec<&str> = text.lines().filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]")).collect();
    assert_eq!(lines.len(), 11, "{text}");
    assert!(text.contains("11/11 criteria passed"));
}
