use std::path::Path;
use std::process::{Command, Output};

use iqc_core::algorithms::{algorithm_to_json, gd_rate, make_named, tmm_rate, NamedKind, SectorBounds};
use serde_json::Value;

fn iqc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iqc"))
        .args(args)
        .current_dir(dir)
        .env_remove("IQC_SOLVER_TOL")
        .output()
        .expect("spawn iqc")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

#[test]
fn analyze_rate_gd() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_of(&iqc(dir.path(), &["analyze-rate", "--algo", "gd", "--m", "1", "--L", "10", "--lc", "1", "--la", "0"]));
    let rho = v["result"]["rho"].as_f64().unwrap();
    assert!((rho - gd_rate(10.0)).abs() < 1e-3, "rho = {rho}");
    assert_eq!(v["result"]["certificate_digest"].as_str().unwrap().len(), 64);
    assert!(v["result"]["solves"].as_u64().unwrap() > 0);
    assert_eq!(v["manifest"]["command"], "analyze-rate");
    assert_eq!(v["manifest"]["parameters"]["L"], 10.0);
    assert!(v["manifest"]["seconds"].as_f64().is_some());
}

#[test]
fn heavy_ball_is_not_certifiable() {
    let dir = tempfile::tempdir().unwrap();
    let out = iqc(dir.path(), &["analyze-rate", "--algo", "hb", "--m", "1", "--L", "100", "--lc", "1", "--la", "0"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["analyze-rate", "--algo", "gd", "--L", "10"],
        vec!["analyze-rate", "--algo", "newton", "--m", "1", "--L", "10"],
        vec!["analyze-rate", "--algo", "gd", "--m", "2", "--L", "1"],
        vec!["analyze-rate", "--algo", "file:missing.json", "--m", "1", "--L", "10"],
        vec!["sweep", "--kappa-grid", "log:10:1:3"],
        vec!["frobnicate"],
    ] {
        assert_eq!(iqc(dir.path(), &args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn file_round_trip_matches_named() {
    let dir = tempfile::tempdir().unwrap();
    let gd = make_named(NamedKind::Gd, &SectorBounds::new(1.0, 10.0).unwrap(), 1).unwrap();
    std::fs::write(dir.path().join("gd.json"), algorithm_to_json(&gd).to_string()).unwrap();
    let base = ["--m", "1", "--L", "10", "--lc", "1", "--la", "0"];
    let named = json_of(&iqc(dir.path(), &[&["analyze-rate", "--algo", "gd"][..], &base].concat()));
    let file = json_of(&iqc(dir.path(), &[&["analyze-rate", "--algo", "file:gd.json"][..], &base].concat()));
    assert_eq!(named["result"]["rho"], file["result"]["rho"]);
    assert_eq!(named["result"]["certificate_digest"], file["result"]["certificate_digest"]);
}

#[test]
fn synth_convex_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_of(&iqc(dir.path(), &["synth-convex", "--rho", "0.999", "--m", "1", "--L", "100", "--n", "2"]));
    assert_eq!(v["result"]["algorithm_file"], "algorithm.json");
    assert!(dir.path().join("algorithm.json").exists());
    let r = json_of(&iqc(dir.path(), &["analyze-rate", "--algo", "file:algorithm.json", "--m", "1", "--L", "100"]));
    assert!(r["result"]["rho"].as_f64().unwrap() <= 0.999);
}

#[test]
fn synth_bmi_emits_algorithm() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["synth-bmi", "--rho", "0.95", "--m", "1", "--L", "10", "--algo-out", "bmi.json", "--out", "res.json"];
    let out = iqc(dir.path(), &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("res.json")).unwrap()).unwrap();
    assert!(v["result"]["gamma"].as_f64().unwrap() > 0.0);
    let r = json_of(&iqc(dir.path(), &["analyze-rate", "--algo", "file:bmi.json", "--m", "1", "--L", "10"]));
    assert!(r["result"]["rho"].as_f64().unwrap() <= 0.95 + 1e-3);
}

#[test]
fn analyze_h2_reports_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_of(&iqc(dir.path(), &["analyze-h2", "--algo", "gd", "--m", "1", "--L", "10"]));
    assert!(v["result"]["gamma"].as_f64().unwrap() > 0.0);
    assert_eq!(v["result"]["fdi_ok"], true);
}

#[test]
fn sample_h2_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sample-h2", "--algo", "gd", "--m", "1", "--L", "50", "--runs", "8", "--steps", "200", "--seed", "7", "--functions", "3"];
    let a = iqc(dir.path(), &args);
    let b = iqc(dir.path(), &args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# manifest: "));
    assert_eq!(lines.next().unwrap(), "algo,kind,m,L,seed,k_max,N,estimate");
    assert_eq!(lines.count(), 3);
    let other = iqc(dir.path(), &["sample-h2", "--algo", "gd", "--m", "1", "--L", "50", "--runs", "8", "--steps", "200", "--seed", "8"]);
    assert_ne!(other.stdout, b.stdout);
}

#[test]
fn sweep_matches_analytic_rates() {
    let dir = tempfile::tempdir().unwrap();
    let out = iqc(dir.path(), &["sweep", "--algos", "gd,tmm", "--kappa-grid", "log:2:200:4", "--out", "sweep.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let mut n = 0;
    for rec in rdr.deserialize::<std::collections::HashMap<String, String>>() {
        let rec = rec.unwrap();
        let kappa: f64 = rec["kappa"].parse().unwrap();
        let value: f64 = rec["value"].parse().unwrap();
        let expect = if rec["algo"] == "gd" { gd_rate(kappa) } else { tmm_rate(kappa) };
        assert!((value - expect).abs() < 1e-2, "{rec:?}");
        n += 1;
    }
    assert_eq!(n, 8);
}

#[test]
fn solver_tolerance_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_iqc"))
        .args(["analyze-rate", "--algo", "gd", "--m", "1", "--L", "10"])
        .current_dir(dir.path())
        .env("IQC_SOLVER_TOL", "1e-7")
        .output()
        .unwrap();
    let v = json_of(&out);
    assert_eq!(v["manifest"]["solver"]["tol_abs"], 1e-7);
}
