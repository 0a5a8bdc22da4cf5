use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn finsler(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finsler"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn records(out: &Output) -> Vec<Value> {
    let v: Value = serde_json::from_slice(&out.stdout).expect("json report on stdout");
    v.as_array().expect("record list").clone()
}

fn record<'a>(recs: &'a [Value], check: &str) -> &'a Value {
    recs.iter().find(|r| r["check"] == check).unwrap_or_else(|| panic!("no record {check}"))
}

#[test]
fn funk_metric_verifies() {
    let out = finsler(&["verify-metric", "--json", "--samples", "40"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let recs = records(&out);
    assert!(recs.iter().all(|r| r["status"] == "pass"));
    assert!(recs.iter().all(|r| !r["anchor"].as_str().unwrap().is_empty()));
    let p = record(&recs, "projective factor at the symmetric point");
    assert!(p["residual"].as_f64().unwrap() < 1e-12);
    assert_eq!(p["detail"], "c = 0.5");
}

#[test]
fn out_of_range_alpha_is_a_usage_error() {
    let out = finsler(&["verify-metric", "--metric", "bryant-shen", "--alpha", "2.0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
    assert_eq!(finsler(&["verify-metric", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(finsler(&["verify-metric", "--metric", "riemann"]).status.code(), Some(2));
}

#[test]
fn bad_config_documents_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"tolerances": {"ode_tol": -1.0}}"#).unwrap();
    let out = finsler(&["verify-metric", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(&path, "{ not json").unwrap();
    let out = finsler(&["verify-metric", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn curvature_scans_recover_the_constants() {
    for (metric, extra, expected) in [
        ("funk", vec![], -0.25),
        ("bryant-shen", vec!["--alpha", "0.5235987755982988"], 1.0),
        ("euclidean", vec![], 0.0),
    ] {
        let mut args = vec!["curvature-scan", "--json", "--samples", "30", "--metric", metric];
        args.extend(extra);
        let out = finsler(&args);
        assert_eq!(out.status.code(), Some(0), "{metric}");
        let recs = records(&out);
        let fit = record(&recs, "flag curvature fit");
        assert!(fit["residual"].as_f64().unwrap() <= 1e-6, "{metric}: {fit}");
        let detail = fit["detail"].as_str().unwrap();
        let lambda: f64 = detail["lambda = ".len()..].split(',').next().unwrap().parse().unwrap();
        assert!((lambda - expected).abs() < 1e-6, "{metric}: {lambda}");
    }
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(
        &path,
        r#"{"metric": {"kind": "bryant_shen", "alpha": 0.7853981633974483, "dim": 2},
            "sampling": {"samples": 25, "seed": 3}}"#,
    )
    .unwrap();
    let out = finsler(&["curvature-scan", "--json", "--config", path.to_str().unwrap(), "--dim", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let recs = records(&out);
    assert!(record(&recs, "flag curvature fit")["detail"]
        .as_str()
        .unwrap()
        .ends_with("25 samples"));
}

#[test]
fn reports_are_byte_identical_for_a_fixed_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = finsler(&[
            "verify-metric",
            "--samples",
            "30",
            "--seed",
            "17",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |d: &Path| std::fs::read(d.join("report.json")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    let s1 = finsler(&["curvature-scan", "--json", "--samples", "20", "--seed", "5"]).stdout;
    let s2 = finsler(&["curvature-scan", "--json", "--samples", "20", "--seed", "5"]).stdout;
    assert_eq!(s1, s2);
}

#[test]
fn transport_and_loops_pass_for_funk() {
    let out = finsler(&["transport", "--json", "--grid", "8"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let recs = records(&out);
    assert!(record(&recs, "transport norm preservation")["residual"].as_f64().unwrap() <= 1e-8);
    assert!(record(&recs, "geodesic straightness")["residual"].as_f64().unwrap() <= 1e-8);

    let out = finsler(&["loop-curvature", "--json", "--grid", "8"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let recs = records(&out);
    assert_eq!(record(&recs, "loop curvature sign")["detail"], "sigma = +1");
}

#[test]
fn flat_loops_are_degenerate_not_failing() {
    let out = finsler(&["loop-curvature", "--json", "--metric", "euclidean", "--grid", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let recs = records(&out);
    assert_eq!(record(&recs, "loop curvature sign")["status"], "degenerate");
    assert_eq!(record(&recs, "flat holonomy")["residual"].as_f64(), Some(0.0));
}

#[test]
fn holonomy_loop_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = finsler(&["holonomy-loop", "--grid", "10", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("holonomy_loop.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("index,u0,u1,u2,image0,image1,image2,norm_drift"));
    assert_eq!(lines.count(), 10);
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn algebra_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let out = finsler(&["algebra", "--n", "2", "--p-max", "6", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let cert: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["passed"], true);
    let ranks: Vec<u64> = cert["rows"].as_array().unwrap().iter().map(|r| r["target_rank"].as_u64().unwrap()).collect();
    assert_eq!(ranks, [1, 3, 5, 7, 9, 11, 13]);
    assert!(dir.path().join("certificate.csv").exists());

    let out = finsler(&["algebra", "--json", "--p-max", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let recs = records(&out);
    assert!(recs.iter().all(|r| r["status"] == "pass"));
    assert!(record(&recs, "density certificate")["detail"]
        .as_str()
        .unwrap()
        .contains("3/3 11/11 23/23 39/39 59/59"));
}

#[test]
fn flat_algebra_is_reported_degenerate() {
    let out = finsler(&["algebra", "--json", "--lambda", "0", "--p-max", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let recs = records(&out);
    assert_eq!(record(&recs, "density certificate")["status"], "degenerate");
}

#[test]
fn timing_flag_records_runtimes() {
    let out = finsler(&["algebra", "--json", "--timing", "--p-max", "3"]);
    let recs = records(&out);
    assert!(recs.iter().any(|r| r["runtime_ms"].as_u64().unwrap() > 0));
}
