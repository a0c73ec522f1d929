use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dualjet"))
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn component<'a>(report: &'a Value, name: &str, index: &[u64]) -> &'a Value {
    let entries = report["points"][0]["components"][name]["entries"].as_array().unwrap();
    let wanted: Vec<Value> = index.iter().map(|&k| Value::from(k)).collect();
    &entries
        .iter()
        .find(|e| e["index"].as_array().unwrap() == &wanted)
        .unwrap()["value"]
}

#[test]
fn compute_sphere_at_equator() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let point = format!("t=1:1,x={}:0.8,p=1:0:0:0", std::f64::consts::FRAC_PI_2);
    let cfg = bundled("sphere.json");
    let result = run(&[
        "compute",
        "--config",
        cfg.to_str().unwrap(),
        "--point",
        &point,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0, "{}", stderr(&result));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let frak = component(&report, "curvature.frak_R", &[1, 2, 1, 2]).as_f64().unwrap();
    assert!((frak + 1.0).abs() < 1e-9);
    assert_eq!(report["config"]["branch"], "multi-time");
    let labels = &report["points"][0]["components"]["curvature.frak_R"]["labels"];
    assert_eq!(labels, "lijk");
    // every zero cell is present
    let components = report["points"][0]["components"].as_object().unwrap();
    assert_eq!(components.keys().filter(|k| k.starts_with("torsion.")).count(), 18);
    assert_eq!(components.keys().filter(|k| k.starts_with("curvature.")).count(), 18);
}

#[test]
fn compute_flat_space_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("flat.json");
    let cfg = bundled("flat.json");
    let result = run(&[
        "compute",
        "--config",
        cfg.to_str().unwrap(),
        "--point",
        "t=1:1.2,x=0.6:0.9,p=0.5:-0.5:1:0.25",
        "--grid",
        "x1=0.5:1.2:3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0, "{}", stderr(&result));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let points = report["points"].as_array().unwrap();
    assert_eq!(points.len(), 3);
    for pt in points {
        for (name, tensor) in pt["components"].as_object().unwrap() {
            if name.starts_with("torsion.") || name.starts_with("curvature.") {
                for e in tensor["entries"].as_array().unwrap() {
                    assert_eq!(e["value"].as_f64().unwrap(), 0.0, "{name}");
                }
            }
        }
    }
}

#[test]
fn nonsymmetric_metric_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"m": 1, "n": 2, "h": [["1"]],
            "body": {"g_lower": [["1", "x1"], ["0", "1"]], "U": [["0", "0"]], "F": "0"}}"#,
    )
    .unwrap();
    let out = dir.path().join("r.json");
    let result = run(&[
        "compute",
        "--config",
        cfg.to_str().unwrap(),
        "--point",
        "t=1,x=1:1,p=0:0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 2);
    assert!(stderr(&result).contains("g_lower"));
    assert!(!out.exists());
}

#[test]
fn degenerate_point_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cone.json");
    std::fs::write(
        &cfg,
        r#"{"m": 1, "n": 2, "h": [["1"]],
            "body": {"g_lower": [["1", "0"], ["0", "x1^2"]], "U": [["0", "0"]], "F": "0"},
            "sample_boxes": {"x1": [-1, 1]}}"#,
    )
    .unwrap();
    let out = dir.path().join("r.json");
    let cfg = cfg.to_str().unwrap();
    let result = run(&[
        "compute",
        "--config",
        cfg,
        "--point",
        "t=1,x=0:1,p=0:0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 3);
    assert!(stderr(&result).contains("x1=0"), "{}", stderr(&result));
    let outside = run(&[
        "compute",
        "--config",
        cfg,
        "--point",
        "t=1,x=2:1,p=0:0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&outside), 2);
    assert!(stderr(&outside).contains("x1"));
}

#[test]
fn verify_bundled_spaces() {
    for name in ["sphere.json", "single_time_quadratic.json"] {
        let cfg = bundled(name);
        let result = run(&[
            "verify",
            "--config",
            cfg.to_str().unwrap(),
            "--samples",
            "100",
            "--seed",
            "7",
        ]);
        let stdout = String::from_utf8_lossy(&result.stdout);
        assert_eq!(code(&result), 0, "{name}: {stdout}");
        assert!(!stdout.contains("FAIL"));
        if name.starts_with("single") {
            assert!(stdout.contains("PASS  reduction.N2_dual_path"));
        }
    }
}

#[test]
fn injected_fault_fails_the_metrical_suite() {
    let cfg = bundled("sphere.json");
    let result = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--samples",
        "20",
        "--inject-fault",
        "hc",
    ]);
    assert_eq!(code(&result), 1);
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(
        stdout.lines().any(|l| l.starts_with("FAIL") && l.contains("g_ij|k")),
        "{stdout}"
    );
}

#[test]
fn tolerance_overrides() {
    let cfg = bundled("sphere.json");
    let cfg = cfg.to_str().unwrap();
    // an impossible FD tolerance makes the run fail
    let strict = run(&["verify", "--config", cfg, "--samples", "10", "--tol", "fd=0"]);
    assert_eq!(code(&strict), 1);
    let unknown = run(&["verify", "--config", cfg, "--samples", "10", "--tol", "bogus=1"]);
    assert_eq!(code(&unknown), 2);
    assert!(stderr(&unknown).contains("bogus"));
}

#[test]
fn branch_override_is_rejected() {
    let cfg = bundled("sphere.json");
    let result = run(&["verify", "--config", cfg.to_str().unwrap(), "--branch", "m1"]);
    assert_eq!(code(&result), 2);
}

#[test]
fn verify_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled("polar_time.json");
    let paths: Vec<PathBuf> = (0..2).map(|k| dir.path().join(format!("v{k}.json"))).collect();
    for p in &paths {
        let result = run(&[
            "verify",
            "--config",
            cfg.to_str().unwrap(),
            "--samples",
            "30",
            "--seed",
            "3",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert_eq!(code(&result), 0);
    }
    let a = std::fs::read(&paths[0]).unwrap();
    assert_eq!(a, std::fs::read(&paths[1]).unwrap());
    let report: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(report["seed"], 3);
    assert_eq!(report["pass"], true);
}
