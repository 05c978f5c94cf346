use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use l0est::bounds::BoundsReport;
use l0est::estimator::FitResult;
use l0est::harness::CoverageResult;
use tempfile::TempDir;

const GLM: &str = r#"{
    "n": 40, "p": 5, "spt_size": 1, "replicates": 20, "seed": 3,
    "design": {"kind": "low_coherence_pm1", "target_mu": 0.3},
    "model": {"kind": "glm", "family": {"kind": "bernoulli"}},
    "interval": {"lo": -2, "hi": 2},
    "theorem": {"kind": "glm"}
}"#;

const FLIP: &str = r#"{
    "n": 12, "p": 4, "seed": 1, "nu": 0.5,
    "design": {"kind": "pm1_iid"},
    "model": {"kind": "lse", "link": {"kind": "logistic_flip", "p01": 0.1, "p11": 0.9},
              "noise": {"kind": "flip_channel", "p01": 0.1, "p11": 0.9}},
    "interval": {"lo": -1, "hi": 1},
    "max_support": 1, "l1inf_cap": 0.5,
    "theorem": {"kind": "multi_disc", "rule": "half_radius", "case": "interval"},
    "verify": {
        "tail": {"noise": {"kind": "gaussian_iid", "sigma": 1.0}, "n": 10, "trials": 10000, "directions": 2},
        "control": {"noise": {"kind": "gaussian_iid", "sigma": 1.0}, "k_check": 2, "trials": 2000}
    }
}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_l0est")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn bounds_prints_a_report_that_round_trips() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "cfg.json", GLM);
    let text = stdout(&run(&["bounds", "--config", s(&cfg)]));
    let report: BoundsReport = serde_json::from_str(&text).unwrap();
    assert!(report.c_r > 0.0 && report.kappa_r > 0.0);
    assert_eq!(serde_json::to_string_pretty(&report).unwrap(), text.trim_end());
}

#[test]
fn fit_reads_csv_and_writes_the_support_log() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "cfg.json", &GLM.replace(r#""theorem""#, r#""c_r": 0.5, "theorem""#));
    let x = write(dir.path(), "x.csv", "1,-1,1\n-1,1,1\n1,1,-1\n-1,-1,-1\n1,-1,-1\n-1,1,-1\n");
    let y = write(dir.path(), "y.csv", "1\n0\n1\n0\n1\n0\n");
    let before = (fs::read(&x).unwrap(), fs::read(&y).unwrap(), fs::read(&cfg).unwrap());
    let out = dir.path().join("out");
    let o = run(&["fit", "--config", s(&cfg), "--x", s(&x), "--y", s(&y), "--out", s(&out), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("fit.json")).unwrap();
    let res: FitResult = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&res).unwrap(), text);
    let log = fs::read_to_string(out.join("support_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), res.log.len());
    assert_eq!(before, (fs::read(&x).unwrap(), fs::read(&y).unwrap(), fs::read(&cfg).unwrap()));
}

#[test]
fn coverage_writes_csv_and_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "cfg.json", GLM);
    let out = dir.path().join("cov");
    let o = run(&["coverage", "--config", s(&cfg), "--out", s(&out), "--seed", "11"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("summary.json")).unwrap();
    let res: CoverageResult = serde_json::from_str(&text).unwrap();
    assert_eq!(res.replicates.len(), 20);
    let csv = fs::read_to_string(out.join("replicates.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
    // The seed flag overrides the config.
    let o = run(&["coverage", "--config", s(&cfg), "--out", s(&dir.path().join("cov3")), "--quiet"]);
    assert!(o.status.success());
    let other: CoverageResult =
        serde_json::from_str(&fs::read_to_string(dir.path().join("cov3/summary.json")).unwrap()).unwrap();
    assert_ne!(res.replicates, other.replicates);
}

#[test]
fn grid_and_verify_emit_json() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "cfg.json", FLIP);
    let grid: serde_json::Value = serde_json::from_str(&stdout(&run(&["grid", "--config", s(&cfg)]))).unwrap();
    assert!(grid["size"].as_u64().unwrap() > 0);
    assert_eq!(grid["points"].as_array().unwrap().len() as u64, grid["size"].as_u64().unwrap());
    let verify: serde_json::Value = serde_json::from_str(&stdout(&run(&["verify", "--config", s(&cfg)]))).unwrap();
    assert_eq!(verify["tail"]["pass"], true);
    assert!(verify["control"]["frequency"].as_f64().unwrap() > 0.5);
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let bad = write(dir.path(), "bad.json", &GLM.replace(r#""seed": 3"#, r#""seed": 3, "colour": "red""#));
    let o = run(&["bounds", "--config", s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    let q = write(dir.path(), "q.json", &GLM.replace(r#""seed": 3"#, r#""seed": 3, "q": 0.4"#));
    assert_eq!(run(&["bounds", "--config", s(&q)]).status.code(), Some(1));
    assert_eq!(run(&["bounds"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let missing = dir.path().join("nope.csv");
    let cfg = write(dir.path(), "cfg.json", GLM);
    assert_eq!(run(&["fit", "--config", s(&cfg), "--x", s(&missing), "--y", s(&missing)]).status.code(), Some(1));
}

#[test]
fn computation_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    // A constant link has no slope, so the least-squares curvature constant does not exist.
    let flat = FLIP.replace(r#""p11": 0.9"#, r#""p11": 0.1"#);
    let cfg = write(dir.path(), "flat.json", &flat);
    let o = run(&["bounds", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}
