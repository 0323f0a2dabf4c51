use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn plap(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plap"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("PLAP_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

const BENCH: &[&str] = &["--p", "2", "--dim", "3", "--q-exp", "1.5", "--r-star", "1", "--r-circ", "1"];

fn with(cmd: &'static str, extra: &[&'static str]) -> Vec<&'static str> {
    let mut v = vec![cmd];
    v.extend_from_slice(BENCH);
    v.extend_from_slice(extra);
    v
}

#[test]
fn constants_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let out = plap(&["constants", "--p", "2", "--dim", "3", "--rho", "1"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let j = json(&dir.path().join("constants.json"));
    let c = &j["constants"];
    assert!((c["k1"].as_f64().unwrap() - 6.0).abs() < 1e-6);
    assert!((c["k2"].as_f64().unwrap() - 20.25).abs() < 1e-6);
    assert!((c["t"].as_f64().unwrap() - 0.6667).abs() < 1e-4);
    assert!((c["gamma"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert_eq!(j["config"]["p"], 2.0);
    assert_eq!(j["config"]["grid_n"], 2049);
    let csv = fs::read_to_string(dir.path().join("torsion.csv")).unwrap();
    assert!(csv.starts_with("r,u,du\n"));
    assert_eq!(csv.lines().count(), 2050);
    assert!(dir.path().join("summary.txt").exists());
}

#[test]
fn lambda_star_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let out = plap(&with("lambda-star", &[]), dir.path());
    assert_eq!(out.status.code(), Some(0));
    let j = json(&dir.path().join("lambda_star.json"));
    assert!((j["family"]["lambda_star"].as_f64().unwrap() - 2.41778).abs() < 1e-5);
    assert!((j["family"]["delta_lambda"].as_f64().unwrap() - 0.0142556).abs() < 1e-6);
}

#[test]
fn sub_super_benchmark_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = plap(&with("sub-super", &[]), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let j = json(&dir.path().join("sub_super.json"));
    assert_eq!(j["pair"]["pass"], true);
    assert_eq!(j["solve"]["converged"], true);
    assert!(j["solve"]["final_residual"].as_f64().unwrap() < 1e-8);
    let csv = fs::read_to_string(dir.path().join("sub_super.csv")).unwrap();
    assert!(csv.starts_with("r,sub,super\n"));
    let profile = fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert!(profile.starts_with("r,u,du\n"));
}

#[test]
fn malformed_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "p = 2.0\ndim = \"three\"\nrho = 1.0\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = plap(&["constants", "--config", cfg.to_str().unwrap()], &out_dir);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());

    fs::write(&cfg, "p = 2.0\ndim = 3\nrho = 1.0\nnot_a_key = 1\n").unwrap();
    assert_eq!(plap(&["constants", "--config", cfg.to_str().unwrap()], &out_dir).status.code(), Some(2));
    assert_eq!(plap(&["constants", "--config", "/nonexistent.toml"], &out_dir).status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn lambda_above_threshold_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = plap(&with("lambda-star", &["--lambda", "3.0"]), &out_dir);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn failed_hypothesis_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = plap(&with("verify-hypotheses", &["--set", "delta=0.08"]), dir.path());
    assert_eq!(out.status.code(), Some(1));
    let j = json(&dir.path().join("hypotheses.json"));
    assert_eq!(j["hypotheses"]["h1_pass"], true);
    assert_eq!(j["hypotheses"]["h2_pass"], false);
    assert_eq!(j["verification"], "sampled");
}

#[test]
fn box_violation_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = plap(&with("solve-radial", &["--set", "delta=0.08"]), dir.path());
    assert_eq!(out.status.code(), Some(1));
    let j = json(&dir.path().join("solve.json"));
    assert_eq!(j["passed"], false);
    assert!(j["error"].as_str().unwrap().contains("box"));
    assert!(!dir.path().join("profile.csv").exists());
}

#[test]
fn runs_are_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = with("sub-super", &["--grid-n", "513"]);
    assert_eq!(plap(&args, a.path()).status.code(), Some(0));
    assert_eq!(plap(&args, b.path()).status.code(), Some(0));
    for name in ["sub_super.json", "sub_super.csv", "profile.csv", "summary.txt"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_plap"))
        .args(["constants", "--p", "3", "--dim", "2", "--rho", "0.5", "--grid-n", "257"])
        .env("PLAP_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let j = json(&dir.path().join("constants.json"));
    assert!((j["constants"]["gamma"].as_f64().unwrap() - 3.0).abs() < 1e-8);
}

#[test]
fn config_file_with_csv_weight_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let mut w = String::from("s,omega\n");
    for i in 0..=20 {
        let s = i as f64 / 20.0;
        w.push_str(&format!("{s},{}\n", 1.0 + s));
    }
    fs::write(dir.path().join("w.csv"), w).unwrap();
    let cfg = dir.path().join("scenario.toml");
    fs::write(
        &cfg,
        "p = 2.0\ndim = 3\nq_exp = 1.5\nrho = 1.0\nr_circ = 1.0\nweight = \"csv\"\nweight_csv = \"w.csv\"\n\
         grid_n = 257\nsweep_param = \"lambda_fraction\"\nsweep_values = [0.25, 0.5, 1.0]\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = plap(&["sweep", "--config", cfg.to_str().unwrap()], &out_dir);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let j = json(&out_dir.join("sweep.json"));
    assert_eq!(j["points"].as_array().unwrap().len(), 3);
    for i in 0..3 {
        let p = json(&out_dir.join(format!("point_{i:03}/sub_super.json")));
        assert_eq!(p["resolved"]["omega_sup"], 2.0);
        assert_eq!(p["passed"], true);
    }
}
