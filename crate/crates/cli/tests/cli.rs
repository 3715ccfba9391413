use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &[&str] = &["--nx", "8", "--ny", "8", "-N", "4", "--threads", "1"];

fn cmd(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_saddle-dd"));
    c.args(args);
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("DDSP_")) {
        c.env_remove(k);
    }
    c
}

fn run(args: &[&str]) -> Output {
    cmd(args).output().unwrap()
}

fn small(sub: &str, extra: &[&str]) -> Output {
    let mut a = vec![sub];
    a.extend_from_slice(SMALL);
    a.extend_from_slice(extra);
    run(&a)
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn strip_timings(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timings");
    v
}

#[test]
fn run_succeeds_and_reports_residual() {
    let out = small("run", &["--verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!(v["block_residual"].as_f64().unwrap() <= 1e-8);
    assert!(v["verify"].is_object());
}

#[test]
fn verify_passes_on_default_problem() {
    let out = small("verify", &[]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().all(|l| !l.starts_with("FAIL")), "{text}");
}

#[test]
fn corrupted_dual_weights_fail_verification() {
    let out = small("verify", &["--corrupt-dual-weights"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    let failed: Vec<&str> = text.lines().filter(|l| l.starts_with("FAIL")).collect();
    assert_eq!(failed.len(), 1, "{text}");
    assert!(failed[0].contains("dual"), "{text}");
}

#[test]
fn bad_configuration_exits_2() {
    assert_eq!(small("run", &["--tol", "0"]).status.code(), Some(2));
    assert_eq!(small("run", &["--c-mode", "bogus"]).status.code(), Some(2));
    assert_eq!(run(&["run", "--input-dir", "/nonexistent/problem"]).status.code(), Some(2));
}

#[test]
fn non_convergence_exits_3() {
    assert_eq!(small("run", &["--max-iter", "1"]).status.code(), Some(3));
}

#[test]
fn zero_rhs_needs_no_iterations() {
    let out = small("run", &["--rhs", "zero"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schur_iterations"], 0);
    assert_eq!(v["block_residual"].as_f64().unwrap(), 0.0);
}

#[test]
fn generated_files_solve_like_the_generator() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = small("gen", &["--c-mode", "split:0.001", "--out-dir", d]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["A.mtx", "B.mtx", "C.mtx", "A.split", "C.split", "spec.json"] {
        assert!(Path::new(d).join(f).exists(), "missing {f}");
    }
    let direct = json(&small("run", &["--c-mode", "split:0.001"]));
    let loaded = json(&run(&["run", "--input-dir", d, "-N", "4", "--threads", "1"]));
    assert_eq!(direct["dims"]["n"], loaded["dims"]["n"]);
    assert_eq!(direct["schur_iterations"], loaded["schur_iterations"]);
    let (a, b) = (direct["block_residual"].as_f64().unwrap(), loaded["block_residual"].as_f64().unwrap());
    assert!(a <= 1e-8 && b <= 1e-8);
}

#[test]
fn sweep_writes_one_row_per_subdomain_count() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = run(&[
        "sweep",
        "--sweep-n",
        "4,9",
        "--sweep-local-size",
        "60",
        "--threads",
        "1",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(&csv).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "n_parts").unwrap();
    let parts: Vec<String> = rdr.records().map(|r| r.unwrap()[col].to_string()).collect();
    assert_eq!(parts, ["4", "9"]);
}

#[test]
fn runs_are_deterministic() {
    let a = strip_timings(json(&small("run", &["--verbose"])));
    let b = strip_timings(json(&small("run", &["--verbose"])));
    assert_eq!(a, b);
}

#[test]
fn environment_overrides_file_and_flags_override_environment() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("cfg.json");
    std::fs::write(&file, r#"{ "n_parts": 9, "overlap": 1, "tol": 1e-6 }"#).unwrap();
    let f = file.to_str().unwrap();
    let cfg = |env: &[(&str, &str)], extra: &[&str]| {
        let mut c = cmd(&["config", "--config", f]);
        c.args(extra);
        for (k, v) in env {
            c.env(k, v);
        }
        json(&c.output().unwrap())
    };
    let v = cfg(&[], &[]);
    assert_eq!((v["n_parts"].as_u64(), v["overlap"].as_u64()), (Some(9), Some(1)));
    let v = cfg(&[("DDSP_OVERLAP", "3")], &[]);
    assert_eq!((v["n_parts"].as_u64(), v["overlap"].as_u64()), (Some(9), Some(3)));
    let v = cfg(&[("DDSP_OVERLAP", "3")], &["--overlap", "2"]);
    assert_eq!(v["overlap"].as_u64(), Some(2));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("cfg.json");
    std::fs::write(&file, r#"{ "n_part": 9 }"#).unwrap();
    assert_eq!(run(&["config", "--config", file.to_str().unwrap()]).status.code(), Some(2));
}
