use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn shocklab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shocklab")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Short, coarse self-similar run: enough for the artifact plumbing.
const SHORT_SELFSIM: [&str; 8] = [
    "--set",
    "selfsim.n=256",
    "--set",
    "selfsim.s_len=0.2",
    "--set",
    "selfsim.trajectories=[2.0]",
    "--set",
    "selfsim.half_length=20",
];

#[test]
fn verify_profiles_passes_and_catches_a_wrong_scaling() {
    let ok = shocklab(&["verify-profiles"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));
    let rep: Value = serde_json::from_slice(&ok.stdout).unwrap();
    let residual = rep["checks"].as_array().unwrap().iter().find(|c| c["name"] == "residual[nu=6]").unwrap();
    assert!(residual["value"].as_f64().unwrap() <= 1e-10);

    let bad = shocklab(&["verify-profiles", "--inject-fault"]);
    assert_eq!(code(&bad), 1);
    let rep: Value = serde_json::from_slice(&bad.stdout).unwrap();
    let failures: Vec<&str> = rep["failures"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    assert!(failures.contains(&"residual[nu=12]"), "{failures:?}");
    assert!(!failures.contains(&"residual[nu=6]"), "the stable member has no scaling to get wrong");
}

#[test]
fn verify_fraclap_writes_its_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = shocklab(&["verify-fraclap", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let rep = json(&dir.path().join("verify-fraclap.json"));
    assert_eq!(rep["passed"], true);
    assert!(rep["checks"].as_array().unwrap().len() >= 15);
}

#[test]
fn oracle_compare_and_monitor_failure() {
    let o = shocklab(&["oracle-compare", "--set", "oracle.n=2048"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = shocklab(&["run", "--preset", "burgers-oracle", "--set", "oracle.tol=1e-15", "--out", out]);
    assert_eq!(code(&o), 4);
    let s = json(&dir.path().join("burgers-oracle/summary.json"));
    assert_eq!(s["passed"], false);
    assert_eq!(s["schema_version"], 1);
    let failed: Vec<&Value> = s["verdicts"].as_array().unwrap().iter().filter(|v| v["satisfied"] == false).collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0]["name"], "characteristics_error");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"name\": \"x\"}").unwrap();
    assert_eq!(code(&shocklab(&["run", "--config", bad.to_str().unwrap(), "--out", out])), 2);
    assert_eq!(code(&shocklab(&["run", "--preset", "alpha02", "--set", "alpha=0.6", "--out", out])), 2);
    assert_eq!(code(&shocklab(&["run", "--preset", "alpha02", "--set", "nonsense=1", "--out", out])), 2);
    assert_eq!(code(&shocklab(&["run", "--preset", "nope", "--out", out])), 2);
    assert!(fs::read_dir(dir.path()).unwrap().all(|e| e.unwrap().file_name() == "bad.json"));
}

#[test]
fn solver_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = shocklab(&["run", "--preset", "alpha02", "--set", "physical.control.max_steps=3", "--out", out]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&dir.path().join("alpha02/summary.json"));
    assert!(s["error"].as_str().unwrap().starts_with("solver failure"));
}

#[test]
fn run_from_a_written_config_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let mut args = vec!["run", "--preset", "selfsim", "--seed", "7"];
    args.extend_from_slice(&SHORT_SELFSIM);
    let first = shocklab(&[&args[..], &["--out", a.to_str().unwrap()]].concat());
    assert!(matches!(code(&first), 0 | 4), "{}", String::from_utf8_lossy(&first.stderr));

    // The embedded config reproduces the run exactly.
    let bundle = json(&a.join("selfsim/config.json"));
    assert_eq!(bundle["schema_version"], 1);
    assert_eq!(bundle["config"]["seed"], 7);
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, bundle["config"].to_string()).unwrap();
    let second = shocklab(&["run", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(code(&first), code(&second));
    for f in ["selfsim.csv", "trajectories.csv", "convergence.csv", "config.json", "summary.json"] {
        let x = fs::read(a.join("selfsim").join(f)).unwrap();
        let y = fs::read(b.join("selfsim").join(f)).unwrap();
        assert!(x == y, "{f} differs between identical runs");
    }
    let csv = fs::read_to_string(a.join("selfsim/selfsim.csv")).unwrap();
    assert!(csv.starts_with("s,t,tau,xi,kappa,tau_dot"));
    assert!(csv.lines().count() > 10);
}

#[test]
fn sweep_without_overrides_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("run");
    let b = dir.path().join("sweep");
    let args = ["--preset", "burgers-oracle", "--set", "oracle.n=2048", "--set", "oracle.tol=1e-2"];
    let r = shocklab(&[&["run"][..], &args, &["--out", a.to_str().unwrap()]].concat());
    let s = shocklab(&[&["sweep"][..], &args, &["--out", b.to_str().unwrap()]].concat());
    assert_eq!(code(&r), 0);
    assert_eq!(code(&s), 0);
    assert_eq!(
        fs::read(a.join("burgers-oracle/summary.json")).unwrap(),
        fs::read(b.join("burgers-oracle/summary.json")).unwrap()
    );
    let table = fs::read_to_string(b.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
}

#[test]
fn sweep_reports_partial_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = shocklab(&[
        "sweep", "--preset", "burgers-oracle", "--set", "oracle.n=2048", "--vary", "oracle.tol=1e-2,1e-15", "--vary",
        "oracle.t=0.3,0.5", "--jobs", "2", "--out", out,
    ]);
    assert_eq!(code(&o), 4);
    let rows: Vec<Value> = serde_json::from_str(&fs::read_to_string(dir.path().join("sweep.json")).unwrap()).unwrap();
    assert_eq!(rows.len(), 4);
    let codes: Vec<i64> = rows.iter().map(|r| r["code"].as_i64().unwrap()).collect();
    assert_eq!(codes, vec![0, 0, 4, 4]);
    assert!(dir.path().join("burgers-oracle-oracle.tol=1e-2-oracle.t=0.3/summary.json").exists());

    let bad = shocklab(&["sweep", "--preset", "burgers-oracle", "--vary", "oracle.n=512,7", "--out", out]);
    assert_eq!(code(&bad), 2);
    assert_eq!(code(&shocklab(&["sweep", "--preset", "burgers-oracle", "--vary", "oracle.n", "--out", out])), 2);
}
