use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nsf_cli::{parse_config_str, Experiment};

fn nsf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsf"))
        .args(args)
        .env("NSF_WORKERS", "1")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const SMALL: &str = r#"
seed = 9
n_paths = 2

[grid]
m = 3
n = 12

[model]
delta = 0.01
epsilon = 0.0

[noise.f]
modes = [{ k = [1, 0, 0], amplitude = 0.2 }]

[noise.g]
modes = [{ k = [0, 1, 0], amplitude = 0.2 }]

[scheme]
kind = "euler_maruyama_ito"
formulation = "psi_system"
dt = 2e-4
t_final = 1e-3
save_every = 1

[initial]
preset = "taylor-green"
velocity_amplitude = 1.0
psi_mean = 2.0
psi_amplitude = 0.5
"#;

const ZERO: &str = r#"
seed = 1
n_paths = 3

[grid]
m = 3
n = 12

[model]
delta = 0.01
epsilon = 0.0

[noise.f]
modes = [{ k = [1, 0, 0], amplitude = 0.2 }]

[noise.g]
modes = [{ k = [0, 0, 1], amplitude = 0.2 }]

[scheme]
kind = "imex_ito"
formulation = "galerkin"
dt = 2e-4
t_final = 1e-3

[initial]
variables = "psi"
velocity = []
scalar = []
"#;

#[test]
fn invalid_config_lists_every_issue_with_lines() {
    let dir = tempfile::tempdir().unwrap();
    let bad = SMALL.replace("delta = 0.01", "delta = -1.0").replace("t_final = 1e-3", "t_final = 1.5e-3");
    let cfg = write(dir.path(), "bad.toml", &bad);
    let out = nsf(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 10"), "{err}");
    assert!(err.contains("t_final"), "{err}");
    assert!(err.contains("delta"), "{err}");
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = nsf(&["run"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_worker_count_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_nsf"))
        .args(["verify-generic"])
        .env("NSF_WORKERS", "lots")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_artifacts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            let o = nsf(&["run", "--quiet", "--config", &cfg, "--out", out.to_str().unwrap()]);
            assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
            out
        })
        .collect();
    for f in [
        "metadata.json",
        "summary.json",
        "timing.json",
        "paths/path_0000.csv",
        "paths/path_0001.csv",
        "terminal/path_0000.coef",
    ] {
        assert!(runs[0].join(f).is_file(), "missing {f}");
    }
    let csv = fs::read_to_string(runs[0].join("paths/path_0001.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    assert_eq!(csv, fs::read_to_string(runs[1].join("paths/path_0001.csv")).unwrap());
    assert_eq!(
        fs::read(runs[0].join("summary.json")).unwrap(),
        fs::read(runs[1].join("summary.json")).unwrap()
    );
}

#[test]
fn seed_override_changes_paths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    nsf(&["run", "--quiet", "--config", &cfg, "--out", a.to_str().unwrap(), "--paths", "1"]);
    nsf(&["run", "--quiet", "--config", &cfg, "--out", b.to_str().unwrap(), "--paths", "1", "--seed", "10"]);
    let read = |d: &Path| fs::read_to_string(d.join("paths/path_0000.csv")).unwrap();
    assert_ne!(read(&a), read(&b));
}

#[test]
fn stability_warning_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("dt = 2e-4", "dt = 5e-3").replace("t_final = 1e-3", "t_final = 1e-2");
    let cfg = write(dir.path(), "coarse.toml", &text);
    let out = dir.path().join("out");
    nsf(&["run", "--quiet", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    let warnings = meta["warnings"].as_array().unwrap();
    assert!(!warnings.is_empty(), "{meta}");
    assert!(meta["stability_number"].as_f64().unwrap() > 2.0);
}

#[test]
fn zero_steps_gives_the_initial_record_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut exp = Experiment::new(parse_config_str(SMALL, "small").unwrap()).unwrap();
    exp.scheme.steps = 0;
    let run = exp.execute(dir.path()).unwrap();
    assert_eq!(run.summary.completed, 2);
    let csv = fs::read_to_string(dir.path().join("paths/path_0000.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    let e = run.summary.final_energy.unwrap();
    assert_eq!(e.mean, run.summary.initial_energy);
}

#[test]
fn budget_of_zero_data_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "zero.toml", ZERO);
    let out = dir.path().join("out");
    let o = nsf(&["mc-budget", "--quiet", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let b: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("budget.json")).unwrap()).unwrap();
    assert_eq!(b["mean"].as_f64(), Some(0.0));
    assert_eq!(b["bound"].as_f64(), Some(0.0));
    assert_eq!(b["pass"].as_bool(), Some(true));
}

#[test]
fn weak_strong_twins_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("ws");
    let o = nsf(&["weak-strong", "--quiet", "--config", &cfg, "--out", out.to_str().unwrap(), "--amplitude", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r["max_relative_energy"].as_f64().unwrap() <= 1e-10);
    assert!(out.join("weak_strong.csv").is_file());
}

#[test]
fn weak_strong_rejects_theta_data() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/explicit-modes.toml")).unwrap();
    let cfg = write(dir.path(), "theta.toml", &text);
    let out = dir.path().join("ws");
    let o = nsf(&["weak-strong", "--quiet", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_noise_reports_json() {
    let o = nsf(&["verify-noise", "--samples", "2000", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["pass"].as_bool(), Some(true));
    assert_eq!(r["covariance"]["samples"].as_u64(), Some(2000));
}
