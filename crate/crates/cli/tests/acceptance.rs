//! Acceptance suite. Each test prints one `[PASS]` or `[FAIL]` line and then
//! asserts on the same condition.
//!
//! Run with `cargo test -p nsf-cli --test acceptance -- --nocapture` to see
//! the lines.

use std::fs;
use std::path::Path;

use nsf_cli::checks::{
    budget_bound_check, entropy_coefficient_checks, projection_checks, regularization_checks, run_generic,
    verify_noise, Check, COVARIANCE_SAMPLES, STATIONARITY_TOL,
};
use nsf_cli::config::parse_config_str;
use nsf_cli::studies::{compare_schemes, mc_budget_check, weak_strong_experiment};
use nsf_cli::{parse_config, Experiment, RunConfig};
use nsf_core::diagnostics::total_energy;

fn report(n: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] {n:>2} {name}: {detail}");
}

fn checks_pass(n: u32, name: &str, checks: &[Check]) {
    let pass = checks.iter().all(|c| c.pass);
    let detail: Vec<String> = checks.iter().map(|c| format!("{} = {:e} (tol {:e})", c.name, c.value, c.tolerance)).collect();
    report(n, name, pass, &detail.join("; "));
    assert!(pass, "{checks:#?}");
}

/// Desk-scale configuration with both families on the three axes.
fn config(scheme: &str, formulation: &str, dt: f64, t_final: f64, amplitude: f64, paths: u32, seed: u64) -> RunConfig {
    let modes = format!(
        "modes = [{{ k = [1, 0, 0], amplitude = {amplitude:e} }}, {{ k = [0, 1, 0], amplitude = {amplitude:e} }}, {{ k = [0, 0, 1], amplitude = {amplitude:e} }}]"
    );
    let text = format!(
        r#"
seed = {seed}
n_paths = {paths}

[grid]
m = 4
n = 16

[model]
delta = 0.01
epsilon = 0.0

[noise.f]
{modes}

[noise.g]
{modes}

[scheme]
kind = "{scheme}"
formulation = "{formulation}"
dt = {dt:e}
t_final = {t_final:e}
save_every = 1000000

[initial]
preset = "taylor-green"
velocity_amplitude = 1.0
psi_mean = 2.0
psi_amplitude = 0.5
"#
    );
    parse_config_str(&text, "acceptance").expect("valid configuration")
}

#[test]
fn c01_noise_stationarity() {
    let v = verify_noise(None, 2, 0).unwrap();
    let worst = v.reference_bases.iter().map(|b| b.report.max_residual()).fold(0.0, f64::max);
    let largest = v.reference_bases.iter().map(|b| b.modes).max().unwrap();
    let pass = v.reference_bases.iter().all(|b| b.report.pass) && worst <= STATIONARITY_TOL;
    report(
        1,
        "noise stationarity",
        pass,
        &format!("worst residual {worst:e} over bases up to {largest} modes (tol {STATIONARITY_TOL:e})"),
    );
    assert!(pass);
}

#[test]
fn c02_matrix_covariance() {
    let v = verify_noise(None, COVARIANCE_SAMPLES, 0).unwrap();
    let c = &v.covariance;
    let pass = c.violations == 0 && c.samples == 100_000;
    report(
        2,
        "matrix increment covariance",
        pass,
        &format!("{} samples, largest deviation {:.2} standard errors, {} of 45 entries beyond 3", c.samples, c.max_z, c.violations),
    );
    assert!(pass);
}

#[test]
fn c03_projection_algebra() {
    checks_pass(3, "projection algebra", &projection_checks(0).unwrap());
}

#[test]
fn c04_regularization_and_truncation() {
    checks_pass(4, "h_delta and truncation", &regularization_checks(0).unwrap());
}

#[test]
fn c05_ito_stratonovich_equivalence() {
    let exp = Experiment::new(config("euler_maruyama_ito", "psi_system", 4e-4, 0.02, 0.3, 8, 7)).unwrap();
    let r = compare_schemes(&exp, &[4e-4, 2e-4, 1e-4], None).unwrap();
    let fmt = |t: &nsf_core::integrators::ConvergenceTable| {
        let d: Vec<String> = t.rows.iter().map(|r| format!("{:.3e}", r.difference)).collect();
        format!("[{}] order {:.3} monotone {}", d.join(", "), t.order.unwrap_or(f64::NAN), t.monotone)
    };
    let ok = |t: &nsf_core::integrators::ConvergenceTable| t.monotone && t.order.is_some_and(|o| o >= 0.5);
    let pass = ok(&r.ito_vs_stratonovich) && ok(&r.psi_vs_theta);
    report(
        5,
        "Ito/Stratonovich and psi/theta equivalence",
        pass,
        &format!("ito-strat {}; psi-theta {}", fmt(&r.ito_vs_stratonovich), fmt(&r.psi_vs_theta)),
    );
    assert!(pass);
}

#[test]
fn c06_galerkin_energy_inequality() {
    let worst = |dt: f64| {
        let exp = Experiment::new(config("imex_ito", "galerkin", dt, 0.004, 0.03, 32, 42)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let run = exp.execute(dir.path()).unwrap();
        assert!(run.summary.failed.is_empty());
        (run.summary.worst_margin.unwrap().min(0.0), total_energy(&exp.initial))
    };
    let (coarse, e0) = worst(2e-4);
    let (fine, _) = worst(1e-4);
    let (smallest, _) = worst(1e-5);
    let shrink = if fine < 0.0 { coarse / fine } else { f64::INFINITY };
    let limit = 1e-4 * e0;
    let pass = (coarse == 0.0 || shrink >= 1.5) && -smallest <= limit;
    report(
        6,
        "Galerkin pathwise energy inequality",
        pass,
        &format!(
            "worst violation {:.3e} -> {:.3e} (factor {shrink:.2}); at dt = 1e-5: {:.3e} vs limit {limit:.3e}",
            -coarse, -fine, -smallest
        ),
    );
    assert!(pass);
}

#[test]
fn c07_stratonovich_energy_drift() {
    let drift = |dt: f64| {
        let exp = Experiment::new(config("heun_stratonovich", "stratonovich", dt, 0.02, 0.3, 8, 4)).unwrap();
        let e0 = total_energy(&exp.initial);
        let total: f64 = (0..8)
            .map(|p| {
                let t = exp.path(p);
                assert!(t.completed());
                (total_energy(t.last_state().unwrap()) - e0).abs()
            })
            .sum();
        total / 8.0
    };
    let (a, b) = (drift(4e-4), drift(2e-4));
    let pass = a / b >= 1.8;
    report(
        7,
        "Stratonovich energy conservation",
        pass,
        &format!("mean |E(T) - E(0)| {a:.3e} -> {b:.3e}, factor {:.2}", a / b),
    );
    assert!(pass);
}

#[test]
fn c08_budget_bound() {
    let exp = Experiment::new(config("imex_ito", "galerkin", 1e-4, 0.05, 0.3, 64, 42)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (b, run) = mc_budget_check(&exp, dir.path()).unwrap();
    let hand = budget_bound_check();
    let pass = b.pass && b.paths == 64 && run.summary.failed.is_empty() && hand.pass;
    report(
        8,
        "dissipation budget bound",
        pass,
        &format!(
            "mean {:.4e} +/- {:.2e} vs bound {:.4e} over {} paths; hand value error {:e}",
            b.mean, b.std_error, b.bound, b.paths, hand.value
        ),
    );
    assert!(pass);
}

#[test]
fn c09_weak_strong() {
    let twin = Experiment::new(config("euler_maruyama_ito", "psi_system", 1e-5, 1e-3, 0.3, 20, 11)).unwrap();
    let same = weak_strong_experiment(&twin, 0.0, None).unwrap();
    let mut cfg = config("euler_maruyama_ito", "psi_system", 1e-5, 5e-3, 0.3, 20, 11);
    cfg.scheme.save_every = 25;
    let exp = Experiment::new(cfg).unwrap();
    let perturbed = weak_strong_experiment(&exp, 1e-3, None).unwrap();
    let pass = same.pass && same.max_relative_energy <= 1e-10 && perturbed.pass && perturbed.max_ratio <= 1.2;
    report(
        9,
        "weak-strong Gronwall envelope",
        pass,
        &format!(
            "twin relative energy {:e}; perturbed max ratio {:.4} over {} paths",
            same.max_relative_energy, perturbed.max_ratio, perturbed.paths
        ),
    );
    assert!(pass);
}

#[test]
fn c10_generic_structure() {
    let r = run_generic(0).unwrap();
    let checks = nsf_cli::checks::generic_checks(&r);
    assert_eq!(r.config.jacobi_samples, 100);
    checks_pass(10, "GENERIC structure", &checks);
}

#[test]
fn c11_entropy_coefficients() {
    checks_pass(11, "entropy drift coefficients", &entropy_coefficient_checks().unwrap());
}

fn files(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(files(&p));
        } else if p.file_name().unwrap() != "timing.json" {
            out.push(p);
        }
    }
    out.sort();
    out
}

#[test]
fn c12_replay_determinism() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let cfg = config("euler_maruyama_ito", "galerkin", 2e-4, 4e-3, 0.3, 4, 5);
    let mut cfg = cfg;
    cfg.scheme.save_every = 5;
    Experiment::new(cfg).unwrap().execute(first.path()).unwrap();
    let replayed = parse_config(&first.path().join("metadata.json")).unwrap();
    Experiment::new(replayed).unwrap().execute(second.path()).unwrap();
    let (a, b) = (files(first.path()), files(second.path()));
    let mut identical = a.len() == b.len() && !a.is_empty();
    for (x, y) in a.iter().zip(&b) {
        identical &= x.strip_prefix(first.path()).unwrap() == y.strip_prefix(second.path()).unwrap();
        identical &= fs::read(x).unwrap() == fs::read(y).unwrap();
    }
    report(12, "replay determinism", identical, &format!("{} artifacts compared byte for byte", a.len()));
    assert!(identical);
}
