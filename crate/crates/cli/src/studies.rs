//! Experiments built on top of ensembles: the dissipation budget check,
//! weak–strong twin runs and scheme comparisons.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nsf_core::diagnostics::{gronwall_envelope, relative_energy};
use nsf_core::dynamics::{Formulation, Variables};
use nsf_core::integrators::{couple_paths, run_path, ConvergenceTable, SchemeKind, SchemeSpec};
use nsf_core::spectral::{fine_resolution, min_on_grid, Wavevector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::experiment::{write_json_file, write_text, BudgetSummary, Experiment, RunOutput};

/// Ratio slack allowed over the Grönwall envelope.
pub const ENVELOPE_SLACK: f64 = 0.2;
/// Largest relative energy accepted between twin runs from identical data.
pub const TWIN_TOLERANCE: f64 = 1e-10;
/// Mode of ψ that the weak–strong experiment perturbs, as a cosine.
pub const PERTURBATION_MODE: Wavevector = [1, 0, 0];
/// Regularization parameters of the Galerkin sequence in scheme comparisons.
pub const DELTA_SEQUENCE: [f64; 3] = [1e-1, 1e-2, 1e-3];
/// Smallest acceptable fitted strong order.
pub const MIN_ORDER: f64 = 0.5;

/// Run the ensemble and compare its mean time-integrated dissipation with the
/// a priori bound.
pub fn mc_budget_check(exp: &Experiment, out: &Path) -> Result<(BudgetSummary, RunOutput)> {
    if exp.scheme.formulation != Formulation::Galerkin {
        return Err(CliError::Precondition(
            "the budget check needs the galerkin formulation".into(),
        ));
    }
    let run = exp.execute(out)?;
    let budget = run.summary.budget.expect("galerkin runs carry a budget");
    write_json_file(&out.join("budget.json"), &budget)?;
    Ok((budget, run))
}

fn require_positive_psi(exp: &Experiment, what: &str) -> Result<()> {
    if exp.initial.vars != Variables::Psi {
        return Err(CliError::Precondition(format!("{what} needs an initial state in square-root variables")));
    }
    let n = fine_resolution(exp.grid, exp.params.fine_factor);
    let (min, at) = min_on_grid(&exp.initial.scalar, n);
    if !(min > 0.0) {
        return Err(CliError::Precondition(format!(
            "{what} needs a strictly positive initial psi; found {min:e} at {at:?}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakStrongPath {
    pub path: u32,
    pub max_ratio: f64,
    pub max_relative_energy: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakStrongReport {
    pub amplitude: f64,
    pub mode: Wavevector,
    pub paths: u32,
    /// Largest `relative_energy(t) / envelope(t)` over paths and save points.
    pub max_ratio: f64,
    pub max_relative_energy: f64,
    pub per_path: Vec<WeakStrongPath>,
    pub pass: bool,
}

struct TwinRun {
    summary: WeakStrongPath,
    rows: Vec<(f64, f64, f64)>,
}

/// Reference and perturbed runs driven by the same Brownian path.
///
/// The perturbed run adds `amplitude·cos(2πx₁)` to ψ₀. With zero amplitude
/// the report checks that the twins agree; otherwise it checks the relative
/// energy against the Grönwall envelope of the reference run.
pub fn weak_strong_experiment(exp: &Experiment, amplitude: f64, out: Option<&Path>) -> Result<WeakStrongReport> {
    require_positive_psi(exp, "the weak-strong experiment")?;
    if !amplitude.is_finite() {
        return Err(CliError::Precondition(format!("perturbation amplitude {amplitude} is not finite")));
    }
    let mut perturbed = exp.initial.clone();
    if amplitude != 0.0 {
        perturbed.scalar.add_cos(PERTURBATION_MODE, amplitude)?;
        let n = fine_resolution(exp.grid, exp.params.fine_factor);
        let (min, _) = min_on_grid(&perturbed.scalar, n);
        if !(min > 0.0) {
            return Err(CliError::Precondition(format!(
                "perturbation {amplitude} makes psi non-positive ({min:e})"
            )));
        }
    }
    let cfg = &exp.config;
    let runs: Vec<Result<TwinRun>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let reference = exp.path(p);
            let twin = run_path(&perturbed, &exp.scheme, &exp.basis, &exp.params, cfg.seed, p, cfg.scheme.save_every);
            let failure = reference.failure.as_ref().or(twin.failure.as_ref()).map(|e| e.to_string());
            if let Some(f) = failure {
                return Ok(TwinRun {
                    summary: WeakStrongPath {
                        path: p,
                        max_ratio: f64::NAN,
                        max_relative_energy: f64::NAN,
                        failure: Some(f),
                    },
                    rows: Vec::new(),
                });
            }
            let rel = twin
                .states
                .iter()
                .zip(&reference.states)
                .map(|(a, b)| relative_energy(a, b))
                .collect::<nsf_core::Result<Vec<f64>>>()?;
            let envelope = gronwall_envelope(&reference.states, rel[0], exp.params.fine_factor)?;
            let mut rows = Vec::with_capacity(rel.len());
            let (mut max_ratio, mut max_rel) = (0.0f64, 0.0f64);
            for (s, &r) in reference.states.iter().zip(&rel) {
                let bound = envelope.bound(s.t);
                let ratio = if bound > 0.0 {
                    r / bound
                } else if r == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                max_ratio = max_ratio.max(ratio);
                max_rel = max_rel.max(r);
                rows.push((s.t, r, bound));
            }
            Ok(TwinRun {
                summary: WeakStrongPath {
                    path: p,
                    max_ratio,
                    max_relative_energy: max_rel,
                    failure: None,
                },
                rows,
            })
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let ok = runs.iter().all(|r| r.summary.failure.is_none());
    let max_ratio = runs.iter().map(|r| r.summary.max_ratio).fold(0.0, f64::max);
    let max_rel = runs.iter().map(|r| r.summary.max_relative_energy).fold(0.0, f64::max);
    let pass = ok
        && if amplitude == 0.0 {
            max_rel <= TWIN_TOLERANCE
        } else {
            max_ratio <= 1.0 + ENVELOPE_SLACK
        };
    let report = WeakStrongReport {
        amplitude,
        mode: PERTURBATION_MODE,
        paths: cfg.n_paths,
        max_ratio,
        max_relative_energy: max_rel,
        per_path: runs.iter().map(|r| r.summary.clone()).collect(),
        pass,
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut csv = String::from("path,t,relative_energy,envelope\n");
        for r in &runs {
            for (t, e, b) in &r.rows {
                let _ = writeln!(csv, "{},{t:e},{e:e},{b:e}", r.summary.path);
            }
        }
        write_text(&dir.join("weak_strong.csv"), &csv)?;
        write_json_file(&dir.join("weak_strong.json"), &report)?;
        write_json_file(&dir.join("metadata.json"), &exp.metadata())?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub delta: f64,
    /// RMS terminal distance between the regularized and exact runs.
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeComparison {
    pub dt_list: Vec<f64>,
    pub paths: u32,
    /// Euler–Maruyama on the Itô ψ-system against Heun on the Stratonovich form.
    pub ito_vs_stratonovich: ConvergenceTable,
    /// Euler–Maruyama in ψ against Euler–Maruyama in ϑ.
    pub psi_vs_theta: ConvergenceTable,
    /// Regularized Galerkin runs against the exact ψ-system at the finest step.
    pub galerkin_delta: Vec<DeltaRow>,
    pub galerkin_nonincreasing: bool,
    pub pass: bool,
}

fn table_passes(t: &ConvergenceTable) -> bool {
    t.monotone && t.order.is_some_and(|o| o >= MIN_ORDER)
}

/// The three pairings over the configured horizon, seed and path count.
pub fn compare_schemes(exp: &Experiment, dt_list: &[f64], out: Option<&Path>) -> Result<SchemeComparison> {
    require_positive_psi(exp, "scheme comparison")?;
    let Some(&finest) = dt_list.last() else {
        return Err(CliError::Precondition("need at least one step size".into()));
    };
    let cfg = &exp.config;
    let horizon = cfg.scheme.t_final;
    let spec = |kind, formulation, dt: f64| SchemeSpec {
        kind,
        formulation,
        dt,
        steps: (horizon / dt).round() as usize,
    };
    let em = spec(SchemeKind::EulerMaruyamaIto, Formulation::PsiSystem, dt_list[0]);
    let heun = spec(SchemeKind::HeunStratonovich, Formulation::Stratonovich, dt_list[0]);
    let em_theta = spec(SchemeKind::EulerMaruyamaIto, Formulation::ThetaSystem, dt_list[0]);
    let couple = |a: &SchemeSpec, b: &SchemeSpec, params: &nsf_core::dynamics::ModelParams, dts: &[f64]| {
        couple_paths(&exp.initial, a, b, &exp.basis, params, cfg.seed, dts, cfg.n_paths)
    };
    log::info!("coupling Ito and Stratonovich schemes");
    let ito_vs_stratonovich = couple(&em, &heun, &exp.params, dt_list)?;
    log::info!("coupling psi and theta variables");
    let psi_vs_theta = couple(&em, &em_theta, &exp.params, dt_list)?;
    let galerkin = spec(SchemeKind::EulerMaruyamaIto, Formulation::Galerkin, finest);
    let exact = spec(SchemeKind::EulerMaruyamaIto, Formulation::PsiSystem, finest);
    let mut galerkin_delta = Vec::with_capacity(DELTA_SEQUENCE.len());
    for delta in DELTA_SEQUENCE {
        log::info!("galerkin run with delta = {delta:e}");
        let params = nsf_core::dynamics::ModelParams { delta, ..exp.params };
        let t = couple(&galerkin, &exact, &params, &[finest])?;
        galerkin_delta.push(DeltaRow {
            delta,
            difference: t.rows[0].difference,
        });
    }
    let galerkin_nonincreasing = galerkin_delta.windows(2).all(|w| w[1].difference <= w[0].difference);
    let pass = table_passes(&ito_vs_stratonovich) && table_passes(&psi_vs_theta) && galerkin_nonincreasing;
    let report = SchemeComparison {
        dt_list: dt_list.to_vec(),
        paths: cfg.n_paths,
        ito_vs_stratonovich,
        psi_vs_theta,
        galerkin_delta,
        galerkin_nonincreasing,
        pass,
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut csv = String::from("pairing,parameter,difference\n");
        for (name, t) in [("ito_vs_stratonovich", &report.ito_vs_stratonovich), ("psi_vs_theta", &report.psi_vs_theta)] {
            for r in &t.rows {
                let _ = writeln!(csv, "{name},{:e},{:e}", r.dt, r.difference);
            }
        }
        for r in &report.galerkin_delta {
            let _ = writeln!(csv, "galerkin_delta,{:e},{:e}", r.delta, r.difference);
        }
        write_text(&dir.join("compare_schemes.csv"), &csv)?;
        write_json_file(&dir.join("compare_schemes.json"), &report)?;
        write_json_file(&dir.join("metadata.json"), &exp.metadata())?;
    }
    Ok(report)
}
