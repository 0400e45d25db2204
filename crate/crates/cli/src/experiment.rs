//! Monte Carlo ensembles and the artifacts they leave behind.
//!
//! An output directory holds
//!
//! * `metadata.json`: configuration echo, code version, noise constants and
//!   warnings; enough to replay the run,
//! * `paths/path_NNNN.csv`: diagnostics at every save point,
//! * `terminal/path_NNNN.coef`: terminal states of completed paths,
//! * `summary.json`: ensemble statistics,
//! * `timing.json`: wall-clock time, kept apart so that everything else is
//!   reproducible byte for byte.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nsf_core::diagnostics::{l1_budget_bound, total_energy, DiagnosticRecord};
use nsf_core::dynamics::{psi_theta_convert, Formulation, ModelParams, SystemState};
use nsf_core::integrators::{run_path, SchemeSpec, Trajectory};
use nsf_core::noise::{build_noise_basis, NoiseBasis, NoiseConstants};
use nsf_core::spectral::{fourier_project, leray_project, ScalarField, TorusGrid, VectorField};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::write_coefficients;
use crate::config::{InitialCondition, InitialPreset, RunConfig};
use crate::error::{CliError, Result};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// A validated configuration turned into simulation objects.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: RunConfig,
    pub grid: TorusGrid,
    pub basis: NoiseBasis,
    pub params: ModelParams,
    pub scheme: SchemeSpec,
    pub initial: SystemState,
    pub warnings: Vec<String>,
}

impl Experiment {
    pub fn new(config: RunConfig) -> Result<Self> {
        let grid = TorusGrid::new(config.grid.m, config.grid.n)?;
        let basis = build_noise_basis(&config.noise.f, &config.noise.g, grid)?;
        let params = ModelParams {
            delta: config.model.delta,
            epsilon: config.model.epsilon,
            cutoff: config.model.cutoff,
            truncation_radius: config.model.truncation_radius,
            fine_factor: config.grid.fine_factor,
        };
        params.validate()?;
        let scheme = SchemeSpec::new(config.scheme.kind, config.scheme.formulation, config.scheme.dt, config.steps())?;
        let mut warnings = Vec::new();
        if let Some(w) = scheme.stability_warning(&basis, params.cutoff) {
            log::warn!("{w}");
            warnings.push(w);
        }
        let initial = initial_state(&config, grid, &mut warnings)?;
        Ok(Self {
            config,
            grid,
            basis,
            params,
            scheme,
            initial,
            warnings,
        })
    }

    /// Path `p` of the ensemble.
    pub fn path(&self, p: u32) -> Trajectory {
        run_path(
            &self.initial,
            &self.scheme,
            &self.basis,
            &self.params,
            self.config.seed,
            p,
            self.config.scheme.save_every,
        )
    }

    pub fn metadata(&self) -> Metadata {
        let mut config = self.config.clone();
        config.output = None;
        Metadata {
            code_version: CODE_VERSION.to_string(),
            config,
            steps: self.scheme.steps,
            constants: self.basis.constants(),
            stability_number: self.scheme.stability_number(&self.basis, self.params.cutoff),
            initial_energy: total_energy(&self.initial),
            warnings: self.warnings.clone(),
        }
    }

    /// Run every path and write all artifacts below `out`.
    pub fn execute(&self, out: &Path) -> Result<RunOutput> {
        let start = Instant::now();
        let paths_dir = out.join("paths");
        let terminal_dir = out.join("terminal");
        for d in [out, &paths_dir, &terminal_dir] {
            fs::create_dir_all(d).map_err(|e| CliError::io(d, e))?;
        }
        let metadata = self.metadata();
        write_json_file(&out.join("metadata.json"), &metadata)?;
        let results: Vec<Result<PathSummary>> = (0..self.config.n_paths)
            .into_par_iter()
            .map(|p| {
                let traj = self.path(p);
                let name = format!("path_{p:04}");
                write_text(&paths_dir.join(format!("{name}.csv")), &diagnostics_csv(&traj.records))?;
                if traj.completed() {
                    if let Some(last) = traj.last_state() {
                        write_text(&terminal_dir.join(format!("{name}.coef")), &write_coefficients(last))?;
                    }
                } else if let Some(e) = &traj.failure {
                    log::warn!("path {p} stopped after {} steps: {e}", traj.steps_taken);
                }
                Ok(PathSummary::of(&traj))
            })
            .collect();
        let paths = results.into_iter().collect::<Result<Vec<_>>>()?;
        let summary = self.summarize(paths);
        write_json_file(&out.join("summary.json"), &summary)?;
        let wall = start.elapsed().as_secs_f64();
        write_json_file(&out.join("timing.json"), &Timing { wall_seconds: wall })?;
        log::info!(
            "{} of {} paths completed in {wall:.2} s; artifacts in {}",
            summary.completed,
            summary.n_paths,
            out.display()
        );
        Ok(RunOutput {
            dir: out.to_path_buf(),
            metadata,
            summary,
        })
    }

    fn summarize(&self, paths: Vec<PathSummary>) -> EnsembleSummary {
        let done: Vec<&PathSummary> = paths.iter().filter(|p| p.completed).collect();
        let stat = |f: &dyn Fn(&PathSummary) -> Option<f64>| Moments::of(&done.iter().filter_map(|p| f(p)).collect::<Vec<_>>());
        let budget = (self.scheme.formulation == Formulation::Galerkin).then(|| {
            let samples: Vec<f64> = done.iter().filter_map(|p| p.budget_integral).collect();
            let bound = l1_budget_bound(
                total_energy(&self.initial),
                self.basis.constants(),
                self.scheme.final_time(),
                self.params.epsilon,
            );
            BudgetSummary::new(&samples, bound)
        });
        let failed: Vec<u32> = paths.iter().filter(|p| !p.completed).map(|p| p.path).collect();
        EnsembleSummary {
            n_paths: self.config.n_paths,
            completed: done.len(),
            all_failed: done.is_empty(),
            failed,
            initial_energy: total_energy(&self.initial),
            final_energy: stat(&|p| p.final_energy),
            final_entropy_math: stat(&|p| p.final_entropy_math),
            min_margin: stat(&|p| p.min_margin),
            worst_margin: done.iter().filter_map(|p| p.min_margin).reduce(f64::min),
            budget,
            paths,
        }
    }
}

/// Run `config` and write its artifacts below `out`.
pub fn run_experiment(config: &RunConfig, out: &Path) -> Result<RunOutput> {
    Experiment::new(config.clone())?.execute(out)
}

fn initial_state(config: &RunConfig, grid: TorusGrid, warnings: &mut Vec<String>) -> Result<SystemState> {
    let cutoff = config.model.cutoff as i64;
    let ff = config.grid.fine_factor;
    let state = match &config.initial {
        InitialCondition::Preset(p) => match p.preset {
            InitialPreset::TaylorGreen => {
                let a = p.velocity_amplitude;
                let tau = 2.0 * PI;
                let u0 = ScalarField::from_fn(grid, |x| a * (tau * x[0]).sin() * (tau * x[1]).cos() * (tau * x[2]).cos());
                let u1 = ScalarField::from_fn(grid, |x| -a * (tau * x[0]).cos() * (tau * x[1]).sin() * (tau * x[2]).cos());
                let u = VectorField::from_components([u0, u1, ScalarField::zeros(grid)])?;
                let mut psi = ScalarField::constant(grid, p.psi_mean);
                psi.add_sin([1, 0, 0], p.psi_amplitude)?;
                let u = leray_project(&fourier_project(&u, cutoff)?);
                SystemState::new(u, fourier_project(&psi, cutoff)?, nsf_core::dynamics::Variables::Psi)?
            }
        },
        InitialCondition::Modes(m) => {
            let mut comps = [ScalarField::zeros(grid), ScalarField::zeros(grid), ScalarField::zeros(grid)];
            for v in &m.velocity {
                comps[v.component].add_cos(v.k, v.cos)?;
                comps[v.component].add_sin(v.k, v.sin)?;
            }
            let mut s = ScalarField::zeros(grid);
            for v in &m.scalar {
                s.add_cos(v.k, v.cos)?;
                s.add_sin(v.k, v.sin)?;
            }
            let u = VectorField::from_components(comps)?;
            let projected = leray_project(&u);
            let removed = (&u - &projected).norm_l2();
            if removed > 1e-12 * u.norm_l2().max(1.0) {
                let w = format!("initial velocity was not divergence-free; projection removed an L2 norm of {removed:e}");
                log::warn!("{w}");
                warnings.push(w);
            }
            SystemState::new(projected, s, m.variables)?
        }
    };
    if state.vars != config.scheme.formulation.variables() {
        return Ok(psi_theta_convert(&state, ff)?);
    }
    Ok(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub code_version: String,
    /// Configuration echo without the output location.
    pub config: RunConfig,
    pub steps: usize,
    pub constants: NoiseConstants,
    pub stability_number: f64,
    pub initial_energy: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub path: u32,
    pub steps_taken: usize,
    pub completed: bool,
    pub failure: Option<String>,
    pub final_time: Option<f64>,
    pub final_energy: Option<f64>,
    pub final_entropy_math: Option<f64>,
    /// Worst slack of the pathwise energy estimate.
    pub min_margin: Option<f64>,
    /// Time integral of the dissipation budget, when tracked.
    pub budget_integral: Option<f64>,
}

impl PathSummary {
    pub fn of(traj: &Trajectory) -> Self {
        let last = traj.records.last();
        Self {
            path: traj.path,
            steps_taken: traj.steps_taken,
            completed: traj.completed(),
            failure: traj.failure.as_ref().map(|e| e.to_string()),
            final_time: last.map(|r| r.t),
            final_energy: last.map(|r| r.energy),
            final_entropy_math: last.map(|r| r.entropy_math),
            min_margin: traj.records.iter().map(|r| r.admissibility_margin).reduce(f64::min),
            budget_integral: traj.budget_integral.last().copied().flatten(),
        }
    }
}

/// Sample mean and unbiased variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
}

impl Moments {
    pub fn of(x: &[f64]) -> Option<Self> {
        if x.is_empty() {
            return None;
        }
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let variance = if x.len() > 1 {
            x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(Self {
            count: x.len(),
            mean,
            variance,
        })
    }

    pub fn std_error(&self) -> f64 {
        (self.variance / self.count as f64).sqrt()
    }
}

/// Empirical mean of the time-integrated regularized dissipation against its
/// a priori bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetSummary {
    pub paths: usize,
    pub mean: f64,
    pub std_error: f64,
    pub bound: f64,
    /// `bound + 3·std_error − mean`.
    pub margin: f64,
    pub pass: bool,
}

impl BudgetSummary {
    pub fn new(samples: &[f64], bound: f64) -> Self {
        match Moments::of(samples) {
            Some(m) => {
                let se = m.std_error();
                let margin = bound + 3.0 * se - m.mean;
                Self {
                    paths: m.count,
                    mean: m.mean,
                    std_error: se,
                    bound,
                    margin,
                    pass: margin >= 0.0,
                }
            }
            None => Self {
                paths: 0,
                mean: f64::NAN,
                std_error: f64::NAN,
                bound,
                margin: f64::NAN,
                pass: false,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_paths: u32,
    pub completed: usize,
    pub failed: Vec<u32>,
    pub all_failed: bool,
    pub initial_energy: f64,
    pub final_energy: Option<Moments>,
    pub final_entropy_math: Option<Moments>,
    pub min_margin: Option<Moments>,
    pub worst_margin: Option<f64>,
    /// Present for the regularized Galerkin formulation.
    pub budget: Option<BudgetSummary>,
    pub paths: Vec<PathSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub metadata: Metadata,
    pub summary: EnsembleSummary,
}

pub fn diagnostics_csv(records: &[DiagnosticRecord]) -> String {
    let mut s = String::from(DiagnosticRecord::CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}
