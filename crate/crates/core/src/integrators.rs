//! Time stepping: Euler–Maruyama, Heun and exponential IMEX, all driven by
//! a shared Brownian path.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    biharmonic_dissipation, dissipation_budget, energy_slack, entropies, gradient_norms, total_energy, BudgetKind,
    DiagnosticRecord,
};
use crate::dynamics::{
    nonlinear_drift_with_budget, psi_theta_convert, Drift, Formulation, LinearRates, ModelParams, SystemState,
};
use crate::error::{NsfError, Result};
use crate::noise::{noise_diffusion_fields, NoiseBasis, NoiseIncrement, NoiseStream};
use crate::spectral::{fourier_project, leray_project, ScalarField, TorusGrid, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    EulerMaruyamaIto,
    HeunStratonovich,
    ImexIto,
}

/// A time stepper together with the equations it advances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub kind: SchemeKind,
    pub formulation: Formulation,
    pub dt: f64,
    pub steps: usize,
}

impl SchemeSpec {
    pub fn new(kind: SchemeKind, formulation: Formulation, dt: f64, steps: usize) -> Result<Self> {
        let s = Self {
            kind,
            formulation,
            dt,
            steps,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(NsfError::InvalidParameter(format!("dt = {} must be positive", self.dt)));
        }
        let ok = match self.kind {
            SchemeKind::HeunStratonovich => self.formulation == Formulation::Stratonovich,
            SchemeKind::EulerMaruyamaIto | SchemeKind::ImexIto => self.formulation.is_ito(),
        };
        if !ok {
            return Err(NsfError::InvalidParameter(format!(
                "{:?} cannot advance the {:?} formulation",
                self.kind, self.formulation
            )));
        }
        Ok(())
    }

    pub fn final_time(&self) -> f64 {
        self.dt * self.steps as f64
    }

    /// Same scheme with another step size over the same horizon.
    pub fn with_dt(&self, dt: f64) -> Self {
        Self {
            dt,
            steps: (self.final_time() / dt).round() as usize,
            ..*self
        }
    }

    /// `dt·(1 + F₁/2 + G₁/2)·4π²·3m²`, compared against 2 for explicit schemes.
    pub fn stability_number(&self, basis: &NoiseBasis, cutoff: usize) -> f64 {
        let c = basis.constants();
        let m = cutoff as f64;
        self.dt * (1.0 + c.f1 / 2.0 + c.g1 / 2.0) * 4.0 * std::f64::consts::PI.powi(2) * 3.0 * m * m
    }

    /// Warning text when the explicit heat part is linearly unstable.
    pub fn stability_warning(&self, basis: &NoiseBasis, cutoff: usize) -> Option<String> {
        if self.kind == SchemeKind::ImexIto {
            return None;
        }
        let z = self.stability_number(basis, cutoff);
        (z > 2.0).then(|| format!("dt = {} gives a stability number {z:.3} > 2 for the explicit {:?} scheme", self.dt, self.kind))
    }
}

fn galerkin_cut(formulation: Formulation, params: &ModelParams, grid: TorusGrid) -> Option<i64> {
    (formulation == Formulation::Galerkin && params.cutoff < grid.cutoff()).then_some(params.cutoff as i64)
}

fn noise_term(
    state: &SystemState,
    basis: &NoiseBasis,
    params: &ModelParams,
    inc: &NoiseIncrement,
    cut: Option<i64>,
) -> Result<(VectorField, ScalarField)> {
    let (mut du, mut ds) = noise_diffusion_fields(basis, state, inc, params.fine_factor)?;
    if let Some(m) = cut {
        du = fourier_project(&du, m)?;
        ds = fourier_project(&ds, m)?;
    }
    Ok((du, ds))
}

fn full_drift(state: &SystemState, basis: &NoiseBasis, params: &ModelParams, f: Formulation) -> Result<(Drift, Option<f64>)> {
    let (mut d, budget) = nonlinear_drift_with_budget(state, basis, params, f)?;
    d.axpy(1.0, &LinearRates::new(f, basis.constants(), params).apply(state));
    if let Some(m) = galerkin_cut(f, params, state.grid()) {
        d.du = fourier_project(&d.du, m)?;
        d.dscalar = fourier_project(&d.dscalar, m)?;
    }
    Ok((d, budget))
}

/// What a step learned about its starting state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    /// Spatial integral of the gradient nonlinearity at the left endpoint.
    pub budget: Option<f64>,
}

/// Advance one step; see [`step_with_report`].
pub fn step(
    state: &SystemState,
    scheme: &SchemeSpec,
    basis: &NoiseBasis,
    params: &ModelParams,
    inc: &NoiseIncrement,
) -> Result<SystemState> {
    step_with_report(state, scheme, basis, params, inc).map(|(s, _)| s)
}

/// Advance one step of length `scheme.dt` using increment `inc`.
pub fn step_with_report(
    state: &SystemState,
    scheme: &SchemeSpec,
    basis: &NoiseBasis,
    params: &ModelParams,
    inc: &NoiseIncrement,
) -> Result<(SystemState, StepReport)> {
    scheme.validate()?;
    let dt = scheme.dt;
    if (inc.dt - dt).abs() > 1e-9 * dt {
        return Err(NsfError::InvalidParameter(format!(
            "increment covers {} but the step is {dt}",
            inc.dt
        )));
    }
    let f = scheme.formulation;
    let cut = galerkin_cut(f, params, state.grid());
    let (mut next, budget) = match scheme.kind {
        SchemeKind::EulerMaruyamaIto => {
            let (d, budget) = full_drift(state, basis, params, f)?;
            let (nu, ns) = noise_term(state, basis, params, inc, cut)?;
            let mut x = state.axpy(dt, &d.du, &d.dscalar);
            x = x.axpy(1.0, &nu, &ns);
            (x, budget)
        }
        SchemeKind::HeunStratonovich => {
            let (d0, budget) = full_drift(state, basis, params, f)?;
            let (nu0, ns0) = noise_term(state, basis, params, inc, cut)?;
            let pred = state.axpy(dt, &d0.du, &d0.dscalar).axpy(1.0, &nu0, &ns0);
            let (d1, _) = full_drift(&pred, basis, params, f)?;
            let (nu1, ns1) = noise_term(&pred, basis, params, inc, cut)?;
            let x = state
                .axpy(0.5 * dt, &d0.du, &d0.dscalar)
                .axpy(0.5 * dt, &d1.du, &d1.dscalar)
                .axpy(0.5, &nu0, &ns0)
                .axpy(0.5, &nu1, &ns1);
            (x, budget)
        }
        SchemeKind::ImexIto => {
            let (mut d, budget) = nonlinear_drift_with_budget(state, basis, params, f)?;
            if let Some(m) = cut {
                d.du = fourier_project(&d.du, m)?;
                d.dscalar = fourier_project(&d.dscalar, m)?;
            }
            let (nu, ns) = noise_term(state, basis, params, inc, cut)?;
            let mut x = state.axpy(dt, &d.du, &d.dscalar).axpy(1.0, &nu, &ns);
            let rates = LinearRates::new(f, basis.constants(), params);
            let u = x.u.components().clone().map(|c| c.map_modes(|k, z| z * (rates.u_rate(k) * dt).exp()));
            x.u = VectorField::from_components(u)?;
            x.scalar = x.scalar.map_modes(|k, z| z * (rates.scalar_rate(k) * dt).exp());
            (x, budget)
        }
    };
    next.u = leray_project(&next.u);
    next.t = state.t + dt;
    if !next.is_finite() {
        return Err(NsfError::BlowUp {
            step: (next.t / dt).round() as usize,
        });
    }
    Ok((next, StepReport { budget }))
}

/// Saved states and diagnostics of one path, plus what is needed to replay it.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub seed: u64,
    pub path: u32,
    pub scheme: SchemeSpec,
    pub params: ModelParams,
    pub states: Vec<SystemState>,
    pub records: Vec<DiagnosticRecord>,
    /// `ε∫₀ᵗ(‖Δu‖² + ‖Δψ‖²)` at each save point.
    pub biharmonic_work: Vec<f64>,
    /// Time integral of the dissipation budget at each save point, when the
    /// formulation provides one.
    pub budget_integral: Vec<Option<f64>>,
    pub steps_taken: usize,
    /// Why the path stopped early, if it did.
    pub failure: Option<NsfError>,
}

impl Trajectory {
    pub fn last_state(&self) -> Option<&SystemState> {
        self.states.last()
    }

    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }
}

/// How a path draws its increments: sums of `ratio` fine increments of
/// length `dt_fine`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncrementSource {
    pub dt_fine: f64,
    pub ratio: usize,
}

impl IncrementSource {
    pub fn direct(dt: f64) -> Self {
        Self { dt_fine: dt, ratio: 1 }
    }
}

fn budget_kind(f: Formulation, params: &ModelParams) -> BudgetKind {
    match f {
        Formulation::Galerkin => BudgetKind::Regularized {
            delta: params.delta,
            epsilon: params.epsilon,
        },
        _ => BudgetKind::Exact,
    }
}

/// Simulate one path with its own noise stream `(seed, path)`.
pub fn run_path(
    initial: &SystemState,
    scheme: &SchemeSpec,
    basis: &NoiseBasis,
    params: &ModelParams,
    seed: u64,
    path: u32,
    save_every: usize,
) -> Trajectory {
    run_path_with(initial, scheme, basis, params, seed, path, save_every, IncrementSource::direct(scheme.dt))
}

/// [`run_path`] with an explicit increment source.
#[allow(clippy::too_many_arguments)]
pub fn run_path_with(
    initial: &SystemState,
    scheme: &SchemeSpec,
    basis: &NoiseBasis,
    params: &ModelParams,
    seed: u64,
    path: u32,
    save_every: usize,
    source: IncrementSource,
) -> Trajectory {
    let mut traj = Trajectory {
        seed,
        path,
        scheme: *scheme,
        params: *params,
        states: Vec::new(),
        records: Vec::new(),
        biharmonic_work: Vec::new(),
        budget_integral: Vec::new(),
        steps_taken: 0,
        failure: None,
    };
    if let Err(e) = scheme.validate().and_then(|_| params.validate()) {
        traj.failure = Some(e);
        return traj;
    }
    let save_every = save_every.max(1);
    let kind = budget_kind(scheme.formulation, params);
    let e0 = total_energy(initial);
    let eps = params.epsilon;
    let mut margin = 0.0_f64;
    let mut work = 0.0;
    let mut budget_sum = Some(0.0);
    let save = |traj: &mut Trajectory, s: &SystemState, margin: f64, work: f64, budget: Option<f64>| -> Result<()> {
        let (entropy_phys, entropy_math) = entropies(s, params.fine_factor);
        let (gu, gp) = gradient_norms(s);
        traj.records.push(DiagnosticRecord {
            t: s.t,
            energy: total_energy(s),
            entropy_phys,
            entropy_math,
            dissipation_budget: dissipation_budget(s, kind, params.fine_factor)?,
            admissibility_margin: margin,
            relative_energy: None,
            grad_u_norm: gu,
            grad_psi_norm: gp,
        });
        traj.states.push(s.clone());
        traj.biharmonic_work.push(work);
        traj.budget_integral.push(budget);
        Ok(())
    };
    if let Err(e) = save(&mut traj, initial, margin, work, budget_sum) {
        traj.failure = Some(e);
        return traj;
    }
    let mut stream = NoiseStream::new(basis, seed, path);
    let mut x = initial.clone();
    for n in 0..scheme.steps {
        let mut inc = stream.sample_coarse(source.dt_fine, source.ratio);
        inc.dt = scheme.dt;
        let bih = if eps > 0.0 { eps * scheme.dt * biharmonic_dissipation(&x) } else { 0.0 };
        let (next, report) = match step_with_report(&x, scheme, basis, params, &inc) {
            Ok(r) => r,
            Err(e) => {
                traj.failure = Some(match e {
                    NsfError::BlowUp { .. } => NsfError::BlowUp { step: n + 1 },
                    other => other,
                });
                break;
            }
        };
        work += bih;
        budget_sum = budget_sum.zip(report.budget).map(|(s, b)| s + scheme.dt * b);
        x = next;
        traj.steps_taken = n + 1;
        margin = margin.min(energy_slack(e0, eps, x.t, total_energy(&x), work));
        if (n + 1) % save_every == 0 || n + 1 == scheme.steps {
            if let Err(e) = save(&mut traj, &x, margin, work, budget_sum) {
                traj.failure = Some(e);
                break;
            }
        }
    }
    traj
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub steps: usize,
    /// Root mean square over paths of `‖x_A(T) − x_B(T)‖_{L²}`.
    pub difference: f64,
    pub per_path: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of log(difference) against log(dt); absent when
    /// some difference vanishes.
    pub order: Option<f64>,
    /// Differences strictly decrease with dt.
    pub monotone: bool,
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_order(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() || y.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Some(sxy / sxx)
}

fn to_variables(state: &SystemState, f: Formulation, ff: usize) -> Result<SystemState> {
    if state.vars == f.variables() {
        Ok(state.clone())
    } else {
        psi_theta_convert(state, ff)
    }
}

/// Run two schemes on identical Brownian paths for every `dt` in `dt_list`
/// over the horizon of `scheme_a`, and tabulate their terminal distance.
///
/// Coarse increments are sums of increments on the finest step, so all runs
/// of one path see the same Brownian motion. A scheme in other variables
/// starts from the converted initial state and is converted back at the end.
#[allow(clippy::too_many_arguments)]
pub fn couple_paths(
    initial: &SystemState,
    scheme_a: &SchemeSpec,
    scheme_b: &SchemeSpec,
    basis: &NoiseBasis,
    params: &ModelParams,
    seed: u64,
    dt_list: &[f64],
    paths: u32,
) -> Result<ConvergenceTable> {
    if dt_list.is_empty() || paths == 0 {
        return Err(NsfError::InvalidParameter("need at least one dt and one path".into()));
    }
    if dt_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(NsfError::InvalidParameter("dt_list must be strictly decreasing".into()));
    }
    let dt_fine = *dt_list.last().expect("nonempty");
    let horizon = scheme_a.final_time();
    let mut rows = Vec::with_capacity(dt_list.len());
    for &dt in dt_list {
        let ratio = (dt / dt_fine).round();
        if ratio < 1.0 || (ratio * dt_fine - dt).abs() > 1e-9 * dt {
            return Err(NsfError::InvalidParameter(format!("dt {dt} is not a multiple of {dt_fine}")));
        }
        let steps = (horizon / dt).round();
        if (steps * dt - horizon).abs() > 1e-9 * horizon.max(dt) {
            return Err(NsfError::InvalidParameter(format!("dt {dt} does not divide the horizon {horizon}")));
        }
        let source = IncrementSource {
            dt_fine,
            ratio: ratio as usize,
        };
        let mut per_path = Vec::with_capacity(paths as usize);
        for p in 0..paths {
            let mut finals = Vec::with_capacity(2);
            for scheme in [scheme_a, scheme_b] {
                let spec = SchemeSpec {
                    dt,
                    steps: steps as usize,
                    ..*scheme
                };
                let start = to_variables(initial, spec.formulation, params.fine_factor)?;
                let traj = run_path_with(&start, &spec, basis, params, seed, p, usize::MAX, source);
                if let Some(e) = traj.failure {
                    return Err(e);
                }
                let last = traj.states.last().ok_or(NsfError::EmptyTrajectory)?;
                finals.push(to_variables(last, scheme_a.formulation, params.fine_factor)?);
            }
            per_path.push(finals[0].distance(&finals[1])?);
        }
        let difference = (per_path.iter().map(|d| d * d).sum::<f64>() / per_path.len() as f64).sqrt();
        rows.push(ConvergenceRow {
            dt,
            steps: steps as usize,
            difference,
            per_path,
        });
    }
    let dts: Vec<f64> = rows.iter().map(|r| r.dt).collect();
    let diffs: Vec<f64> = rows.iter().map(|r| r.difference).collect();
    Ok(ConvergenceTable {
        order: fit_order(&dts, &diffs),
        monotone: diffs.windows(2).all(|w| w[1] < w[0]),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{build_noise_basis, NoiseFamilySpec};
    use crate::spectral::TorusGrid;
    use crate::dynamics::{drift, Variables};
    use std::f64::consts::PI;

    fn grid() -> TorusGrid {
        TorusGrid::new(4, 16).unwrap()
    }

    fn smooth_state(g: TorusGrid) -> SystemState {
        let mut u0 = ScalarField::zeros(g);
        u0.add_sin([0, 1, 0], 0.2).unwrap();
        let mut u1 = ScalarField::zeros(g);
        u1.add_cos([1, 0, 0], 0.1).unwrap();
        let u = VectorField::from_components([u0, ScalarField::zeros(g), u1]).unwrap();
        let mut psi = ScalarField::constant(g, 2.0);
        psi.add_sin([1, 0, 0], 0.3).unwrap();
        SystemState::new(u, psi, Variables::Psi).unwrap()
    }

    fn basis(g: TorusGrid) -> NoiseBasis {
        let f = NoiseFamilySpec::new(&[([1, 0, 0], 0.3)]);
        let gs = NoiseFamilySpec::new(&[([0, 1, 0], 0.2)]);
        build_noise_basis(&f, &gs, g).unwrap()
    }

    #[test]
    fn pairing_is_enforced() {
        assert!(SchemeSpec::new(SchemeKind::HeunStratonovich, Formulation::PsiSystem, 1e-3, 1).is_err());
        assert!(SchemeSpec::new(SchemeKind::EulerMaruyamaIto, Formulation::Stratonovich, 1e-3, 1).is_err());
        assert!(SchemeSpec::new(SchemeKind::ImexIto, Formulation::Galerkin, 1e-3, 1).is_ok());
        assert!(SchemeSpec::new(SchemeKind::ImexIto, Formulation::Galerkin, 0.0, 1).is_err());
    }

    #[test]
    fn stability_guard() {
        let g = grid();
        let b = NoiseBasis::empty(g);
        let s = SchemeSpec::new(SchemeKind::EulerMaruyamaIto, Formulation::PsiSystem, 1e-3, 1).unwrap();
        // 1e-3 · 4π² · 48 ≈ 1.895
        assert!(s.stability_warning(&b, 4).is_none());
        let s = s.with_dt(2e-3);
        assert!(s.stability_warning(&b, 4).is_some());
    }

    #[test]
    fn equilibrium_is_fixed() {
        let g = grid();
        let b = NoiseBasis::empty(g);
        let p = ModelParams::for_grid(g);
        let st = SystemState::new(VectorField::zeros(g), ScalarField::constant(g, 1.5), Variables::Psi).unwrap();
        for (kind, f) in [
            (SchemeKind::EulerMaruyamaIto, Formulation::PsiSystem),
            (SchemeKind::ImexIto, Formulation::PsiSystem),
            (SchemeKind::HeunStratonovich, Formulation::Stratonovich),
        ] {
            let s = SchemeSpec::new(kind, f, 1e-3, 1).unwrap();
            let next = step(&st, &s, &b, &p, &NoiseIncrement::zeros(&b, 1e-3)).unwrap();
            assert!(next.distance(&st).unwrap() < 1e-15, "{kind:?}");
        }
    }

    #[test]
    fn imex_linear_part_is_exact_exponential() {
        let g = grid();
        let b = basis(g);
        let c = b.constants();
        let p = ModelParams::for_grid(g);
        let k = [2, 1, 0];
        let mut psi = ScalarField::constant(g, 3.0);
        psi.add_cos(k, 0.1).unwrap();
        let st = SystemState::new(VectorField::zeros(g), psi, Variables::Psi).unwrap();
        let dt = 1e-3;
        let s = SchemeSpec::new(SchemeKind::ImexIto, Formulation::PsiSystem, dt, 1).unwrap();
        let next = step(&st, &s, &b, &p, &NoiseIncrement::zeros(&b, dt)).unwrap();
        let (nl, _) = nonlinear_drift_with_budget(&st, &b, &p, Formulation::PsiSystem).unwrap();
        let lam = 4.0 * PI * PI * 5.0;
        let factor = (-(1.0 + c.f1 / 2.0 + c.g1 / 2.0) * lam * dt - (c.f2 / 2.0 + c.g2 / 8.0) * dt).exp();
        let expected = (st.scalar.coeff(k) + nl.dscalar.coeff(k) * dt) * factor;
        assert!((next.scalar.coeff(k) - expected).norm() < 1e-15);
    }

    #[test]
    fn noise_free_em_is_explicit_euler() {
        let g = grid();
        let b = NoiseBasis::empty(g);
        let p = ModelParams::for_grid(g);
        let st = smooth_state(g);
        let dt = 1e-4;
        let s = SchemeSpec::new(SchemeKind::EulerMaruyamaIto, Formulation::PsiSystem, dt, 1).unwrap();
        let next = step(&st, &s, &b, &p, &NoiseIncrement::zeros(&b, dt)).unwrap();
        let d = drift(&st, &b, &p, Formulation::PsiSystem).unwrap();
        let mut manual = st.axpy(dt, &d.du, &d.dscalar);
        manual.u = leray_project(&manual.u);
        assert!(next.distance(&manual).unwrap() < 1e-14);
    }

    #[test]
    fn steps_keep_divergence_free() {
        let g = grid();
        let b = basis(g);
        let p = ModelParams::for_grid(g);
        let s = SchemeSpec::new(SchemeKind::EulerMaruyamaIto, Formulation::PsiSystem, 1e-4, 5).unwrap();
        let traj = run_path(&smooth_state(g), &s, &b, &p, 11, 0, 1);
        assert!(traj.completed());
        for st in &traj.states {
            assert!(st.u.max_divergence() <= 1e-12 * st.u.norm_l2().max(1.0));
        }
    }

    #[test]
    fn zero_steps_gives_initial_state() {
        let g = grid();
        let b = basis(g);
        let p = ModelParams::for_grid(g);
        let s = SchemeSpec::new(SchemeKind::ImexIto, Formulation::Galerkin, 1e-4, 0).unwrap();
        let st = smooth_state(g);
        let traj = run_path(&st, &s, &b, &p, 1, 0, 10);
        assert_eq!(traj.states.len(), 1);
        assert_eq!(traj.states[0], st);
        assert_eq!(traj.records[0].admissibility_margin, 0.0);
    }

    #[test]
    fn replay_is_bit_identical() {
        let g = grid();
        let b = basis(g);
        let p = ModelParams::for_grid(g);
        let s = SchemeSpec::new(SchemeKind::ImexIto, Formulation::Galerkin, 1e-4, 6).unwrap();
        let a = run_path(&smooth_state(g), &s, &b, &p, 5, 2, 2);
        let c = run_path(&smooth_state(g), &s, &b, &p, 5, 2, 2);
        assert_eq!(a.states, c.states);
        assert_eq!(a.records, c.records);
    }

    #[test]
    fn positivity_failure_is_captured() {
        let g = grid();
        let b = NoiseBasis::empty(g);
        let p = ModelParams::for_grid(g);
        let st = SystemState::new(VectorField::zeros(g), ScalarField::constant(g, -1.0), Variables::Psi).unwrap();
        let s = SchemeSpec::new(SchemeKind::HeunStratonovich, Formulation::Stratonovich, 1e-4, 3).unwrap();
        let traj = run_path(&st, &s, &b, &p, 0, 0, 1);
        assert!(matches!(traj.failure, Some(NsfError::PositivityViolation { .. })));
    }

    #[test]
    fn identical_schemes_couple_to_zero() {
        let g = grid();
        let b = basis(g);
        let p = ModelParams::for_grid(g);
        let s = SchemeSpec::new(SchemeKind::EulerMaruyamaIto, Formulation::PsiSystem, 4e-4, 2).unwrap();
        let t = couple_paths(&smooth_state(g), &s, &s, &b, &p, 3, &[4e-4, 2e-4], 1).unwrap();
        assert!(t.rows.iter().all(|r| r.difference == 0.0));
        assert!(t.order.is_none());
    }

    #[test]
    fn order_fit_recovers_slope() {
        let x = [4.0, 2.0, 1.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(0.7)).collect();
        assert!((fit_order(&x, &y).unwrap() - 0.7).abs() < 1e-12);
    }
}
