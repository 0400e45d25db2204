//! System state, model parameters and drift assembly for every formulation.

use serde::{Deserialize, Serialize};

use crate::error::{NsfError, Result};
use crate::noise::{NoiseBasis, NoiseConstants};
use crate::spectral::{
    divergence, fine_resolution, fourier_project, gradient, inner_product, laplacian, biharmonic,
    leray_project, pointwise, sym_gradient, tensor_divergence, transform::grid_point, ScalarField,
    TensorField, TorusGrid, VectorField, Wavevector,
};

/// Which scalar the state carries next to the velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variables {
    /// ψ = √(2ϑ).
    Psi,
    /// Temperature ϑ.
    Theta,
}

/// Velocity plus scalar at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub u: VectorField,
    pub scalar: ScalarField,
    pub vars: Variables,
    pub t: f64,
}

impl SystemState {
    /// `u` must be divergence-free (tagged, or passing the discrete test).
    pub fn new(mut u: VectorField, scalar: ScalarField, vars: Variables) -> Result<Self> {
        crate::spectral::grid::check_same(&u.grid(), &scalar.grid())?;
        if !u.is_divergence_free() {
            u.mark_divergence_free()?;
        }
        Ok(Self { u, scalar, vars, t: 0.0 })
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn grid(&self) -> TorusGrid {
        self.scalar.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.scalar.is_finite()
    }

    /// L² distance `(‖u−v‖² + ‖s−r‖²)^½` between states in the same variables.
    pub fn distance(&self, other: &SystemState) -> Result<f64> {
        if self.vars != other.vars {
            return Err(NsfError::InvalidOperand("states use different variables".into()));
        }
        crate::spectral::grid::check_same(&self.grid(), &other.grid())?;
        Ok(((&self.u - &other.u).norm_sqr() + (&self.scalar - &other.scalar).norm_sqr()).sqrt())
    }

    /// `(‖u‖² + ‖s‖²)^½`.
    pub fn norm_l2(&self) -> f64 {
        (self.u.norm_sqr() + self.scalar.norm_sqr()).sqrt()
    }

    /// `x + a·y`, keeping the tag of `u` and the time of `self`.
    pub fn axpy(&self, a: f64, du: &VectorField, dscalar: &ScalarField) -> Self {
        let mut out = self.clone();
        out.u.axpy(a, du);
        out.scalar.axpy(a, dscalar);
        out
    }
}

/// Regularization and discretization parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// h_δ parameter, in (0, 1).
    pub delta: f64,
    /// Biharmonic regularization, in [0, 1).
    pub epsilon: f64,
    /// Galerkin cutoff applied to drifts.
    pub cutoff: usize,
    /// Radius of the Lipschitz truncation, if any.
    pub truncation_radius: Option<f64>,
    /// Refinement of the collocation grid for non-polynomial terms.
    pub fine_factor: usize,
}

impl ModelParams {
    pub fn new(delta: f64, epsilon: f64, cutoff: usize) -> Result<Self> {
        let p = Self {
            delta,
            epsilon,
            cutoff,
            truncation_radius: None,
            fine_factor: 2,
        };
        p.validate()?;
        Ok(p)
    }

    /// δ = 10⁻², ε = 0 and the grid's own cutoff.
    pub fn for_grid(grid: TorusGrid) -> Self {
        Self {
            delta: 1e-2,
            epsilon: 0.0,
            cutoff: grid.cutoff(),
            truncation_radius: None,
            fine_factor: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(NsfError::InvalidParameter(format!("delta = {} must lie in (0, 1)", self.delta)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon < 1.0) {
            return Err(NsfError::InvalidParameter(format!("epsilon = {} must lie in [0, 1)", self.epsilon)));
        }
        if self.cutoff < 1 {
            return Err(NsfError::InvalidParameter("cutoff must be >= 1".into()));
        }
        if let Some(r) = self.truncation_radius {
            if !(r > 0.0) {
                return Err(NsfError::InvalidParameter(format!("truncation radius {r} must be positive")));
            }
        }
        if self.fine_factor < 1 {
            return Err(NsfError::InvalidParameter("fine_factor must be >= 1".into()));
        }
        Ok(())
    }
}

/// Bounded decreasing C¹ regularization of 1/r: `1/r` for `r ≥ δ`, the
/// tangent line `(2δ − r)/δ²` below.
pub fn h_delta(r: f64, delta: f64) -> f64 {
    if r >= delta {
        1.0 / r
    } else {
        (2.0 * delta - r) / (delta * delta)
    }
}

/// Scaling factor `R / max(R, ‖x‖)` of the Lipschitz truncation.
pub fn truncation_factor(norm: f64, radius: f64) -> f64 {
    radius / radius.max(norm)
}

/// Elements that can be scaled by a real factor.
pub trait Scalable: Sized {
    fn scale_by(&self, a: f64) -> Self;
}

impl Scalable for f64 {
    fn scale_by(&self, a: f64) -> Self {
        self * a
    }
}

impl Scalable for Vec<f64> {
    fn scale_by(&self, a: f64) -> Self {
        self.iter().map(|x| x * a).collect()
    }
}

impl Scalable for ScalarField {
    fn scale_by(&self, a: f64) -> Self {
        self.scaled(a)
    }
}

impl Scalable for VectorField {
    fn scale_by(&self, a: f64) -> Self {
        self.scaled(a)
    }
}

impl Scalable for SystemState {
    fn scale_by(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.u *= a;
        out.scalar *= a;
        out
    }
}

/// `R x / max(R, ‖x‖)`.
pub fn truncate<T: Scalable>(x: &T, radius: f64, norm: impl Fn(&T) -> f64) -> T {
    x.scale_by(truncation_factor(norm(x), radius))
}

/// Which equations a drift or scheme realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// Itô form in (u, ψ) with the exact 1/ψ nonlinearity.
    PsiSystem,
    /// Itô form in (u, ϑ).
    ThetaSystem,
    /// Regularized Galerkin scheme in (u, ψ) with h_δ and ε.
    Galerkin,
    /// Stratonovich form in (u, ψ), no correction drifts.
    Stratonovich,
}

impl Formulation {
    pub fn variables(self) -> Variables {
        match self {
            Formulation::ThetaSystem => Variables::Theta,
            _ => Variables::Psi,
        }
    }

    pub fn is_ito(self) -> bool {
        !matches!(self, Formulation::Stratonovich)
    }
}

/// Drift of the velocity and of the scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct Drift {
    pub du: VectorField,
    pub dscalar: ScalarField,
}

impl Drift {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            du: VectorField::zeros(grid),
            dscalar: ScalarField::zeros(grid),
        }
    }

    pub fn axpy(&mut self, a: f64, other: &Drift) {
        self.du.axpy(a, &other.du);
        self.dscalar.axpy(a, &other.dscalar);
    }
}

/// Constant-coefficient linear part of a drift, diagonal in Fourier space:
/// `u: a_u Δ − εΔ²`, `scalar: a_s Δ − εΔ² − c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearRates {
    pub u_diffusion: f64,
    pub scalar_diffusion: f64,
    pub hyperviscosity: f64,
    pub scalar_damping: f64,
}

impl LinearRates {
    pub fn new(formulation: Formulation, c: NoiseConstants, params: &ModelParams) -> Self {
        let ito_u = 0.5 + c.f1 / 4.0;
        let ito_s = 1.0 + c.f1 / 2.0 + c.g1 / 2.0;
        match formulation {
            Formulation::PsiSystem => Self {
                u_diffusion: ito_u,
                scalar_diffusion: ito_s,
                hyperviscosity: 0.0,
                scalar_damping: c.f2 / 2.0 + c.g2 / 8.0,
            },
            Formulation::Galerkin => Self {
                u_diffusion: ito_u,
                scalar_diffusion: ito_s,
                hyperviscosity: params.epsilon,
                scalar_damping: c.f2 / 2.0 + c.g2 / 8.0,
            },
            Formulation::ThetaSystem => Self {
                u_diffusion: ito_u,
                scalar_diffusion: ito_s,
                hyperviscosity: 0.0,
                scalar_damping: c.f2,
            },
            Formulation::Stratonovich => Self {
                u_diffusion: 0.5,
                scalar_diffusion: 1.0,
                hyperviscosity: 0.0,
                scalar_damping: 0.0,
            },
        }
    }

    /// Growth rate of velocity mode `k`.
    pub fn u_rate(&self, k: Wavevector) -> f64 {
        let l = TorusGrid::stokes_eigenvalue(k);
        -self.u_diffusion * l - self.hyperviscosity * l * l
    }

    /// Growth rate of scalar mode `k`.
    pub fn scalar_rate(&self, k: Wavevector) -> f64 {
        let l = TorusGrid::stokes_eigenvalue(k);
        -self.scalar_diffusion * l - self.hyperviscosity * l * l - self.scalar_damping
    }

    pub fn apply(&self, state: &SystemState) -> Drift {
        let mut du = laplacian(&state.u);
        du *= self.u_diffusion;
        let mut ds = laplacian(&state.scalar);
        ds *= self.scalar_diffusion;
        if self.hyperviscosity != 0.0 {
            du.axpy(-self.hyperviscosity, &biharmonic(&state.u));
            ds.axpy(-self.hyperviscosity, &biharmonic(&state.scalar));
        }
        ds.axpy(-self.scalar_damping, &state.scalar);
        Drift { du, dscalar: ds }
    }
}

fn check_vars(state: &SystemState, formulation: Formulation) -> Result<()> {
    if state.vars != formulation.variables() {
        return Err(NsfError::InvalidOperand(format!(
            "{formulation:?} drift needs {:?} variables, state carries {:?}",
            formulation.variables(),
            state.vars
        )));
    }
    Ok(())
}

const SYM_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// `|S|²` for a symmetric matrix given by its six unique entries.
fn sym_norm_sqr(s: &[f64]) -> f64 {
    s[0] * s[0] + s[3] * s[3] + s[5] * s[5] + 2.0 * (s[1] * s[1] + s[2] * s[2] + s[4] * s[4])
}

/// `(−Π∇·(u⊗u), −∇·(u s))`, products dealiased.
fn transport_terms(u: &VectorField, s: &ScalarField) -> Result<(VectorField, ScalarField)> {
    let grid = s.grid();
    let [u0, u1, u2] = u.components();
    let outs = pointwise(grid, &[u0, u1, u2, s], grid.dealias_resolution(), 9, |_, x, y| {
        for (a, &(i, j)) in SYM_PAIRS.iter().enumerate() {
            y[a] = x[i] * x[j];
        }
        for d in 0..3 {
            y[6 + d] = x[d] * x[3];
        }
    })?;
    let mut uu = TensorField::zeros(grid);
    for (a, &(i, j)) in SYM_PAIRS.iter().enumerate() {
        *uu.get_mut(i, j) = outs[a].clone();
        if i != j {
            *uu.get_mut(j, i) = outs[a].clone();
        }
    }
    let mut conv = leray_project(&tensor_divergence(&uu));
    conv *= -1.0;
    let flux = VectorField::from_components([outs[6].clone(), outs[7].clone(), outs[8].clone()])?;
    let mut adv = divergence(&flux);
    adv *= -1.0;
    Ok((conv, adv))
}

/// `|∇s|²` and `|∇_sym u|²` as exact fields of cutoff 2m, when the fine grid
/// of resolution `n` resolves them; both brackets are quadratic, so forming
/// them first leaves only a few fields for the fine transform.
fn gradient_squares(gs: &VectorField, sym: &TensorField, n: usize) -> Result<Option<[ScalarField; 2]>> {
    let wide_cutoff = 2 * gs.grid().cutoff();
    if n <= 2 * wide_cutoff {
        return Ok(None);
    }
    let wide = TorusGrid::new(wide_cutoff, 2 * wide_cutoff + 2)?;
    let mut parts: Vec<&ScalarField> = gs.components().iter().collect();
    parts.extend(SYM_PAIRS.iter().map(|&(i, j)| sym.get(i, j)));
    let mut out = pointwise(wide, &parts, wide.resolution(), 2, |_, x, y| {
        y[0] = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        y[1] = sym_norm_sqr(&x[3..9]);
    })?;
    let s2 = out.pop().expect("two outputs");
    let g2 = out.pop().expect("two outputs");
    Ok(Some([g2, s2]))
}

/// Which realization of the reciprocal enters the gradient nonlinearity.
#[derive(Debug, Clone, Copy)]
enum Reciprocal {
    /// 1/ψ; non-positive values are an error.
    Exact,
    /// h_δ(ψ), with `+ε` added inside the bracket.
    Regularized { delta: f64, epsilon: f64 },
    /// Smooth window times 1/ψ.
    Window { lower: f64, upper: f64 },
}

/// `rec(ψ)(|∇ψ|² + |∇_sym u|² [+ ε])` on the fine grid.
fn gradient_nonlinearity(
    u: &VectorField,
    psi: &ScalarField,
    rec: Reciprocal,
    fine_factor: usize,
) -> Result<ScalarField> {
    let grid = psi.grid();
    let gp = gradient(psi);
    let s = sym_gradient(u);
    let n = fine_resolution(grid, fine_factor);
    let squares = gradient_squares(&gp, &s, n)?;
    let precomputed = squares.is_some();
    let mut inputs: Vec<&ScalarField> = vec![psi];
    match &squares {
        Some([g2, s2]) => inputs.extend([g2, s2]),
        None => {
            inputs.extend(gp.components().iter());
            inputs.extend(SYM_PAIRS.iter().map(|&(i, j)| s.get(i, j)));
        }
    }
    let mut bad: Option<(f64, usize)> = None;
    let mut out = pointwise(grid, &inputs, n, 1, |p, x, y| {
        let r = x[0];
        let q = if precomputed {
            x[1] + x[2]
        } else {
            x[1] * x[1] + x[2] * x[2] + x[3] * x[3] + sym_norm_sqr(&x[4..10])
        };
        y[0] = match rec {
            Reciprocal::Exact => {
                if r <= 0.0 {
                    if bad.is_none_or(|(m, _)| r < m) {
                        bad = Some((r, p));
                    }
                    0.0
                } else {
                    q / r
                }
            }
            Reciprocal::Regularized { delta, epsilon } => h_delta(r, delta) * (q + epsilon),
            Reciprocal::Window { lower, upper } => window_reciprocal(r, lower, upper) * q,
        };
    })?;
    if let Some((min, p)) = bad {
        return Err(NsfError::PositivityViolation {
            min,
            location: grid_point(p, n),
        });
    }
    Ok(out.pop().expect("one output"))
}

/// `(1+F₁/2)|∇_sym u|² − F₁|∇ϑ|²/(4ϑ)` on the fine grid.
fn theta_source(u: &VectorField, theta: &ScalarField, f1: f64, fine_factor: usize) -> Result<ScalarField> {
    let grid = theta.grid();
    let gt = gradient(theta);
    let s = sym_gradient(u);
    let n = fine_resolution(grid, fine_factor);
    let squares = gradient_squares(&gt, &s, n)?;
    let mut inputs: Vec<&ScalarField> = vec![theta];
    match &squares {
        Some([g2, s2]) => inputs.extend([g2, s2]),
        None => {
            inputs.extend(gt.components().iter());
            inputs.extend(SYM_PAIRS.iter().map(|&(i, j)| s.get(i, j)));
        }
    }
    let precomputed = squares.is_some();
    let mut bad: Option<(f64, usize)> = None;
    let mut out = pointwise(grid, &inputs, n, 1, |p, x, y| {
        let th = x[0];
        let (g2, s2) = if precomputed {
            (x[1], x[2])
        } else {
            (x[1] * x[1] + x[2] * x[2] + x[3] * x[3], sym_norm_sqr(&x[4..10]))
        };
        let heating = (1.0 + f1 / 2.0) * s2;
        if th <= 0.0 {
            if bad.is_none_or(|(m, _)| th < m) {
                bad = Some((th, p));
            }
            y[0] = 0.0;
            return;
        }
        y[0] = heating - f1 * g2 / (4.0 * th);
    })?;
    if let Some((min, p)) = bad {
        return Err(NsfError::PositivityViolation {
            min,
            location: grid_point(p, n),
        });
    }
    Ok(out.pop().expect("one output"))
}

/// The drift minus its [`LinearRates`] part.
pub fn nonlinear_drift(
    state: &SystemState,
    basis: &NoiseBasis,
    params: &ModelParams,
    formulation: Formulation,
) -> Result<Drift> {
    nonlinear_drift_with_budget(state, basis, params, formulation).map(|(d, _)| d)
}

/// [`nonlinear_drift`] together with the spatial integral of the gradient
/// nonlinearity (absent for the temperature formulation).
pub fn nonlinear_drift_with_budget(
    state: &SystemState,
    basis: &NoiseBasis,
    params: &ModelParams,
    formulation: Formulation,
) -> Result<(Drift, Option<f64>)> {
    check_vars(state, formulation)?;
    let (conv, adv) = transport_terms(&state.u, &state.scalar)?;
    let mut dscalar = adv;
    let mut budget = None;
    match formulation {
        Formulation::PsiSystem | Formulation::Stratonovich => {
            let g = gradient_nonlinearity(&state.u, &state.scalar, Reciprocal::Exact, params.fine_factor)?;
            budget = Some(g.mean());
            dscalar += &g;
        }
        Formulation::Galerkin => {
            let rec = Reciprocal::Regularized {
                delta: params.delta,
                epsilon: params.epsilon,
            };
            let g = gradient_nonlinearity(&state.u, &state.scalar, rec, params.fine_factor)?;
            budget = Some(g.mean());
            dscalar += &g;
        }
        Formulation::ThetaSystem => {
            dscalar += &theta_source(&state.u, &state.scalar, basis.constants().f1, params.fine_factor)?;
        }
    }
    let mut du = conv;
    if formulation == Formulation::Galerkin && params.cutoff < state.grid().cutoff() {
        du = leray_project(&fourier_project(&du, params.cutoff as i64)?);
        dscalar = fourier_project(&dscalar, params.cutoff as i64)?;
    }
    Ok((Drift { du, dscalar }, budget))
}

/// Full drift of `formulation` at `state`.
pub fn drift(state: &SystemState, basis: &NoiseBasis, params: &ModelParams, formulation: Formulation) -> Result<Drift> {
    let mut d = nonlinear_drift(state, basis, params, formulation)?;
    let lin = LinearRates::new(formulation, basis.constants(), params).apply(state);
    d.axpy(1.0, &lin);
    if formulation == Formulation::Galerkin && params.cutoff < state.grid().cutoff() {
        d.du = fourier_project(&d.du, params.cutoff as i64)?;
        d.dscalar = fourier_project(&d.dscalar, params.cutoff as i64)?;
    }
    Ok(d)
}

/// Itô systems with the exact nonlinearities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItoSystem {
    Psi,
    Theta,
}

pub fn drift_ito(state: &SystemState, basis: &NoiseBasis, params: &ModelParams, system: ItoSystem) -> Result<Drift> {
    let f = match system {
        ItoSystem::Psi => Formulation::PsiSystem,
        ItoSystem::Theta => Formulation::ThetaSystem,
    };
    drift(state, basis, params, f)
}

pub fn drift_galerkin(state: &SystemState, basis: &NoiseBasis, params: &ModelParams) -> Result<Drift> {
    drift(state, basis, params, Formulation::Galerkin)
}

pub fn drift_stratonovich(state: &SystemState, basis: &NoiseBasis, params: &ModelParams) -> Result<Drift> {
    drift(state, basis, params, Formulation::Stratonovich)
}

/// C^∞ step: 0 for t ≤ 0, 1 for t ≥ 1.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// `1/r` times a smooth bump equal to 1 on `[lower, upper]` and vanishing
/// outside `[lower/2, 2·upper]`.
pub fn window_reciprocal(r: f64, lower: f64, upper: f64) -> f64 {
    if r <= 0.5 * lower || r >= 2.0 * upper {
        return 0.0;
    }
    let bump = if r < lower {
        smooth_step((r - 0.5 * lower) / (0.5 * lower))
    } else if r > upper {
        smooth_step((2.0 * upper - r) / upper)
    } else {
        1.0
    };
    bump / r
}

/// `N₁ = −Π∇·(U⊗U)` and `N₂ = h(Ψ)(|∇Ψ|² + |∇_sym U|²) − ∇·(UΨ)` with the
/// windowed reciprocal `h`; defined for every state.
pub fn nonlinearity_n(
    state: &SystemState,
    lower: f64,
    upper: f64,
    fine_factor: usize,
) -> Result<(VectorField, ScalarField)> {
    if !(lower > 0.0 && upper > lower) {
        return Err(NsfError::InvalidParameter(format!(
            "window bounds must satisfy 0 < lower < upper, got ({lower}, {upper})"
        )));
    }
    let (n1, mut n2) = transport_terms(&state.u, &state.scalar)?;
    n2 += &gradient_nonlinearity(
        &state.u,
        &state.scalar,
        Reciprocal::Window { lower, upper },
        fine_factor,
    )?;
    Ok((n1, n2))
}

/// `‖(u, ψ)‖_{H²}` with weight `(1 + 4π²|k|²)²` per mode.
pub fn h2_norm(state: &SystemState) -> f64 {
    let g = state.grid();
    let weight = |f: &ScalarField| -> f64 {
        f.coeffs()
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                let w = 1.0 + TorusGrid::stokes_eigenvalue(g.wavevector(idx));
                w * w * c.norm_sqr()
            })
            .sum()
    };
    let s: f64 = state.u.components().iter().map(weight).sum::<f64>() + weight(&state.scalar);
    s.sqrt()
}

/// [`nonlinearity_n`] evaluated at the H²-truncation of `state` to radius `radius`.
pub fn truncated_nonlinearity(
    state: &SystemState,
    radius: f64,
    lower: f64,
    upper: f64,
    fine_factor: usize,
) -> Result<(VectorField, ScalarField)> {
    if !(radius > 0.0) {
        return Err(NsfError::InvalidParameter(format!("truncation radius must be positive, got {radius}")));
    }
    nonlinearity_n(&truncate(state, radius, h2_norm), lower, upper, fine_factor)
}

/// `(1/ψ)(|∇ψ|² + |∇_sym u|²)`, the exact gradient nonlinearity.
pub fn exact_gradient_term(u: &VectorField, psi: &ScalarField, fine_factor: usize) -> Result<ScalarField> {
    gradient_nonlinearity(u, psi, Reciprocal::Exact, fine_factor)
}

/// `h_δ(ψ)(|∇ψ|² + |∇_sym u|² + ε)`, the regularized gradient nonlinearity.
pub fn regularized_gradient_term(
    u: &VectorField,
    psi: &ScalarField,
    delta: f64,
    epsilon: f64,
    fine_factor: usize,
) -> Result<ScalarField> {
    gradient_nonlinearity(u, psi, Reciprocal::Regularized { delta, epsilon }, fine_factor)
}

/// Convert between ψ and ϑ = ψ²/2 by collocation on the fine grid.
pub fn psi_theta_convert(state: &SystemState, fine_factor: usize) -> Result<SystemState> {
    let grid = state.grid();
    let n = fine_resolution(grid, fine_factor);
    let (scalar, vars) = match state.vars {
        Variables::Psi => {
            let mut out = pointwise(grid, &[&state.scalar], n, 1, |_, x, y| y[0] = 0.5 * x[0] * x[0])?;
            (out.pop().expect("one output"), Variables::Theta)
        }
        Variables::Theta => {
            let mut bad: Option<(f64, usize)> = None;
            let mut out = pointwise(grid, &[&state.scalar], n, 1, |p, x, y| {
                if x[0] < 0.0 && bad.is_none_or(|(m, _)| x[0] < m) {
                    bad = Some((x[0], p));
                }
                y[0] = (2.0 * x[0].max(0.0)).sqrt();
            })?;
            if let Some((min, p)) = bad {
                return Err(NsfError::PositivityViolation {
                    min,
                    location: grid_point(p, n),
                });
            }
            (out.pop().expect("one output"), Variables::Psi)
        }
    };
    Ok(SystemState {
        u: state.u.clone(),
        scalar,
        vars,
        t: state.t,
    })
}

/// `⟨u, du⟩ + ⟨s, ds⟩`.
pub fn energy_rate(state: &SystemState, d: &Drift) -> Result<f64> {
    Ok(inner_product(&state.u, &d.du)? + inner_product(&state.scalar, &d.dscalar)?)
}
