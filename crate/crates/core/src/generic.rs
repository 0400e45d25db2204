//! Discrete GENERIC operators for the temperature form of the system and
//! residual checks of their structural identities.
//!
//! States carry `z = (u, ϑ)`, covectors `w = (v, θ)`. The velocity part of
//! every covector is Leray-projected on entry, so all operators act on the
//! divergence-free subspace. Products are dealiased and truncated to the
//! shared grid after each multiplication; identities are exact whenever the
//! inputs leave enough headroom below the cutoff.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{drift, Formulation, ModelParams, SystemState, Variables};
use crate::noise::NoiseBasis;
use crate::spectral::{
    divergence, evaluate_nonlinear, fourier_project, gradient, inner_product, leray_project, min_on_grid, multiply,
    partial, sym_gradient, ScalarField, TensorField, TorusGrid, VectorField,
};
use crate::spectral::grid::check_same;
use crate::{NsfError, Result};

/// `z = (u, ϑ)` with divergence-free `u` and `ϑ > 0` on the collocation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    u: VectorField,
    theta: ScalarField,
}

impl StateVector {
    pub fn new(u: VectorField, theta: ScalarField) -> Result<Self> {
        check_same(&u.grid(), &theta.grid())?;
        let scale = u.norm_l2().max(1.0);
        if u.max_divergence() > 1e-10 * scale {
            return Err(NsfError::InvalidOperand("velocity is not divergence-free".into()));
        }
        let (min, location) = min_on_grid(&theta, 2 * theta.grid().resolution());
        if min <= 0.0 {
            return Err(NsfError::PositivityViolation { min, location });
        }
        Ok(Self { u, theta })
    }

    pub fn grid(&self) -> TorusGrid {
        self.theta.grid()
    }

    pub fn u(&self) -> &VectorField {
        &self.u
    }

    pub fn theta(&self) -> &ScalarField {
        &self.theta
    }

    pub fn norm_l2(&self) -> f64 {
        (self.u.norm_sqr() + self.theta.norm_sqr()).sqrt()
    }

    /// As a [`SystemState`] in temperature variables.
    pub fn to_system_state(&self) -> Result<SystemState> {
        SystemState::new(self.u.clone(), self.theta.clone(), Variables::Theta)
    }
}

/// `w = (v, θ)`; `v` may have a gradient part.
#[derive(Debug, Clone, PartialEq)]
pub struct CoVector {
    pub v: VectorField,
    pub theta: ScalarField,
}

impl CoVector {
    pub fn new(v: VectorField, theta: ScalarField) -> Result<Self> {
        check_same(&v.grid(), &theta.grid())?;
        Ok(Self { v, theta })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            v: VectorField::zeros(grid),
            theta: ScalarField::zeros(grid),
        }
    }

    /// Random covector with modes up to `cutoff`.
    pub fn random<R: Rng + ?Sized>(grid: TorusGrid, cutoff: usize, amplitude: f64, rng: &mut R) -> Self {
        Self {
            v: VectorField::random(grid, cutoff, amplitude, rng),
            theta: ScalarField::random(grid, cutoff, amplitude, rng),
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.theta.grid()
    }

    /// L² pairing of both components.
    pub fn dot(&self, other: &CoVector) -> Result<f64> {
        Ok(inner_product(&self.v, &other.v)? + inner_product(&self.theta, &other.theta)?)
    }

    pub fn norm_l2(&self) -> f64 {
        (self.v.norm_sqr() + self.theta.norm_sqr()).sqrt()
    }

    fn sub(&self, other: &CoVector) -> CoVector {
        CoVector {
            v: &self.v - &other.v,
            theta: &self.theta - &other.theta,
        }
    }

    fn add(&self, other: &CoVector) -> CoVector {
        CoVector {
            v: &self.v + &other.v,
            theta: &self.theta + &other.theta,
        }
    }
}

/// Argument of `B`: a matrix field and a vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseArgument {
    pub matrix: TensorField,
    pub vector: VectorField,
}

impl NoiseArgument {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            matrix: TensorField::zeros(grid),
            vector: VectorField::zeros(grid),
        }
    }

    pub fn random<R: Rng + ?Sized>(grid: TorusGrid, cutoff: usize, amplitude: f64, rng: &mut R) -> Self {
        Self {
            matrix: TensorField::random(grid, cutoff, amplitude, rng),
            vector: VectorField::random(grid, cutoff, amplitude, rng),
        }
    }

    pub fn dot(&self, other: &NoiseArgument) -> Result<f64> {
        Ok(inner_product(&self.matrix, &other.matrix)? + inner_product(&self.vector, &other.vector)?)
    }
}

fn check_grids(z: &StateVector, w: TorusGrid) -> Result<()> {
    check_same(&z.grid(), &w)?;
    Ok(())
}

fn mul(a: &ScalarField, b: &ScalarField) -> ScalarField {
    multiply(a, b, true).expect("operands share a grid")
}

fn scale_vector(a: &ScalarField, v: &VectorField) -> VectorField {
    let [x, y, z] = v.components();
    VectorField::from_components([mul(a, x), mul(a, y), mul(a, z)]).expect("same grid")
}

fn map_tensor(t: &TensorField, mut f: impl FnMut(usize, usize, &ScalarField) -> ScalarField) -> TensorField {
    let comps = std::array::from_fn(|i| std::array::from_fn(|j| f(i, j, t.get(i, j))));
    TensorField::from_components(comps).expect("same grid")
}

fn scale_tensor(a: &ScalarField, t: &TensorField) -> TensorField {
    map_tensor(t, |_, _, c| mul(a, c))
}

fn contract(a: &TensorField, b: &TensorField) -> ScalarField {
    let mut out = ScalarField::zeros(a.grid());
    for i in 0..3 {
        for j in 0..3 {
            out += &mul(a.get(i, j), b.get(i, j));
        }
    }
    out
}

fn tensor_div(t: &TensorField) -> VectorField {
    crate::spectral::tensor_divergence(t)
}

fn sqrt_theta(z: &StateVector, fine_factor: usize) -> Result<ScalarField> {
    evaluate_nonlinear(&z.theta, f64::sqrt, fine_factor)
}

/// `A = θ ∇_sym u − ∇_sym v`, the symmetric matrix shared by `M`, `B` and `Bᵀ`.
fn dissipative_matrix(z: &StateVector, v: &VectorField, theta: &ScalarField) -> TensorField {
    let s = sym_gradient(&z.u);
    let sv = sym_gradient(v);
    map_tensor(&s, |i, j, c| &mul(theta, c) - sv.get(i, j))
}

/// Antisymmetric operator `L` applied to `w`.
pub fn apply_l(z: &StateVector, w: &CoVector) -> Result<CoVector> {
    check_grids(z, w.grid())?;
    let v = leray_project(&w.v);
    let u = &z.u;
    // ∂_j(v_j u_i) + u_j ∂_i v_j
    let mut conv: [ScalarField; 3] = std::array::from_fn(|_| ScalarField::zeros(z.grid()));
    for (i, ci) in conv.iter_mut().enumerate() {
        for j in 0..3 {
            *ci += &partial(&mul(v.component(j), u.component(i)), j);
            *ci += &mul(u.component(j), &partial(v.component(j), i));
        }
    }
    let mut row1 = VectorField::from_components(conv)?;
    row1 += &scale_vector(&z.theta, &gradient(&w.theta));
    let row1 = leray_project(&row1).scaled(-1.0);
    let row2 = -&divergence(&scale_vector(&z.theta, &v));
    CoVector::new(row1, row2)
}

/// Symmetric nonnegative operator `M` applied to `w`.
pub fn apply_m(z: &StateVector, w: &CoVector) -> Result<CoVector> {
    check_grids(z, w.grid())?;
    let v = leray_project(&w.v);
    let a = dissipative_matrix(z, &v, &w.theta);
    let row1 = leray_project(&tensor_div(&scale_tensor(&z.theta, &a)));
    let s = sym_gradient(&z.u);
    let theta_sq = mul(&z.theta, &z.theta);
    let mut row2 = mul(&z.theta, &contract(&s, &a));
    row2 -= &divergence(&scale_vector(&theta_sq, &gradient(&w.theta)));
    CoVector::new(row1, row2)
}

/// Noise operator `B`; `√ϑ` is evaluated on the grid refined by `fine_factor`.
pub fn apply_b(z: &StateVector, xi: &NoiseArgument, fine_factor: usize) -> Result<CoVector> {
    check_grids(z, xi.vector.grid())?;
    let r = sqrt_theta(z, fine_factor)?;
    let sym = xi.matrix.symmetric_part();
    let row1 = leray_project(&tensor_div(&scale_tensor(&r, &sym))).scaled(-1.0);
    let s = sym_gradient(&z.u);
    let mut row2 = -&mul(&r, &contract(&s, &xi.matrix));
    row2 -= &divergence(&scale_vector(&z.theta, &xi.vector));
    CoVector::new(row1, row2)
}

/// Adjoint of [`apply_b`].
pub fn apply_b_transpose(z: &StateVector, w: &CoVector, fine_factor: usize) -> Result<NoiseArgument> {
    check_grids(z, w.grid())?;
    let v = leray_project(&w.v);
    let r = sqrt_theta(z, fine_factor)?;
    let a = dissipative_matrix(z, &v, &w.theta);
    let matrix = map_tensor(&a, |_, _, c| -&mul(&r, c));
    let vector = scale_vector(&z.theta, &gradient(&w.theta));
    Ok(NoiseArgument { matrix, vector })
}

/// `δ𝓔/δz = (u, 1)`.
pub fn energy_gradient(z: &StateVector) -> CoVector {
    CoVector {
        v: z.u.clone(),
        theta: ScalarField::constant(z.grid(), 1.0),
    }
}

/// `δ𝓢/δz = (0, 1/ϑ)`, with `1/ϑ` formed on the refined grid.
pub fn entropy_gradient(z: &StateVector, fine_factor: usize) -> Result<CoVector> {
    Ok(CoVector {
        v: VectorField::zeros(z.grid()),
        theta: evaluate_nonlinear(&z.theta, |t| 1.0 / t, fine_factor)?,
    })
}

/// `(v·∇)` applied to a scalar.
fn advect(v: &VectorField, f: &ScalarField) -> ScalarField {
    let mut out = ScalarField::zeros(f.grid());
    for j in 0..3 {
        out += &mul(v.component(j), &partial(f, j));
    }
    out
}

/// Pointwise bracket `(v₂·∇)(v₁,θ₁) − (v₁·∇)(v₂,θ₂)`.
pub fn bracket_x(w1: &CoVector, w2: &CoVector) -> Result<CoVector> {
    check_same(&w1.grid(), &w2.grid())?;
    let comp = |i: usize| &advect(&w2.v, w1.v.component(i)) - &advect(&w1.v, w2.v.component(i));
    let v = VectorField::from_components([comp(0), comp(1), comp(2)])?;
    let theta = &advect(&w2.v, &w1.theta) - &advect(&w1.v, &w2.theta);
    CoVector::new(v, theta)
}

fn covector_cutoff(w: &CoVector) -> usize {
    let g = w.grid();
    let mut c = 0usize;
    let mut scan = |f: &ScalarField| {
        for (idx, a) in f.coeffs().iter().enumerate() {
            if a.norm() > 0.0 {
                let k = g.wavevector(idx);
                c = c.max(crate::spectral::max_norm(k) as usize);
            }
        }
    };
    for comp in w.v.components() {
        scan(comp);
    }
    scan(&w.theta);
    c
}

/// Cyclic sum of double brackets relative to the largest single term.
pub fn jacobi_residual(w1: &CoVector, w2: &CoVector, w3: &CoVector) -> Result<f64> {
    let grid = w1.grid();
    let cutoff = [w1, w2, w3].iter().map(|w| covector_cutoff(w)).max().unwrap_or(0);
    if 3 * cutoff > grid.cutoff() {
        return Err(NsfError::InsufficientHeadroom {
            cutoff,
            grid_cutoff: grid.cutoff(),
        });
    }
    let t1 = bracket_x(w1, &bracket_x(w2, w3)?)?;
    let t2 = bracket_x(w2, &bracket_x(w3, w1)?)?;
    let t3 = bracket_x(w3, &bracket_x(w1, w2)?)?;
    let scale = t1.norm_l2().max(t2.norm_l2()).max(t3.norm_l2());
    let total = t1.add(&t2).add(&t3).norm_l2();
    Ok(if scale == 0.0 { total } else { total / scale })
}

/// `‖L δ𝓢‖ / ‖z‖`.
pub fn entropy_degeneracy(z: &StateVector, fine_factor: usize) -> Result<f64> {
    let l = apply_l(z, &entropy_gradient(z, fine_factor)?)?;
    Ok(l.norm_l2() / z.norm_l2())
}

/// `‖M δ𝓔‖ / (‖∇u‖² + ‖ϑ‖)`.
pub fn energy_degeneracy(z: &StateVector) -> Result<f64> {
    let m = apply_m(z, &energy_gradient(z))?;
    let grad_u = crate::spectral::vector_gradient(&z.u).norm_sqr();
    Ok(m.norm_l2() / (grad_u + z.theta.norm_l2()))
}

/// `|⟨w₁,Lw₂⟩ + ⟨w₂,Lw₁⟩|` relative to the larger pairing.
pub fn antisymmetry_residual(z: &StateVector, w1: &CoVector, w2: &CoVector) -> Result<f64> {
    let a = w1.dot(&apply_l(z, w2)?)?;
    let b = w2.dot(&apply_l(z, w1)?)?;
    Ok(relative(a + b, a.abs().max(b.abs())))
}

/// `|⟨w₁,Mw₂⟩ − ⟨w₂,Mw₁⟩|` relative to the larger pairing.
pub fn symmetry_residual(z: &StateVector, w1: &CoVector, w2: &CoVector) -> Result<f64> {
    let a = w1.dot(&apply_m(z, w2)?)?;
    let b = w2.dot(&apply_m(z, w1)?)?;
    Ok(relative(a - b, a.abs().max(b.abs())))
}

/// `⟨w, Mw⟩`.
pub fn dissipation_form(z: &StateVector, w: &CoVector) -> Result<f64> {
    w.dot(&apply_m(z, w)?)
}

/// `|⟨w,B Bᵀw⟩ − ⟨w,Mw⟩| / ⟨w,Mw⟩`.
pub fn factorization_residual(z: &StateVector, w: &CoVector, fine_factor: usize) -> Result<f64> {
    let m = dissipation_form(z, w)?;
    let bb = w.dot(&apply_b(z, &apply_b_transpose(z, w, fine_factor)?, fine_factor)?)?;
    Ok(relative(bb - m, m.abs()))
}

/// `|⟨w,Bξ⟩ − ⟨Bᵀw,ξ⟩|` relative to the larger pairing.
pub fn adjointness_residual(z: &StateVector, w: &CoVector, xi: &NoiseArgument, fine_factor: usize) -> Result<f64> {
    let a = w.dot(&apply_b(z, xi, fine_factor)?)?;
    let b = apply_b_transpose(z, w, fine_factor)?.dot(xi)?;
    Ok(relative(a - b, a.abs().max(b.abs())))
}

/// `L δ𝓔 + M δ𝓢`, the deterministic evolution generated by the operators.
pub fn generic_drift(z: &StateVector, fine_factor: usize) -> Result<CoVector> {
    let l = apply_l(z, &energy_gradient(z))?;
    let m = apply_m(z, &entropy_gradient(z, fine_factor)?)?;
    Ok(l.add(&m))
}

/// Largest L² mismatch, relative to the drift's norm, between
/// [`generic_drift`] and the noise-free temperature drift.
pub fn evolution_residual(z: &StateVector, fine_factor: usize) -> Result<f64> {
    let g = generic_drift(z, fine_factor)?;
    let state = z.to_system_state()?;
    let mut params = ModelParams::for_grid(z.grid());
    params.fine_factor = fine_factor;
    let d = drift(&state, &NoiseBasis::empty(z.grid()), &params, Formulation::ThetaSystem)?;
    let reference = CoVector::new(d.du, d.dscalar)?;
    let diff = g.sub(&reference);
    let du = diff.v.norm_l2() / reference.v.norm_l2().max(f64::MIN_POSITIVE);
    let ds = diff.theta.norm_l2() / reference.theta.norm_l2().max(f64::MIN_POSITIVE);
    Ok(du.max(ds))
}

fn relative(diff: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        diff.abs()
    } else {
        diff.abs() / scale
    }
}

/// Random divergence-free velocity and positive temperature with modes up to
/// `cutoff`; `ϑ = 1 + fluctuation` with sup-amplitude `theta_spread`.
pub fn random_state<R: Rng + ?Sized>(
    grid: TorusGrid,
    cutoff: usize,
    velocity_amplitude: f64,
    theta_spread: f64,
    rng: &mut R,
) -> Result<StateVector> {
    let u = leray_project(&VectorField::random(grid, cutoff, 1.0, rng));
    let u_norm = u.norm_l2();
    let u = if u_norm > 0.0 { u.scaled(velocity_amplitude / u_norm) } else { u };
    let mut fluct = ScalarField::random(grid, cutoff, 1.0, rng);
    fluct.coeffs_mut()[grid.index([0, 0, 0])] = 0.0.into();
    let n = 2 * grid.resolution();
    let sup = crate::spectral::sup_norm(&[&fluct], n);
    let fluct = if sup > 0.0 { fluct.scaled(theta_spread / sup) } else { fluct };
    let theta = &ScalarField::constant(grid, 1.0) + &fluct;
    StateVector::new(fourier_project(&u, cutoff as i64)?, theta)
}

/// Settings of [`verify_generic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenericCheckConfig {
    /// Cutoff of the shared grid.
    pub grid_cutoff: usize,
    /// Cutoff of random states.
    pub state_cutoff: usize,
    /// Cutoff of random covectors.
    pub covector_cutoff: usize,
    /// Grid cutoff of the Jacobi check.
    pub jacobi_grid_cutoff: usize,
    /// Covector cutoff of the Jacobi check.
    pub jacobi_cutoff: usize,
    pub samples: usize,
    pub jacobi_samples: usize,
    pub theta_spread: f64,
    pub fine_factor: usize,
    pub seed: u64,
}

impl Default for GenericCheckConfig {
    fn default() -> Self {
        Self {
            grid_cutoff: 10,
            state_cutoff: 1,
            covector_cutoff: 2,
            jacobi_grid_cutoff: 9,
            jacobi_cutoff: 3,
            samples: 20,
            jacobi_samples: 100,
            theta_spread: 0.2,
            fine_factor: 2,
            seed: 0,
        }
    }
}

/// Worst residual of each structural identity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenericReport {
    pub config: GenericCheckConfig,
    pub entropy_degeneracy: f64,
    pub energy_degeneracy: f64,
    pub antisymmetry: f64,
    pub symmetry: f64,
    /// Most negative `⟨w,Mw⟩ / ‖w‖²`, or 0.
    pub positivity: f64,
    pub factorization: f64,
    pub adjointness: f64,
    pub jacobi: f64,
    pub evolution: f64,
    pub pass: bool,
}

pub const STRUCTURE_TOL: f64 = 1e-8;
pub const FACTORIZATION_TOL: f64 = 1e-6;

impl GenericReport {
    fn evaluate_pass(&self) -> bool {
        [
            self.entropy_degeneracy,
            self.energy_degeneracy,
            self.antisymmetry,
            self.symmetry,
            -self.positivity,
            self.adjointness,
            self.jacobi,
            self.evolution,
        ]
        .iter()
        .all(|&r| r <= STRUCTURE_TOL)
            && self.factorization <= FACTORIZATION_TOL
    }
}

/// Run every structural check on random samples.
pub fn verify_generic(config: GenericCheckConfig) -> Result<GenericReport> {
    let grid = TorusGrid::dealiased(config.grid_cutoff)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rep = GenericReport {
        config,
        entropy_degeneracy: 0.0,
        energy_degeneracy: 0.0,
        antisymmetry: 0.0,
        symmetry: 0.0,
        positivity: 0.0,
        factorization: 0.0,
        adjointness: 0.0,
        jacobi: 0.0,
        evolution: 0.0,
        pass: false,
    };
    let ff = config.fine_factor;
    for _ in 0..config.samples {
        let z = random_state(grid, config.state_cutoff, 1.0, config.theta_spread, &mut rng)?;
        let w1 = CoVector::random(grid, config.covector_cutoff, 1.0, &mut rng);
        let w2 = CoVector::random(grid, config.covector_cutoff, 1.0, &mut rng);
        let xi = NoiseArgument::random(grid, config.covector_cutoff, 1.0, &mut rng);
        rep.entropy_degeneracy = rep.entropy_degeneracy.max(entropy_degeneracy(&z, ff)?);
        rep.energy_degeneracy = rep.energy_degeneracy.max(energy_degeneracy(&z)?);
        rep.antisymmetry = rep.antisymmetry.max(antisymmetry_residual(&z, &w1, &w2)?);
        rep.symmetry = rep.symmetry.max(symmetry_residual(&z, &w1, &w2)?);
        let q = dissipation_form(&z, &w1)? / w1.norm_l2().powi(2);
        rep.positivity = rep.positivity.min(q);
        rep.factorization = rep.factorization.max(factorization_residual(&z, &w1, ff)?);
        rep.adjointness = rep.adjointness.max(adjointness_residual(&z, &w1, &xi, ff)?);
        rep.evolution = rep.evolution.max(evolution_residual(&z, ff)?);
    }
    let jgrid = TorusGrid::dealiased(config.jacobi_grid_cutoff)?;
    for _ in 0..config.jacobi_samples {
        let w: [CoVector; 3] = std::array::from_fn(|_| CoVector::random(jgrid, config.jacobi_cutoff, 1.0, &mut rng));
        rep.jacobi = rep.jacobi.max(jacobi_residual(&w[0], &w[1], &w[2])?);
    }
    rep.pass = rep.evaluate_pass();
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> TorusGrid {
        TorusGrid::dealiased(10).unwrap()
    }

    fn state(seed: u64) -> StateVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_state(grid(), 1, 1.0, 0.2, &mut rng).unwrap()
    }

    #[test]
    fn l_annihilates_entropy_gradient() {
        let z = state(1);
        assert!(entropy_degeneracy(&z, 2).unwrap() < 1e-8);
    }

    #[test]
    fn m_annihilates_energy_gradient() {
        let z = state(2);
        assert!(energy_degeneracy(&z).unwrap() < 1e-12);
    }

    #[test]
    fn l_at_rest_reduces_to_transport_of_temperature() {
        let g = grid();
        let z = StateVector::new(VectorField::zeros(g), state(3).theta().clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = leray_project(&VectorField::random(g, 2, 1.0, &mut rng));
        let w = CoVector::new(v.clone(), ScalarField::zeros(g)).unwrap();
        let l = apply_l(&z, &w).unwrap();
        assert!(l.v.norm_l2() < 1e-12);
        let expect = -&divergence(&scale_vector(z.theta(), &v));
        assert!((&l.theta - &expect).norm_l2() < 1e-13);
    }

    #[test]
    fn l_is_antisymmetric_and_m_symmetric() {
        let z = state(5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w1 = CoVector::random(grid(), 2, 1.0, &mut rng);
        let w2 = CoVector::random(grid(), 2, 1.0, &mut rng);
        assert!(antisymmetry_residual(&z, &w1, &w2).unwrap() < 1e-10);
        assert!(symmetry_residual(&z, &w1, &w2).unwrap() < 1e-10);
        assert!(dissipation_form(&z, &w1).unwrap() > 0.0);
    }

    #[test]
    fn b_factorizes_m() {
        let z = state(7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = CoVector::random(grid(), 2, 1.0, &mut rng);
        let xi = NoiseArgument::random(grid(), 2, 1.0, &mut rng);
        let f = factorization_residual(&z, &w, 2).unwrap();
        let a = adjointness_residual(&z, &w, &xi, 2).unwrap();
        assert!(f < 1e-6 && a < 1e-10, "{f} {a}");
        let zero = apply_b(&z, &NoiseArgument::zeros(grid()), 2).unwrap();
        assert!(zero.norm_l2() < 1e-13);
    }

    #[test]
    fn operators_reproduce_deterministic_drift() {
        let z = state(9);
        let r = evolution_residual(&z, 2).unwrap();
        assert!(r < 1e-8, "{r}");
    }

    #[test]
    fn bracket_of_shear_and_translation() {
        let g = grid();
        let s = ScalarField::sin_mode(g, [0, 1, 0], 1.0).unwrap();
        let w1 = CoVector::new(
            VectorField::from_components([s, ScalarField::zeros(g), ScalarField::zeros(g)]).unwrap(),
            ScalarField::zeros(g),
        )
        .unwrap();
        let w2 = CoVector::new(
            VectorField::from_components([ScalarField::zeros(g), ScalarField::constant(g, 1.0), ScalarField::zeros(g)])
                .unwrap(),
            ScalarField::zeros(g),
        )
        .unwrap();
        let b = bracket_x(&w1, &w2).unwrap();
        let expect = ScalarField::cos_mode(g, [0, 1, 0], 2.0 * PI).unwrap();
        assert!((b.v.component(0) - &expect).norm_l2() < 1e-13);
        assert!(b.v.component(1).norm_l2() < 1e-15);
        assert!(b.theta.norm_l2() < 1e-15);
        assert!(bracket_x(&w1, &w1).unwrap().norm_l2() < 1e-15);
    }

    #[test]
    fn jacobi_on_random_triples() {
        let g = TorusGrid::dealiased(9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..5 {
            let w: [CoVector; 3] = std::array::from_fn(|_| CoVector::random(g, 3, 1.0, &mut rng));
            assert!(jacobi_residual(&w[0], &w[1], &w[2]).unwrap() < 1e-10);
            assert!(jacobi_residual(&w[0], &w[1], &w[1]).unwrap() < 1e-10);
        }
        let c = CoVector::new(
            VectorField::from_components(std::array::from_fn(|i| ScalarField::constant(g, i as f64 + 1.0))).unwrap(),
            ScalarField::constant(g, 2.0),
        )
        .unwrap();
        assert_eq!(jacobi_residual(&c, &c, &c).unwrap(), 0.0);
    }

    #[test]
    fn default_report_passes() {
        let cfg = GenericCheckConfig {
            samples: 2,
            jacobi_samples: 3,
            ..GenericCheckConfig::default()
        };
        let rep = verify_generic(cfg).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn jacobi_needs_headroom() {
        let g = TorusGrid::dealiased(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = CoVector::random(g, 3, 1.0, &mut rng);
        assert!(matches!(
            jacobi_residual(&w, &w, &w),
            Err(NsfError::InsufficientHeadroom { cutoff: 3, grid_cutoff: 6 })
        ));
    }

    #[test]
    fn negative_temperature_is_rejected() {
        let g = grid();
        let t = ScalarField::constant(g, -1.0);
        assert!(matches!(
            StateVector::new(VectorField::zeros(g), t),
            Err(NsfError::PositivityViolation { .. })
        ));
    }
}
