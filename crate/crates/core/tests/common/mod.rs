#![allow(dead_code)]

use std::f64::consts::PI;

use nsf_core::dynamics::{SystemState, Variables};
use nsf_core::noise::{build_noise_basis, NoiseBasis, NoiseFamilySpec};
use nsf_core::spectral::{leray_project, ScalarField, TorusGrid, VectorField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Taylor–Green velocity of amplitude `amp`.
pub fn taylor_green(g: TorusGrid, amp: f64) -> VectorField {
    let u0 = ScalarField::from_fn(g, |x| amp * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos() * (2.0 * PI * x[2]).cos());
    let u1 = ScalarField::from_fn(g, |x| -amp * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).sin() * (2.0 * PI * x[2]).cos());
    VectorField::from_components([u0, u1, ScalarField::zeros(g)]).unwrap()
}

/// Random divergence-free `u` and `ψ = mean + fluctuation` with both of
/// cutoff `cutoff`; the fluctuation has L² norm `spread`.
pub fn random_psi_state(g: TorusGrid, cutoff: usize, mean: f64, spread: f64, seed: u64) -> SystemState {
    let mut r = rng(seed);
    let u = leray_project(&VectorField::random(g, cutoff, 0.3, &mut r));
    let mut fl = ScalarField::random(g, cutoff, 1.0, &mut r);
    fl.coeffs_mut()[g.index([0, 0, 0])] = 0.0.into();
    let norm = fl.norm_l2();
    let psi = &ScalarField::constant(g, mean) + &fl.scaled(spread / norm);
    SystemState::new(u, psi, Variables::Psi).unwrap()
}

/// Both families on the three coordinate axes with wavenumber `k`.
pub fn axis_noise(g: TorusGrid, k: i64, amp: f64) -> NoiseBasis {
    let f = NoiseFamilySpec::new(&[([k, 0, 0], amp), ([0, k, 0], amp), ([0, 0, k], amp)]);
    build_noise_basis(&f, &f, g).unwrap()
}
