//! Deterministic property checks behind `verify-noise`, `verify-generic`
//! and `verify-properties`.

use nsf_core::diagnostics::{entropy_drift_decomposition, l1_budget_bound, EntropyCoefficients};
use nsf_core::dynamics::{h2_norm, h_delta, truncate, SystemState, Variables};
use nsf_core::generic::{verify_generic, GenericCheckConfig, GenericReport, FACTORIZATION_TOL, STRUCTURE_TOL};
use nsf_core::noise::{
    build_noise_basis, increment_covariance, verify_stationarity, CovarianceReport, NoiseBasis, NoiseConstants,
    NoiseFamilySpec, StationarityReport,
};
use nsf_core::spectral::{
    convolve_truncated, fourier_project, inner_product, leray_project, multiply, norm2, ScalarField, TorusGrid,
    VectorField, Wavevector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;

pub const STATIONARITY_TOL: f64 = 1e-12;
pub const PROJECTION_TOL: f64 = 1e-12;
pub const COVARIANCE_SAMPLES: usize = 100_000;
pub const H_DELTA_POINTS: usize = 10_000;
pub const H_DELTA_VALUES: [f64; 5] = [0.5, 1e-1, 1e-2, 1e-3, 1e-4];
pub const TRUNCATION_PAIRS: usize = 1000;
pub const BUDGET_HAND_VALUE: f64 = 1.5 / std::f64::consts::SQRT_2;

/// One named scalar compared against a tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl PropertyReport {
    pub fn new(checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self { checks, pass }
    }
}

fn rel(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

fn max_coeff_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Fourier and Leray projections and the dealiased product, on random
/// fields at cutoffs 1 to 3.
pub fn projection_checks(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut fourier, mut leray, mut orth, mut div, mut product) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for m in 1..=3usize {
        let grid = TorusGrid::new(m, 2 * m + 1)?;
        for _ in 0..5 {
            let a = ScalarField::random(grid, m, 1.0, &mut rng);
            let b = ScalarField::random(grid, m, 1.0, &mut rng);
            let u = VectorField::random(grid, m, 1.0, &mut rng);
            let c = (m - 1).max(1) as i64;
            let pa = fourier_project(&a, c)?;
            fourier = fourier.max(rel(max_coeff_diff(&fourier_project(&pa, c)?, &pa), pa.max_abs_coeff()));
            let pu = leray_project(&u);
            let ppu = leray_project(&pu);
            leray = leray.max(rel((&ppu - &pu).norm_l2(), pu.norm_l2()));
            orth = orth.max(rel(inner_product(&pu, &(&u - &pu))?.abs(), u.norm_sqr()));
            div = div.max(rel(pu.max_divergence(), u.norm_l2()));
            let fast = multiply(&a, &b, true)?;
            let slow = convolve_truncated(&a, &b)?;
            product = product.max(rel(max_coeff_diff(&fast, &slow), slow.max_abs_coeff()));
        }
    }
    Ok(vec![
        Check::at_most("fourier projection idempotence", fourier, PROJECTION_TOL),
        Check::at_most("leray projection idempotence", leray, PROJECTION_TOL),
        Check::at_most("leray projection orthogonality", orth, PROJECTION_TOL),
        Check::at_most("leray projection divergence", div, PROJECTION_TOL),
        Check::at_most("dealiased product vs convolution", product, PROJECTION_TOL),
    ])
}

/// Bounds of the regularized reciprocal and of the Lipschitz truncation.
pub fn regularization_checks(seed: u64) -> Result<Vec<Check>> {
    let r: Vec<f64> = (0..H_DELTA_POINTS)
        .map(|i| 10f64.powf(-8.0 + 10.0 * i as f64 / (H_DELTA_POINTS - 1) as f64))
        .collect();
    let mut bound = 0usize;
    let mut in_delta = 0usize;
    let mut in_r = 0usize;
    for (j, &d) in H_DELTA_VALUES.iter().enumerate() {
        for (i, &x) in r.iter().enumerate() {
            if x * h_delta(x, d) > 1.0 {
                bound += 1;
            }
            // Values are listed with decreasing δ, and h_δ grows as δ shrinks.
            if j > 0 && h_delta(x, d) < h_delta(x, H_DELTA_VALUES[j - 1]) {
                in_delta += 1;
            }
            if i > 0 && h_delta(x, d) > h_delta(r[i - 1], d) {
                in_r += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = TorusGrid::new(2, 5)?;
    let radius = 1.0;
    let random_state = |rng: &mut ChaCha8Rng| -> Result<SystemState> {
        let amp = 10f64.powf(rng.random_range(-6.0..-2.0));
        let u = leray_project(&VectorField::random(grid, 2, amp, rng));
        let s = ScalarField::random(grid, 2, amp, rng);
        Ok(SystemState::new(u, s, Variables::Psi)?)
    };
    let diff = |a: &SystemState, b: &SystemState| -> Result<f64> {
        Ok(h2_norm(&SystemState::new(&a.u - &b.u, &a.scalar - &b.scalar, Variables::Psi)?))
    };
    let (mut norm_violations, mut lipschitz_violations) = (0usize, 0usize);
    for i in 0..TRUNCATION_PAIRS {
        let x = random_state(&mut rng)?;
        let y = if i % 2 == 0 {
            random_state(&mut rng)?
        } else {
            let mut y = x.clone();
            let z = random_state(&mut rng)?;
            y.u.axpy(0.01, &z.u);
            y.scalar.axpy(0.01, &z.scalar);
            y
        };
        let (tx, ty) = (truncate(&x, radius, h2_norm), truncate(&y, radius, h2_norm));
        for t in [&tx, &ty] {
            if h2_norm(t) > radius * (1.0 + 1e-12) {
                norm_violations += 1;
            }
        }
        if diff(&tx, &ty)? > 2.0 * diff(&x, &y)? * (1.0 + 1e-12) {
            lipschitz_violations += 1;
        }
    }
    Ok(vec![
        Check::at_most("r h_delta(r) <= 1 violations", bound as f64, 0.0),
        Check::at_most("h_delta monotone in delta violations", in_delta as f64, 0.0),
        Check::at_most("h_delta monotone in r violations", in_r as f64, 0.0),
        Check::at_most("truncation norm bound violations", norm_violations as f64, 0.0),
        Check::at_most("truncation 2-Lipschitz violations", lipschitz_violations as f64, 0.0),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizedStationarity {
    /// Listed modes over both families.
    pub modes: usize,
    pub report: StationarityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseVerification {
    pub configured: Option<StationarityReport>,
    pub reference_bases: Vec<SizedStationarity>,
    pub covariance: CovarianceReport,
    pub pass: bool,
}

/// Half-space wavevectors in the cube of side `2m+1`, by increasing length.
fn half_space(m: i64) -> Vec<Wavevector> {
    let mut ks: Vec<Wavevector> = (-m..=m)
        .flat_map(|a| (-m..=m).flat_map(move |b| (-m..=m).map(move |c| [a, b, c])))
        .filter(|k| k.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0))
        .collect();
    ks.sort_by_key(|&k| (norm2(k), k));
    ks
}

/// Families with `per_family` modes each, with decaying amplitudes.
pub fn reference_basis(per_family: usize) -> Result<NoiseBasis> {
    let grid = TorusGrid::new(4, 16)?;
    let ks = half_space(4);
    let family = |offset: usize| {
        let modes: Vec<(Wavevector, f64)> = ks[offset..offset + per_family]
            .iter()
            .map(|&k| (k, 1.0 / (1.0 + norm2(k) as f64)))
            .collect();
        NoiseFamilySpec::new(&modes)
    };
    Ok(build_noise_basis(&family(0), &family(per_family), grid)?)
}

/// Stationarity of the configured basis and of reference bases up to 100
/// modes, and the covariance of matrix increments.
pub fn verify_noise(configured: Option<&NoiseBasis>, covariance_samples: usize, seed: u64) -> Result<NoiseVerification> {
    let configured = configured.map(|b| verify_stationarity(b, STATIONARITY_TOL));
    let mut reference_bases = Vec::new();
    for per_family in [1, 7, 25, 50] {
        let b = reference_basis(per_family)?;
        reference_bases.push(SizedStationarity {
            modes: 2 * per_family,
            report: verify_stationarity(&b, STATIONARITY_TOL),
        });
    }
    let covariance = increment_covariance(covariance_samples, seed)?;
    let pass = configured.is_none_or(|r| r.pass) && reference_bases.iter().all(|r| r.report.pass) && covariance.pass;
    Ok(NoiseVerification {
        configured,
        reference_bases,
        covariance,
        pass,
    })
}

/// Entropy drift coefficients for a table of noise constants, the sign
/// change of the velocity coefficient, and a decomposition on a live basis.
pub fn entropy_coefficient_checks() -> Result<Vec<Check>> {
    let table = [
        (0.0, 0.0, 0.0),
        (0.5, 1.0, 0.25),
        (2.0 / 3.0, 3.0, 1.0),
        (1.0, 0.1, 7.0),
        (4.0, 2.5, 0.0),
    ];
    let (mut vel, mut cst) = (0.0f64, 0.0f64);
    for (f1, f2, g2) in table {
        let c = EntropyCoefficients::new(NoiseConstants { f1, f2, g1: 0.0, g2 });
        vel = vel.max((c.velocity - (3.0 * f1 / 2.0 - 1.0)).abs());
        cst = cst.max((c.constant + (f2 + g2 / 2.0)).abs());
    }
    let with_f1 = |f1: f64| EntropyCoefficients::new(NoiseConstants { f1, ..Default::default() });
    let third = 2.0 / 3.0;
    let sign_change = with_f1(third - 1e-9).closes() && !with_f1(third + 1e-9).closes() && with_f1(third).velocity.abs() < 1e-15;

    let grid = TorusGrid::dealiased(3)?;
    let f = NoiseFamilySpec::new(&[([1, 0, 0], 0.4), ([0, 1, 1], 0.2)]).with_constant(0.3);
    let basis = build_noise_basis(&f, &f, grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let u = leray_project(&VectorField::random(grid, 2, 0.3, &mut rng));
    let mut theta = ScalarField::random(grid, 2, 0.002, &mut rng);
    theta += &ScalarField::constant(grid, 1.0);
    let state = SystemState::new(u, theta, Variables::Theta)?;
    let d = entropy_drift_decomposition(&state, &basis, 2)?;
    let expected = EntropyCoefficients::new(basis.constants());
    let coeff_match = d.coefficients == expected;
    let recombined = expected.velocity * d.velocity_integral + expected.gradient * d.gradient_integral + expected.constant;
    Ok(vec![
        Check::at_most("entropy velocity coefficient error", vel, 0.0),
        Check::at_most("entropy constant error", cst, 0.0),
        Check::at_most("entropy coefficient sign change at F1 = 2/3", f64::from(u8::from(!sign_change)), 0.0),
        Check::at_most("entropy decomposition coefficients", f64::from(u8::from(!coeff_match)), 0.0),
        Check::at_most("entropy decomposition total", rel((d.total - recombined).abs(), d.total.abs()), 1e-14),
    ])
}

/// The budget bound at `u₀ = 0, ψ₀ ≡ 1, F₂ = 1, G₂ = 0, T = 1, ε = 0`.
pub fn budget_bound_check() -> Check {
    let c = NoiseConstants {
        f1: 0.0,
        f2: 1.0,
        g1: 0.0,
        g2: 0.0,
    };
    let value = l1_budget_bound(0.5, c, 1.0, 0.0);
    Check::at_most("budget bound hand value", (value - BUDGET_HAND_VALUE).abs(), 1e-12)
}

pub fn generic_checks(report: &GenericReport) -> Vec<Check> {
    vec![
        Check::at_most("generic entropy degeneracy", report.entropy_degeneracy, STRUCTURE_TOL),
        Check::at_most("generic energy degeneracy", report.energy_degeneracy, STRUCTURE_TOL),
        Check::at_most("generic antisymmetry", report.antisymmetry, STRUCTURE_TOL),
        Check::at_most("generic symmetry", report.symmetry, STRUCTURE_TOL),
        Check::at_most("generic positivity defect", -report.positivity, STRUCTURE_TOL),
        Check::at_most("generic factorization", report.factorization, FACTORIZATION_TOL),
        Check::at_most("generic adjointness", report.adjointness, STRUCTURE_TOL),
        Check::at_most("generic jacobi", report.jacobi, STRUCTURE_TOL),
        Check::at_most("generic evolution", report.evolution, STRUCTURE_TOL),
    ]
}

pub fn run_generic(seed: u64) -> Result<GenericReport> {
    Ok(verify_generic(GenericCheckConfig {
        seed,
        ..Default::default()
    })?)
}

/// Every invariant check of the library.
pub fn verify_properties(seed: u64) -> Result<PropertyReport> {
    let mut checks = projection_checks(seed)?;
    checks.extend(regularization_checks(seed)?);
    let noise = verify_noise(None, COVARIANCE_SAMPLES, seed)?;
    for b in &noise.reference_bases {
        checks.push(Check::at_most(
            format!("stationarity, {} modes", b.modes),
            b.report.max_residual(),
            STATIONARITY_TOL,
        ));
    }
    checks.push(Check::at_most(
        "increment covariance entries beyond 3 SE",
        noise.covariance.violations as f64,
        0.0,
    ));
    checks.extend(entropy_coefficient_checks()?);
    checks.push(budget_bound_check());
    checks.extend(generic_checks(&run_generic(seed)?));
    Ok(PropertyReport::new(checks))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_space_has_one_of_each_pair() {
        let ks = half_space(4);
        assert_eq!(ks.len(), (9 * 9 * 9 - 1) / 2);
        assert_eq!(ks[0], [0, 0, 1]);
        assert!(ks.iter().all(|k| !ks.contains(&[-k[0], -k[1], -k[2]])));
    }

    #[test]
    fn reference_basis_constants() {
        let b = reference_basis(1).unwrap();
        let c = b.constants();
        assert!((c.f1 - 0.25).abs() < 1e-15);
        assert!((c.g1 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn budget_hand_value() {
        let c = budget_bound_check();
        assert!(c.pass, "{c:?}");
    }

    #[test]
    fn entropy_checks_pass() {
        for c in entropy_coefficient_checks().unwrap() {
            assert!(c.pass, "{c:?}");
        }
    }
}
