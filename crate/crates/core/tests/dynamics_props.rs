mod common;

use nsf_core::dynamics::*;
use nsf_core::noise::NoiseBasis;
use nsf_core::spectral::*;
use proptest::prelude::*;

fn grid() -> TorusGrid {
    TorusGrid::new(4, 16).unwrap()
}

fn euclid(x: &Vec<f64>) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn galerkin_drift_stays_in_the_cutoff_space(seed in any::<u64>(), cut in 1usize..4) {
        let g = grid();
        let st = common::random_psi_state(g, 4, 1.0, 0.8, seed);
        let basis = common::axis_noise(g, 1, 0.4);
        let mut p = ModelParams::for_grid(g);
        p.cutoff = cut;
        p.epsilon = 0.01;
        let d = drift_galerkin(&st, &basis, &p).unwrap();
        let outside = |f: &ScalarField| {
            f.coeffs().iter().enumerate()
                .filter(|(i, _)| max_norm(g.wavevector(*i)) > cut as i64)
                .map(|(_, c)| c.norm())
                .fold(0.0, f64::max)
        };
        for c in d.du.components() {
            prop_assert_eq!(outside(c), 0.0);
        }
        prop_assert_eq!(outside(&d.dscalar), 0.0);
        prop_assert!(d.du.max_divergence() <= 1e-12 * d.du.norm_l2().max(1.0));
    }

    #[test]
    fn regularized_nonlinearity_has_nonnegative_mean(seed in any::<u64>(), delta in 0.01f64..0.5, eps in 0.0f64..0.5) {
        // ψ with sign changes: the mean still cannot be negative
        let st = common::random_psi_state(grid(), 3, 0.0, 1.0, seed);
        let q = regularized_gradient_term(&st.u, &st.scalar, delta, eps, 2).unwrap();
        prop_assert!(q.coeff([0, 0, 0]).re >= 0.0);
    }

    #[test]
    fn ito_and_stratonovich_differ_by_the_correction(seed in any::<u64>(), amp in 0.05f64..1.0) {
        let g = grid();
        let st = common::random_psi_state(g, 2, 2.0, 0.3, seed);
        let basis = common::axis_noise(g, 1, amp);
        let c = basis.constants();
        let p = ModelParams::for_grid(g);
        let ito = drift_ito(&st, &basis, &p, ItoSystem::Psi).unwrap();
        let strat = drift_stratonovich(&st, &basis, &p).unwrap();
        let du = laplacian(&st.u).scaled(c.f1 / 4.0);
        let mut ds = laplacian(&st.scalar).scaled(c.f1 / 2.0 + c.g1 / 2.0);
        ds.axpy(-(c.f2 / 2.0 + c.g2 / 8.0), &st.scalar);
        let scale = ito.du.norm_l2() + ito.dscalar.norm_l2();
        prop_assert!((&(&ito.du - &strat.du) - &du).norm_l2() <= 1e-12 * scale);
        prop_assert!((&(&ito.dscalar - &strat.dscalar) - &ds).norm_l2() <= 1e-12 * scale);
    }

    #[test]
    fn stratonovich_drift_is_energy_neutral(seed in any::<u64>()) {
        let g = grid();
        let st = common::random_psi_state(g, 3, 2.0, 0.4, seed);
        let p = ModelParams::for_grid(g);
        let d = drift_stratonovich(&st, &NoiseBasis::empty(g), &p).unwrap();
        let rate = inner_product(&st.u, &d.du).unwrap() + inner_product(&st.scalar, &d.dscalar).unwrap();
        let scale = sym_gradient(&st.u).norm_sqr() + gradient(&st.scalar).norm_sqr();
        prop_assert!(rate.abs() <= 1e-8 * scale);
    }

    #[test]
    fn galerkin_matches_ito_above_delta(seed in any::<u64>()) {
        let g = TorusGrid::dealiased(4).unwrap();
        let st = common::random_psi_state(g, 2, 2.0, 0.3, seed);
        let basis = common::axis_noise(g, 1, 0.3);
        let p = ModelParams::for_grid(g);
        let a = drift_galerkin(&st, &basis, &p).unwrap();
        let b = drift_ito(&st, &basis, &p, ItoSystem::Psi).unwrap();
        let scale = b.du.norm_l2() + b.dscalar.norm_l2();
        prop_assert!((&a.du - &b.du).norm_l2() <= 1e-10 * scale);
        prop_assert!((&a.dscalar - &b.dscalar).norm_l2() <= 1e-10 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn h_delta_is_bounded_by_the_reciprocal(r in -10.0f64..10.0, delta in 1e-4f64..0.99) {
        let h = h_delta(r, delta);
        prop_assert!(h > 0.0);
        if r > 0.0 {
            prop_assert!(r * h <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn h_delta_decreases_with_delta(r in 1e-3f64..5.0, d1 in 1e-3f64..0.99, d2 in 1e-3f64..0.99) {
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(h_delta(r, hi) <= h_delta(r, lo) * (1.0 + 1e-15));
    }

    #[test]
    fn truncation_is_bounded_and_lipschitz(
        x in prop::collection::vec(-50.0f64..50.0, 6),
        y in prop::collection::vec(-50.0f64..50.0, 6),
        radius in 0.1f64..20.0,
    ) {
        let tx = truncate(&x, radius, euclid);
        let ty = truncate(&y, radius, euclid);
        prop_assert!(euclid(&tx) <= radius * (1.0 + 1e-14));
        let d: Vec<f64> = tx.iter().zip(&ty).map(|(a, b)| a - b).collect();
        let e: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        prop_assert!(euclid(&d) <= 2.0 * euclid(&e) * (1.0 + 1e-14) + 1e-14);
    }
}

#[test]
fn zero_state_has_zero_drift() {
    let g = grid();
    let st = SystemState::new(VectorField::zeros(g), ScalarField::zeros(g), Variables::Psi).unwrap();
    let d = drift_galerkin(&st, &common::axis_noise(g, 1, 0.5), &ModelParams::for_grid(g)).unwrap();
    assert_eq!(d.du.norm_l2(), 0.0);
    assert_eq!(d.dscalar.norm_l2(), 0.0);
}
