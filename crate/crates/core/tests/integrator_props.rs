mod common;

use nsf_core::dynamics::*;
use nsf_core::integrators::*;
use nsf_core::noise::{NoiseBasis, NoiseIncrement};
use nsf_core::spectral::*;
use proptest::prelude::*;

fn grid() -> TorusGrid {
    TorusGrid::new(4, 16).unwrap()
}

fn distance(a: &SystemState, b: &SystemState) -> f64 {
    a.distance(b).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn steps_keep_velocity_divergence_free(seed in any::<u64>(), which in 0usize..3) {
        let g = grid();
        let st = common::random_psi_state(g, 3, 2.0, 0.3, seed);
        let basis = common::axis_noise(g, 1, 0.3);
        let spec = match which {
            0 => SchemeSpec::new(SchemeKind::EulerMaruyamaIto, Formulation::Galerkin, 1e-4, 5),
            1 => SchemeSpec::new(SchemeKind::HeunStratonovich, Formulation::Stratonovich, 1e-4, 5),
            _ => SchemeSpec::new(SchemeKind::ImexIto, Formulation::PsiSystem, 1e-4, 5),
        }.unwrap();
        let tr = run_path(&st, &spec, &basis, &ModelParams::for_grid(g), seed, 0, 1);
        prop_assert!(tr.completed());
        for s in &tr.states {
            prop_assert!(s.u.max_divergence() <= 1e-12 * s.u.norm_l2().max(1.0));
        }
    }

    #[test]
    fn noise_free_heun_is_deterministic_heun(seed in any::<u64>()) {
        let g = grid();
        let st = common::random_psi_state(g, 3, 2.0, 0.3, seed);
        let empty = NoiseBasis::empty(g);
        let p = ModelParams::for_grid(g);
        let dt = 2e-4;
        let spec = SchemeSpec::new(SchemeKind::HeunStratonovich, Formulation::Stratonovich, dt, 1).unwrap();
        let got = step(&st, &spec, &empty, &p, &NoiseIncrement::zeros(&empty, dt)).unwrap();
        let a0 = drift_stratonovich(&st, &empty, &p).unwrap();
        let pred = st.axpy(dt, &a0.du, &a0.dscalar);
        let a1 = drift_stratonovich(&pred, &empty, &p).unwrap();
        let mut avg = a0.clone();
        avg.axpy(1.0, &a1);
        let mut expect = st.axpy(0.5 * dt, &avg.du, &avg.dscalar);
        expect.u = leray_project(&expect.u);
        prop_assert!(distance(&got, &expect) <= 1e-14 * st.norm_l2());
    }

    #[test]
    fn noise_free_euler_maruyama_is_explicit_euler(seed in any::<u64>()) {
        let g = grid();
        let st = common::random_psi_state(g, 3, 2.0, 0.3, seed);
        let empty = NoiseBasis::empty(g);
        let p = ModelParams::for_grid(g);
        let dt = 2e-4;
        let spec = SchemeSpec::new(SchemeKind::EulerMaruyamaIto, Formulation::Galerkin, dt, 1).unwrap();
        let got = step(&st, &spec, &empty, &p, &NoiseIncrement::zeros(&empty, dt)).unwrap();
        let a = drift_galerkin(&st, &empty, &p).unwrap();
        let mut expect = st.axpy(dt, &a.du, &a.dscalar);
        expect.u = leray_project(&expect.u);
        prop_assert!(distance(&got, &expect) <= 1e-14 * st.norm_l2());
    }

    #[test]
    fn imex_and_euler_agree_to_first_order_on_heat_flow(seed in any::<u64>()) {
        let g = grid();
        let mut r = common::rng(seed);
        let fl = ScalarField::random(g, 4, 1.0, &mut r);
        let sup = sup_norm(&[&fl], 32);
        let theta = &ScalarField::constant(g, 2.0) + &fl.scaled(0.3 / sup);
        let st = SystemState::new(VectorField::zeros(g), theta, Variables::Theta).unwrap();
        let empty = NoiseBasis::empty(g);
        let p = ModelParams::for_grid(g);
        let gap = |dt: f64| {
            let em = SchemeSpec::new(SchemeKind::EulerMaruyamaIto, Formulation::ThetaSystem, dt, 1).unwrap();
            let im = SchemeSpec::new(SchemeKind::ImexIto, Formulation::ThetaSystem, dt, 1).unwrap();
            let z = NoiseIncrement::zeros(&empty, dt);
            let a = step(&st, &em, &empty, &p, &z).unwrap();
            let b = step(&st, &im, &empty, &p, &z).unwrap();
            distance(&a, &b)
        };
        let (g1, g2) = (gap(1e-5), gap(5e-6));
        let c1 = g1 / 1e-10;
        let c2 = g2 / 2.5e-11;
        prop_assert!(c1.is_finite() && c1 > 0.0);
        prop_assert!((c2 / c1 - 1.0).abs() < 0.1, "C(dt) = {c1}, C(dt/2) = {c2}");
    }
}
