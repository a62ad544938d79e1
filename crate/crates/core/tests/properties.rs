use proptest::prelude::*;

use normsol::branch::{m_lambda, rho_lambda, BranchConfig};
use normsol::model::catalog::*;
use normsol::model::{NonlinearityModel, PowerTerm};
use normsol::quadrature::RootConfig;
use normsol::variational::*;

fn power_model(c1: f64, e1: f64, c2: f64, e2: f64) -> NonlinearityModel {
    NonlinearityModel::power_sum(
        2.0,
        2.0,
        vec![PowerTerm { coeff: c1, exponent: e1 }, PowerTerm { coeff: c2, exponent: e2 }],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn h_is_exactly_fprime_s_minus_2f(s in -50.0f64..50.0, beta in 2.5f64..14.0) {
        let model = pure_power(beta).unwrap();
        let expect = model.f_prime(s) * s - 2.0 * model.f(s);
        prop_assert_eq!(model.h(s).to_bits(), expect.to_bits());
    }

    #[test]
    fn z_positive_where_f_positive(c1 in 0.1f64..3.0, e1 in 2.5f64..5.0, c2 in 0.1f64..3.0, de in 0.5f64..4.0, s in 0.01f64..20.0) {
        let model = power_model(c1, e1, c2, e1 + de);
        prop_assume!(model.f(s) > 0.0);
        prop_assert!(model.z(s) > 0.0);
    }

    #[test]
    fn peak_increases_with_lambda(c1 in 0.1f64..3.0, e1 in 2.5f64..5.0, c2 in 0.1f64..3.0, de in 0.5f64..4.0,
                                  l in 1e-2f64..1e2, ratio in 1.01f64..10.0) {
        let model = power_model(c1, e1, c2, e1 + de);
        let cfg = RootConfig::default();
        let a = m_lambda(&model, l, &cfg).unwrap();
        let b = m_lambda(&model, l * ratio, &cfg).unwrap();
        prop_assert!(b > a, "m({}) = {} vs m({}) = {}", l, a, l * ratio, b);
    }

    #[test]
    fn cubic_mass_matches_closed_form(l in 1e-3f64..1e3) {
        let p = rho_lambda(&cubic(), l, &BranchConfig::default()).unwrap();
        prop_assert!((p.rho_lambda - 4.0 * l.sqrt()).abs() <= 1e-8 * (1.0 + l.sqrt()));
    }

    #[test]
    fn fiber_scaling_is_exact(amp in 0.2f64..3.0, width in 0.5f64..2.0, shift in -2.0f64..2.0, m in 1u32..3) {
        let field = FieldState::from_fn(30.0, 4096, m, |x| amp * (-((x - shift) / width).powi(2)).exp()).unwrap();
        let spectral = Spectral::for_field(&field);
        let d0 = spectral.derivative_norm_sq(&field.values, field.half_length, m);
        for s in [0.5, 1.0, 2.0, 5.0] {
            let g = fiber_scale(&spectral, &field, s).unwrap();
            prop_assert!((g.mass() - field.mass()).abs() <= 1e-10 * field.mass());
            let d1 = spectral.derivative_norm_sq(&g.values, g.half_length, m);
            let target = s.powi(2 * m as i32) * d0;
            prop_assert!((d1 - target).abs() <= 1e-8 * target, "s={}: {} vs {}", s, d1, target);
        }
    }

    #[test]
    fn psi_increases_for_supercritical_powers(amp in 0.2f64..2.0, width in 0.5f64..2.0, m in 1u32..3, extra in 0.5f64..4.0) {
        let model = pure_power(2.0 + 4.0 * m as f64 + extra).unwrap();
        let field = FieldState::from_fn(20.0, 256, m, |x| amp * (-(x / width).powi(2)).exp()).unwrap();
        let mut last = f64::NEG_INFINITY;
        let mut s = 1e-2;
        while s < 1e2 {
            let v = psi(&field, &model, s);
            prop_assert!(v > last, "psi({}) = {} after {}", s, v, last);
            last = v;
            s *= 1.5;
        }
    }

    #[test]
    fn gn_quotient_invariant_under_amplitude_and_dilation(a in 0.1f64..10.0, k in 0.5f64..2.0, p in 2.5f64..8.0, m in 1u32..3) {
        let base = FieldState::from_fn(40.0, 1024, m, |x| (-x * x).exp()).unwrap();
        let other = FieldState::from_fn(40.0, 1024, m, |x| a * (-(k * x).powi(2)).exp()).unwrap();
        let s = Spectral::for_field(&base);
        let (q0, q1) = (gn_quotient(&s, &base, p), gn_quotient(&s, &other, p));
        prop_assert!((q0 - q1).abs() <= 1e-9 * q0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn subcritical_descent_never_increases_energy(rho in 0.5f64..6.0) {
        let opts = MinimizeOptions { n: 512, half_length: 40.0, ..MinimizeOptions::default() };
        let r = minimize_on_d(&cubic(), 1, rho, &opts).unwrap();
        for segment in &r.energy_history {
            for w in segment.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
            }
        }
        prop_assert!(r.energy < 0.0 && r.lambda > 0.0);
        let lambda = (rho / 4.0).powi(2);
        prop_assert!((r.lambda - lambda).abs() <= 1e-4 * (1.0 + lambda));
    }

    #[test]
    fn supercritical_descent_never_increases_energy(rho in 0.5f64..2.0, beta in 7.0f64..10.0) {
        let model = pure_power(beta).unwrap();
        let r = minimize_on_dm(&model, 1, rho, &MinimizeOptions::default()).unwrap();
        for segment in &r.energy_history {
            for w in segment.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
            }
        }
        prop_assert!(r.energy > 0.0 && r.lambda > 0.0);
        prop_assert!((r.mass - rho).abs() <= 1e-6 && r.m_residual <= 1e-6);
        prop_assert!(r.stationarity_residual <= 1e-6);
    }
}
