//! Binomial weights, reconstruction of one-dimensional fields and the
//! vanishing test.

use std::sync::Arc;

use fk_rigidity::angular::decompose;
use fk_rigidity::examples::{build_1d_solution, MonotoneProfile};
use fk_rigidity::rigidity::{
    binomial_weights, check_vanishing, extract_ratios, pascal_row, reconstruct_1d, reconstruct_at, roundtrip_check,
    Profile1D,
};
use fk_rigidity::{LatticeWindow, ScalarField, SiteFn, SiteIndex};
use proptest::prelude::*;

/// Binomial coefficient in exact integer arithmetic.
fn binomial_exact(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

#[test]
fn pascal_rows_are_exact_up_to_thirty() {
    for n in 0..=30u64 {
        let row = pascal_row(n as usize);
        assert_eq!(row.len() as u64, n + 1);
        for (j, &v) in row.iter().enumerate() {
            assert_eq!(v as u128, binomial_exact(n, j as u64), "C({n}, {j})");
        }
        let next = pascal_row(n as usize + 1);
        for j in 1..=n as usize {
            assert_eq!(row[j - 1] + row[j], next[j]);
        }
    }
}

#[test]
fn degenerate_ratios_give_unit_weights() {
    for n in [1, 7, 65, 300] {
        let w0 = binomial_weights(n, 0.0).unwrap();
        let w1 = binomial_weights(n, 1.0).unwrap();
        assert_eq!(w0[0], 1.0);
        assert_eq!(w1[n], 1.0);
        assert_eq!(w0.iter().sum::<f64>(), 1.0);
        assert_eq!(w1.iter().sum::<f64>(), 1.0);
    }
    assert!(binomial_weights(61, -0.5).is_err());
    assert!(binomial_weights(60, 1.5).is_ok());
}

fn random_profile(h: f64, values: Vec<f64>, c: f64) -> Profile1D {
    Profile1D { h, m_min: -(values.len() as i64) / 2, values, c_plus: c, c_minus: c }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_are_a_probability_vector(n in 0usize..200, c in 0.0001f64..0.9999) {
        let w = binomial_weights(n, c).unwrap();
        prop_assert_eq!(w.len(), n + 1);
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn unit_ratio_reconstruction_is_a_diagonal_shift(
        values in prop::collection::vec(-5.0f64..5.0, 50..70),
        c in prop::sample::select(vec![0.0, 1.0]),
    ) {
        let p = random_profile(0.5, values, c);
        let raw = reconstruct_1d(&p, -9..=9, -11..=11).unwrap();
        for s in raw.window().core_sites() {
            let m = if c == 1.0 { s.k2 + s.k1 } else { s.k2 };
            prop_assert_eq!(raw.at(s).unwrap(), p.get(m).unwrap());
        }
        // Same values with the outer ring as halo, so increments exist on the core.
        let w = LatticeWindow::new(0.5, -8, 8, -10, 10, 1).unwrap();
        let u = ScalarField::from_fn(w, move |s| raw.at(s).unwrap()).unwrap().without_closure();
        let back = roundtrip_check(&u).unwrap();
        prop_assert_eq!(back.max_abs_error, 0.0);
    }

    #[test]
    fn affine_profiles_reconstruct_exactly(a in -3.0f64..3.0, b in -3.0f64..3.0, c in 0.01f64..0.99, k in -40i64..40, m in -5i64..5) {
        let values: Vec<f64> = (-60..=60).map(|m| a + b * m as f64).collect();
        let p = Profile1D { h: 0.1, m_min: -60, values, c_plus: c, c_minus: c };
        let got = reconstruct_at(&p, k, m).unwrap();
        let expected = a + b * (m as f64 + k.signum() as f64 * c * k.abs() as f64);
        prop_assert!((got - expected).abs() <= 1e-11 * (1.0 + a.abs() + 60.0 * b.abs()), "{} vs {}", got, expected);
    }

    #[test]
    fn factory_fields_roundtrip(
        h in 0.1f64..1.0,
        profile in prop::sample::select(vec!["identity", "tanh", "sine-gordon"]),
        omega in prop::sample::select(vec![(0i64, 1i64), (1, 1), (0, 2), (2, 2)]),
    ) {
        let phi = MonotoneProfile::by_name(profile).unwrap();
        let spec = build_1d_solution(&phi, omega, h).unwrap().into_spec();
        let u = spec.field(6.0 * h).unwrap();
        let v = check_vanishing(&decompose(&u).unwrap()).unwrap();
        prop_assert!(v.is_zero, "vanishing residual {:e}", v.residual);
        let r = roundtrip_check(&u).unwrap();
        prop_assert!(r.max_abs_error <= 1e-12 * (1.0 + u.max_abs()), "error {:e}", r.max_abs_error);
    }

    #[test]
    fn linear_fields_give_their_slope_ratio(a in 0.1f64..2.0, b in 0.5f64..2.0, h in 0.1f64..1.0) {
        let closure: SiteFn = Arc::new(move |s: SiteIndex| a * h * s.k1 as f64 + b * h * s.k2 as f64);
        let u = ScalarField::sample(closure, LatticeWindow::new(h, -4, 4, -4, 4, 2).unwrap()).unwrap();
        let r = extract_ratios(&u).unwrap();
        prop_assert!((r.c_plus - a / b).abs() <= 1e-10 * (a / b));
        prop_assert!((r.c_minus - a / b).abs() <= 1e-10 * (a / b));
    }
}

#[test]
fn non_integer_slope_identity_field_roundtrips() {
    // ω = (1, 2): c = 1/2 and the affine profile is reproduced exactly.
    let spec = build_1d_solution(&MonotoneProfile::identity(), (1, 2), 0.25).unwrap().into_spec();
    let u = spec.field(3.0).unwrap();
    let r = roundtrip_check(&u).unwrap();
    assert_eq!((r.c_plus, r.c_minus), (0.5, 0.5));
    assert!(r.max_abs_error <= 1e-12, "{:e}", r.max_abs_error);
}
