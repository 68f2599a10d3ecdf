//! Algebraic identities of the discrete calculus on arbitrary fields.

use fk_rigidity::calculus::{
    check_iterated_increments, check_laplacian_split, check_product_laplacian, check_product_rule, dminus, dplus, lap,
    lap_j, residual_scale, sum_by_parts_residual, Direction, Sign,
};
use fk_rigidity::{Axis, LatticeWindow, ScalarField};
use proptest::prelude::*;

const HALO: usize = 3;

fn window(h: f64) -> LatticeWindow {
    LatticeWindow::new(h, -3, 4, -2, 3, HALO).unwrap()
}

fn arb_field() -> impl Strategy<Value = ScalarField> {
    (0.05f64..1.5).prop_flat_map(|h| {
        let w = window(h);
        prop::collection::vec(-3.0f64..3.0, w.stored_len()).prop_map(move |v| ScalarField::from_values(w, v).unwrap())
    })
}

fn arb_pair() -> impl Strategy<Value = (ScalarField, ScalarField)> {
    (0.05f64..1.5).prop_flat_map(|h| {
        let w = window(h);
        let n = w.stored_len();
        (prop::collection::vec(-3.0f64..3.0, n), prop::collection::vec(-3.0f64..3.0, n))
            .prop_map(move |(a, b)| (ScalarField::from_values(w, a).unwrap(), ScalarField::from_values(w, b).unwrap()))
    })
}

/// `g` set to zero on the outermost stored ring.
fn compact(g: &ScalarField) -> ScalarField {
    let w = *g.window();
    let (lo1, hi1) = (w.i1_min - w.halo, w.i1_max + w.halo);
    let (lo2, hi2) = (w.i2_min - w.halo, w.i2_max + w.halo);
    let vals = (0..w.stored_len())
        .map(|i| {
            let s = w.stored_site(i);
            if s.k1 == lo1 || s.k1 == hi1 || s.k2 == lo2 || s.k2 == hi2 {
                0.0
            } else {
                g.values()[i]
            }
        })
        .collect();
    ScalarField::from_values(w, vals).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn backward_is_shifted_forward(u in arb_field()) {
        for axis in Axis::BOTH {
            let p = dplus(&u, axis).unwrap();
            let m = dminus(&u, axis).unwrap();
            for s in u.window().core_sites() {
                prop_assert_eq!(m.at(s).unwrap().to_bits(), p.at(s.shifted(axis, -1)).unwrap().to_bits());
            }
        }
    }

    #[test]
    fn second_difference_factors_through_increments(u in arb_field()) {
        for axis in Axis::BOTH {
            let l = lap_j(&u, axis).unwrap();
            let pm = dplus(&dminus(&u, axis).unwrap(), axis).unwrap();
            let mp = dminus(&dplus(&u, axis).unwrap(), axis).unwrap();
            let scale = residual_scale(&[u.max_abs()], u.h(), 2);
            for s in u.window().core_sites() {
                let v = l.at(s).unwrap();
                prop_assert!((v - pm.at(s).unwrap()).abs() <= 1e-12 * scale);
                prop_assert!((v - mp.at(s).unwrap()).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn laplacian_is_sum_of_axis_parts(u in arb_field()) {
        let full = lap(&u).unwrap();
        let l1 = lap_j(&u, Axis::One).unwrap();
        let l2 = lap_j(&u, Axis::Two).unwrap();
        for s in u.window().core_sites() {
            prop_assert_eq!(full.at(s).unwrap(), l1.at(s).unwrap() + l2.at(s).unwrap());
        }
        prop_assert_eq!(check_laplacian_split(&u).unwrap(), 0.0);
    }

    #[test]
    fn product_rules_hold((f, g) in arb_pair()) {
        let h = f.h();
        let norms = [f.max_abs(), g.max_abs()];
        for axis in Axis::BOTH {
            for sign in [Sign::Plus, Sign::Minus] {
                let r = check_product_rule(&f, &g, Direction::new(axis, sign)).unwrap();
                prop_assert!(r <= 1e-12 * residual_scale(&norms, h, 1), "product rule residual {r}");
            }
            let r = check_iterated_increments(&f, axis).unwrap();
            prop_assert!(r <= 1e-12 * residual_scale(&[f.max_abs()], h, 2), "iterated increments residual {r}");
        }
        let r = check_product_laplacian(&f, &g).unwrap();
        prop_assert!(r <= 1e-12 * residual_scale(&norms, h, 2), "product Laplacian residual {r}");
    }

    #[test]
    fn summation_by_parts_holds((f, g) in arb_pair()) {
        let g = compact(&g);
        let n = f.window().stored_len() as f64;
        for axis in Axis::BOTH {
            for sign in [Sign::Plus, Sign::Minus] {
                let r = sum_by_parts_residual(&f, &g, axis, sign).unwrap();
                let scale = n * residual_scale(&[f.max_abs(), g.max_abs()], f.h(), 1);
                prop_assert!(r <= 1e-12 * scale, "summation by parts residual {r}");
            }
        }
    }
}

#[test]
fn laplacian_is_second_order_consistent() {
    // u = sin(x)·cos(2y) has Δu = −5u; at the fixed point (0.4, 0.2) halving h
    // should divide the error by ~4.
    let mut errs = Vec::new();
    for (h, k1, k2) in [(0.1, 4, 2), (0.05, 8, 4), (0.025, 16, 8)] {
        let w = LatticeWindow::new(h, 0, 16, 0, 8, 1).unwrap();
        let u = ScalarField::from_fn(w, move |s| {
            let (x, y) = s.position(h);
            x.sin() * (2.0 * y).cos()
        })
        .unwrap();
        let value = lap(&u).unwrap().at(fk_rigidity::SiteIndex::new(k1, k2)).unwrap();
        errs.push((value + 5.0 * 0.4f64.sin() * 0.4f64.cos()).abs());
    }
    for pair in errs.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((3.8..4.2).contains(&ratio), "error ratio {ratio} in {errs:?}");
    }
}
