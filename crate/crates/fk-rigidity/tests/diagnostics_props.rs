//! Structural properties of the angular constants.

use std::f64::consts::PI;
use std::sync::Arc;

use fk_rigidity::angular::{decompose, Variant};
use fk_rigidity::diagnostics::{
    kappa_report, DiagnosticsOptions, Kappa0Choice, KappaReport, KappaSet, SourceTerm, ThetaInfSource,
};
use fk_rigidity::{LatticeWindow, ScalarField, SiteFn, SiteIndex};
use proptest::prelude::*;

fn arb_field() -> impl Strategy<Value = ScalarField> {
    (0.05f64..1.5).prop_flat_map(|h| {
        let w = LatticeWindow::new(h, -3, 3, -3, 3, 3).unwrap();
        prop::collection::vec(-3.0f64..3.0, w.stored_len()).prop_map(move |v| ScalarField::from_values(w, v).unwrap())
    })
}

fn opts(theta_inf: f64) -> DiagnosticsOptions {
    DiagnosticsOptions {
        theta_inf: ThetaInfSource::Given { plus: theta_inf, minus: theta_inf },
        kappa0: Kappa0Choice::Given { plus: 0.0, minus: 0.0 },
        tails: false,
        worst_sites: 3,
    }
}

fn report(u: &ScalarField, theta_inf: f64) -> KappaReport {
    kappa_report(u, &SourceTerm::zero(), &opts(theta_inf)).unwrap()
}

fn scaled(u: &ScalarField, lambda: f64) -> ScalarField {
    ScalarField::from_values(*u.window(), u.values().iter().map(|v| v * lambda).collect()).unwrap()
}

fn angular_terms(k: &KappaSet) -> [f64; 6] {
    [k.kappa2, k.kappa3, k.kappa4, k.kappa6, k.kappa7, k.lhs]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Scaling by a power of two is exact in floating point, so the scaling
    /// laws hold bitwise.
    #[test]
    fn scaling_laws(u in arb_field(), e in -3i32..=3, theta_inf in -3.0f64..3.0) {
        let lambda = 2f64.powi(e);
        let v = scaled(&u, lambda);
        let (a, b) = (decompose(&u).unwrap(), decompose(&v).unwrap());
        let (ra, rb) = (report(&u, theta_inf), report(&v, theta_inf));
        for variant in [Variant::Plus, Variant::Minus] {
            prop_assert_eq!(a.theta(variant).values(), b.theta(variant).values());
            for (x, y) in a.rho(variant).values().iter().zip(b.rho(variant).values()) {
                prop_assert_eq!(x * lambda, *y);
            }
            let (ka, kb) = (ra.kappas(variant), rb.kappas(variant));
            prop_assert_eq!(ka.kappa1 * lambda, kb.kappa1);
            prop_assert_eq!(ka.lhs * lambda * lambda, kb.lhs);
        }
    }

    #[test]
    fn zero_source_constant_kills_kappa5(u in arb_field(), theta_inf in -3.0f64..3.0) {
        let r = report(&u, theta_inf);
        prop_assert_eq!(r.plus.kappa5, 0.0);
        prop_assert_eq!(r.minus.kappa5, 0.0);
    }

    #[test]
    fn constant_angle_kills_the_angular_sums(h in 0.05f64..1.0, a in 0.2f64..3.0, rho_kappa0 in 0.0f64..5.0) {
        // u = g(h(k1 + k2)) with g increasing: both increments coincide, so
        // θ⁺ = θ⁻ = π/4 everywhere while ρ varies.
        let g = move |x: f64| a * x + (x).sin() * 0.5 * a.min(1.0) + x.powi(3) * 0.01;
        let w = LatticeWindow::new(h, -4, 4, -4, 4, 3).unwrap();
        let closure: SiteFn = Arc::new(move |s: SiteIndex| g(h * (s.k1 + s.k2) as f64));
        let u = ScalarField::sample(closure, w).unwrap();
        let mut o = opts(PI / 4.0);
        o.kappa0 = Kappa0Choice::Given { plus: rho_kappa0, minus: rho_kappa0 };
        let r = kappa_report(&u, &SourceTerm::zero(), &o).unwrap();
        for k in [&r.plus, &r.minus] {
            prop_assert_eq!(angular_terms(k), [0.0; 6]);
            prop_assert_eq!(k.kappa5, 0.0);
        }
    }

    #[test]
    fn translation_leaves_constants_unchanged(d1 in -20i64..20, d2 in -20i64..20, h in 0.1f64..1.0) {
        let f = move |s: SiteIndex| {
            let (x, y) = s.position(h);
            (x * 0.7 + 0.2).atan() + 0.3 * (y * 0.5).tanh() + 0.05 * (x * y).sin()
        };
        let w = LatticeWindow::new(h, -3, 3, -3, 3, 3).unwrap();
        let base = ScalarField::from_fn(w, f).unwrap();
        let moved_window = w.translated(d1, d2);
        let moved = ScalarField::from_fn(moved_window, move |s| f(SiteIndex::new(s.k1 - d1, s.k2 - d2))).unwrap();
        prop_assert_eq!(base.values(), moved.values());
        let (a, b) = (report(&base, 0.4), report(&moved, 0.4));
        prop_assert_eq!(a.plus, b.plus);
        prop_assert_eq!(a.minus, b.minus);
    }
}
