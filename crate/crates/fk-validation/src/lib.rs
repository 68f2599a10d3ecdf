//! Fixtures for the acceptance suite: the built-in configurations at a set of
//! mesh sizes, the diagnostic options they are run with, and seeded random
//! fields.
//!
//! Run the suite with `cargo test -p fk-validation --test acceptance`.

use fk_rigidity::diagnostics::{DiagnosticsOptions, Kappa0Choice, ThetaInfSource};
use fk_rigidity::examples::{
    build_example1, build_example2, build_example3, build_example4, ExampleSpec, SemilinearProfile,
};
use fk_rigidity::{LatticeWindow, ScalarField};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Window radius used for every example run.
pub const RADIUS: f64 = 10.0;

/// Options for a configuration: its own limit angle, its analytic `κ₀` when
/// known (the window value otherwise).
pub fn opts_for(spec: &ExampleSpec, tails: bool) -> DiagnosticsOptions {
    DiagnosticsOptions {
        theta_inf: ThetaInfSource::Given { plus: spec.theta_inf, minus: spec.theta_inf },
        kappa0: spec.kappa0_analytic.map_or(Kappa0Choice::Window, |k| Kappa0Choice::Given { plus: k, minus: k }),
        tails,
        worst_sites: 0,
    }
}

/// The four examples at their admissible mesh sizes among `hs`, sorted by
/// name and then by decreasing `h`.
pub fn cases(hs: &[f64]) -> Vec<(&'static str, f64, ExampleSpec)> {
    type Builder = Box<dyn Fn(f64) -> fk_rigidity::Result<ExampleSpec>>;
    let mut out = Vec::new();
    for &h in hs {
        let builders: [(&'static str, Builder); 4] = [
            ("ex1", Box::new(build_example1)),
            ("ex2", Box::new(build_example2)),
            ("ex3", Box::new(build_example3)),
            ("ex4", Box::new(|h| build_example4(h, &SemilinearProfile::sine_gordon()))),
        ];
        for (name, build) in builders {
            if let Ok(spec) = build(h) {
                out.push((name, h, spec));
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(b.0).then(b.1.total_cmp(&a.1)));
    out
}

/// Independent uniform values in `[−1, 1)` at every stored site.
pub fn random_field(rng: &mut ChaCha8Rng, w: LatticeWindow) -> ScalarField {
    let values = (0..w.stored_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    ScalarField::from_values(w, values).unwrap()
}

/// Like [`random_field`] but zero on the outermost stored ring.
pub fn random_compact(rng: &mut ChaCha8Rng, w: LatticeWindow) -> ScalarField {
    let (lo1, hi1) = (w.i1_min - w.halo, w.i1_max + w.halo);
    let (lo2, hi2) = (w.i2_min - w.halo, w.i2_max + w.halo);
    let values = (0..w.stored_len())
        .map(|i| {
            let s = w.stored_site(i);
            let v: f64 = rng.random_range(-1.0..1.0);
            if s.k1 == lo1 || s.k1 == hi1 || s.k2 == lo2 || s.k2 == hi2 {
                0.0
            } else {
                v
            }
        })
        .collect();
    ScalarField::from_values(w, values).unwrap()
}
