//! Polar decomposition of the complex increments
//! `U⁺ = D₁⁺u + i·D₂⁺u` and `U⁻ = D₁⁻u + i·D₂⁻u`.
//!
//! `ρ± = |U±|` and `θ± = arg U± ∈ (−π, π]`. Sites where `ρ = 0` have no angle;
//! they are stored with `θ = 0` and reported as invalid rather than aborting.

use crate::calculus::{apply_stencil, backward_at, forward_at};
use crate::error::Result;
use crate::exec;
use crate::lattice::{Axis, LatticeWindow, ScalarField, SiteIndex};
use std::f64::consts::PI;

/// Which complex increment: built from forward (`+`) or backward (`−`) differences.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Plus,
    Minus,
}

impl Variant {
    pub const BOTH: [Variant; 2] = [Variant::Plus, Variant::Minus];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Plus => "plus",
            Variant::Minus => "minus",
        }
    }
}

/// Principal angle of `(x, y)` in `(−π, π]`; `0` for the zero vector.
///
/// `atan2` returns `−π` for inputs such as `(−1, −0.0)`; that value is mapped
/// to `+π` so the half-open range is honoured.
pub fn principal_angle(x: f64, y: f64) -> f64 {
    if x == 0.0 && y == 0.0 {
        return 0.0;
    }
    let t = y.atan2(x);
    if t <= -PI {
        PI
    } else {
        t
    }
}

/// The pair `(D₁u, D₂u)` for the requested variant at one site.
#[inline]
pub fn gradient_at(u: &ScalarField, site: SiteIndex, variant: Variant) -> Option<(f64, f64)> {
    match variant {
        Variant::Plus => Some((forward_at(u, site, Axis::One)?, forward_at(u, site, Axis::Two)?)),
        Variant::Minus => Some((backward_at(u, site, Axis::One)?, backward_at(u, site, Axis::Two)?)),
    }
}

/// Per-site moduli and angles of both complex increments.
#[derive(Clone, Debug)]
pub struct AngularData {
    pub rho_plus: ScalarField,
    pub theta_plus: ScalarField,
    pub rho_minus: ScalarField,
    pub theta_minus: ScalarField,
    /// `sup` over valid core sites of `max_j |D_j⁺u|`.
    pub kappa1_plus: f64,
    /// `sup` over valid core sites of `max_j |D_j⁻u|`.
    pub kappa1_minus: f64,
}

impl AngularData {
    /// The window on which the angular fields are stored.
    pub fn window(&self) -> &LatticeWindow {
        self.rho_plus.window()
    }

    pub fn h(&self) -> f64 {
        self.rho_plus.h()
    }

    pub fn rho(&self, variant: Variant) -> &ScalarField {
        match variant {
            Variant::Plus => &self.rho_plus,
            Variant::Minus => &self.rho_minus,
        }
    }

    pub fn theta(&self, variant: Variant) -> &ScalarField {
        match variant {
            Variant::Plus => &self.theta_plus,
            Variant::Minus => &self.theta_minus,
        }
    }

    pub fn kappa1(&self, variant: Variant) -> f64 {
        match variant {
            Variant::Plus => self.kappa1_plus,
            Variant::Minus => self.kappa1_minus,
        }
    }

    /// Whether `ρ > 0` at `site` (so the angle is defined). `None` if unknown.
    pub fn is_valid(&self, site: SiteIndex, variant: Variant) -> Option<bool> {
        self.rho(variant).at(site).map(|r| r > 0.0)
    }

    /// Core sites where `ρ = 0` for the given variant, in row-major order.
    pub fn invalid_sites(&self, variant: Variant) -> Vec<SiteIndex> {
        self.window().core_sites().filter(|&s| self.is_valid(s, variant) == Some(false)).collect()
    }
}

fn polar_field(u: &ScalarField, variant: Variant, modulus: bool) -> Result<ScalarField> {
    apply_stencil(u, 1, move |u, s| {
        let (x, y) = gradient_at(u, s, variant)?;
        Some(if modulus { x.hypot(y) } else { principal_angle(x, y) })
    })
}

fn lipschitz_sup(u: &ScalarField, variant: Variant) -> f64 {
    let w = *u.window();
    let vals = exec::map_indexed(w.core_len(), |i| {
        let s = w.core_site(i);
        match gradient_at(u, s, variant) {
            Some((x, y)) if x != 0.0 || y != 0.0 => x.abs().max(y.abs()),
            _ => 0.0,
        }
    });
    exec::det_max(&vals).max(0.0)
}

/// Polar decomposition of both complex increments of `u`.
pub fn decompose(u: &ScalarField) -> Result<AngularData> {
    Ok(AngularData {
        rho_plus: polar_field(u, Variant::Plus, true)?,
        theta_plus: polar_field(u, Variant::Plus, false)?,
        rho_minus: polar_field(u, Variant::Minus, true)?,
        theta_minus: polar_field(u, Variant::Minus, false)?,
        kappa1_plus: lipschitz_sup(u, Variant::Plus),
        kappa1_minus: lipschitz_sup(u, Variant::Minus),
    })
}

/// Outcome of one structural assumption over the core.
#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionCheck {
    pub passed: bool,
    pub violations: usize,
    pub first_violation: Option<SiteIndex>,
}

impl AssumptionCheck {
    fn from_flags(window: &LatticeWindow, ok: &[bool]) -> Self {
        let violations = ok.iter().filter(|&&b| !b).count();
        let first_violation = ok.iter().position(|&b| !b).map(|i| window.core_site(i));
        Self { passed: violations == 0, violations, first_violation }
    }
}

/// Nonvanishing forward/backward gradients and vertical monotonicity.
#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    /// `Σ_j |u_{i+he_j} − u_i|² > 0` at every core site.
    pub nonvanishing_plus: AssumptionCheck,
    /// `Σ_j |u_i − u_{i−he_j}|² > 0` at every core site.
    pub nonvanishing_minus: AssumptionCheck,
    /// `u_{i+he₂} > u_i` at every core site.
    pub monotone: AssumptionCheck,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.nonvanishing_plus.passed && self.nonvanishing_minus.passed && self.monotone.passed
    }
}

/// Check the structural assumptions site by site over the core. Sites whose
/// stencil is unavailable count as violations.
pub fn check_assumptions(u: &ScalarField) -> AssumptionReport {
    let w = *u.window();
    let nonzero = |variant: Variant| {
        exec::map_indexed(w.core_len(), |i| {
            let s = w.core_site(i);
            let n = match variant {
                Variant::Plus => [s.shifted(Axis::One, 1), s.shifted(Axis::Two, 1)],
                Variant::Minus => [s.shifted(Axis::One, -1), s.shifted(Axis::Two, -1)],
            };
            match (u.at(s), u.at(n[0]), u.at(n[1])) {
                (Some(c), Some(a), Some(b)) => (a - c).powi(2) + (b - c).powi(2) > 0.0,
                _ => false,
            }
        })
    };
    let mono = exec::map_indexed(w.core_len(), |i| {
        let s = w.core_site(i);
        matches!((u.at(s), u.at(s.shifted(Axis::Two, 1))), (Some(c), Some(up)) if up > c)
    });
    AssumptionReport {
        nonvanishing_plus: AssumptionCheck::from_flags(&w, &nonzero(Variant::Plus)),
        nonvanishing_minus: AssumptionCheck::from_flags(&w, &nonzero(Variant::Minus)),
        monotone: AssumptionCheck::from_flags(&w, &mono),
    }
}
