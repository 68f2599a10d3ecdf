//! Analytic equilibrium configurations with their closed-form bounds, and a
//! factory for one-dimensional solutions `u_i = φ(h·(ω·k))`.
//!
//! Every configuration is an exact solution of `L u_i = f(i, u_i)` on the
//! whole lattice: `u` is an analytic site rule and `f` is given as a site rule
//! (or an autonomous rule for the one-dimensional factory).

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use crate::diagnostics::{SiteRule, SourceTerm};
use crate::e_two_pi;
use crate::error::{Error, Result};
use crate::lattice::{make_window, ScalarField, SiteFn, SiteIndex};

/// Which configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExampleId {
    /// Linear ramp with a single bumped half-row.
    Bump,
    /// Ramp plus an `arctan` ridge damped by a Gaussian.
    Arctan,
    /// Ramp plus a Gaussian bump.
    Gaussian,
    /// One-dimensional semilinear profile plus the bumped half-row.
    Semilinear,
    /// One-dimensional solution from the factory.
    OneD,
}

impl ExampleId {
    pub fn label(self) -> &'static str {
        match self {
            ExampleId::Bump => "ex1",
            ExampleId::Arctan => "ex2-arctan",
            ExampleId::Gaussian => "ex3-exp",
            ExampleId::Semilinear => "ex4-semilinear",
            ExampleId::OneD => "oned-factory",
        }
    }
}

/// Direction of an analytic bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundDirection {
    /// The computed quantity must not exceed the bound.
    Upper,
    /// The computed quantity must not fall below the bound.
    Lower,
}

/// Quantity an analytic bound refers to (all for the `+` family).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quantity {
    Kappa0,
    Kappa1,
    Kappa2,
    Kappa3,
    Kappa4,
    Kappa5,
    Kappa6,
    Kappa7,
    Lhs,
    BoundCh,
}

impl Quantity {
    pub fn label(self) -> &'static str {
        match self {
            Quantity::Kappa0 => "kappa0",
            Quantity::Kappa1 => "kappa1",
            Quantity::Kappa2 => "kappa2",
            Quantity::Kappa3 => "kappa3",
            Quantity::Kappa4 => "kappa4",
            Quantity::Kappa5 => "kappa5",
            Quantity::Kappa6 => "kappa6",
            Quantity::Kappa7 => "kappa7",
            Quantity::Lhs => "lhs",
            Quantity::BoundCh => "Ch",
        }
    }
}

/// A closed-form bound evaluated at the example's `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticBound {
    pub quantity: Quantity,
    pub direction: BoundDirection,
    pub value: f64,
}

impl AnalyticBound {
    pub fn upper(quantity: Quantity, value: f64) -> Self {
        Self { quantity, direction: BoundDirection::Upper, value }
    }

    pub fn lower(quantity: Quantity, value: f64) -> Self {
        Self { quantity, direction: BoundDirection::Lower, value }
    }

    /// `"kappa2_upper"`, `"lhs_lower"`, …
    pub fn name(&self) -> String {
        let dir = match self.direction {
            BoundDirection::Upper => "upper",
            BoundDirection::Lower => "lower",
        };
        format!("{}_{}", self.quantity.label(), dir)
    }

    /// Whether `computed` respects the bound.
    pub fn respected_by(&self, computed: f64) -> bool {
        match self.direction {
            BoundDirection::Upper => computed <= self.value,
            BoundDirection::Lower => computed >= self.value,
        }
    }
}

/// Admissible mesh sizes `0 < h < max` (or `≤ max`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HRange {
    pub max: f64,
    pub max_inclusive: bool,
}

impl HRange {
    pub fn contains(&self, h: f64) -> bool {
        h > 0.0 && h.is_finite() && if self.max_inclusive { h <= self.max } else { h < self.max }
    }

    pub fn describe(&self) -> String {
        format!("0 < h {} {}", if self.max_inclusive { "≤" } else { "<" }, self.max)
    }

    fn check(&self, h: f64) -> Result<()> {
        if self.contains(h) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("h = {h} violates the constraint {}", self.describe())))
        }
    }
}

/// One configuration at a fixed `h`, with everything needed to diagnose it.
#[derive(Clone)]
pub struct ExampleSpec {
    pub id: ExampleId,
    pub h: f64,
    pub u: SiteFn,
    pub source: SourceTerm,
    /// Limit angle of both increment families at infinity.
    pub theta_inf: f64,
    pub bounds: Vec<AnalyticBound>,
    pub h_range: HRange,
    /// Further named constants (e.g. sup values found numerically).
    pub constants: Vec<(String, f64)>,
    /// Window κ₀ is a lower estimate of the lattice sup; when an analytic
    /// value is known it is used for κ₅ instead.
    pub kappa0_analytic: Option<f64>,
}

impl std::fmt::Debug for ExampleSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExampleSpec")
            .field("id", &self.id)
            .field("h", &self.h)
            .field("theta_inf", &self.theta_inf)
            .field("bounds", &self.bounds)
            .field("constants", &self.constants)
            .finish_non_exhaustive()
    }
}

/// Halo used when sampling example fields: the widest diagnostic reads `u`
/// three sites away from a core site.
pub const EXAMPLE_HALO: usize = 3;

impl ExampleSpec {
    /// Sample `u` on the square window of the given radius.
    pub fn field(&self, radius: f64) -> Result<ScalarField> {
        ScalarField::sample(self.u.clone(), make_window(self.h, radius, EXAMPLE_HALO)?)
    }

    /// Value of a named constant.
    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn bound(&self, quantity: Quantity, direction: BoundDirection) -> Option<f64> {
        self.bounds.iter().find(|b| b.quantity == quantity && b.direction == direction).map(|b| b.value)
    }
}

/// `f` of the bumped half-row `w` (`w = h⁴` on `{k₂ = 0, k₁ > 0}`): `L w` at every site.
pub fn bump_source(h: f64, s: SiteIndex) -> f64 {
    let h2 = h * h;
    match (s.k1, s.k2) {
        (0, 0) => h2,
        (k1, 1 | -1) if k1 > 0 => h2,
        (1, 0) => -3.0 * h2,
        (k1, 0) if k1 > 1 => -2.0 * h2,
        _ => 0.0,
    }
}

fn bump(h: f64, s: SiteIndex) -> f64 {
    if s.k2 == 0 && s.k1 > 0 {
        h.powi(4)
    } else {
        0.0
    }
}

/// Ramp `h·k₂` with the bumped half-row; `f` is the four-valued site table.
pub fn build_example1(h: f64) -> Result<ExampleSpec> {
    let range = HRange { max: 1.0, max_inclusive: false };
    range.check(h)?;
    let u: SiteFn = Arc::new(move |s| if s.k2 == 0 && s.k1 > 0 { h.powi(4) } else { h * s.k2 as f64 });
    let h3 = h.powi(3);
    let h4 = h.powi(4);
    let h9 = h.powi(9);
    let e = e_two_pi();
    let bounds = vec![
        AnalyticBound::upper(Quantity::Kappa0, 5.0),
        AnalyticBound::upper(Quantity::Kappa2, 21.0 * h3),
        AnalyticBound::upper(Quantity::Kappa3, 8.0 * h9),
        AnalyticBound::upper(Quantity::Kappa4, 5.0 * SQRT_2 * h9),
        AnalyticBound::upper(Quantity::Kappa5, 5.0 * SQRT_2 * h3),
        AnalyticBound::upper(Quantity::Kappa6, 29.0 * h3),
        AnalyticBound::upper(Quantity::Kappa7, 7.0 * h9),
        AnalyticBound::lower(Quantity::Lhs, 16.0 / (PI * PI) * h4),
        AnalyticBound::upper(Quantity::BoundCh, 4.0 * (57.0 + 10.0 * SQRT_2 + 2.0 * e * (8.0 + 5.0 * SQRT_2)) * h4),
    ];
    Ok(ExampleSpec {
        id: ExampleId::Bump,
        h,
        u,
        source: SourceTerm::from_site_fn(move |s| bump_source(h, s)),
        theta_inf: PI / 2.0,
        bounds,
        h_range: range,
        constants: vec![],
        kappa0_analytic: Some(5.0),
    })
}

/// Closed forms of the bump configuration's constants (`+` family, `θ∞ = π/2`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpClosedForms {
    pub kappa2: f64,
    pub kappa3: f64,
    pub kappa4: f64,
    pub kappa5: f64,
    pub kappa6: f64,
    pub kappa7: f64,
    pub lhs: f64,
}

/// Exact values of the bump configuration's sums, from direct evaluation of
/// the handful of nonzero sites (`a = π/2 − arctan(1/h³)`, `s = √(1+h⁶)`).
pub fn bump_closed_forms(h: f64) -> BumpClosedForms {
    let h3 = h.powi(3);
    let h6 = h.powi(6);
    // π/2 − arctan(1/h³) = arctan(h³) for h > 0, which avoids cancellation.
    let a = h3.atan();
    let s = (1.0 + h6).sqrt();
    BumpClosedForms {
        kappa2: (12.0 + 9.0 * h6 - 2.0 * h3) * a * a / h3,
        kappa3: 4.0 * (1.0 + h6) * a.powi(4) / h3,
        kappa4: s * a.powi(3) / (h * h) * (h * h + 4.0 * (s - 1.0) / h),
        kappa5: 5.0 * s * a,
        kappa6: (12.0 + 2.0 * h3 + 15.0 * h6) * a * a / h3,
        kappa7: a * a / h3 * ((s + h3 - 1.0).powi(2) + 3.0 * (s - 1.0).powi(2)),
        lhs: a * a / (h * h) * (4.0 * (1.0 + h6) + 1.0 + (1.0 - h3).powi(2) + 2.0),
    }
}

/// `c₀ = 4[4π/(289(4 + 9π²))]²` of the lower bound `lhs ≥ c₀h²` for the arctan ridge.
pub fn arctan_c0() -> f64 {
    let x = 4.0 * PI / (289.0 * (4.0 + 9.0 * PI * PI));
    4.0 * x * x
}

/// `u = h·k₂ + (h/π)e^{−x₂²}arctan(x₁)` with `f = L u` in closed form.
pub fn build_example2(h: f64) -> Result<ExampleSpec> {
    let range = HRange { max: 1.0, max_inclusive: true };
    range.check(h)?;
    let u: SiteFn = Arc::new(move |s| {
        let (x1, x2) = s.position(h);
        h * s.k2 as f64 + (h / PI) * (-x2 * x2).exp() * x1.atan()
    });
    let f = move |s: SiteIndex| {
        let (x1, x2) = s.position(h);
        let g = (-x2 * x2).exp();
        let a = x1.atan();
        let da = ((x1 + h).atan() + (x1 - h).atan() - 2.0 * a) / (h * h);
        let dg = ((-(x2 + h) * (x2 + h)).exp() + (-(x2 - h) * (x2 - h)).exp() - 2.0 * g) / (h * h);
        (h / PI) * (g * da + a * dg)
    };
    let bounds = vec![
        AnalyticBound::upper(Quantity::Kappa0, 5.0 / PI + 2.0),
        AnalyticBound::upper(Quantity::Kappa1, 1.5),
        AnalyticBound::lower(Quantity::Lhs, arctan_c0() * h * h),
    ];
    Ok(ExampleSpec {
        id: ExampleId::Arctan,
        h,
        u,
        source: SourceTerm::from_site_fn(f),
        theta_inf: PI / 2.0,
        bounds,
        h_range: range,
        constants: vec![("c0".into(), arctan_c0())],
        kappa0_analytic: Some(5.0 / PI + 2.0),
    })
}

/// Golden-section search for a local maximum of `f` on `[a, b]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

/// `sup |f|` on `[a, b]`: a uniform scan locates the best cell, which is then
/// refined by golden-section search (robust for functions with several bumps).
pub fn sup_abs<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, samples: usize) -> f64 {
    let n = samples.max(2);
    let step = (b - a) / (n - 1) as f64;
    let g = |t: f64| f(t).abs();
    let (best, _) =
        (0..n).map(|k| (k, g(a + step * k as f64))).fold(
            (0, f64::NEG_INFINITY),
            |acc, (k, v)| {
                if v > acc.1 {
                    (k, v)
                } else {
                    acc
                }
            },
        );
    let lo = (a + step * (best as f64 - 1.0)).max(a);
    let hi = (a + step * (best as f64 + 1.0)).min(b);
    let (_, refined) = golden_max(g, lo, hi, 1e-12);
    refined.max(g(a + step * best as f64))
}

/// `S = sup_{t ≥ 0} t·e^{−t²+2t}(t² + 2)`, maximised on `[0, 5]` where the
/// function is unimodal and beyond which it decays.
pub fn gaussian_sup_s() -> f64 {
    golden_max(|t| t * (-t * t + 2.0 * t).exp() * (t * t + 2.0), 0.0, 5.0, 1e-12).1
}

/// `u = h·k₂ + (h/2)e^{−|x|²}` with `f = L u` in closed form.
pub fn build_example3(h: f64) -> Result<ExampleSpec> {
    let range = HRange { max: 1.0, max_inclusive: true };
    range.check(h)?;
    let u: SiteFn = Arc::new(move |s| {
        let (x1, x2) = s.position(h);
        h * s.k2 as f64 + 0.5 * h * (-(x1 * x1 + x2 * x2)).exp()
    });
    let f = move |s: SiteIndex| {
        let (x1, x2) = s.position(h);
        let g = (-(x1 * x1 + x2 * x2)).exp();
        let e = (-h * h).exp();
        let axis = |x: f64| (-2.0 * h * x).exp() * e + (2.0 * h * x).exp() * e - 2.0;
        g / (2.0 * h) * (axis(x1) + axis(x2))
    };
    let s_sup = gaussian_sup_s();
    Ok(ExampleSpec {
        id: ExampleId::Gaussian,
        h,
        u,
        source: SourceTerm::from_site_fn(f),
        theta_inf: PI / 2.0,
        bounds: vec![AnalyticBound::upper(Quantity::Kappa0, 64.0 * s_sup)],
        h_range: range,
        constants: vec![("S".into(), s_sup)],
        kappa0_analytic: Some(64.0 * s_sup),
    })
}

/// Sup norms of a semilinear profile and its nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileNorms {
    /// `‖ṽ′‖_∞`.
    pub v1: f64,
    /// `‖ṽ⁽⁴⁾‖_∞`.
    pub v4: f64,
    /// `‖g′‖_∞`.
    pub g1: f64,
    /// `‖g″‖_∞`.
    pub g2: f64,
}

/// Strictly increasing `ṽ` solving `ṽ″ = g(ṽ)`, with `g′` and sup norms.
#[derive(Clone)]
pub struct SemilinearProfile {
    pub name: String,
    pub v: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub dg: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub norms: ProfileNorms,
}

impl std::fmt::Debug for SemilinearProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SemilinearProfile").field("name", &self.name).field("norms", &self.norms).finish()
    }
}

impl SemilinearProfile {
    /// `ṽ(t) = 4 arctan(eᵗ)`, `g = sin`: `‖ṽ′‖ = 2`, `‖g′‖ = ‖g″‖ = 1` and
    /// `‖ṽ⁽⁴⁾‖` maximised numerically from `ṽ⁽⁴⁾ = −2 sech t tanh t (1 − 6 sech² t)`.
    pub fn sine_gordon() -> Self {
        let v4 = |t: f64| {
            let sech = 1.0 / t.cosh();
            -2.0 * sech * t.tanh() * (1.0 - 6.0 * sech * sech)
        };
        Self {
            name: "sine-gordon".into(),
            v: Arc::new(|t: f64| 4.0 * t.exp().atan()),
            dg: Arc::new(|r: f64| r.cos()),
            norms: ProfileNorms { v1: 2.0, v4: sup_abs(v4, 0.0, 20.0, 4001), g1: 1.0, g2: 1.0 },
        }
    }

    /// `ṽ(t) = t`, `g ≡ 0`: reproduces the bump configuration.
    pub fn linear() -> Self {
        Self {
            name: "linear".into(),
            v: Arc::new(|t| t),
            dg: Arc::new(|_| 0.0),
            norms: ProfileNorms { v1: 1.0, v4: 0.0, g1: 0.0, g2: 0.0 },
        }
    }

    /// Caller-supplied profile and norms.
    pub fn custom<V, G>(name: &str, v: V, dg: G, norms: ProfileNorms) -> Self
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { name: name.into(), v: Arc::new(v), dg: Arc::new(dg), norms }
    }
}

/// `ṽ(x₂)` plus the bumped half-row; `f = L v + L w`, `L_f(i, ·) = g′(ṽ(x₂))`.
pub fn build_example4(h: f64, profile: &SemilinearProfile) -> Result<ExampleSpec> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("h = {h} must be positive")));
    }
    let v = profile.v.clone();
    let d = (v(h) - v(0.0)) / h;
    if !(d > 0.0) {
        return Err(Error::InvalidArgument(format!("profile must be strictly increasing: D₂⁺v at the origin is {d}")));
    }
    let threshold = 1f64.min(d.cbrt());
    if h >= threshold {
        return Err(Error::InvalidArgument(format!(
            "h = {h} violates 0 < h < min(1, (D₂⁺v)^(1/3)) = {threshold} (D₂⁺v = {d})"
        )));
    }
    let vu = v.clone();
    let u: SiteFn = Arc::new(move |s| vu(h * s.k2 as f64) + bump(h, s));
    let vf = v.clone();
    let f = move |s: SiteIndex| {
        let x2 = h * s.k2 as f64;
        let lv = (vf(x2 + h) + vf(x2 - h) - 2.0 * vf(x2)) / (h * h);
        lv + bump_source(h, s)
    };
    let vl = v.clone();
    let dg = profile.dg.clone();
    let lf: SiteRule = Arc::new(move |s, _| dg(vl(h * s.k2 as f64)));
    let source = SourceTerm::new(Arc::new(move |s, _| f(s)), lf);
    let n = profile.norms;
    let kappa0 = n.v4 / 6.0 + n.g2 * n.v1 / 2.0 + 5.0 + n.g1;
    let s_const = n.v1 + 1.0;
    let (h3, h6, h9) = (h.powi(3), h.powi(6), h.powi(9));
    let d2 = d * d;
    let e = e_two_pi();
    let c1 =
        4.0 * ((36.0 * s_const * s_const + 16.0 * e * (1.0 + SQRT_2 * s_const)) / d2 + 2.0 * SQRT_2 * kappa0 + 24.0);
    let bounds = vec![
        AnalyticBound::upper(Quantity::Kappa0, kappa0),
        AnalyticBound::upper(Quantity::Kappa2, 12.0 * (s_const / d).powi(2) * h3),
        AnalyticBound::upper(Quantity::Kappa3, 8.0 * h9 / d2),
        AnalyticBound::upper(Quantity::Kappa4, 8.0 * SQRT_2 * s_const * h6 / d2),
        AnalyticBound::upper(Quantity::Kappa5, SQRT_2 * kappa0 * h3),
        AnalyticBound::upper(Quantity::Kappa6, (8.0 * s_const * s_const * h / d2 + 24.0) * h3),
        AnalyticBound::upper(Quantity::Kappa7, 16.0 * s_const * s_const * h3 / d2),
        AnalyticBound::lower(Quantity::Lhs, 16.0 / (PI * PI) * h.powi(4)),
        AnalyticBound::upper(Quantity::BoundCh, c1 * h.powi(4)),
    ];
    Ok(ExampleSpec {
        id: ExampleId::Semilinear,
        h,
        u,
        source,
        theta_inf: PI / 2.0,
        bounds,
        h_range: HRange { max: threshold, max_inclusive: false },
        constants: vec![
            ("D".into(), d),
            ("S".into(), s_const),
            ("c1".into(), c1),
            ("h_max".into(), threshold),
            ("v4_norm".into(), n.v4),
        ],
        kappa0_analytic: Some(kappa0),
    })
}

/// Strictly monotone `φ` with derivative and inverse.
#[derive(Clone)]
pub struct MonotoneProfile {
    pub name: String,
    pub phi: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub dphi: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub inverse: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for MonotoneProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MonotoneProfile").field("name", &self.name).finish_non_exhaustive()
    }
}

impl MonotoneProfile {
    pub fn new<P, D, I>(name: &str, phi: P, dphi: D, inverse: I) -> Self
    where
        P: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
        I: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { name: name.into(), phi: Arc::new(phi), dphi: Arc::new(dphi), inverse: Arc::new(inverse) }
    }

    /// `φ(t) = t`.
    pub fn identity() -> Self {
        Self::new("identity", |t| t, |_| 1.0, |r| r)
    }

    /// `φ(t) = tanh(t/√2)`, the Allen–Cahn kink.
    pub fn tanh_kink() -> Self {
        Self::new(
            "tanh",
            |t| (t / SQRT_2).tanh(),
            |t| {
                let c = (t / SQRT_2).cosh();
                1.0 / (SQRT_2 * c * c)
            },
            |r| SQRT_2 * r.atanh(),
        )
    }

    /// `φ(t) = 4 arctan(eᵗ)`, the sine-Gordon kink.
    pub fn sine_gordon_kink() -> Self {
        Self::new("sine-gordon", |t| 4.0 * t.exp().atan(), |t| 2.0 / t.cosh(), |r| (r / 4.0).tan().ln())
    }

    /// Built-in profile by name (`identity`, `tanh`, `sine-gordon`).
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "identity" | "linear" => Ok(Self::identity()),
            "tanh" => Ok(Self::tanh_kink()),
            "sine-gordon" => Ok(Self::sine_gordon_kink()),
            other => Err(Error::InvalidArgument(format!(
                "unknown profile '{other}' (expected identity, tanh or sine-gordon)"
            ))),
        }
    }

    /// Sign of `φ′` if it is nonzero and constant on a sample grid of `[−20, 20]`.
    fn monotone_sign(&self) -> Option<f64> {
        let samples: Vec<f64> = (0..=4000).map(|k| (self.dphi)(-20.0 + 0.01 * k as f64)).collect();
        if samples.iter().all(|&d| d > 0.0) {
            Some(1.0)
        } else if samples.iter().all(|&d| d < 0.0) {
            Some(-1.0)
        } else {
            None
        }
    }
}

/// A one-dimensional solution `u_k = φ(h·(ω·k))` of `L u = f̂(u)`.
#[derive(Clone)]
pub struct OneDSolution {
    pub h: f64,
    pub omega: (i64, i64),
    pub u: SiteFn,
    pub source: SourceTerm,
    /// Angle of `(D₁u, D₂u)`, constant over the lattice.
    pub theta: f64,
}

impl std::fmt::Debug for OneDSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OneDSolution").field("h", &self.h).field("omega", &self.omega).finish_non_exhaustive()
    }
}

/// Build `u_k = φ(h·(ω·k))` and the autonomous source `f̂ = Ψ∘φ⁻¹` with
/// `Ψ(s) = Σ_j [φ(s + hω_j) + φ(s − hω_j) − 2φ(s)]/h²`, so `L u = f̂(u)` holds
/// by construction; `L_f = f̂′ = Ψ′/φ′∘φ⁻¹`.
///
/// `ω` is an integer lattice direction so that `ω·k` is exact.
pub fn build_1d_solution(phi: &MonotoneProfile, omega: (i64, i64), h: f64) -> Result<OneDSolution> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("h = {h} must be positive")));
    }
    if omega == (0, 0) {
        return Err(Error::InvalidArgument("ω must be nonzero".into()));
    }
    let sign = phi
        .monotone_sign()
        .ok_or_else(|| Error::InvalidArgument(format!("profile '{}' is not strictly monotone", phi.name)))?;
    let (w1, w2) = (omega.0 as f64, omega.1 as f64);
    let p = phi.phi.clone();
    let u: SiteFn = Arc::new(move |s| p(h * (omega.0 * s.k1 + omega.1 * s.k2) as f64));
    let p = phi.phi.clone();
    let psi = move |s: f64| {
        let mut acc = 0.0;
        for w in [w1, w2] {
            acc += (p(s + h * w) + p(s - h * w) - 2.0 * p(s)) / (h * h);
        }
        acc
    };
    let dp = phi.dphi.clone();
    let dpsi = move |s: f64| {
        let mut acc = 0.0;
        for w in [w1, w2] {
            acc += (dp(s + h * w) + dp(s - h * w) - 2.0 * dp(s)) / (h * h);
        }
        acc
    };
    let (inv1, inv2, dp2) = (phi.inverse.clone(), phi.inverse.clone(), phi.dphi.clone());
    let source = SourceTerm::autonomous(
        move |r| psi(inv1(r)),
        move |r| {
            let s = inv2(r);
            dpsi(s) / dp2(s)
        },
    );
    let theta = crate::angular::principal_angle(sign * w1, sign * w2);
    Ok(OneDSolution { h, omega, u, source, theta })
}

impl OneDSolution {
    /// Wrap as an [`ExampleSpec`] (no analytic bounds; `θ∞` is the constant angle).
    pub fn into_spec(self) -> ExampleSpec {
        ExampleSpec {
            id: ExampleId::OneD,
            h: self.h,
            u: self.u,
            source: self.source,
            theta_inf: self.theta,
            bounds: vec![],
            h_range: HRange { max: f64::INFINITY, max_inclusive: false },
            constants: vec![],
            kappa0_analytic: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::lap;

    #[test]
    fn bump_source_matches_laplacian() {
        for h in [0.5, 0.25, 0.9] {
            let ex = build_example1(h).unwrap();
            let u = ex.field(3.0).unwrap();
            let l = lap(&u).unwrap();
            for s in u.window().core_sites() {
                let f = bump_source(h, s);
                assert!((l.at(s).unwrap() - f).abs() <= 1e-14, "h={h} site {s:?}");
            }
        }
        assert_eq!(bump_source(0.5, SiteIndex::new(1, 0)), -0.75);
        assert_eq!(bump_source(0.5, SiteIndex::new(3, 1)), 0.25);
        assert_eq!(bump_source(0.5, SiteIndex::new(0, 0)), 0.25);
        assert_eq!(bump_source(0.5, SiteIndex::new(0, 1)), 0.0);
    }

    #[test]
    fn h_constraints() {
        assert!(build_example1(1.0).is_err());
        assert!(build_example1(0.0).is_err());
        assert!(build_example2(1.0).is_ok());
        assert!(build_example2(1.5).is_err());
        assert!(build_example3(-0.1).is_err());
        let sg = SemilinearProfile::sine_gordon();
        assert!(build_example4(0.5, &sg).is_ok());
        // The sufficient condition h < (2/e)^{1/3} ≈ 0.9022 is not sharp:
        // D₂⁺v ≥ 1 up to h = 1, so the actual threshold is 1.
        assert!((2.0 / std::f64::consts::E).cbrt() < 0.903);
        assert!(build_example4(0.95, &sg).is_ok());
        assert!(build_example4(1.0, &sg).is_err());
        // A slowly increasing profile makes the cube-root constraint active.
        let slow = SemilinearProfile::custom(
            "slow",
            |t| 1e-3 * t,
            |_| 0.0,
            ProfileNorms { v1: 1e-3, v4: 0.0, g1: 0.0, g2: 0.0 },
        );
        assert!(build_example4(0.09, &slow).is_ok());
        let err = build_example4(0.11, &slow).unwrap_err().to_string();
        assert!(err.contains("min(1") && err.contains("0.1"), "{err}");
    }

    #[test]
    fn arctan_sample_values() {
        let ex = build_example2(1.0).unwrap();
        assert!(((ex.u)(SiteIndex::new(1, 0)) - 0.25).abs() < 1e-15);
        assert_eq!((ex.u)(SiteIndex::new(0, 0)), 0.0);
        // 4π/(289(4 + 9π²)) = 4.6843e-4, so c₀ = 4·(4.6843e-4)² ≈ 8.777e-7.
        let x = 4.0 * PI / (289.0 * (4.0 + 9.0 * PI * PI));
        assert_eq!(arctan_c0(), 4.0 * x * x);
        assert!((arctan_c0() - 8.777e-7).abs() < 0.001e-7);
    }

    #[test]
    fn gaussian_symmetry_and_sup() {
        let ex = build_example3(0.5).unwrap();
        assert_eq!((ex.u)(SiteIndex::new(1, 2)), (ex.u)(SiteIndex::new(-1, 2)));
        let s = gaussian_sup_s();
        assert!(s > 13.8 && s < 13.95, "{s}");
    }

    #[test]
    fn sine_gordon_norms() {
        let p = SemilinearProfile::sine_gordon();
        // ṽ⁽⁴⁾ at its maximum is about 6.93 (checked by fine sampling).
        let fine = (0..200_000)
            .map(|k| {
                let t = k as f64 * 1e-4;
                let s = 1.0 / t.cosh();
                (2.0 * s * t.tanh() * (1.0 - 6.0 * s * s)).abs()
            })
            .fold(0.0, f64::max);
        assert!((p.norms.v4 - fine).abs() < 1e-6 && p.norms.v4 >= fine);
    }

    #[test]
    fn linear_profile_reproduces_bump() {
        let h = 0.25;
        let a = build_example1(h).unwrap().field(2.0).unwrap();
        let b = build_example4(h, &SemilinearProfile::linear()).unwrap().field(2.0).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn one_d_factory_rejects_bad_input() {
        let flat = MonotoneProfile::new("flat", |_| 1.0, |_| 0.0, |r| r);
        assert!(build_1d_solution(&flat, (0, 1), 0.5).is_err());
        assert!(build_1d_solution(&MonotoneProfile::identity(), (0, 0), 0.5).is_err());
        let sol = build_1d_solution(&MonotoneProfile::identity(), (1, 1), 0.5).unwrap();
        assert!((sol.theta - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (t, v) = golden_max(|x| -(x - 1.3) * (x - 1.3) + 2.0, 0.0, 5.0, 1e-12);
        assert!((t - 1.3).abs() < 1e-6 && (v - 2.0).abs() < 1e-12);
        assert!((sup_abs(|x: f64| x.sin(), 0.0, 6.0, 100) - 1.0).abs() < 1e-12);
    }
}
