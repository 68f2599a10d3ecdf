//! Rigidity diagnostics: the source-term constant `κ₀`, the weighted angular
//! sums `κ₂ … κ₇`, the angular Dirichlet sum `Σρ²(|D⁺θ|² + |D⁻θ|²)`, the
//! constant `C` of the estimate `Σρ²(|D⁺θ|² + |D⁻θ|²) ≤ C·h`, and the per-site
//! remainder bound of the linearised equation.
//!
//! # Truncation
//!
//! Every sum over `hZ²` is truncated to the window core. When the field has an
//! analytic closure, the same per-site terms are evaluated on two Chebyshev
//! shells around the core — at distance `(0, W]` and `(W, 3W]` with `W` the
//! core half-width, i.e. radii `(R, 2R]` and `(2R, 4R]` — and the remainder
//! beyond is extrapolated geometrically. Without a closure the tail is
//! reported as unknown.
//!
//! # Validity
//!
//! `θ` is undefined where `ρ = 0`. A site contributes to the sums only when
//! `ρ > 0` on its whole reach-2 cross (the nine sites every term reads);
//! excluded sites are counted rather than silently dropped.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::angular::{decompose, AngularData, Variant};
use crate::calculus::laplacian_at;
use crate::e_two_pi;
use crate::error::{Error, Result};
use crate::exec;
use crate::lattice::{Axis, LatticeWindow, ScalarField, SiteIndex};

/// Rule `(site, value) ↦ real`.
pub type SiteRule = Arc<dyn Fn(SiteIndex, f64) -> f64 + Send + Sync>;

/// Right-hand side `f(i, u_i)` of `L u_i = f(i, u_i)` together with its
/// linearisations `L_f^±(i, u_i)`.
#[derive(Clone)]
pub struct SourceTerm {
    pub f: SiteRule,
    pub lf_plus: SiteRule,
    /// Linearisation for backward differences; `lf_plus` is used when absent.
    pub lf_minus: Option<SiteRule>,
}

impl std::fmt::Debug for SourceTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SourceTerm").field("lf_minus", &self.lf_minus.is_some()).finish_non_exhaustive()
    }
}

impl SourceTerm {
    pub fn new(f: SiteRule, lf_plus: SiteRule) -> Self {
        Self { f, lf_plus, lf_minus: None }
    }

    pub fn with_lf_minus(mut self, lf_minus: SiteRule) -> Self {
        self.lf_minus = Some(lf_minus);
        self
    }

    /// `f ≡ 0`, `L_f ≡ 0`.
    pub fn zero() -> Self {
        Self::new(Arc::new(|_, _| 0.0), Arc::new(|_, _| 0.0))
    }

    /// Source depending on the site only (`L_f ≡ 0`).
    pub fn from_site_fn<F>(f: F) -> Self
    where
        F: Fn(SiteIndex) -> f64 + Send + Sync + 'static,
    {
        Self::new(Arc::new(move |s, _| f(s)), Arc::new(|_, _| 0.0))
    }

    /// Autonomous source `f(i, r) = f̂(r)` with `L_f = f̂′`.
    pub fn autonomous<F, G>(fhat: F, dfhat: G) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(Arc::new(move |_, r| fhat(r)), Arc::new(move |_, r| dfhat(r)))
    }

    /// `f(site, value)`.
    pub fn eval(&self, site: SiteIndex, value: f64) -> f64 {
        (self.f)(site, value)
    }

    /// Linearisation used for the given increment family.
    pub fn linearization(&self, variant: Variant) -> &SiteRule {
        match variant {
            Variant::Plus => &self.lf_plus,
            Variant::Minus => self.lf_minus.as_ref().unwrap_or(&self.lf_plus),
        }
    }
}

fn collect_results<T>(raw: Vec<Result<T>>) -> Result<Vec<T>> {
    raw.into_iter().collect()
}

/// `κ₀` restricted to the core of `sites`:
/// `max_i h⁻² Σ_j |f(i±he_j, u_{i±he_j}) − f(i, u_i) − L_f^±(i, u_i)(u_{i±he_j} − u_i)|`.
fn kappa0_over(u: &ScalarField, src: &SourceTerm, variant: Variant, sites: &LatticeWindow) -> Result<f64> {
    let h = u.h();
    let step = match variant {
        Variant::Plus => 1,
        Variant::Minus => -1,
    };
    let lf = src.linearization(variant);
    let raw = exec::map_indexed(sites.core_len(), |idx| {
        let s = sites.core_site(idx);
        let ui = u.at(s).ok_or(Error::StencilOutOfRange { site: s })?;
        let fi = src.eval(s, ui);
        let li = lf(s, ui);
        if !fi.is_finite() || !li.is_finite() {
            return Err(Error::Evaluation { site: s, what: format!("source returned f = {fi}, L_f = {li}") });
        }
        let mut acc = 0.0;
        for axis in Axis::BOTH {
            let n = s.shifted(axis, step);
            let un = u.at(n).ok_or(Error::StencilOutOfRange { site: n })?;
            let fnb = src.eval(n, un);
            if !fnb.is_finite() {
                return Err(Error::Evaluation { site: n, what: format!("source returned f = {fnb}") });
            }
            // The backward hypothesis reads f_i − f_{i−e} − L⁻(u_i − u_{i−e}),
            // which is the negative of the expression below.
            acc += (fnb - fi - li * (un - ui)).abs();
        }
        Ok(acc / (h * h))
    });
    Ok(exec::det_max(&collect_results(raw)?).max(0.0))
}

/// Smallest `κ₀^±` for which the source-term hypothesis holds on the window core.
pub fn kappa0(u: &ScalarField, src: &SourceTerm, variant: Variant) -> Result<f64> {
    kappa0_over(u, src, variant, u.window())
}

/// Analytic bound `(κ₁)²·‖f̂″‖_∞` on `κ₀` for an autonomous source `f̂`.
pub fn kappa0_autonomous_bound(kappa1: f64, fhat_second_sup: f64) -> f64 {
    kappa1 * kappa1 * fhat_second_sup
}

/// Per-axis local quantities of one increment family at one site.
#[derive(Clone, Copy, Debug, Default)]
struct AxisLocal {
    dpt: f64,
    dmt: f64,
    /// `L_jθ_i = D⁺(D⁺θ)_{i−he_j} = D⁻(D⁻θ)_{i+he_j}`.
    lj0: f64,
    /// `D⁺(D⁺θ)_i = L_jθ_{i+he_j}`.
    lj_up: f64,
    /// `D⁻(D⁻θ)_i = L_jθ_{i−he_j}`.
    lj_down: f64,
    lj2: f64,
    dpr: f64,
    dmr: f64,
    dpr2: f64,
    dmr2: f64,
    /// `ρ²_{i+he_j} D⁺θ_{i+he_j}`, `ρ²_{i−he_j} D⁻θ_{i−he_j}` for the divergence form.
    flux_up: f64,
    flux_down: f64,
}

#[derive(Clone, Copy, Debug, Default)]
struct Local {
    rho: f64,
    theta: f64,
    axes: [AxisLocal; 2],
}

/// Local data at `site`, or `None` when some `ρ` on the reach-2 cross vanishes.
fn local_at(ang: &AngularData, variant: Variant, site: SiteIndex) -> Result<Option<Local>> {
    let rho = ang.rho(variant);
    let theta = ang.theta(variant);
    let get = |f: &ScalarField, s: SiteIndex| f.at(s).ok_or(Error::StencilOutOfRange { site: s });
    let h = ang.h();
    let r0 = get(rho, site)?;
    if r0 <= 0.0 {
        return Ok(None);
    }
    let t0 = get(theta, site)?;
    let mut axes = [AxisLocal::default(); 2];
    for (slot, axis) in axes.iter_mut().zip(Axis::BOTH) {
        let mut r = [0.0; 5];
        let mut t = [0.0; 5];
        for (k, d) in (-2..=2).enumerate() {
            let s = site.shifted(axis, d);
            r[k] = get(rho, s)?;
            t[k] = get(theta, s)?;
        }
        if r.iter().any(|&x| x <= 0.0) {
            return Ok(None);
        }
        // Increments of θ at offsets −2..2 (index k ↔ offset k − 2).
        let fwd = |k: usize| (t[k + 1] - t[k]) / h;
        let lj = |k: usize| (fwd(k) - fwd(k - 1)) / h;
        let (lm, l0, lp) = (lj(1), lj(2), lj(3));
        let r2 = |k: usize| r[k] * r[k];
        *slot = AxisLocal {
            dpt: fwd(2),
            dmt: fwd(1),
            lj0: l0,
            lj_up: lp,
            lj_down: lm,
            lj2: ((lp - l0) / h - (l0 - lm) / h) / h,
            dpr: (r[3] - r[2]) / h,
            dmr: (r[2] - r[1]) / h,
            dpr2: (r2(3) - r2(2)) / h,
            dmr2: (r2(2) - r2(1)) / h,
            flux_up: r2(3) * fwd(3),
            flux_down: r2(1) * fwd(0),
        };
    }
    Ok(Some(Local { rho: r0, theta: t0, axes }))
}

/// Per-site contributions to the angular sums (before summation over sites).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SiteTerms {
    /// `Σ_j ρ²(|D⁺θ|² + |D⁻θ|²)`.
    pub lhs: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub kappa4: f64,
    /// `ρ·|θ − θ∞|`; `κ₅ = κ₀ · Σ` of this.
    pub rho_deviation: f64,
    pub kappa6: f64,
    pub kappa7: f64,
}

impl SiteTerms {
    fn from_local(l: &Local, theta_inf: f64, h: f64) -> Self {
        let dev = (l.theta - theta_inf).abs();
        let rho2 = l.rho * l.rho;
        let mut t = SiteTerms { rho_deviation: l.rho * dev, ..Default::default() };
        for a in &l.axes {
            let (p, m) = (a.dpt.abs(), a.dmt.abs());
            t.lhs += rho2 * (p * p + m * m);
            t.kappa2 += rho2 * (p * a.lj0.abs() + m * a.lj0.abs());
            t.kappa3 += rho2 * (p.powi(3) + m.powi(3)) * dev;
            t.kappa4 += l.rho * (a.dpr.abs() * p * p + a.dmr.abs() * m * m) * dev;
            t.kappa6 += (a.dpr2.abs() * a.lj_up.abs() + a.dmr2.abs() * a.lj_down.abs() + h * rho2 * a.lj2.abs()) * dev;
            t.kappa7 += (a.dpr * a.dpr * p + a.dmr * a.dmr * m) * dev;
        }
        t
    }
}

/// Per-site terms at `site`; `None` when the site fails the validity rule.
pub fn site_terms(ang: &AngularData, variant: Variant, site: SiteIndex, theta_inf: f64) -> Result<Option<SiteTerms>> {
    Ok(local_at(ang, variant, site)?.map(|l| SiteTerms::from_local(&l, theta_inf, ang.h())))
}

/// Sums of [`SiteTerms`] over a set of sites.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TermSums {
    pub terms: SiteTerms,
    /// Sites excluded by the validity rule.
    pub skipped: usize,
}

fn sum_terms(list: &[SiteTerms]) -> SiteTerms {
    let col = |f: fn(&SiteTerms) -> f64| exec::det_sum(&list.iter().map(f).collect::<Vec<_>>());
    SiteTerms {
        lhs: col(|t| t.lhs),
        kappa2: col(|t| t.kappa2),
        kappa3: col(|t| t.kappa3),
        kappa4: col(|t| t.kappa4),
        rho_deviation: col(|t| t.rho_deviation),
        kappa6: col(|t| t.kappa6),
        kappa7: col(|t| t.kappa7),
    }
}

fn core_terms(ang: &AngularData, variant: Variant, theta_inf: f64) -> Result<(TermSums, Vec<Option<SiteTerms>>)> {
    let w = *ang.window();
    let per_site =
        collect_results(exec::map_indexed(w.core_len(), |i| site_terms(ang, variant, w.core_site(i), theta_inf)))?;
    let valid: Vec<SiteTerms> = per_site.iter().flatten().copied().collect();
    let skipped = per_site.len() - valid.len();
    Ok((TermSums { terms: sum_terms(&valid), skipped }, per_site))
}

/// `κ₂^±` over the window core.
pub fn kappa2(ang: &AngularData, variant: Variant) -> Result<f64> {
    Ok(core_terms(ang, variant, 0.0)?.0.terms.kappa2)
}

/// `κ₃ … κ₇` for one family.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HigherKappas {
    pub kappa3: f64,
    pub kappa4: f64,
    pub kappa5: f64,
    pub kappa6: f64,
    pub kappa7: f64,
}

/// `κ₃^± … κ₇^±` over the window core for the given `θ∞` and `κ₀`.
pub fn kappa3_to_7(ang: &AngularData, variant: Variant, theta_inf: f64, kappa0: f64) -> Result<HigherKappas> {
    let t = core_terms(ang, variant, theta_inf)?.0.terms;
    Ok(HigherKappas {
        kappa3: t.kappa3,
        kappa4: t.kappa4,
        kappa5: kappa0 * t.rho_deviation,
        kappa6: t.kappa6,
        kappa7: t.kappa7,
    })
}

/// The angular Dirichlet sum `Σ_{i,j} ρ²(|D_j⁺θ|² + |D_j⁻θ|²)` over the core.
pub fn lhs_form(ang: &AngularData, variant: Variant) -> Result<f64> {
    Ok(core_terms(ang, variant, 0.0)?.0.terms.lhs)
}

/// All constants of one increment family.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KappaSet {
    pub kappa0: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub kappa4: f64,
    pub kappa5: f64,
    pub kappa6: f64,
    pub kappa7: f64,
    /// `Σρ²(|D⁺θ|² + |D⁻θ|²)` over the core.
    pub lhs: f64,
}

impl KappaSet {
    /// Component-wise sum (`κ_m = κ_m⁺ + κ_m⁻`).
    pub fn combined(&self, other: &Self) -> Self {
        Self {
            kappa0: self.kappa0 + other.kappa0,
            kappa1: self.kappa1 + other.kappa1,
            kappa2: self.kappa2 + other.kappa2,
            kappa3: self.kappa3 + other.kappa3,
            kappa4: self.kappa4 + other.kappa4,
            kappa5: self.kappa5 + other.kappa5,
            kappa6: self.kappa6 + other.kappa6,
            kappa7: self.kappa7 + other.kappa7,
            lhs: self.lhs + other.lhs,
        }
    }
}

/// Estimated contributions from outside the window core.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TailSet {
    /// Whether the tail was estimated (requires an analytic closure).
    pub known: bool,
    pub lhs: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub kappa4: f64,
    pub kappa5: f64,
    pub kappa6: f64,
    pub kappa7: f64,
}

impl TailSet {
    fn combined(&self, other: &Self) -> Self {
        Self {
            known: self.known && other.known,
            lhs: self.lhs + other.lhs,
            kappa2: self.kappa2 + other.kappa2,
            kappa3: self.kappa3 + other.kappa3,
            kappa4: self.kappa4 + other.kappa4,
            kappa5: self.kappa5 + other.kappa5,
            kappa6: self.kappa6 + other.kappa6,
            kappa7: self.kappa7 + other.kappa7,
        }
    }

    /// Largest tail relative to the corresponding core value (0 for zero tails).
    pub fn max_relative(&self, core: &KappaSet) -> f64 {
        let pairs = [
            (self.lhs, core.lhs),
            (self.kappa2, core.kappa2),
            (self.kappa3, core.kappa3),
            (self.kappa4, core.kappa4),
            (self.kappa5, core.kappa5),
            (self.kappa6, core.kappa6),
            (self.kappa7, core.kappa7),
        ];
        pairs
            .iter()
            .map(|&(t, c)| {
                if t == 0.0 {
                    0.0
                } else if c == 0.0 {
                    f64::INFINITY
                } else {
                    t / c
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Geometric extrapolation from two successive dyadic shells.
///
/// With `q = s₂/s₁` the shells beyond are assumed to shrink by `q` each, so the
/// tail is `s₁ + s₂ + s₂·q/(1 − q)`; `q ≥ 1` yields `+∞`.
pub fn extrapolate_tail(s1: f64, s2: f64) -> f64 {
    if s2 == 0.0 {
        return s1;
    }
    if s1 == 0.0 {
        return f64::INFINITY;
    }
    let q = s2 / s1;
    if q >= 1.0 {
        f64::INFINITY
    } else {
        s1 + s2 + s2 * q / (1.0 - q)
    }
}

/// How `θ∞` was chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThetaInfSource {
    /// Supplied by the caller (example limit or command-line override).
    Given { plus: f64, minus: f64 },
    /// `θ` at the core corner `(i1_max, i2_max)`.
    Corner,
}

impl ThetaInfSource {
    pub fn label(&self) -> &'static str {
        match self {
            ThetaInfSource::Given { .. } => "given",
            ThetaInfSource::Corner => "corner",
        }
    }
}

/// Choice of `κ₀` entering `κ₅`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kappa0Choice {
    /// Smallest value valid on the window core (computed from the source).
    Window,
    /// Caller-supplied values (e.g. an analytic bound).
    Given { plus: f64, minus: f64 },
}

/// Options for [`kappa_report`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsOptions {
    pub theta_inf: ThetaInfSource,
    pub kappa0: Kappa0Choice,
    /// Estimate truncation tails from the closure (if present).
    pub tails: bool,
    /// Number of largest per-site contributions to keep.
    pub worst_sites: usize,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        Self { theta_inf: ThetaInfSource::Corner, kappa0: Kappa0Choice::Window, tails: true, worst_sites: 5 }
    }
}

/// Everything computed from one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct KappaReport {
    pub h: f64,
    pub window: LatticeWindow,
    pub plus: KappaSet,
    pub minus: KappaSet,
    pub theta_inf_plus: f64,
    pub theta_inf_minus: f64,
    pub theta_inf_source: ThetaInfSource,
    pub tails_plus: TailSet,
    pub tails_minus: TailSet,
    /// Core sites with `ρ⁺ = 0` (resp. `ρ⁻ = 0`).
    pub invalid_plus: usize,
    pub invalid_minus: usize,
    /// Core sites excluded from the sums by the validity rule.
    pub skipped_plus: usize,
    pub skipped_minus: usize,
    /// Largest per-site contributions to the `+` (resp. `−`) angular sum.
    pub worst_plus: Vec<(SiteIndex, f64)>,
    pub worst_minus: Vec<(SiteIndex, f64)>,
}

impl KappaReport {
    pub fn kappas(&self, variant: Variant) -> &KappaSet {
        match variant {
            Variant::Plus => &self.plus,
            Variant::Minus => &self.minus,
        }
    }

    pub fn tails(&self, variant: Variant) -> &TailSet {
        match variant {
            Variant::Plus => &self.tails_plus,
            Variant::Minus => &self.tails_minus,
        }
    }

    /// Total number of core sites where some `ρ` vanishes.
    pub fn invalid_site_count(&self) -> usize {
        self.invalid_plus + self.invalid_minus
    }
}

fn worst(per_site: &[Option<SiteTerms>], window: &LatticeWindow, n: usize) -> Vec<(SiteIndex, f64)> {
    let mut v: Vec<(usize, f64)> =
        per_site.iter().enumerate().filter_map(|(i, t)| t.map(|t| (i, t.lhs))).filter(|&(_, x)| x > 0.0).collect();
    // Stable sort: ties keep storage order, so the list is deterministic.
    v.sort_by(|a, b| b.1.total_cmp(&a.1));
    v.into_iter().take(n).map(|(i, x)| (window.core_site(i), x)).collect()
}

/// Constants of one family plus the site bookkeeping of the report.
struct Family {
    set: KappaSet,
    invalid: usize,
    skipped: usize,
    worst: Vec<(SiteIndex, f64)>,
}

fn family(ang: &AngularData, variant: Variant, theta_inf: f64, kappa0_value: f64, n_worst: usize) -> Result<Family> {
    let (sums, per_site) = core_terms(ang, variant, theta_inf)?;
    let t = sums.terms;
    let set = KappaSet {
        kappa0: kappa0_value,
        kappa1: ang.kappa1(variant),
        kappa2: t.kappa2,
        kappa3: t.kappa3,
        kappa4: t.kappa4,
        kappa5: kappa0_value * t.rho_deviation,
        kappa6: t.kappa6,
        kappa7: t.kappa7,
        lhs: t.lhs,
    };
    let invalid = ang.invalid_sites(variant).len();
    Ok(Family { set, invalid, skipped: sums.skipped, worst: worst(&per_site, ang.window(), n_worst) })
}

/// Tail estimates for both families from the shells around the core.
fn tails(u: &ScalarField, theta_inf: [f64; 2], kappa0: [f64; 2]) -> Result<[TailSet; 2]> {
    let core = *u.window();
    let w = core.half_width();
    // Reach 3 of u is needed: two for θ differences plus one inside θ.
    let big = core.expanded(3 * w).with_halo(3);
    let ub = u.resample(big)?.without_closure();
    let ang = decompose(&ub)?;
    let mut out = [TailSet::default(); 2];
    for (slot, (k, variant)) in out.iter_mut().zip(Variant::BOTH.into_iter().enumerate()) {
        let per_site = collect_results(exec::map_indexed(big.core_len(), |i| {
            let s = big.core_site(i);
            let d = core.distance_outside_core(s);
            if d == 0 {
                return Ok((0u8, None));
            }
            let shell = if d <= w { 1 } else { 2 };
            Ok((shell, site_terms(&ang, variant, s, theta_inf[k])?))
        }))?;
        let shell_sum = |shell: u8| {
            let v: Vec<SiteTerms> = per_site.iter().filter(|(s, _)| *s == shell).filter_map(|(_, t)| *t).collect();
            sum_terms(&v)
        };
        let (s1, s2) = (shell_sum(1), shell_sum(2));
        let ex = |f: fn(&SiteTerms) -> f64| extrapolate_tail(f(&s1), f(&s2));
        *slot = TailSet {
            known: true,
            lhs: ex(|t| t.lhs),
            kappa2: ex(|t| t.kappa2),
            kappa3: ex(|t| t.kappa3),
            kappa4: ex(|t| t.kappa4),
            kappa5: kappa0[k] * ex(|t| t.rho_deviation),
            kappa6: ex(|t| t.kappa6),
            kappa7: ex(|t| t.kappa7),
        };
    }
    Ok(out)
}

/// Compute every constant for both increment families, with tails.
pub fn kappa_report(u: &ScalarField, src: &SourceTerm, opts: &DiagnosticsOptions) -> Result<KappaReport> {
    let ang = decompose(u)?;
    let window = *u.window();
    let (ti_plus, ti_minus) = match opts.theta_inf {
        ThetaInfSource::Given { plus, minus } => (plus, minus),
        ThetaInfSource::Corner => {
            let c = SiteIndex::new(window.i1_max, window.i2_max);
            let t = |v| ang.theta(v).at(c).ok_or(Error::StencilOutOfRange { site: c });
            (t(Variant::Plus)?, t(Variant::Minus)?)
        }
    };
    for t in [ti_plus, ti_minus] {
        if !(t > -PI && t <= PI) {
            return Err(Error::InvalidArgument(format!("θ∞ must lie in (−π, π], got {t}")));
        }
    }
    let (k0p, k0m) = match opts.kappa0 {
        Kappa0Choice::Window => (kappa0(u, src, Variant::Plus)?, kappa0(u, src, Variant::Minus)?),
        Kappa0Choice::Given { plus, minus } => (plus, minus),
    };
    let p = family(&ang, Variant::Plus, ti_plus, k0p, opts.worst_sites)?;
    let m = family(&ang, Variant::Minus, ti_minus, k0m, opts.worst_sites)?;
    let [tails_plus, tails_minus] = if opts.tails && u.has_closure() {
        tails(u, [ti_plus, ti_minus], [k0p, k0m])?
    } else {
        [TailSet::default(); 2]
    };
    Ok(KappaReport {
        h: window.h,
        window,
        plus: p.set,
        minus: m.set,
        theta_inf_plus: ti_plus,
        theta_inf_minus: ti_minus,
        theta_inf_source: opts.theta_inf,
        tails_plus,
        tails_minus,
        invalid_plus: p.invalid,
        invalid_minus: m.invalid,
        skipped_plus: p.skipped,
        skipped_minus: m.skipped,
        worst_plus: p.worst,
        worst_minus: m.worst,
    })
}

/// Which estimate to verify.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// `Σρ⁺²(|D⁺θ⁺|² + |D⁻θ⁺|²) ≤ C⁺·h` with the `+` constants.
    FormPlus,
    /// Both families summed, with `κ_m = κ_m⁺ + κ_m⁻`.
    Tutta,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::FormPlus => "form-plus",
            Mode::Tutta => "tutta",
        }
    }
}

/// Outcome of comparing the angular sum with `C·h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// `lhs + tail ≤ C·h`.
    Holds,
    /// `lhs > C·h` on the window alone.
    Violated,
    /// `lhs ≤ C·h < lhs + tail`.
    InconclusiveTruncation,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
            Verdict::InconclusiveTruncation => "inconclusive-truncation",
        }
    }
}

/// `C = 4(κ₂ + 2e^{2π}κ₃ + 2e^{2π}κ₄ + 2κ₅ + κ₆ + κ₇)`.
pub fn theorem_constant(k: &KappaSet) -> f64 {
    let e = e_two_pi();
    4.0 * (k.kappa2 + 2.0 * e * k.kappa3 + 2.0 * e * k.kappa4 + 2.0 * k.kappa5 + k.kappa6 + k.kappa7)
}

/// Result of checking the rigidity estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct TheoremReport {
    pub mode: Mode,
    pub lhs_form_plus: f64,
    pub lhs_form_minus: Option<f64>,
    pub lhs_tutta: Option<f64>,
    /// The left side used for the verdict and its tail estimate.
    pub lhs: f64,
    pub lhs_tail: f64,
    pub tail_known: bool,
    pub constant_c: f64,
    pub bound_ch: f64,
    pub verdict: Verdict,
    pub worst_sites: Vec<(SiteIndex, f64)>,
}

/// Compare the angular sum with `C·h` in the requested mode.
pub fn verify_theorem(report: &KappaReport, mode: Mode) -> TheoremReport {
    let (k, lhs, tail, minus, tutta, worst) = match mode {
        Mode::FormPlus => (report.plus, report.plus.lhs, report.tails_plus, None, None, report.worst_plus.clone()),
        Mode::Tutta => {
            let k = report.plus.combined(&report.minus);
            let mut w: Vec<(SiteIndex, f64)> =
                report.worst_plus.iter().chain(report.worst_minus.iter()).copied().collect();
            w.sort_by(|a, b| b.1.total_cmp(&a.1));
            w.truncate(report.worst_plus.len().max(report.worst_minus.len()));
            (k, k.lhs, report.tails_plus.combined(&report.tails_minus), Some(report.minus.lhs), Some(k.lhs), w)
        }
    };
    let c = theorem_constant(&k);
    let ch = c * report.h;
    let verdict = if lhs > ch {
        Verdict::Violated
    } else if lhs + tail.lhs > ch {
        Verdict::InconclusiveTruncation
    } else {
        Verdict::Holds
    };
    TheoremReport {
        mode,
        lhs_form_plus: report.plus.lhs,
        lhs_form_minus: minus,
        lhs_tutta: tutta,
        lhs,
        lhs_tail: tail.lhs,
        tail_known: tail.known,
        constant_c: c,
        bound_ch: ch,
        verdict,
        worst_sites: worst,
    }
}

/// `ε⋆` and its bound at one site.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RemainderSite {
    pub site: SiteIndex,
    pub eps: f64,
    pub bound: f64,
    /// Rounding allowance: `1e-10 ×` the magnitude of the summands of `ε⋆`.
    pub tolerance: f64,
}

impl RemainderSite {
    pub fn excess(&self) -> f64 {
        self.eps.abs() - self.bound
    }

    pub fn holds(&self) -> bool {
        self.excess() <= self.tolerance
    }
}

/// Outcome of the per-site remainder check.
#[derive(Clone, Debug, PartialEq)]
pub struct RemainderReport {
    /// `max_i |L u_i − f(i, u_i)|` over the core.
    pub equation_residual: f64,
    /// `κ₀⁺` used in the bound (sup over the core dilated by one ring).
    pub kappa0: f64,
    pub sites_checked: usize,
    pub skipped: usize,
    /// `max_i (|ε⋆_i| − bound_i)`.
    pub max_excess: f64,
    pub max_abs_eps: f64,
    pub violations: usize,
    /// Fraction of checked sites with `|ε⋆_i| ≥ 0.9·bound_i` and `ε⋆_i ≠ 0`.
    pub sharp_fraction: f64,
    pub sites: Vec<RemainderSite>,
}

impl RemainderReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn holds_fraction(&self) -> f64 {
        if self.sites_checked == 0 {
            1.0
        } else {
            (self.sites_checked - self.violations) as f64 / self.sites_checked as f64
        }
    }
}

/// Relative tolerance of the equilibrium pre-check.
pub const EQUATION_TOLERANCE: f64 = 1e-10;

/// Largest `|L u_i − f(i, u_i)|` over the core, with its site.
pub fn equation_residual(u: &ScalarField, src: &SourceTerm) -> Result<(f64, SiteIndex)> {
    let w = *u.window();
    let raw = collect_results(exec::map_indexed(w.core_len(), |i| {
        let s = w.core_site(i);
        let l = laplacian_at(u, s).ok_or(Error::StencilOutOfRange { site: s })?;
        let ui = u.at(s).ok_or(Error::StencilOutOfRange { site: s })?;
        Ok((l - src.eval(s, ui)).abs())
    }))?;
    let mut best = (0.0, w.core_site(0));
    for (i, &r) in raw.iter().enumerate() {
        if r > best.0 || r.is_nan() {
            best = (r, w.core_site(i));
        }
    }
    Ok(best)
}

/// Scale for the equilibrium pre-check: `max(1, max|u|/h²)` over the core
/// (the size of the individual stencil terms).
pub fn equation_scale(u: &ScalarField) -> f64 {
    let w = u.window();
    let m = w.core_sites().filter_map(|s| u.get(s)).fold(0.0f64, |a, v| a.max(v.abs()));
    (m / (w.h * w.h)).max(1.0)
}

/// Evaluate `ε⋆_i = Σ_j [D_j⁺(ρ²D_j⁺θ)_i + D_j⁻(ρ²D_j⁻θ)_i]` for the `+` family
/// and compare it site by site with its explicit bound
/// `2κ₀hρ + Σ_j [2e^{2π}hρ²(|D⁺θ|³ + |D⁻θ|³) + 2e^{2π}hρ(|D⁺ρ||D⁺θ|² + |D⁻ρ||D⁻θ|²)
///  + h(|D⁺ρ²||D⁺(D⁺θ)| + |D⁻ρ²||D⁻(D⁻θ)| + hρ²|L_j²θ|) + h(|D⁺ρ|²|D⁺θ| + |D⁻ρ|²|D⁻θ|)]`.
///
/// The left side is a discrete divergence of `ρ²Dθ`; the right side is
/// assembled from separate local quantities, so neither is derived from the
/// other. `u` must solve `L u = f(i, u)` on the core to relative accuracy
/// [`EQUATION_TOLERANCE`].
pub fn linearized_residual(u: &ScalarField, src: &SourceTerm, ang: &AngularData) -> Result<RemainderReport> {
    let w = *u.window();
    if !ang.window().with_halo(0).same_as(&w.with_halo(0)) {
        return Err(Error::WindowMismatch);
    }
    let (res, res_site) = equation_residual(u, src)?;
    let tol = EQUATION_TOLERANCE * equation_scale(u);
    if !(res <= tol) {
        return Err(Error::EquationResidualTooLarge { residual: res, tolerance: tol, site: res_site });
    }
    let h = w.h;
    let k0 = kappa0_over(u, src, Variant::Plus, &w.expanded(1))?;
    let e = e_two_pi();
    let raw = collect_results(exec::map_indexed(w.core_len(), |i| {
        let s = w.core_site(i);
        let Some(l) = local_at(ang, Variant::Plus, s)? else {
            return Ok(None);
        };
        let rho2 = l.rho * l.rho;
        let mut eps = 0.0;
        let mut mag = 0.0;
        let mut bound = 2.0 * k0 * h * l.rho;
        for a in &l.axes {
            let f0 = rho2 * a.dpt;
            let g0 = rho2 * a.dmt;
            let terms = [(a.flux_up - f0) / h, (g0 - a.flux_down) / h];
            eps += terms[0] + terms[1];
            mag += (a.flux_up.abs() + f0.abs() + g0.abs() + a.flux_down.abs()) / h;
            let (p, m) = (a.dpt.abs(), a.dmt.abs());
            bound += 2.0 * e * h * rho2 * (p.powi(3) + m.powi(3));
            bound += 2.0 * e * h * l.rho * (a.dpr.abs() * p * p + a.dmr.abs() * m * m);
            bound += h * (a.dpr2.abs() * a.lj_up.abs() + a.dmr2.abs() * a.lj_down.abs() + h * rho2 * a.lj2.abs());
            bound += h * (a.dpr * a.dpr * p + a.dmr * a.dmr * m);
        }
        Ok(Some(RemainderSite { site: s, eps, bound, tolerance: 1e-10 * mag.max(f64::MIN_POSITIVE) }))
    }))?;
    let sites: Vec<RemainderSite> = raw.into_iter().flatten().collect();
    let checked = sites.len();
    let violations = sites.iter().filter(|s| !s.holds()).count();
    let sharp = sites.iter().filter(|s| s.eps != 0.0 && s.eps.abs() >= 0.9 * s.bound).count();
    Ok(RemainderReport {
        equation_residual: res,
        kappa0: k0,
        sites_checked: checked,
        skipped: w.core_len() - checked,
        max_excess: sites.iter().map(|s| s.excess()).fold(f64::NEG_INFINITY, f64::max),
        max_abs_eps: sites.iter().map(|s| s.eps.abs()).fold(0.0, f64::max),
        violations,
        sharp_fraction: if checked == 0 { 0.0 } else { sharp as f64 / checked as f64 },
        sites,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_window;

    fn ramp(h: f64, radius: f64) -> ScalarField {
        ScalarField::from_fn(make_window(h, radius, 3).unwrap(), move |s| h * s.k2 as f64).unwrap()
    }

    #[test]
    fn kappa0_trivial_sources() {
        let u = ramp(0.5, 2.0);
        assert_eq!(kappa0(&u, &SourceTerm::zero(), Variant::Plus).unwrap(), 0.0);
        let lin = SourceTerm::autonomous(|r| r, |_| 1.0);
        assert_eq!(kappa0(&u, &lin, Variant::Plus).unwrap(), 0.0);
        assert_eq!(kappa0(&u, &lin, Variant::Minus).unwrap(), 0.0);
    }

    #[test]
    fn kappa0_reports_non_finite_source() {
        let u = ramp(0.5, 1.0);
        let bad = SourceTerm::autonomous(|r| if r > 0.2 { f64::NAN } else { 0.0 }, |_| 0.0);
        assert!(matches!(kappa0(&u, &bad, Variant::Plus), Err(Error::Evaluation { .. })));
    }

    #[test]
    fn autonomous_bound_values() {
        assert_eq!(kappa0_autonomous_bound(1.5, 0.0), 0.0);
        assert_eq!(kappa0_autonomous_bound(1.5, 1.0), 2.25);
        assert_eq!(kappa0_autonomous_bound(1.0, 6.0), 6.0);
    }

    #[test]
    fn constant_angle_gives_zero_sums() {
        let u = ramp(0.5, 3.0);
        let ang = decompose(&u).unwrap();
        for v in Variant::BOTH {
            assert_eq!(kappa2(&ang, v).unwrap(), 0.0);
            assert_eq!(lhs_form(&ang, v).unwrap(), 0.0);
            let k = kappa3_to_7(&ang, v, PI / 2.0, 7.0).unwrap();
            assert_eq!(k, HigherKappas::default());
        }
        let rep = kappa_report(&u, &SourceTerm::zero(), &DiagnosticsOptions::default()).unwrap();
        let th = verify_theorem(&rep, Mode::FormPlus);
        assert_eq!((th.lhs, th.constant_c, th.verdict), (0.0, 0.0, Verdict::Holds));
        assert!(th.tail_known);
        assert_eq!(rep.theta_inf_source, ThetaInfSource::Corner);
        assert_eq!(rep.theta_inf_plus, PI / 2.0);
    }

    #[test]
    fn theorem_constant_weights() {
        let k = KappaSet { kappa2: 1.0, kappa3: 1.0, kappa5: 1.0, ..Default::default() };
        let expect = 4.0 * (1.0 + 2.0 * e_two_pi() + 2.0);
        assert_eq!(theorem_constant(&k), expect);
    }

    #[test]
    fn tail_extrapolation() {
        assert_eq!(extrapolate_tail(0.0, 0.0), 0.0);
        assert_eq!(extrapolate_tail(3.0, 0.0), 3.0);
        assert_eq!(extrapolate_tail(1.0, 1.0), f64::INFINITY);
        // Geometric series 1 + 1/2 + 1/4 + … = 2.
        assert!((extrapolate_tail(1.0, 0.5) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_rho_sites_are_skipped_and_counted() {
        let h = 1.0;
        let w = make_window(h, 3.0, 3).unwrap();
        // Flat patch: ρ⁺ = 0 at the origin.
        let u = ScalarField::from_fn(w, |s| if s.k1.abs() <= 1 && s.k2.abs() <= 1 { 0.0 } else { s.k2 as f64 })
            .unwrap()
            .without_closure();
        let rep =
            kappa_report(&u, &SourceTerm::zero(), &DiagnosticsOptions { tails: false, ..Default::default() }).unwrap();
        assert!(rep.invalid_plus > 0);
        assert!(rep.skipped_plus >= rep.invalid_plus);
        assert!(!rep.tails_plus.known);
        for x in [rep.plus.kappa2, rep.plus.lhs, rep.plus.kappa6] {
            assert!(x.is_finite() && x >= 0.0);
        }
    }

    #[test]
    fn remainder_check_on_ramp() {
        let u = ramp(0.5, 2.0);
        let ang = decompose(&u).unwrap();
        let r = linearized_residual(&u, &SourceTerm::zero(), &ang).unwrap();
        assert!(r.passed());
        assert_eq!(r.max_abs_eps, 0.0);
        assert_eq!(r.sites_checked, u.window().core_len());
    }

    #[test]
    fn remainder_check_rejects_non_equilibria() {
        let h = 0.5;
        let u = ScalarField::from_fn(make_window(h, 2.0, 3).unwrap(), move |s| {
            let (x, y) = s.position(h);
            y + x * x
        })
        .unwrap();
        let ang = decompose(&u).unwrap();
        assert!(matches!(
            linearized_residual(&u, &SourceTerm::zero(), &ang),
            Err(Error::EquationResidualTooLarge { .. })
        ));
        // With the matching constant source it is an equilibrium.
        assert!(linearized_residual(&u, &SourceTerm::from_site_fn(|_| 2.0), &ang).is_ok());
    }
}
