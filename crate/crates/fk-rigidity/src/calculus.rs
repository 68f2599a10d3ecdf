//! Discrete differential operators on `hZ²` and residual checks for the
//! algebraic identities they satisfy.
//!
//! All operators are pure field-to-field transforms. When the input carries an
//! analytic closure the output is defined on the same window and inherits a
//! derived closure; otherwise the output window's halo shrinks by the stencil
//! reach, and an insufficient halo is reported as
//! [`Error::StencilOutOfRange`] instead of being zero-filled.
//!
//! The second difference is evaluated as `((u₊ − u)/h − (u − u₋)/h)/h`, which
//! is literally `D⁺D⁻u`; hence `lap_j == dplus(dminus(u))` and
//! `lap == lap_1 + lap_2` hold bitwise, not merely up to rounding.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exec;
use crate::lattice::{Axis, LatticeWindow, ScalarField, SiteFn, SiteIndex};

/// Sign of a one-sided increment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    /// The opposite sign (the adjoint increment under summation by parts).
    pub fn flipped(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    fn step(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

/// An increment direction: axis `e_j` and sign `±`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Direction {
    pub axis: Axis,
    pub sign: Sign,
}

impl Direction {
    pub const fn new(axis: Axis, sign: Sign) -> Self {
        Self { axis, sign }
    }
}

/// Forward increment `(u_{i+he_j} − u_i)/h` at one site.
#[inline]
pub fn forward_at(u: &ScalarField, site: SiteIndex, axis: Axis) -> Option<f64> {
    Some((u.at(site.shifted(axis, 1))? - u.at(site)?) / u.h())
}

/// Backward increment `(u_i − u_{i−he_j})/h` at one site.
#[inline]
pub fn backward_at(u: &ScalarField, site: SiteIndex, axis: Axis) -> Option<f64> {
    Some((u.at(site)? - u.at(site.shifted(axis, -1))?) / u.h())
}

/// One-sided increment in direction `dir` at one site.
#[inline]
pub fn increment_at(u: &ScalarField, site: SiteIndex, dir: Direction) -> Option<f64> {
    match dir.sign {
        Sign::Plus => forward_at(u, site, dir.axis),
        Sign::Minus => backward_at(u, site, dir.axis),
    }
}

/// Second difference along `axis` at one site, evaluated as `D⁺D⁻u`.
#[inline]
pub fn second_difference_at(u: &ScalarField, site: SiteIndex, axis: Axis) -> Option<f64> {
    let h = u.h();
    let c = u.at(site)?;
    let fwd = (u.at(site.shifted(axis, 1))? - c) / h;
    let bwd = (c - u.at(site.shifted(axis, -1))?) / h;
    Some((fwd - bwd) / h)
}

/// Discrete Laplacian `L₁u + L₂u` at one site.
#[inline]
pub fn laplacian_at(u: &ScalarField, site: SiteIndex) -> Option<f64> {
    Some(second_difference_at(u, site, Axis::One)? + second_difference_at(u, site, Axis::Two)?)
}

/// Apply a site-wise stencil of the given reach to `u`.
pub(crate) fn apply_stencil<F>(u: &ScalarField, reach: i64, op: F) -> Result<ScalarField>
where
    F: Fn(&ScalarField, SiteIndex) -> Option<f64> + Send + Sync + 'static,
{
    let window = *u.window();
    let op = Arc::new(op);
    if u.has_closure() {
        let src = u.clone();
        let op_c = op.clone();
        let closure: SiteFn = Arc::new(move |s| op_c(&src, s).unwrap_or(f64::NAN));
        ScalarField::from_parts(window, |s| op(u, s), Some(closure))
    } else {
        if window.halo < reach {
            return Err(Error::StencilOutOfRange { site: SiteIndex::new(window.i1_min, window.i2_min) });
        }
        let out = window.with_halo((window.halo - reach) as usize);
        ScalarField::from_parts(out, |s| op(u, s), None)
    }
}

/// Forward increment field `D_j⁺u`.
pub fn dplus(u: &ScalarField, axis: Axis) -> Result<ScalarField> {
    apply_stencil(u, 1, move |u, s| forward_at(u, s, axis))
}

/// Backward increment field `D_j⁻u`.
pub fn dminus(u: &ScalarField, axis: Axis) -> Result<ScalarField> {
    apply_stencil(u, 1, move |u, s| backward_at(u, s, axis))
}

/// Second-difference field `L_j u`.
pub fn lap_j(u: &ScalarField, axis: Axis) -> Result<ScalarField> {
    apply_stencil(u, 1, move |u, s| second_difference_at(u, s, axis))
}

/// Discrete Laplacian field `L u = L₁u + L₂u`.
pub fn lap(u: &ScalarField) -> Result<ScalarField> {
    apply_stencil(u, 1, laplacian_at)
}

/// `L_j² u = L_j(L_j u)`: the five-point stencil `(1, −4, 6, −4, 1)/h⁴` along `axis`.
pub fn lap_j_squared(u: &ScalarField, axis: Axis) -> Result<ScalarField> {
    apply_stencil(u, 2, move |u, s| lap_j_squared_at(u, s, axis))
}

/// `L_j(L_j u)` at one site.
#[inline]
pub fn lap_j_squared_at(u: &ScalarField, site: SiteIndex, axis: Axis) -> Option<f64> {
    let h = u.h();
    let c = second_difference_at(u, site, axis)?;
    let p = second_difference_at(u, site.shifted(axis, 1), axis)?;
    let m = second_difference_at(u, site.shifted(axis, -1), axis)?;
    Some(((p - c) / h - (c - m) / h) / h)
}

/// Scale for residual tolerances: product of the inputs' max-norms divided by
/// the smallest power of `h` appearing in the identity.
pub fn residual_scale(norms: &[f64], h: f64, h_power: i32) -> f64 {
    norms.iter().product::<f64>().max(f64::MIN_POSITIVE) / h.powi(h_power)
}

fn require_same_window(f: &ScalarField, g: &ScalarField) -> Result<LatticeWindow> {
    if f.window().same_as(g.window()) {
        Ok(*f.window())
    } else {
        Err(Error::WindowMismatch)
    }
}

fn max_over_core<F>(window: &LatticeWindow, site_residual: F) -> Result<f64>
where
    F: Fn(SiteIndex) -> Option<f64> + Sync + Send,
{
    let raw = exec::map_indexed(window.core_len(), |i| {
        let s = window.core_site(i);
        site_residual(s).ok_or(s)
    });
    let mut vals = Vec::with_capacity(raw.len());
    for r in raw {
        match r {
            Ok(v) => vals.push(v),
            Err(site) => return Err(Error::StencilOutOfRange { site }),
        }
    }
    Ok(exec::det_max(&vals).max(0.0))
}

/// Largest residual over the core of the product rule
/// `D(fg)_i = (f_{i±he_j} + f_i)/2 · Dg_i + (g_{i±he_j} + g_i)/2 · Df_i`.
pub fn check_product_rule(f: &ScalarField, g: &ScalarField, dir: Direction) -> Result<f64> {
    let window = require_same_window(f, g)?;
    let h = window.h;
    let step = dir.sign.step();
    max_over_core(&window, |s| {
        let n = s.shifted(dir.axis, step);
        let (f0, f1, g0, g1) = (f.at(s)?, f.at(n)?, g.at(s)?, g.at(n)?);
        let (d_fg, df, dg) = match dir.sign {
            Sign::Plus => ((f1 * g1 - f0 * g0) / h, (f1 - f0) / h, (g1 - g0) / h),
            Sign::Minus => ((f0 * g0 - f1 * g1) / h, (f0 - f1) / h, (g0 - g1) / h),
        };
        Some((d_fg - ((f1 + f0) / 2.0 * dg + (g1 + g0) / 2.0 * df)).abs())
    })
}

/// Largest residual over the core of the product Laplacian
/// `L(fg) = Lf·g + Lg·f + Σ_j (D_j⁺f D_j⁺g + D_j⁻f D_j⁻g)`.
pub fn check_product_laplacian(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    let window = require_same_window(f, g)?;
    let fg = f.product(g)?;
    max_over_core(&window, |s| {
        let lhs = laplacian_at(&fg, s)?;
        let mut rhs = laplacian_at(f, s)? * g.at(s)? + laplacian_at(g, s)? * f.at(s)?;
        for axis in Axis::BOTH {
            rhs +=
                forward_at(f, s, axis)? * forward_at(g, s, axis)? + backward_at(f, s, axis)? * backward_at(g, s, axis)?;
        }
        Some((lhs - rhs).abs())
    })
}

/// Largest residual over the core of the iterated-increment identities
/// `D⁺(D⁺f)_i = L_j f_{i+he_j}` and `D⁻(D⁻f)_i = L_j f_{i−he_j}`.
pub fn check_iterated_increments(f: &ScalarField, axis: Axis) -> Result<f64> {
    let window = *f.window();
    let h = window.h;
    max_over_core(&window, |s| {
        let up = s.shifted(axis, 1);
        let down = s.shifted(axis, -1);
        let pp = (forward_at(f, up, axis)? - forward_at(f, s, axis)?) / h;
        let mm = (backward_at(f, s, axis)? - backward_at(f, down, axis)?) / h;
        let r1 = (pp - second_difference_at(f, up, axis)?).abs();
        let r2 = (mm - second_difference_at(f, down, axis)?).abs();
        Some(r1.max(r2))
    })
}

/// Largest residual over the core of `L u − (L₁u + L₂u)` (zero by construction).
pub fn check_laplacian_split(u: &ScalarField) -> Result<f64> {
    let window = *u.window();
    max_over_core(&window, |s| {
        Some(
            (laplacian_at(u, s)? - (second_difference_at(u, s, Axis::One)? + second_difference_at(u, s, Axis::Two)?))
                .abs(),
        )
    })
}

/// Residual `|Σ_i D_j^± f_i g_i + Σ_i f_i D_j^∓ g_i|` of summation by parts.
///
/// `g` must vanish on the outermost stored ring (it is then treated as zero
/// outside the window, i.e. compactly supported); the sums run over all stored
/// sites.
pub fn sum_by_parts_residual(f: &ScalarField, g: &ScalarField, axis: Axis, sign: Sign) -> Result<f64> {
    let window = require_same_window(f, g)?;
    let h = window.h;
    let n = window.stored_len();
    let (lo1, hi1) = (window.i1_min - window.halo, window.i1_max + window.halo);
    let (lo2, hi2) = (window.i2_min - window.halo, window.i2_max + window.halo);
    for idx in 0..n {
        let s = window.stored_site(idx);
        let on_boundary = s.k1 == lo1 || s.k1 == hi1 || s.k2 == lo2 || s.k2 == hi2;
        if on_boundary && g.values()[idx] != 0.0 {
            return Err(Error::SupportViolation { site: s });
        }
    }
    let g_ext = |s: SiteIndex| g.get(s).unwrap_or(0.0);
    let step = sign.step();
    let terms = exec::map_indexed(n, |idx| {
        let s = window.stored_site(idx);
        let gi = g.values()[idx];
        let fi = f.values()[idx];
        // D^± f_i · g_i: only needed where g_i ≠ 0, i.e. strictly inside.
        let t1 = if gi != 0.0 {
            let fn_ = f.get(s.shifted(axis, step)).unwrap_or(fi);
            match sign {
                Sign::Plus => (fn_ - fi) / h * gi,
                Sign::Minus => (fi - fn_) / h * gi,
            }
        } else {
            0.0
        };
        // f_i · D^∓ g_i with g extended by zero.
        let gn = g_ext(s.shifted(axis, -step));
        let t2 = match sign {
            Sign::Plus => fi * (gi - gn) / h,
            Sign::Minus => fi * (gn - gi) / h,
        };
        (t1, t2)
    });
    let s1: Vec<f64> = terms.iter().map(|t| t.0).collect();
    let s2: Vec<f64> = terms.iter().map(|t| t.1).collect();
    Ok((exec::det_sum(&s1) + exec::det_sum(&s2)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_window;

    fn field(h: f64, radius: f64, halo: usize, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> ScalarField {
        let w = make_window(h, radius, halo).unwrap();
        ScalarField::from_fn(w, move |s| {
            let (x, y) = s.position(h);
            f(x, y)
        })
        .unwrap()
    }

    #[test]
    fn constant_field_has_zero_increments() {
        let u = field(0.5, 2.0, 1, |_, _| 3.7);
        for axis in Axis::BOTH {
            assert_eq!(dplus(&u, axis).unwrap().max_abs(), 0.0);
            assert_eq!(dminus(&u, axis).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn linear_field_has_unit_increment() {
        let u = field(0.25, 2.0, 1, |_, y| y);
        let d = dplus(&u, Axis::Two).unwrap();
        assert!(d.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert_eq!(lap_j(&u, Axis::Two).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn backward_increment_of_square() {
        let u = field(1.0, 3.0, 1, |x, _| x * x);
        let d = dminus(&u, Axis::One).unwrap();
        assert_eq!(d.get(SiteIndex::new(2, 0)), Some(3.0));
    }

    #[test]
    fn dminus_is_shifted_dplus_bitwise() {
        let u = field(0.3, 2.0, 2, |x, y| (x * 1.3).sin() + y * y * 0.2);
        for axis in Axis::BOTH {
            let p = dplus(&u, axis).unwrap();
            let m = dminus(&u, axis).unwrap();
            for s in u.window().core_sites() {
                assert_eq!(m.at(s).unwrap().to_bits(), p.at(s.shifted(axis, -1)).unwrap().to_bits());
            }
        }
    }

    #[test]
    fn quadratics_have_exact_second_differences() {
        let u = field(0.5, 2.0, 1, |x, _| x * x);
        let l = lap_j(&u, Axis::One).unwrap();
        assert!(l.values().iter().all(|v| (v - 2.0).abs() < 1e-12));
        let u = field(0.5, 2.0, 1, |x, y| x * x + y * y);
        assert!(lap(&u).unwrap().values().iter().all(|v| (v - 4.0).abs() < 1e-12));
        let u = field(0.5, 2.0, 1, |x, y| x * x - y * y);
        assert!(lap(&u).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn lap_is_dplus_of_dminus_bitwise() {
        let u = field(0.4, 2.0, 2, |x, y| (x - 0.3 * y).cos() * y.exp());
        for axis in Axis::BOTH {
            let l = lap_j(&u, axis).unwrap();
            let pm = dplus(&dminus(&u, axis).unwrap(), axis).unwrap();
            let mp = dminus(&dplus(&u, axis).unwrap(), axis).unwrap();
            for s in u.window().core_sites() {
                assert_eq!(l.at(s).unwrap().to_bits(), pm.at(s).unwrap().to_bits());
                assert_eq!(l.at(s).unwrap().to_bits(), mp.at(s).unwrap().to_bits());
            }
        }
        assert_eq!(check_laplacian_split(&u).unwrap(), 0.0);
    }

    #[test]
    fn five_point_stencil_on_quartic() {
        let h = 0.5;
        let u = field(h, 2.0, 2, |x, _| x.powi(4));
        let l2 = lap_j_squared(&u, Axis::One).unwrap();
        assert!((l2.get(SiteIndex::new(0, 0)).unwrap() - 24.0).abs() < 1e-10);
        let cubic = field(h, 2.0, 2, |x, _| x.powi(3) - 2.0 * x);
        assert!(lap_j_squared(&cubic, Axis::One).unwrap().max_abs() < 1e-10);
        // The composed operator agrees with the explicit (1,−4,6,−4,1)/h⁴ stencil.
        let v = field(h, 2.0, 2, |x, y| (x * 0.7).sin() + y);
        let l2 = lap_j_squared(&v, Axis::One).unwrap();
        for s in v.window().core_sites() {
            let at = |d: i64| v.at(s.shifted(Axis::One, d)).unwrap();
            let explicit = (at(2) - 4.0 * at(1) + 6.0 * at(0) - 4.0 * at(-1) + at(-2)) / h.powi(4);
            assert!((l2.at(s).unwrap() - explicit).abs() < 1e-10);
        }
    }

    #[test]
    fn halo_shrinks_without_closure() {
        let w = make_window(1.0, 2.0, 2).unwrap();
        let u = ScalarField::from_fn(w, |s| s.k1 as f64).unwrap().without_closure();
        let d = dplus(&u, Axis::One).unwrap();
        assert_eq!(d.window().halo, 1);
        let l2 = lap_j_squared(&u, Axis::One).unwrap();
        assert_eq!(l2.window().halo, 0);
        let bare = ScalarField::from_fn(w.with_halo(0), |s| s.k1 as f64).unwrap().without_closure();
        assert!(matches!(dplus(&bare, Axis::One), Err(Error::StencilOutOfRange { .. })));
    }

    #[test]
    fn product_rule_trivial_cases() {
        let one = field(1.0, 3.0, 1, |_, _| 1.0);
        let g = field(1.0, 3.0, 1, |x, y| x * y + 2.0);
        for axis in Axis::BOTH {
            for sign in [Sign::Plus, Sign::Minus] {
                assert_eq!(check_product_rule(&one, &g, Direction::new(axis, sign)).unwrap(), 0.0);
            }
        }
        let f = field(1.0, 3.0, 1, |x, _| x);
        let r = check_product_rule(&f, &f, Direction::new(Axis::One, Sign::Plus)).unwrap();
        assert!(r <= 1e-12 * residual_scale(&[f.max_abs(), f.max_abs()], 1.0, 1));
    }

    #[test]
    fn product_laplacian_simple_cases() {
        let one = field(0.5, 2.0, 1, |_, _| 1.0);
        let f = field(0.5, 2.0, 1, |x, _| x);
        let g = field(0.5, 2.0, 1, |_, y| y);
        assert_eq!(check_product_laplacian(&f, &one).unwrap(), 0.0);
        assert!(check_product_laplacian(&f, &g).unwrap() <= 1e-12);
    }

    #[test]
    fn window_mismatch_is_reported() {
        let f = field(0.5, 2.0, 1, |x, _| x);
        let g = field(0.5, 1.0, 1, |x, _| x);
        assert!(matches!(check_product_laplacian(&f, &g), Err(Error::WindowMismatch)));
    }

    #[test]
    fn summation_by_parts_bump() {
        let w = make_window(1.0, 2.0, 0).unwrap();
        let f = ScalarField::from_fn(w, |s| s.k1 as f64).unwrap();
        let g = ScalarField::from_fn(w, |s| if s == SiteIndex::new(0, 0) { 2.5 } else { 0.0 }).unwrap();
        assert_eq!(sum_by_parts_residual(&f, &g, Axis::One, Sign::Plus).unwrap(), 0.0);
        assert_eq!(sum_by_parts_residual(&f, &g, Axis::One, Sign::Minus).unwrap(), 0.0);
        let zero = ScalarField::from_fn(w, |_| 0.0).unwrap();
        assert_eq!(sum_by_parts_residual(&f, &zero, Axis::Two, Sign::Plus).unwrap(), 0.0);
        let bad = ScalarField::from_fn(w, |s| if s.k1 == 2 { 1.0 } else { 0.0 }).unwrap();
        assert!(matches!(sum_by_parts_residual(&f, &bad, Axis::One, Sign::Plus), Err(Error::SupportViolation { .. })));
    }

    #[test]
    fn laplacian_is_second_order_consistent() {
        // Continuous Laplacian of sin(x)cos(y) is −2 sin(x)cos(y).
        let errs: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&h| {
                let u = field(h, 1.0, 1, |x, y| x.sin() * y.cos());
                let l = lap(&u).unwrap();
                u.window()
                    .core_sites()
                    .map(|s| {
                        let (x, y) = s.position(h);
                        (l.at(s).unwrap() + 2.0 * x.sin() * y.cos()).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        let r1 = (errs[0] / errs[1]).log2();
        let r2 = (errs[1] / errs[2]).log2();
        assert!((r1 - 2.0).abs() < 0.1 && (r2 - 2.0).abs() < 0.1, "rates {r1} {r2}");
    }
}
