//! One-dimensional configurations: detecting them from the vanishing of the
//! angular sums, extracting the slope ratios `c±`, and rebuilding `u` from a
//! one-dimensional profile `ũ` via binomial sums.
//!
//! For `k > 0` (resp. `k < 0`) and `c = c⁺` (resp. `c⁻`),
//! `u_{(hk, hm)} = Σ_{j=0}^{|k|} C(|k|, j) c^j (1 − c)^{|k|−j} ũ_{h(m + σ_k j)}`
//! with `σ_k = sign k`; for `k = 0` the sum is just `ũ_{hm}`.

use std::ops::RangeInclusive;

use crate::angular::{AngularData, Variant};
use crate::error::{Error, Result};
use crate::exec;
use crate::lattice::{Axis, LatticeWindow, ScalarField, SiteIndex};

/// Outcome of the vanishing test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VanishingReport {
    pub is_zero: bool,
    /// `Σ_{i,j} ρ±²(|D_j⁺θ±|² + |D_j⁻θ±|²)` summed over both families.
    pub residual: f64,
    /// `max(1, Σ(ρ⁺² + ρ⁻²))/h²`.
    pub scale: f64,
}

/// Relative threshold below which the angular sums count as zero.
pub const VANISHING_TOLERANCE: f64 = 1e-20;

/// Test whether both angular Dirichlet sums vanish on the core.
///
/// Every core site and its four neighbours must have `ρ± > 0`; otherwise the
/// offending sites are reported as a hypothesis violation.
pub fn check_vanishing(ang: &AngularData) -> Result<VanishingReport> {
    let w = *ang.window();
    let h = w.h;
    let raw = exec::map_indexed(w.core_len(), |i| {
        let s = w.core_site(i);
        let mut sum = 0.0;
        let mut weight = 0.0;
        let mut bad = false;
        for v in Variant::BOTH {
            let rho = ang.rho(v);
            let theta = ang.theta(v);
            let at = |f: &ScalarField, x: SiteIndex| f.at(x).ok_or(Error::StencilOutOfRange { site: x });
            let r = at(rho, s)?;
            let t = at(theta, s)?;
            weight += r * r;
            if r <= 0.0 {
                bad = true;
            }
            for axis in Axis::BOTH {
                let (up, down) = (s.shifted(axis, 1), s.shifted(axis, -1));
                if at(rho, up)? <= 0.0 || at(rho, down)? <= 0.0 {
                    bad = true;
                }
                let dp = (at(theta, up)? - t) / h;
                let dm = (t - at(theta, down)?) / h;
                sum += r * r * (dp * dp + dm * dm);
            }
        }
        Ok::<_, Error>((sum, weight, bad))
    });
    let mut terms = Vec::with_capacity(raw.len());
    let mut weights = Vec::with_capacity(raw.len());
    let mut offenders = Vec::new();
    for (i, r) in raw.into_iter().enumerate() {
        let (sum, weight, bad) = r?;
        if bad {
            offenders.push(w.core_site(i));
        }
        terms.push(sum);
        weights.push(weight);
    }
    if !offenders.is_empty() {
        return Err(Error::HypothesisViolation {
            what: "vanishing increment (ρ = 0) at or next to a core site".into(),
            sites: offenders,
        });
    }
    let residual = exec::det_sum(&terms);
    let scale = exec::det_sum(&weights).max(1.0) / (h * h);
    Ok(VanishingReport { is_zero: residual <= VANISHING_TOLERANCE * scale, residual, scale })
}

/// Slope ratios `c± = (u_{i±he₁} − u_i)/(u_{i±he₂} − u_i)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ratios {
    pub c_plus: f64,
    pub c_minus: f64,
    /// `max_i max(|ratio⁺_i − c⁺|, |ratio⁻_i − c⁻|)` over the core.
    pub constancy_error: f64,
    /// Site at which `c±` were read (nearest the window centre).
    pub reference: SiteIndex,
}

/// Core site nearest the centre of the window.
pub fn center_site(w: &LatticeWindow) -> SiteIndex {
    SiteIndex::new((w.i1_min + w.i1_max).div_euclid(2), (w.i2_min + w.i2_max).div_euclid(2))
}

/// Extract `c±` at the centre and measure how constant the ratios are.
pub fn extract_ratios(u: &ScalarField) -> Result<Ratios> {
    let w = *u.window();
    let raw = exec::map_indexed(w.core_len(), |i| {
        let s = w.core_site(i);
        let ui = u.at(s).ok_or(Error::StencilOutOfRange { site: s })?;
        let mut out = [0.0; 2];
        for (slot, step) in out.iter_mut().zip([1i64, -1]) {
            let a = s.shifted(Axis::One, step);
            let b = s.shifted(Axis::Two, step);
            let num = u.at(a).ok_or(Error::StencilOutOfRange { site: a })? - ui;
            let den = u.at(b).ok_or(Error::StencilOutOfRange { site: b })? - ui;
            *slot = if den == 0.0 { f64::NAN } else { num / den };
        }
        Ok(out)
    });
    let ratios: Vec<[f64; 2]> = raw.into_iter().collect::<Result<_>>()?;
    let zero_den: Vec<SiteIndex> = ratios
        .iter()
        .enumerate()
        .filter(|(_, r)| r[0].is_nan() || r[1].is_nan())
        .map(|(i, _)| w.core_site(i))
        .collect();
    if !zero_den.is_empty() {
        return Err(Error::HypothesisViolation {
            what: "vertical increment u_{i±he₂} − u_i vanishes".into(),
            sites: zero_den,
        });
    }
    let reference = center_site(&w);
    let idx = w.core_sites().position(|s| s == reference).unwrap_or(0);
    // `+ 0.0` normalises a negative zero.
    let [c_plus, c_minus] = ratios[idx].map(|c| c + 0.0);
    let constancy_error = ratios.iter().map(|r| (r[0] - c_plus).abs().max((r[1] - c_minus).abs())).fold(0.0, f64::max);
    Ok(Ratios { c_plus, c_minus, constancy_error, reference })
}

/// Largest `|k|` for which signed weights (`c ∉ [0, 1]`) are accepted.
pub const MAX_SIGNED_ORDER: usize = 60;
/// Above this order weights with `c ∈ (0, 1)` are evaluated in log-space.
pub const LOG_SPACE_ORDER: usize = 40;

/// Row `n` of Pascal's triangle, built by the recurrence
/// `C(n+1, j) = C(n, j−1) + C(n, j)` in floating point.
pub fn pascal_row(n: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for _ in 0..n {
        let mut next = vec![1.0; row.len() + 1];
        for j in 1..row.len() {
            next[j] = row[j - 1] + row[j];
        }
        row = next;
    }
    row
}

fn ln_binomial(n: usize, j: usize) -> f64 {
    let j = j.min(n - j);
    (1..=j).map(|i| (((n - j + i) as f64) / i as f64).ln()).sum()
}

/// Weights `C(n, j) c^j (1 − c)^{n−j}`, `j = 0 … n`.
///
/// `c ∈ {0, 1}` gives exact unit weights; `c ∈ (0, 1)` switches to log-space
/// above order [`LOG_SPACE_ORDER`]; `c` outside `[0, 1]` is accepted up to
/// order [`MAX_SIGNED_ORDER`].
pub fn binomial_weights(n: usize, c: f64) -> Result<Vec<f64>> {
    if !c.is_finite() {
        return Err(Error::InvalidArgument(format!("ratio c = {c} is not finite")));
    }
    let mut w = vec![0.0; n + 1];
    if c == 0.0 {
        w[0] = 1.0;
        return Ok(w);
    }
    if c == 1.0 {
        w[n] = 1.0;
        return Ok(w);
    }
    let inside = c > 0.0 && c < 1.0;
    if inside && n > LOG_SPACE_ORDER {
        let (lc, l1c) = (c.ln(), (1.0 - c).ln());
        for (j, slot) in w.iter_mut().enumerate() {
            *slot = (ln_binomial(n, j) + j as f64 * lc + (n - j) as f64 * l1c).exp();
        }
        return Ok(w);
    }
    if !inside && n > MAX_SIGNED_ORDER {
        return Err(Error::InvalidArgument(format!(
            "binomial order {n} exceeds {MAX_SIGNED_ORDER} for ratio c = {c} outside [0, 1]"
        )));
    }
    let row = pascal_row(n);
    for (j, slot) in w.iter_mut().enumerate() {
        *slot = row[j] * c.powi(j as i32) * (1.0 - c).powi((n - j) as i32);
    }
    Ok(w)
}

/// One-dimensional profile `ũ_{hm}` for `m ∈ [m_min, m_min + len)`, with `c±`.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile1D {
    pub h: f64,
    pub m_min: i64,
    pub values: Vec<f64>,
    pub c_plus: f64,
    pub c_minus: f64,
}

impl Profile1D {
    pub fn get(&self, m: i64) -> Option<f64> {
        let k = m - self.m_min;
        if k < 0 {
            None
        } else {
            self.values.get(k as usize).copied()
        }
    }

    pub fn m_max(&self) -> i64 {
        self.m_min + self.values.len() as i64 - 1
    }
}

/// Evaluate the binomial formula at one `(k, m)`.
pub fn reconstruct_at(profile: &Profile1D, k: i64, m: i64) -> Result<f64> {
    if k == 0 {
        return profile.get(m).ok_or(Error::InsufficientProfile { m });
    }
    let (c, sigma) = if k > 0 { (profile.c_plus, 1) } else { (profile.c_minus, -1) };
    let n = k.unsigned_abs() as usize;
    let weights = binomial_weights(n, c)?;
    weighted_sum(profile, &weights, m, sigma)
}

fn weighted_sum(profile: &Profile1D, weights: &[f64], m: i64, sigma: i64) -> Result<f64> {
    let mut acc = 0.0;
    for (j, &wj) in weights.iter().enumerate() {
        // Exactly-zero weights (degenerate c) do not need profile values.
        if wj == 0.0 {
            continue;
        }
        let mm = m + sigma * j as i64;
        acc += wj * profile.get(mm).ok_or(Error::InsufficientProfile { m: mm })?;
    }
    Ok(acc)
}

/// Rebuild `u` on `k_range × m_range` from the profile (no halo, no closure).
pub fn reconstruct_1d(
    profile: &Profile1D,
    k_range: RangeInclusive<i64>,
    m_range: RangeInclusive<i64>,
) -> Result<ScalarField> {
    let window = LatticeWindow::new(profile.h, *k_range.start(), *k_range.end(), *m_range.start(), *m_range.end(), 0)?;
    // Weights depend on k only: compute once per column.
    let columns: Vec<(i64, Vec<f64>)> = k_range
        .clone()
        .map(|k| {
            if k == 0 {
                Ok((0, vec![1.0]))
            } else {
                let c = if k > 0 { profile.c_plus } else { profile.c_minus };
                Ok((k.signum(), binomial_weights(k.unsigned_abs() as usize, c)?))
            }
        })
        .collect::<Result<_>>()?;
    let k0 = *k_range.start();
    let raw = exec::map_indexed(window.stored_len(), |idx| {
        let s = window.stored_site(idx);
        let (sigma, w) = &columns[(s.k1 - k0) as usize];
        weighted_sum(profile, w, s.k2, *sigma)
    });
    let values: Vec<f64> = raw.into_iter().collect::<Result<_>>()?;
    ScalarField::from_values(window, values)
}

/// Outcome of extracting, reconstructing and comparing.
#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub reconstructed: ScalarField,
    pub max_abs_error: f64,
    pub ratio_constancy_error: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    /// Largest `|k|` in the reconstruction.
    pub k_max: i64,
}

/// Extract `c±`, take `ũ_{hm} := u_{(0, hm)}`, rebuild `u` over the core and
/// report the largest deviation.
///
/// With a closure the profile is read as far as needed; otherwise it is the
/// stored column `k = 0` and the compared `m`-range shrinks by `max|k|`
/// (unless both ratios vanish, when no shift is needed).
pub fn roundtrip_check(u: &ScalarField) -> Result<ReconstructionResult> {
    let w = *u.window();
    let ratios = extract_ratios(u)?;
    if w.i1_min > 0 || w.i1_max < 0 {
        return Err(Error::InvalidArgument("the window core must contain the column k = 0".into()));
    }
    let k_max = w.i1_min.abs().max(w.i1_max.abs());
    let needs_shift = ratios.c_plus != 0.0 || ratios.c_minus != 0.0;
    let (m_lo, m_hi, out_lo, out_hi) = if u.has_closure() {
        (w.i2_min - k_max, w.i2_max + k_max, w.i2_min, w.i2_max)
    } else {
        let (lo, hi) = (w.i2_min - w.halo, w.i2_max + w.halo);
        if needs_shift {
            (lo, hi, (lo + k_max).max(w.i2_min), (hi - k_max).min(w.i2_max))
        } else {
            (lo, hi, w.i2_min, w.i2_max)
        }
    };
    if out_lo > out_hi {
        return Err(Error::InsufficientProfile { m: w.i2_min - k_max });
    }
    let values: Vec<f64> = (m_lo..=m_hi)
        .map(|m| u.at(SiteIndex::new(0, m)).ok_or(Error::InsufficientProfile { m }))
        .collect::<Result<_>>()?;
    let profile = Profile1D { h: w.h, m_min: m_lo, values, c_plus: ratios.c_plus, c_minus: ratios.c_minus };
    let rec = reconstruct_1d(&profile, w.i1_min..=w.i1_max, out_lo..=out_hi)?;
    let rw = *rec.window();
    let errs: Vec<f64> = (0..rw.stored_len())
        .map(|i| {
            let s = rw.stored_site(i);
            (rec.values()[i] - u.at(s).unwrap_or(f64::NAN)).abs()
        })
        .collect();
    let max_abs_error = errs.iter().fold(0.0f64, |a, &e| if e.is_nan() { f64::NAN } else { a.max(e) });
    Ok(ReconstructionResult {
        reconstructed: rec,
        max_abs_error,
        ratio_constancy_error: ratios.constancy_error,
        c_plus: ratios.c_plus,
        c_minus: ratios.c_minus,
        k_max,
    })
}

/// For each `h` (with `1/h` a positive integer `n`), the error
/// `|Σ_{j=0}^{n} C(n, j) c^j (1 − c)^{n−j} ũ(hj) − ũ(c)|` of the binomial sum
/// as an approximation of `ũ(c)`.
pub fn continuum_limit_error<F>(utilde: F, c: f64, h_list: &[f64]) -> Result<Vec<(f64, f64)>>
where
    F: Fn(f64) -> f64,
{
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidArgument(format!("c = {c} must lie in (0, 1)")));
    }
    h_list
        .iter()
        .map(|&h| {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidArgument(format!("h = {h} must be positive")));
            }
            let inv = 1.0 / h;
            let n = inv.round();
            if n < 1.0 || (inv - n).abs() > 1e-9 * n {
                return Err(Error::InvalidArgument(format!("1/h = {inv} is not a positive integer")));
            }
            let n = n as usize;
            let weights = binomial_weights(n, c)?;
            let sum: f64 = weights.iter().enumerate().map(|(j, w)| w * utilde(j as f64 / n as f64)).sum();
            Ok((h, (sum - utilde(c)).abs()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::decompose;
    use crate::lattice::make_window;

    fn field(h: f64, radius: f64, f: impl Fn(i64, i64) -> f64 + Send + Sync + 'static) -> ScalarField {
        ScalarField::from_fn(make_window(h, radius, 2).unwrap(), move |s| f(s.k1, s.k2)).unwrap()
    }

    #[test]
    fn pascal_rows_match_integers() {
        assert_eq!(pascal_row(0), vec![1.0]);
        assert_eq!(pascal_row(4), vec![1.0, 4.0, 6.0, 4.0, 1.0]);
        // C(30, 15) is exactly representable.
        assert_eq!(pascal_row(30)[15], 155_117_520.0);
    }

    #[test]
    fn weights_edge_cases() {
        assert_eq!(binomial_weights(3, 0.0).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(binomial_weights(3, 1.0).unwrap(), vec![0.0, 0.0, 0.0, 1.0]);
        let w = binomial_weights(80, 0.5).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(binomial_weights(61, 1.5).is_err());
        assert!(binomial_weights(10, 1.5).is_ok());
    }

    #[test]
    fn ratios_of_simple_fields() {
        let r = extract_ratios(&field(0.5, 2.0, |_, k2| k2 as f64)).unwrap();
        assert_eq!((r.c_plus, r.c_minus, r.constancy_error), (0.0, 0.0, 0.0));
        let r = extract_ratios(&field(0.5, 2.0, |k1, k2| (k1 + 2 * k2) as f64)).unwrap();
        assert_eq!((r.c_plus, r.c_minus, r.constancy_error), (0.5, 0.5, 0.0));
        let r = extract_ratios(&field(0.5, 2.0, |k1, k2| ((k1 + k2) as f64 * 0.5).tanh())).unwrap();
        assert_eq!((r.c_plus, r.c_minus, r.constancy_error), (1.0, 1.0, 0.0));
        assert!(matches!(extract_ratios(&field(0.5, 2.0, |k1, _| k1 as f64)), Err(Error::HypothesisViolation { .. })));
    }

    #[test]
    fn vanishing_on_ramp_and_failure_on_flat() {
        let rep = check_vanishing(&decompose(&field(0.5, 2.0, |_, k2| k2 as f64)).unwrap()).unwrap();
        assert!(rep.is_zero);
        assert_eq!(rep.residual, 0.0);
        let flat = decompose(&field(0.5, 2.0, |_, _| 1.0)).unwrap();
        assert!(matches!(check_vanishing(&flat), Err(Error::HypothesisViolation { .. })));
    }

    #[test]
    fn reconstruction_small_cases() {
        let p = Profile1D {
            h: 1.0,
            m_min: -5,
            values: (-5..=5).map(|m| (m * m) as f64).collect(),
            c_plus: 0.25,
            c_minus: 0.4,
        };
        // k = 0 reproduces the profile.
        assert_eq!(reconstruct_at(&p, 0, 3).unwrap(), 9.0);
        // k = −1: (1 − c⁻)ũ_m + c⁻ũ_{m−1}.
        let expect = 0.6 * 4.0 + 0.4 * 1.0;
        assert!((reconstruct_at(&p, -1, 2).unwrap() - expect).abs() < 1e-15);
        assert!(matches!(reconstruct_at(&p, 3, 4), Err(Error::InsufficientProfile { m: 6 })));
        let zero = Profile1D { c_plus: 0.0, ..p.clone() };
        for k in 1..5 {
            assert_eq!(reconstruct_at(&zero, k, 5).unwrap(), 25.0);
        }
    }

    #[test]
    fn roundtrip_on_one_dimensional_fields() {
        let r = roundtrip_check(&field(0.5, 3.0, |k1, k2| ((k1 + k2) as f64 * 0.5).tanh())).unwrap();
        assert!(r.max_abs_error <= 1e-12, "{}", r.max_abs_error);
        assert_eq!((r.c_plus, r.c_minus), (1.0, 1.0));
        let no_closure = field(0.5, 3.0, |_, k2| k2 as f64 * 0.5).without_closure();
        let r = roundtrip_check(&no_closure).unwrap();
        assert_eq!(r.max_abs_error, 0.0);
    }

    #[test]
    fn continuum_limit_exact_cases() {
        let e = continuum_limit_error(|t| 2.0 * t - 1.0, 0.3, &[0.1, 0.05]).unwrap();
        assert!(e.iter().all(|&(_, err)| err < 1e-14));
        let e = continuum_limit_error(|t| t * t, 0.3, &[0.1]).unwrap();
        assert!((e[0].1 - 0.1 * 0.3 * 0.7).abs() < 1e-12);
        assert!(continuum_limit_error(|t| t, 0.3, &[0.3]).is_err());
        assert!(continuum_limit_error(|t| t, 1.3, &[0.1]).is_err());
    }
}
