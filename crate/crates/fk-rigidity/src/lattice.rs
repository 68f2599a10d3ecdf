//! Finite windows of the lattice `hZ²` and scalar fields on them.
//!
//! A [`LatticeWindow`] is a rectangle of site indices (the *core*) surrounded
//! by `halo` extra rings that stencils may read. A [`ScalarField`] stores one
//! value per core-or-halo site and may carry an analytic closure that answers
//! queries outside the stored range, so stencils, tails and sups can reach
//! beyond the window without zero-filling.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exec;

/// Integer site index `(k₁, k₂)`; the site's position is `(h·k₁, h·k₂)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SiteIndex {
    pub k1: i64,
    pub k2: i64,
}

impl SiteIndex {
    pub const fn new(k1: i64, k2: i64) -> Self {
        Self { k1, k2 }
    }

    /// Position `(h·k₁, h·k₂)` of the site in the plane.
    pub fn position(self, h: f64) -> (f64, f64) {
        (h * self.k1 as f64, h * self.k2 as f64)
    }

    /// The site `steps` lattice spacings away along `axis`.
    pub fn shifted(self, axis: Axis, steps: i64) -> Self {
        match axis {
            Axis::One => Self::new(self.k1 + steps, self.k2),
            Axis::Two => Self::new(self.k1, self.k2 + steps),
        }
    }

    /// Chebyshev norm `max(|k₁|, |k₂|)`.
    pub fn cheb_norm(self) -> i64 {
        self.k1.abs().max(self.k2.abs())
    }
}

/// Lattice axis `e₁ = (1, 0)` or `e₂ = (0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    One,
    Two,
}

impl Axis {
    /// Both axes, in order.
    pub const BOTH: [Axis; 2] = [Axis::One, Axis::Two];
}

/// Analytic rule `site ↦ value` used to sample fields and to answer
/// out-of-window queries.
pub type SiteFn = Arc<dyn Fn(SiteIndex) -> f64 + Send + Sync>;

/// Rule `R ↦ bound` on `Σ_{|i|∞ ≥ R} |value_i|` for a summable field.
pub type TailFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Finite rectangular patch of `hZ²` with mesh `h` and `halo` extra rings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeWindow {
    pub h: f64,
    pub i1_min: i64,
    pub i1_max: i64,
    pub i2_min: i64,
    pub i2_max: i64,
    pub halo: i64,
}

/// Window covering every site with `max(|i₁|, |i₂|) ≤ radius` (positions, not
/// indices) plus `halo` rings.
pub fn make_window(h: f64, radius: f64, halo: usize) -> Result<LatticeWindow> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("mesh h must be positive, got {h}")));
    }
    if !(radius.is_finite() && radius >= h) {
        return Err(Error::InvalidArgument(format!(
            "radius must satisfy radius ≥ h > 0, got radius {radius} with h {h}"
        )));
    }
    // Guard against 10/0.1 = 99.999… style rounding.
    let n = (radius / h * (1.0 + 1e-12)).floor() as i64;
    LatticeWindow::new(h, -n, n, -n, n, halo)
}

impl LatticeWindow {
    /// Window with explicit index bounds.
    pub fn new(h: f64, i1_min: i64, i1_max: i64, i2_min: i64, i2_max: i64, halo: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("mesh h must be positive, got {h}")));
        }
        if i1_min > i1_max || i2_min > i2_max {
            return Err(Error::InvalidArgument(format!("empty window: [{i1_min}, {i1_max}] × [{i2_min}, {i2_max}]")));
        }
        Ok(Self { h, i1_min, i1_max, i2_min, i2_max, halo: halo as i64 })
    }

    /// Number of stored columns (core plus both halos) along axis 1.
    pub fn stored_n1(&self) -> usize {
        (self.i1_max - self.i1_min + 1 + 2 * self.halo) as usize
    }

    /// Number of stored rows (core plus both halos) along axis 2.
    pub fn stored_n2(&self) -> usize {
        (self.i2_max - self.i2_min + 1 + 2 * self.halo) as usize
    }

    /// Total number of stored sites.
    pub fn stored_len(&self) -> usize {
        self.stored_n1() * self.stored_n2()
    }

    /// Number of core sites.
    pub fn core_len(&self) -> usize {
        ((self.i1_max - self.i1_min + 1) * (self.i2_max - self.i2_min + 1)) as usize
    }

    /// Whether `site` lies in the core rectangle.
    pub fn in_core(&self, site: SiteIndex) -> bool {
        (self.i1_min..=self.i1_max).contains(&site.k1) && (self.i2_min..=self.i2_max).contains(&site.k2)
    }

    /// Whether `site` is stored (core or halo).
    pub fn is_stored(&self, site: SiteIndex) -> bool {
        self.stored_index(site).is_some()
    }

    /// Row-major storage index (rows along axis 2, columns along axis 1).
    pub fn stored_index(&self, site: SiteIndex) -> Option<usize> {
        let c = site.k1 - (self.i1_min - self.halo);
        let r = site.k2 - (self.i2_min - self.halo);
        if c < 0 || r < 0 {
            return None;
        }
        let (c, r) = (c as usize, r as usize);
        let n1 = self.stored_n1();
        if c >= n1 || r >= self.stored_n2() {
            return None;
        }
        Some(r * n1 + c)
    }

    /// Site stored at storage index `idx`.
    pub fn stored_site(&self, idx: usize) -> SiteIndex {
        let n1 = self.stored_n1();
        SiteIndex::new((idx % n1) as i64 + self.i1_min - self.halo, (idx / n1) as i64 + self.i2_min - self.halo)
    }

    /// `idx`-th core site in row-major order.
    pub fn core_site(&self, idx: usize) -> SiteIndex {
        let n1 = (self.i1_max - self.i1_min + 1) as usize;
        SiteIndex::new((idx % n1) as i64 + self.i1_min, (idx / n1) as i64 + self.i2_min)
    }

    /// All core sites in row-major order.
    pub fn core_sites(&self) -> impl Iterator<Item = SiteIndex> + '_ {
        (0..self.core_len()).map(|i| self.core_site(i))
    }

    /// Same core with a different halo width.
    pub fn with_halo(&self, halo: usize) -> Self {
        Self { halo: halo as i64, ..*self }
    }

    /// Core grown by `by` sites on every side (halo unchanged).
    pub fn expanded(&self, by: i64) -> Self {
        Self {
            i1_min: self.i1_min - by,
            i1_max: self.i1_max + by,
            i2_min: self.i2_min - by,
            i2_max: self.i2_max + by,
            ..*self
        }
    }

    /// Same window translated by `(d1, d2)` sites.
    pub fn translated(&self, d1: i64, d2: i64) -> Self {
        Self {
            i1_min: self.i1_min + d1,
            i1_max: self.i1_max + d1,
            i2_min: self.i2_min + d2,
            i2_max: self.i2_max + d2,
            ..*self
        }
    }

    /// Chebyshev distance from `site` to the core rectangle (0 inside).
    pub fn distance_outside_core(&self, site: SiteIndex) -> i64 {
        let d1 = (self.i1_min - site.k1).max(site.k1 - self.i1_max).max(0);
        let d2 = (self.i2_min - site.k2).max(site.k2 - self.i2_max).max(0);
        d1.max(d2)
    }

    /// Half of the larger core side, at least 1: the scale used for tail shells.
    pub fn half_width(&self) -> i64 {
        let w1 = self.i1_max - self.i1_min + 1;
        let w2 = self.i2_max - self.i2_min + 1;
        (w1.max(w2) / 2).max(1)
    }

    /// Whether two windows describe the same sites and mesh.
    pub fn same_as(&self, other: &Self) -> bool {
        self == other
    }
}

/// Real values on a [`LatticeWindow`] (core and halo), optionally backed by an
/// analytic closure for sites outside the stored range.
#[derive(Clone)]
pub struct ScalarField {
    window: LatticeWindow,
    values: Arc<Vec<f64>>,
    closure: Option<SiteFn>,
    tail_bound: Option<TailFn>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("window", &self.window)
            .field("stored", &self.values.len())
            .field("closure", &self.closure.is_some())
            .field("tail_bound", &self.tail_bound.is_some())
            .finish()
    }
}

/// Sample `closure` at every stored site of `window`; the closure is retained
/// for out-of-window queries.
pub fn sample(closure: SiteFn, window: LatticeWindow) -> Result<ScalarField> {
    ScalarField::sample(closure, window)
}

impl ScalarField {
    /// See [`sample`].
    pub fn sample(closure: SiteFn, window: LatticeWindow) -> Result<Self> {
        let values = exec::map_indexed(window.stored_len(), |idx| closure(window.stored_site(idx)));
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::SamplingFailure { site: window.stored_site(idx), value: values[idx] });
        }
        Ok(Self { window, values: Arc::new(values), closure: Some(closure), tail_bound: None })
    }

    /// Convenience wrapper around [`ScalarField::sample`] for plain closures.
    pub fn from_fn<F>(window: LatticeWindow, f: F) -> Result<Self>
    where
        F: Fn(SiteIndex) -> f64 + Send + Sync + 'static,
    {
        Self::sample(Arc::new(f), window)
    }

    /// Field from explicit stored values (row-major, core and halo), without closure.
    pub fn from_values(window: LatticeWindow, values: Vec<f64>) -> Result<Self> {
        if values.len() != window.stored_len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} stored values, got {}",
                window.stored_len(),
                values.len()
            )));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::SamplingFailure { site: window.stored_site(idx), value: values[idx] });
        }
        Ok(Self { window, values: Arc::new(values), closure: None, tail_bound: None })
    }

    /// Field whose stored values are computed site-wise by `f`; `closure`
    /// (if any) answers out-of-window queries. Non-finite values are rejected.
    pub(crate) fn from_parts<F>(window: LatticeWindow, f: F, closure: Option<SiteFn>) -> Result<Self>
    where
        F: Fn(SiteIndex) -> Option<f64> + Sync + Send,
    {
        let raw = exec::map_indexed(window.stored_len(), |idx| f(window.stored_site(idx)));
        let mut values = Vec::with_capacity(raw.len());
        for (idx, v) in raw.into_iter().enumerate() {
            match v {
                Some(x) if x.is_finite() => values.push(x),
                Some(x) => return Err(Error::SamplingFailure { site: window.stored_site(idx), value: x }),
                None => return Err(Error::StencilOutOfRange { site: window.stored_site(idx) }),
            }
        }
        Ok(Self { window, values: Arc::new(values), closure, tail_bound: None })
    }

    pub fn window(&self) -> &LatticeWindow {
        &self.window
    }

    pub fn h(&self) -> f64 {
        self.window.h
    }

    /// Stored values in row-major order (core and halo).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn closure(&self) -> Option<&SiteFn> {
        self.closure.as_ref()
    }

    pub fn has_closure(&self) -> bool {
        self.closure.is_some()
    }

    pub fn tail_bound(&self) -> Option<&TailFn> {
        self.tail_bound.as_ref()
    }

    /// Attach a closure for out-of-window queries (stored values unchanged).
    pub fn with_closure(mut self, closure: SiteFn) -> Self {
        self.closure = Some(closure);
        self
    }

    /// Drop the closure: the field then only knows its stored values.
    pub fn without_closure(mut self) -> Self {
        self.closure = None;
        self
    }

    /// Attach a tail bound `R ↦ Σ_{|i|∞ ≥ R} |value_i|`.
    pub fn with_tail_bound(mut self, tail: TailFn) -> Self {
        self.tail_bound = Some(tail);
        self
    }

    /// Stored value at `site`, if stored.
    pub fn get(&self, site: SiteIndex) -> Option<f64> {
        self.window.stored_index(site).map(|i| self.values[i])
    }

    /// Value at `site`: stored value if available, otherwise the closure's.
    pub fn at(&self, site: SiteIndex) -> Option<f64> {
        match self.window.stored_index(site) {
            Some(i) => Some(self.values[i]),
            None => self.closure.as_ref().map(|c| c(site)),
        }
    }

    /// Largest absolute stored value.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Re-sample the closure on another window. Fails without a closure.
    pub fn resample(&self, window: LatticeWindow) -> Result<Self> {
        match &self.closure {
            Some(c) => Ok(Self::sample(c.clone(), window)?.with_tail_opt(self.tail_bound.clone())),
            None => {
                Err(Error::InvalidArgument("field has no analytic closure; cannot resample on another window".into()))
            }
        }
    }

    fn with_tail_opt(mut self, tail: Option<TailFn>) -> Self {
        self.tail_bound = tail;
        self
    }

    /// Sum over the core and, when a tail bound is attached, the bound on the
    /// remainder beyond the core's Chebyshev radius (in positions).
    pub fn core_sum_with_tail(&self) -> (f64, Option<f64>) {
        let w = &self.window;
        let vals: Vec<f64> = w.core_sites().map(|s| self.get(s).unwrap_or(0.0)).collect();
        let s = exec::det_sum(&vals);
        let radius = w.h * (w.i1_max.min(-w.i1_min).min(w.i2_max).min(-w.i2_min) + 1) as f64;
        (s, self.tail_bound.as_ref().map(|t| t(radius)))
    }

    /// Pointwise product; the product closure exists when both factors have one.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if !self.window.same_as(&other.window) {
            return Err(Error::WindowMismatch);
        }
        let values: Vec<f64> = self.values.iter().zip(other.values.iter()).map(|(a, b)| a * b).collect();
        let closure: Option<SiteFn> = match (&self.closure, &other.closure) {
            (Some(a), Some(b)) => {
                let (a, b) = (a.clone(), b.clone());
                Some(Arc::new(move |s| a(s) * b(s)))
            }
            _ => None,
        };
        Ok(Self { window: self.window, values: Arc::new(values), closure, tail_bound: None })
    }
}
