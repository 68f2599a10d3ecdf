//! Equilibria of the lattice energy
//! `F(u) = d/(2h²) Σ_{bonds} (u_{i+he_j} − u_i)² + Σ_i V(i, u_i)`
//! on a finite window, found by damped gradient descent with backtracking.
//!
//! The free sites are the core. Along a Dirichlet direction the halo values
//! are held fixed and every bond with at least one core endpoint counts; along
//! a periodic direction the core wraps around.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exec;
use crate::lattice::{Axis, LatticeWindow, ScalarField, SiteIndex};

/// `(site, value) ↦ real` rule for the on-site potential and its derivative.
pub type PotentialRule = Arc<dyn Fn(SiteIndex, f64) -> f64 + Send + Sync>;

/// On-site potential `V`, its derivative `∂V/∂u`, and the spring constant `d`.
#[derive(Clone)]
pub struct Potential {
    pub v: PotentialRule,
    pub dv: PotentialRule,
    pub hooke_d: f64,
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Potential").field("hooke_d", &self.hooke_d).finish_non_exhaustive()
    }
}

/// Probe values used by [`Potential::check_consistency`].
const PROBES: [f64; 7] = [-2.3, -1.0, -0.37, 0.0, 0.5, 1.3, 3.1];

impl Potential {
    /// Build a potential, rejecting `d ≤ 0` and a derivative inconsistent with `V`.
    pub fn new(v: PotentialRule, dv: PotentialRule, hooke_d: f64) -> Result<Self> {
        if !(hooke_d > 0.0 && hooke_d.is_finite()) {
            return Err(Error::InvalidArgument(format!("spring constant d = {hooke_d} must be positive")));
        }
        let pot = Self { v, dv, hooke_d };
        pot.check_consistency(SiteIndex::new(0, 0))?;
        Ok(pot)
    }

    /// `V ≡ 0`.
    pub fn free(hooke_d: f64) -> Result<Self> {
        Self::new(Arc::new(|_, _| 0.0), Arc::new(|_, _| 0.0), hooke_d)
    }

    /// Sine-Gordon substrate `V(u) = −cos u`, `∂V/∂u = sin u`.
    pub fn sine_gordon(hooke_d: f64) -> Result<Self> {
        Self::new(Arc::new(|_, u: f64| -u.cos()), Arc::new(|_, u: f64| u.sin()), hooke_d)
    }

    /// Compare `dv` with a central difference of `v` at a few probe values;
    /// the relative mismatch must not exceed `1e-6`.
    pub fn check_consistency(&self, site: SiteIndex) -> Result<()> {
        for &x in &PROBES {
            let eps = 1e-5 * x.abs().max(1.0);
            let fd = ((self.v)(site, x + eps) - (self.v)(site, x - eps)) / (2.0 * eps);
            let an = (self.dv)(site, x);
            if !(fd.is_finite() && an.is_finite()) || (fd - an).abs() > 1e-6 * an.abs().max(fd.abs()).max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "∂V/∂u inconsistent with V at u = {x}: rule gives {an}, finite difference gives {fd}"
                )));
            }
        }
        Ok(())
    }

    /// `V(i, b) − V(i, a)`, evaluated by Simpson's rule on `∂V/∂u` when the
    /// increment is small, to avoid cancellation.
    fn v_difference(&self, site: SiteIndex, a: f64, b: f64) -> f64 {
        let delta = b - a;
        if delta == 0.0 {
            0.0
        } else if delta.abs() <= 1e-3 * a.abs().max(1.0) {
            let dv = &self.dv;
            delta / 6.0 * (dv(site, a) + 4.0 * dv(site, a + 0.5 * delta) + dv(site, b))
        } else {
            (self.v)(site, b) - (self.v)(site, a)
        }
    }
}

/// How the boundary of the window is treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Halo values (from the stored data or the closure) are held fixed.
    Dirichlet,
    /// The core wraps around as a torus.
    Periodic,
    /// Periodic along `e₁`, Dirichlet along `e₂`: relaxing data that depend
    /// on `x₂` only keeps the iterate one-dimensional.
    Cylinder,
}

impl Boundary {
    pub fn label(self) -> &'static str {
        match self {
            Boundary::Dirichlet => "dirichlet",
            Boundary::Periodic => "periodic",
            Boundary::Cylinder => "cylinder",
        }
    }

    /// Whether the core wraps around along `axis`.
    pub fn is_periodic(self, axis: Axis) -> bool {
        match self {
            Boundary::Dirichlet => false,
            Boundary::Periodic => true,
            Boundary::Cylinder => axis == Axis::One,
        }
    }
}

/// Parameters of [`relax`]. `step = None` means `h²/(4d)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub step: Option<f64>,
    pub max_iters: usize,
    pub residual_tol: f64,
    pub boundary: Boundary,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { step: None, max_iters: 100_000, residual_tol: 1e-10, boundary: Boundary::Dirichlet }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if let Some(s) = self.step {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidArgument(format!("step = {s} must be positive")));
            }
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::InvalidArgument(format!("residual_tol = {} must be positive", self.residual_tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Maximum number of step halvings attempted within one iteration.
pub const MAX_HALVINGS: usize = 30;

/// Precomputed stencil: stored indices of each core site and its neighbours.
struct Topology {
    window: LatticeWindow,
    core: Vec<usize>,
    /// Neighbours in the order `+e₁, −e₁, +e₂, −e₂`.
    neighbours: Vec<[usize; 4]>,
    /// Bonds `(a, b)` as stored indices, each counted once.
    bonds: Vec<(usize, usize)>,
    core_sites: Vec<SiteIndex>,
    boundary: Boundary,
}

/// Map a site onto the core along the periodic directions of `boundary`.
fn wrap_site(w: &LatticeWindow, boundary: Boundary, s: SiteIndex) -> SiteIndex {
    let k1 = if boundary.is_periodic(Axis::One) {
        w.i1_min + (s.k1 - w.i1_min).rem_euclid(w.i1_max - w.i1_min + 1)
    } else {
        s.k1
    };
    let k2 = if boundary.is_periodic(Axis::Two) {
        w.i2_min + (s.k2 - w.i2_min).rem_euclid(w.i2_max - w.i2_min + 1)
    } else {
        s.k2
    };
    SiteIndex::new(k1, k2)
}

impl Topology {
    fn new(window: LatticeWindow, boundary: Boundary) -> Result<Self> {
        let wrap = |s: SiteIndex| wrap_site(&window, boundary, s);
        let index = |s: SiteIndex| window.stored_index(s).ok_or(Error::StencilOutOfRange { site: s });
        let core_sites: Vec<SiteIndex> = window.core_sites().collect();
        let mut core = Vec::with_capacity(core_sites.len());
        let mut neighbours = Vec::with_capacity(core_sites.len());
        let mut bonds = Vec::new();
        for &s in &core_sites {
            let me = index(s)?;
            core.push(me);
            let mut nb = [0usize; 4];
            for (slot, (axis, step)) in
                nb.iter_mut().zip([(Axis::One, 1), (Axis::One, -1), (Axis::Two, 1), (Axis::Two, -1)])
            {
                *slot = index(wrap(s.shifted(axis, step)))?;
            }
            neighbours.push(nb);
            for axis in Axis::BOTH {
                bonds.push((me, index(wrap(s.shifted(axis, 1)))?));
                let below = s.shifted(axis, -1);
                if !boundary.is_periodic(axis) && !window.in_core(below) {
                    bonds.push((index(below)?, me));
                }
            }
        }
        Ok(Self { window, core, neighbours, bonds, core_sites, boundary })
    }

    fn residual(&self, u: &[f64], pot: &Potential) -> Vec<f64> {
        let h = self.window.h;
        exec::map_indexed(self.core.len(), |i| {
            let c = u[self.core[i]];
            let nb = self.neighbours[i];
            let lap1 = ((u[nb[0]] - c) / h - (c - u[nb[1]]) / h) / h;
            let lap2 = ((u[nb[2]] - c) / h - (c - u[nb[3]]) / h) / h;
            pot.hooke_d * (lap1 + lap2) - (pot.dv)(self.core_sites[i], c)
        })
    }

    fn energy(&self, u: &[f64], pot: &Potential) -> f64 {
        let h2 = self.window.h * self.window.h;
        let springs = exec::map_indexed(self.bonds.len(), |b| {
            let (x, y) = self.bonds[b];
            (u[y] - u[x]).powi(2)
        });
        let onsite = exec::map_indexed(self.core.len(), |i| (pot.v)(self.core_sites[i], u[self.core[i]]));
        pot.hooke_d / (2.0 * h2) * exec::det_sum(&springs) + exec::det_sum(&onsite)
    }

    /// `F(new) − F(old)` in difference form. With the realised increments
    /// `δ = new − old` (exact by Sterbenz's lemma near convergence) each bond
    /// contributes `(δ_y − δ_x)(2(old_y − old_x) + δ_y − δ_x)`, which avoids
    /// differencing two nearly equal energies; on-site differences use
    /// [`Potential::v_difference`].
    fn energy_change(&self, old: &[f64], new: &[f64], pot: &Potential) -> f64 {
        let h2 = self.window.h * self.window.h;
        let springs = exec::map_indexed(self.bonds.len(), |b| {
            let (x, y) = self.bonds[b];
            let dd = (new[y] - old[y]) - (new[x] - old[x]);
            dd * (2.0 * (old[y] - old[x]) + dd)
        });
        let onsite = exec::map_indexed(self.core.len(), |i| {
            let k = self.core[i];
            pot.v_difference(self.core_sites[i], old[k], new[k])
        });
        pot.hooke_d / (2.0 * h2) * exec::det_sum(&springs) + exec::det_sum(&onsite)
    }

    /// Copy wrapped values into the halo along the periodic directions.
    fn fill_periodic_halo(&self, u: &mut [f64]) {
        let w = self.window;
        for idx in 0..w.stored_len() {
            let s = w.stored_site(idx);
            if !w.in_core(s) {
                let t = wrap_site(&w, self.boundary, s);
                if t != s {
                    if let Some(j) = w.stored_index(t) {
                        u[idx] = u[j];
                    }
                }
            }
        }
    }
}

/// Make sure the halo holds boundary data (at least one ring).
fn prepared(u: &ScalarField, boundary: Boundary) -> Result<ScalarField> {
    let w = *u.window();
    if w.halo >= 1 || boundary == Boundary::Periodic {
        Ok(u.clone())
    } else {
        u.resample(w.with_halo(1))
    }
}

/// Energy of `u` restricted to the window (see the module documentation).
pub fn energy(u: &ScalarField, pot: &Potential, boundary: Boundary) -> Result<f64> {
    let u = prepared(u, boundary)?;
    let topo = Topology::new(*u.window(), boundary)?;
    Ok(topo.energy(u.values(), pot))
}

/// `d·lap(u)_i − ∂V/∂u(i, u_i)` on the core; zero exactly at equilibria.
pub fn residual(u: &ScalarField, pot: &Potential, boundary: Boundary) -> Result<ScalarField> {
    let u = prepared(u, boundary)?;
    let w = *u.window();
    let topo = Topology::new(w, boundary)?;
    let r = topo.residual(u.values(), pot);
    ScalarField::from_values(w.with_halo(0), r)
}

/// Outcome of [`relax`].
#[derive(Clone, Debug)]
pub struct RelaxResult {
    /// Final iterate (halo holds the boundary data; no closure attached).
    pub u: ScalarField,
    pub iterations: usize,
    pub final_residual_max: f64,
    pub converged: bool,
    /// Step in use at the end (after any halvings).
    pub final_step: f64,
    /// `F(u_0), F(u_1), …`: the initial energy plus the accumulated accepted
    /// changes, so each entry is `≤` its predecessor.
    pub energy_history: Vec<f64>,
    /// The accepted changes `F(u_{n+1}) − F(u_n)` themselves.
    pub energy_changes: Vec<f64>,
    /// Total number of step halvings performed.
    pub halvings: usize,
}

/// Gradient descent `u ← u + step·residual(u)` on the core (Jacobi sweep from
/// the frozen previous iterate) until `max|residual| ≤ residual_tol` or the
/// iteration budget is spent.
///
/// A trial step that would raise the energy is halved, up to
/// [`MAX_HALVINGS`] times, and the reduced step is kept for later iterations.
/// If no admissible step is found the run stops unconverged.
pub fn relax(u0: &ScalarField, pot: &Potential, cfg: &SolverConfig) -> Result<RelaxResult> {
    cfg.validate()?;
    let u = prepared(u0, cfg.boundary)?;
    let w = *u.window();
    let topo = Topology::new(w, cfg.boundary)?;
    let mut cur = u.values().to_vec();
    if cfg.boundary != Boundary::Dirichlet {
        topo.fill_periodic_halo(&mut cur);
    }
    let mut step = cfg.step.unwrap_or(w.h * w.h / (4.0 * pot.hooke_d));
    let e0 = topo.energy(&cur, pot);
    if !e0.is_finite() {
        return Err(Error::SolverFailure(format!("initial energy is {e0}")));
    }
    let mut energy_history = vec![e0];
    let mut energy_changes = Vec::new();
    let mut halvings = 0;
    let mut res = topo.residual(&cur, pot);
    let mut res_max = exec::det_max(&res.iter().map(|r| r.abs()).collect::<Vec<_>>());
    let mut iterations = 0;
    let mut trial = cur.clone();
    while res_max > cfg.residual_tol && iterations < cfg.max_iters {
        if !res_max.is_finite() {
            return Err(Error::SolverFailure(format!("residual became {res_max} after {iterations} iterations")));
        }
        let mut accepted = None;
        for attempt in 0..=MAX_HALVINGS {
            if attempt > 0 {
                step *= 0.5;
                halvings += 1;
            }
            trial.copy_from_slice(&cur);
            for (i, &k) in topo.core.iter().enumerate() {
                trial[k] = cur[k] + step * res[i];
            }
            if cfg.boundary != Boundary::Dirichlet {
                topo.fill_periodic_halo(&mut trial);
            }
            let de = topo.energy_change(&cur, &trial, pot);
            if !de.is_finite() {
                return Err(Error::SolverFailure(format!("energy change became {de} after {iterations} iterations")));
            }
            if de <= 0.0 {
                accepted = Some(de);
                break;
            }
        }
        let Some(de) = accepted else { break };
        std::mem::swap(&mut cur, &mut trial);
        iterations += 1;
        let last = *energy_history.last().unwrap_or(&e0);
        energy_history.push(last + de);
        energy_changes.push(de);
        res = topo.residual(&cur, pot);
        res_max = exec::det_max(&res.iter().map(|r| r.abs()).collect::<Vec<_>>());
    }
    if !res_max.is_finite() {
        return Err(Error::SolverFailure(format!("residual became {res_max}")));
    }
    Ok(RelaxResult {
        u: ScalarField::from_values(w, cur)?,
        iterations,
        final_residual_max: res_max,
        converged: res_max <= cfg.residual_tol,
        final_step: step,
        energy_history,
        energy_changes,
        halvings,
    })
}
