//! Discrete Frenkel-Kontorova calculus on the square lattice `hZ²`.
//!
//! The crate is organised around a small number of building blocks:
//!
//! * [`lattice`] — finite windows of `hZ²`, dense scalar fields on them and
//!   analytic closures that answer queries outside the stored range;
//! * [`calculus`] — forward/backward increments, the discrete Laplacian and
//!   residual checks for the product rules, iterated increments and
//!   summation by parts;
//! * [`angular`] — the complex increment `D₁u + i·D₂u`, its modulus `ρ` and
//!   angle `θ ∈ (−π, π]`;
//! * [`diagnostics`] — the source-term constant `κ₀`, the weighted angular
//!   sums `κ₂ … κ₇`, the rigidity estimate `Σρ²|Dθ|² ≤ C·h` and the per-site
//!   remainder bound of the linearised equation;
//! * [`rigidity`] — detection of one-dimensional configurations and their
//!   reconstruction from a profile via binomial sums;
//! * [`examples`] — analytic equilibrium configurations with their closed-form
//!   bounds, plus a factory for one-dimensional solutions;
//! * [`solver`] — damped gradient descent on the lattice energy;
//! * [`pipeline`], [`io`], [`rates`] — end-to-end runs, CSV output and
//!   log-log rate fitting.
//!
//! Site loops run on rayon when the `parallel` feature is enabled; every
//! reduction uses a fixed traversal order so results are bitwise identical
//! between parallel and sequential execution (see [`exec`]).

// Range checks are written `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angular;
pub mod calculus;
pub mod diagnostics;
pub mod error;
pub mod examples;
pub mod exec;
pub mod io;
pub mod lattice;
pub mod pipeline;
pub mod rates;
pub mod rigidity;
pub mod solver;

pub use error::{Error, Result};
pub use lattice::{make_window, Axis, LatticeWindow, ScalarField, SiteFn, SiteIndex};

/// `e^{2π}`, the factor multiplying the cubic angular sums in the theorem
/// constant. Evaluated at full precision, never pre-rounded.
pub fn e_two_pi() -> f64 {
    (2.0 * std::f64::consts::PI).exp()
}
