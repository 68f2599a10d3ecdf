//! Error type shared by every module of the crate.

use crate::lattice::SiteIndex;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building fields or running diagnostics.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An analytic closure produced a non-finite value while sampling.
    #[error("sampling failure at site ({}, {}): closure returned {value}", site.k1, site.k2)]
    SamplingFailure { site: SiteIndex, value: f64 },

    /// A stencil needs a value that is neither stored nor supplied by a closure.
    #[error("stencil out of range at site ({}, {}): increase the halo or attach a closure", site.k1, site.k2)]
    StencilOutOfRange { site: SiteIndex },

    /// Two fields that must share a window do not.
    #[error("window mismatch: fields live on different lattice windows")]
    WindowMismatch,

    /// A field expected to be compactly supported is nonzero on the window boundary.
    #[error("support violation: field is nonzero at boundary site ({}, {})", site.k1, site.k2)]
    SupportViolation { site: SiteIndex },

    /// A source rule produced a non-finite value.
    #[error("evaluation error at site ({}, {}): {what}", site.k1, site.k2)]
    Evaluation { site: SiteIndex, what: String },

    /// A structural hypothesis (nonvanishing increments, vanishing angular
    /// energy, nonzero denominators…) fails; the offending sites are listed.
    #[error("hypothesis violated: {what} ({} site(s), first: {})", sites.len(), format_sites(sites))]
    HypothesisViolation { what: String, sites: Vec<SiteIndex> },

    /// The configuration does not solve `L u = f(i, u)` to the required tolerance.
    #[error("equation residual too large: {residual:e} at site ({}, {}) exceeds {tolerance:e}", site.k1, site.k2)]
    EquationResidualTooLarge { residual: f64, tolerance: f64, site: SiteIndex },

    /// A one-dimensional profile does not cover the requested reconstruction range.
    #[error("insufficient profile: value at m = {m} is required but unavailable")]
    InsufficientProfile { m: i64 },

    /// The gradient-descent solver produced non-finite energies.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// Input/output failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// CSV encoding or decoding failure.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// Malformed input data.
    #[error("parse error: {0}")]
    Parse(String),
}

fn format_sites(sites: &[SiteIndex]) -> String {
    let shown: Vec<String> = sites.iter().take(5).map(|s| format!("({}, {})", s.k1, s.k2)).collect();
    if shown.is_empty() {
        "none".to_string()
    } else {
        shown.join(", ")
    }
}
