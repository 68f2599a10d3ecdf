//! End-to-end runs: sample a configuration, compute every constant, verify
//! the rigidity estimate and the remainder bound, and compare with the
//! closed-form bounds of the configuration; plus sweeps over `h`.

use crate::angular::{check_assumptions, decompose, AssumptionReport, Variant};
use crate::diagnostics::{
    kappa0, kappa_report, linearized_residual, theorem_constant, verify_theorem, DiagnosticsOptions, Kappa0Choice,
    KappaReport, Mode, RemainderReport, SourceTerm, TheoremReport, ThetaInfSource, Verdict,
};
use crate::error::{Error, Result};
use crate::examples::{
    build_1d_solution, build_example1, build_example2, build_example3, build_example4, AnalyticBound, ExampleId,
    ExampleSpec, MonotoneProfile, Quantity, SemilinearProfile,
};
use crate::exec;
use crate::lattice::ScalarField;
use crate::rates::{loglog_slope, successive_rates};

/// Parse an example name: `1`/`ex1`, `2`/`ex2-arctan`, `3`/`ex3-exp`,
/// `4`/`ex4-semilinear`, `oned`/`oned-factory`.
pub fn parse_example_id(s: &str) -> Result<ExampleId> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "ex1" | "bump" => Ok(ExampleId::Bump),
        "2" | "ex2" | "ex2-arctan" | "arctan" => Ok(ExampleId::Arctan),
        "3" | "ex3" | "ex3-exp" | "gaussian" => Ok(ExampleId::Gaussian),
        "4" | "ex4" | "ex4-semilinear" | "semilinear" => Ok(ExampleId::Semilinear),
        "oned" | "oned-factory" | "1d" => Ok(ExampleId::OneD),
        other => Err(Error::InvalidArgument(format!("unknown example '{other}' (expected 1, 2, 3, 4 or oned)"))),
    }
}

/// Everything needed to build a configuration at any `h`.
#[derive(Clone, Debug)]
pub struct ExampleSelector {
    pub id: ExampleId,
    /// Profile of the semilinear configuration.
    pub semilinear: SemilinearProfile,
    /// Profile and direction of the one-dimensional factory.
    pub monotone: MonotoneProfile,
    pub omega: (i64, i64),
}

impl ExampleSelector {
    /// Defaults: sine-Gordon profile for the semilinear case, `tanh` kink along
    /// `e₁ + e₂` for the factory.
    pub fn new(id: ExampleId) -> Self {
        Self { id, semilinear: SemilinearProfile::sine_gordon(), monotone: MonotoneProfile::tanh_kink(), omega: (1, 1) }
    }

    pub fn build(&self, h: f64) -> Result<ExampleSpec> {
        match self.id {
            ExampleId::Bump => build_example1(h),
            ExampleId::Arctan => build_example2(h),
            ExampleId::Gaussian => build_example3(h),
            ExampleId::Semilinear => build_example4(h, &self.semilinear),
            ExampleId::OneD => Ok(build_1d_solution(&self.monotone, self.omega, h)?.into_spec()),
        }
    }
}

/// Options of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    /// Half-width of the square window in lattice units of length.
    pub radius: f64,
    /// Overrides the configuration's limit angle when set.
    pub theta_inf: Option<ThetaInfSource>,
    pub mode: Mode,
    pub tails: bool,
    pub worst_sites: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { radius: 10.0, theta_inf: None, mode: Mode::FormPlus, tails: true, worst_sites: 5 }
    }
}

/// One closed-form bound compared with the computed value.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCheck {
    pub bound: AnalyticBound,
    pub computed: f64,
    pub ok: bool,
}

/// Result of running the full diagnostic chain on one field.
#[derive(Clone, Debug)]
pub struct ExampleRun {
    pub label: String,
    pub h: f64,
    pub report: KappaReport,
    pub theorem: TheoremReport,
    pub remainder: RemainderReport,
    /// `κ₀⁺` over the window (the `κ₀` of the report may be analytic).
    pub kappa0_window: f64,
    pub bounds: Vec<BoundCheck>,
    pub assumptions: AssumptionReport,
}

impl ExampleRun {
    pub fn bounds_ok(&self) -> bool {
        self.bounds.iter().all(|b| b.ok)
    }

    /// Verdict holds, every closed-form bound is respected and the remainder
    /// bound holds at every checked site.
    pub fn all_ok(&self) -> bool {
        self.theorem.verdict == Verdict::Holds && self.bounds_ok() && self.remainder.passed()
    }

    /// The computed value a bound refers to (all `+` family).
    pub fn quantity(&self, q: Quantity) -> f64 {
        let k = &self.report.plus;
        match q {
            Quantity::Kappa0 => self.kappa0_window,
            Quantity::Kappa1 => k.kappa1,
            Quantity::Kappa2 => k.kappa2,
            Quantity::Kappa3 => k.kappa3,
            Quantity::Kappa4 => k.kappa4,
            Quantity::Kappa5 => k.kappa5,
            Quantity::Kappa6 => k.kappa6,
            Quantity::Kappa7 => k.kappa7,
            Quantity::Lhs => k.lhs,
            Quantity::BoundCh => theorem_constant(k) * self.h,
        }
    }
}

/// Run the chain on an arbitrary field with its source term.
pub fn run_field(
    label: &str,
    u: &ScalarField,
    src: &SourceTerm,
    theta_inf: ThetaInfSource,
    kappa0_choice: Kappa0Choice,
    bounds: &[AnalyticBound],
    opts: &RunOptions,
) -> Result<ExampleRun> {
    let dopts =
        DiagnosticsOptions { theta_inf, kappa0: kappa0_choice, tails: opts.tails, worst_sites: opts.worst_sites };
    let report = kappa_report(u, src, &dopts)?;
    let theorem = verify_theorem(&report, opts.mode);
    let ang = decompose(u)?;
    let remainder = linearized_residual(u, src, &ang)?;
    let kappa0_window = kappa0(u, src, Variant::Plus)?;
    let mut run = ExampleRun {
        label: label.to_string(),
        h: u.h(),
        report,
        theorem,
        remainder,
        kappa0_window,
        bounds: Vec::new(),
        assumptions: check_assumptions(u),
    };
    run.bounds = bounds
        .iter()
        .map(|b| {
            let computed = run.quantity(b.quantity);
            BoundCheck { bound: b.clone(), computed, ok: b.respected_by(computed) }
        })
        .collect();
    Ok(run)
}

/// Run the chain on a built-in configuration.
///
/// The limit angle is the configuration's own unless overridden; when an
/// analytic `κ₀` is known it enters `κ₅` (the window value is a lower
/// estimate of the lattice supremum).
pub fn run_example(spec: &ExampleSpec, opts: &RunOptions) -> Result<ExampleRun> {
    let u = spec.field(opts.radius)?;
    let theta = opts.theta_inf.unwrap_or(ThetaInfSource::Given { plus: spec.theta_inf, minus: spec.theta_inf });
    let k0 = match spec.kappa0_analytic {
        Some(k) => Kappa0Choice::Given { plus: k, minus: k },
        None => Kappa0Choice::Window,
    };
    run_field(spec.id.label(), &u, &spec.source, theta, k0, &spec.bounds, opts)
}

/// One row of a sweep over `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub h: f64,
    pub lhs: f64,
    pub bound_ch: f64,
    pub lhs_rate: Option<f64>,
    pub ch_rate: Option<f64>,
    pub verdict: Verdict,
    pub all_ok: bool,
}

/// A sweep with least-squares log-log slopes of `lhs` and `C·h` against `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub label: String,
    pub rows: Vec<SweepRow>,
    pub lhs_slope: f64,
    pub ch_slope: f64,
}

/// Run [`run_example`] at every `h` (at least three values) and fit rates.
pub fn sweep(selector: &ExampleSelector, h_list: &[f64], opts: &RunOptions) -> Result<SweepResult> {
    if h_list.len() < 3 {
        return Err(Error::InvalidArgument(format!("a sweep needs at least 3 values of h, got {}", h_list.len())));
    }
    let runs: Vec<ExampleRun> = exec::map_indexed(h_list.len(), |i| {
        let spec = selector.build(h_list[i])?;
        run_example(&spec, opts)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let lhs: Vec<f64> = runs.iter().map(|r| r.theorem.lhs).collect();
    let ch: Vec<f64> = runs.iter().map(|r| r.theorem.bound_ch).collect();
    let lhs_rates = successive_rates(h_list, &lhs);
    let ch_rates = successive_rates(h_list, &ch);
    let rows = runs
        .iter()
        .enumerate()
        .map(|(i, r)| SweepRow {
            h: h_list[i],
            lhs: lhs[i],
            bound_ch: ch[i],
            lhs_rate: lhs_rates[i],
            ch_rate: ch_rates[i],
            verdict: r.theorem.verdict,
            all_ok: r.all_ok(),
        })
        .collect();
    Ok(SweepResult {
        label: selector.id.label().to_string(),
        rows,
        lhs_slope: loglog_slope(h_list, &lhs)?,
        ch_slope: loglog_slope(h_list, &ch)?,
    })
}

/// Header of the single-run report row.
pub const RUN_HEADER: [&str; 27] = [
    "example",
    "h",
    "radius",
    "mode",
    "kappa0",
    "kappa1",
    "kappa2",
    "kappa3",
    "kappa4",
    "kappa5",
    "kappa6",
    "kappa7",
    "lhs",
    "C",
    "Ch",
    "verdict",
    "lhs_tail",
    "tail_known",
    "theta_inf",
    "theta_inf_source",
    "invalid_sites",
    "remainder_max_excess",
    "remainder_violations",
    "equation_residual",
    "bounds_failed",
    "bounds_checked",
    "all_ok",
];

/// The row matching [`RUN_HEADER`] (κ's from the family used by the mode).
pub fn run_row(run: &ExampleRun, radius: f64) -> Vec<String> {
    use crate::io::fmt_real;
    let k = match run.theorem.mode {
        Mode::FormPlus => run.report.plus,
        Mode::Tutta => run.report.plus.combined(&run.report.minus),
    };
    let failed: Vec<String> = run.bounds.iter().filter(|b| !b.ok).map(|b| b.bound.name()).collect();
    vec![
        run.label.clone(),
        fmt_real(run.h),
        fmt_real(radius),
        run.theorem.mode.label().to_string(),
        fmt_real(k.kappa0),
        fmt_real(k.kappa1),
        fmt_real(k.kappa2),
        fmt_real(k.kappa3),
        fmt_real(k.kappa4),
        fmt_real(k.kappa5),
        fmt_real(k.kappa6),
        fmt_real(k.kappa7),
        fmt_real(run.theorem.lhs),
        fmt_real(run.theorem.constant_c),
        fmt_real(run.theorem.bound_ch),
        run.theorem.verdict.label().to_string(),
        fmt_real(run.theorem.lhs_tail),
        run.theorem.tail_known.to_string(),
        fmt_real(run.report.theta_inf_plus),
        run.report.theta_inf_source.label().to_string(),
        run.report.invalid_site_count().to_string(),
        fmt_real(run.remainder.max_excess),
        run.remainder.violations.to_string(),
        fmt_real(run.remainder.equation_residual),
        failed.join(";"),
        run.bounds.len().to_string(),
        run.all_ok().to_string(),
    ]
}

/// Header of the sweep table.
pub const SWEEP_HEADER: [&str; 6] = ["h", "lhs", "Ch", "lhs_rate", "Ch_rate", "verdict"];

pub fn sweep_rows(result: &SweepResult) -> Vec<Vec<String>> {
    use crate::io::fmt_real;
    let rate = |r: Option<f64>| r.map(fmt_real).unwrap_or_default();
    result
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt_real(r.h),
                fmt_real(r.lhs),
                fmt_real(r.bound_ch),
                rate(r.lhs_rate),
                rate(r.ch_rate),
                r.verdict.label().to_string(),
            ]
        })
        .collect()
}
