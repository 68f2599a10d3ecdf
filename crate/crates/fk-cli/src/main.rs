//! `fk`: build lattice configurations, run the rigidity diagnostics, sweep the
//! mesh size, relax potentials and reconstruct one-dimensional profiles.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 mathematical failure
//! (violated estimate, failed bound, hypothesis violation, solver failure).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fk_rigidity::angular::decompose;
use fk_rigidity::diagnostics::{Kappa0Choice, Mode, SourceTerm, ThetaInfSource, Verdict};
use fk_rigidity::examples::{ExampleId, MonotoneProfile, SemilinearProfile};
use fk_rigidity::io::{fmt_real, parse_key_values, read_field_csv, write_angular, write_field_csv, Table};
use fk_rigidity::pipeline::{
    parse_example_id, run_example, run_field, run_row, sweep, sweep_rows, ExampleSelector, RunOptions, RUN_HEADER,
    SWEEP_HEADER,
};
use fk_rigidity::rigidity::{check_vanishing, roundtrip_check};
use fk_rigidity::solver::{relax, Boundary, Potential, SolverConfig};
use fk_rigidity::{make_window, Error, ScalarField};

#[derive(Parser, Debug)]
#[command(name = "fk", version, about = "Rigidity diagnostics for lattice equilibria", long_about = None)]
#[command(args_override_self = true)]
struct Cli {
    /// key=value file whose entries act as default flags (flags given on the
    /// command line win)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the full diagnostic chain on one configuration and write one CSV row
    Verify(VerifyArgs),
    /// Run the chain over several mesh sizes and fit log-log slopes
    Sweep(SweepArgs),
    /// Test for a one-dimensional field and rebuild it from its profile
    Reconstruct(ReconstructArgs),
    /// Relax a field by gradient descent on the lattice energy
    Relax(RelaxArgs),
    /// Write a configuration (and optionally its angles) as CSV
    ExportField(ExportArgs),
}

#[derive(Args, Debug, Clone)]
struct ExampleArgs {
    /// Configuration: 1, 2, 3, 4 or oned
    #[arg(long, default_value = "1")]
    example: String,
    /// Profile: for example 4 `sine-gordon` or `linear`; for oned
    /// `identity`, `tanh` or `sine-gordon`
    #[arg(long)]
    profile: Option<String>,
    /// Integer direction of the one-dimensional factory, e.g. `1,1`
    #[arg(long, default_value = "1,1")]
    omega: String,
    /// Half-width of the square window
    #[arg(long, default_value_t = 10.0)]
    radius: f64,
}

#[derive(Args, Debug, Clone)]
struct DiagnosticArgs {
    /// Limit angle θ∞ for both families (defaults to the configuration's own)
    #[arg(long, allow_negative_numbers = true)]
    theta_inf: Option<f64>,
    /// Which estimate: `form` (forward family) or `tutta` (both families)
    #[arg(long, value_enum, default_value_t = ModeArg::Form)]
    mode: ModeArg,
    /// Skip the truncation-tail estimates
    #[arg(long)]
    no_tails: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Form,
    Tutta,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    example: ExampleArgs,
    #[command(flatten)]
    diag: DiagnosticArgs,
    /// Mesh size
    #[arg(long)]
    h: f64,
    /// Output CSV (standard output if absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    example: ExampleArgs,
    #[command(flatten)]
    diag: DiagnosticArgs,
    /// Comma-separated mesh sizes (at least three)
    #[arg(long, value_name = "H,H,H,...")]
    h_list: String,
    /// Output CSV (standard output if absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    #[command(flatten)]
    example: ExampleArgs,
    /// Read the field from a CSV instead of building a configuration
    #[arg(long)]
    field: Option<PathBuf>,
    /// Mesh size (required unless the field CSV has a metadata sidecar)
    #[arg(long)]
    h: Option<f64>,
    /// Largest admissible reconstruction error
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Output CSV (standard output if absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum PotentialArg {
    /// V ≡ 0
    Free,
    /// V(u) = −cos u
    SineGordon,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum BoundaryArg {
    /// Halo values held fixed
    Dirichlet,
    /// Torus
    Periodic,
    /// Periodic along e₁, fixed along e₂
    Cylinder,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum DataArg {
    /// u = x₂
    Ramp,
    /// u = 4 arctan(e^{x₂})
    Kink,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum InitArg {
    /// Interior starts from the boundary data
    Data,
    /// Interior starts at zero
    Zero,
}

#[derive(Args, Debug)]
struct RelaxArgs {
    #[arg(long, value_enum, default_value_t = PotentialArg::Free)]
    potential: PotentialArg,
    /// Spring constant
    #[arg(long, default_value_t = 1.0)]
    d: f64,
    /// Mesh size
    #[arg(long)]
    h: f64,
    /// Half-width of the square window
    #[arg(long, default_value_t = 5.0)]
    radius: f64,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Dirichlet)]
    boundary: BoundaryArg,
    /// Boundary data (default: ramp for the free potential, kink otherwise)
    #[arg(long, value_enum)]
    data: Option<DataArg>,
    #[arg(long, value_enum, default_value_t = InitArg::Zero)]
    init: InitArg,
    /// Start from a field CSV instead (its halo supplies the boundary data)
    #[arg(long)]
    field: Option<PathBuf>,
    /// Gradient step (default h²/(4d))
    #[arg(long)]
    step: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
    /// Residual tolerance
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Run the diagnostic chain on the relaxed field
    #[arg(long)]
    verify: bool,
    /// Limit angle θ∞ used by --verify (default: angle at the window corner)
    #[arg(long, allow_negative_numbers = true)]
    theta_inf: Option<f64>,
    /// Write the relaxed field here (CSV plus metadata sidecar)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[command(flatten)]
    example: ExampleArgs,
    /// Mesh size
    #[arg(long)]
    h: f64,
    /// Field CSV (a `.meta` sidecar is written next to it)
    #[arg(long)]
    out: PathBuf,
    /// Also write ρ± and θ± to this CSV
    #[arg(long)]
    angular: Option<PathBuf>,
}

/// Usage/IO failures exit with 1, mathematical ones with 2.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidArgument(_) | Error::Io(_) | Error::Csv(_) | Error::Parse(_)) | None => 1,
        Some(_) => 2,
    }
}

/// Expand `--config PATH` into flags placed right after the subcommand, so
/// that flags given on the command line (which come later) override them.
fn expand_config(args: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy().into_owned();
        if s == "--config" {
            config = Some(PathBuf::from(it.next().ok_or_else(|| anyhow!("--config needs a path"))?));
        } else if let Some(p) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let map = parse_key_values(&text)?;
    let mut extra: Vec<OsString> = Vec::new();
    let mut command = None;
    for (k, v) in map {
        if k == "command" {
            command = Some(v);
            continue;
        }
        match v.as_str() {
            "true" => extra.push(format!("--{k}").into()),
            "false" => {}
            _ => {
                extra.push(format!("--{k}").into());
                extra.push(v.into());
            }
        }
    }
    // Position of the subcommand: first argument after the program name that
    // is not a flag.
    let pos = rest.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map(|p| p + 1);
    let pos = match (pos, command) {
        (Some(p), _) => p,
        (None, Some(c)) => {
            rest.insert(1.min(rest.len()), c.into());
            1
        }
        (None, None) => bail!("config {} does not name a command and none was given", path.display()),
    };
    let tail = rest.split_off(pos + 1);
    rest.extend(extra);
    rest.extend(tail);
    Ok(rest)
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("FK_THREADS") else { return Ok(()) };
    let n: usize = raw.trim().parse().map_err(|_| anyhow!("FK_THREADS={raw:?} is not a positive integer"))?;
    if n == 0 {
        bail!("FK_THREADS must be at least 1");
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the worker pool")?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn parse_omega(s: &str) -> anyhow::Result<(i64, i64)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok((
            a.parse().map_err(|_| Error::InvalidArgument(format!("omega component {a:?} is not an integer")))?,
            b.parse().map_err(|_| Error::InvalidArgument(format!("omega component {b:?} is not an integer")))?,
        )),
        _ => Err(Error::InvalidArgument(format!("omega must be two integers like 1,1, got {s:?}")).into()),
    }
}

fn parse_h_list(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|_| Error::InvalidArgument(format!("h value {t:?} is not a number")).into())
        })
        .collect()
}

fn selector(args: &ExampleArgs) -> anyhow::Result<ExampleSelector> {
    let id = parse_example_id(&args.example)?;
    let mut sel = ExampleSelector::new(id);
    sel.omega = parse_omega(&args.omega)?;
    if let Some(p) = &args.profile {
        match id {
            ExampleId::Semilinear => {
                sel.semilinear = match p.as_str() {
                    "sine-gordon" => SemilinearProfile::sine_gordon(),
                    "linear" => SemilinearProfile::linear(),
                    other => {
                        return Err(Error::InvalidArgument(format!(
                            "unknown semilinear profile '{other}' (expected sine-gordon or linear)"
                        ))
                        .into())
                    }
                }
            }
            ExampleId::OneD => sel.monotone = MonotoneProfile::by_name(p)?,
            _ => {
                return Err(Error::InvalidArgument(format!("--profile does not apply to example {}", id.label())).into())
            }
        }
    }
    Ok(sel)
}

fn run_options(example: &ExampleArgs, diag: &DiagnosticArgs) -> RunOptions {
    RunOptions {
        radius: example.radius,
        theta_inf: diag.theta_inf.map(|t| ThetaInfSource::Given { plus: t, minus: t }),
        mode: match diag.mode {
            ModeArg::Form => Mode::FormPlus,
            ModeArg::Tutta => Mode::Tutta,
        },
        tails: !diag.no_tails,
        ..RunOptions::default()
    }
}

fn emit(table: &Table, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => table.write_to_path(p).with_context(|| format!("writing {}", p.display()))?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            table.write(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> anyhow::Result<u8> {
    let spec = selector(&args.example)?.build(args.h)?;
    let opts = run_options(&args.example, &args.diag);
    let run = run_example(&spec, &opts)?;
    let mut table = Table::new(RUN_HEADER);
    table.push(run_row(&run, opts.radius))?;
    emit(&table, args.out.as_deref())?;
    let t = &run.theorem;
    eprintln!(
        "{} h={} lhs={:.6e} C·h={:.6e} verdict={} tail={:.3e}{}",
        run.label,
        run.h,
        t.lhs,
        t.bound_ch,
        t.verdict.label(),
        t.lhs_tail,
        if t.tail_known { "" } else { " (unknown: no closure)" }
    );
    for b in run.bounds.iter().filter(|b| !b.ok) {
        eprintln!("bound {} failed: computed {:.6e} vs {:.6e}", b.bound.name(), b.computed, b.bound.value);
    }
    if !run.remainder.passed() {
        eprintln!("remainder bound fails at {} site(s)", run.remainder.violations);
    }
    Ok(if run.all_ok() { 0 } else { 2 })
}

fn cmd_sweep(args: &SweepArgs) -> anyhow::Result<u8> {
    let h_list = parse_h_list(&args.h_list)?;
    let sel = selector(&args.example)?;
    let result = sweep(&sel, &h_list, &run_options(&args.example, &args.diag))?;
    let mut table = Table::new(SWEEP_HEADER);
    for row in sweep_rows(&result) {
        table.push(row)?;
    }
    emit(&table, args.out.as_deref())?;
    eprintln!("{} lhs slope={:.4} C·h slope={:.4}", result.label, result.lhs_slope, result.ch_slope);
    let ok = result.rows.iter().all(|r| r.all_ok);
    Ok(if ok { 0 } else { 2 })
}

fn cmd_reconstruct(args: &ReconstructArgs) -> anyhow::Result<u8> {
    let u = match &args.field {
        Some(p) => read_field_csv(p, args.h)?,
        None => {
            let h = args.h.ok_or_else(|| Error::InvalidArgument("--h is required without --field".into()))?;
            selector(&args.example)?.build(h)?.field(args.example.radius)?
        }
    };
    let ang = decompose(&u)?;
    let vanishing = check_vanishing(&ang)?;
    if !vanishing.is_zero {
        eprintln!(
            "angular sums do not vanish: residual {:.6e} > {:.1e}·scale (scale {:.6e}); the field is not one-dimensional",
            vanishing.residual,
            fk_rigidity::rigidity::VANISHING_TOLERANCE,
            vanishing.scale
        );
        return Ok(2);
    }
    let rt = roundtrip_check(&u)?;
    let mut table = Table::new([
        "c_plus",
        "c_minus",
        "ratio_constancy_error",
        "vanishing_residual",
        "vanishing_scale",
        "k_max",
        "roundtrip_error",
        "ok",
    ]);
    let ok = rt.max_abs_error <= args.tol;
    table.push(vec![
        fmt_real(rt.c_plus),
        fmt_real(rt.c_minus),
        fmt_real(rt.ratio_constancy_error),
        fmt_real(vanishing.residual),
        fmt_real(vanishing.scale),
        rt.k_max.to_string(),
        fmt_real(rt.max_abs_error),
        ok.to_string(),
    ])?;
    emit(&table, args.out.as_deref())?;
    eprintln!("c+={} c-={} roundtrip error={:.3e}", rt.c_plus, rt.c_minus, rt.max_abs_error);
    Ok(if ok { 0 } else { 2 })
}

fn cmd_relax(args: &RelaxArgs) -> anyhow::Result<u8> {
    let pot = match args.potential {
        PotentialArg::Free => Potential::free(args.d)?,
        PotentialArg::SineGordon => Potential::sine_gordon(args.d)?,
    };
    let u0 =
        match &args.field {
            Some(p) => read_field_csv(p, Some(args.h))?,
            None => {
                let data = args.data.unwrap_or(match args.potential {
                    PotentialArg::Free => DataArg::Ramp,
                    PotentialArg::SineGordon => DataArg::Kink,
                });
                let h = args.h;
                let w = make_window(h, args.radius, 3)?;
                let profile = move |x2: f64| match data {
                    DataArg::Ramp => x2,
                    DataArg::Kink => 4.0 * x2.exp().atan(),
                };
                let init = args.init;
                ScalarField::from_fn(w, move |s| {
                    if init == InitArg::Zero && w.in_core(s) {
                        0.0
                    } else {
                        profile(h * s.k2 as f64)
                    }
                })?
            }
        };
    let cfg = SolverConfig {
        step: args.step,
        max_iters: args.max_iters,
        residual_tol: args.tol,
        boundary: match args.boundary {
            BoundaryArg::Dirichlet => Boundary::Dirichlet,
            BoundaryArg::Periodic => Boundary::Periodic,
            BoundaryArg::Cylinder => Boundary::Cylinder,
        },
    };
    let r = relax(&u0, &pot, &cfg)?;
    eprintln!(
        "relax: {} iterations, max residual {:.3e}, energy {:.6e} -> {:.6e}, converged={}",
        r.iterations,
        r.final_residual_max,
        r.energy_history.first().copied().unwrap_or(f64::NAN),
        r.energy_history.last().copied().unwrap_or(f64::NAN),
        r.converged
    );
    if let Some(p) = &args.out {
        write_field_csv(p, &r.u).with_context(|| format!("writing {}", p.display()))?;
    }
    let mut table = Table::new(["iterations", "final_residual_max", "converged", "energy_initial", "energy_final"]);
    table.push(vec![
        r.iterations.to_string(),
        fmt_real(r.final_residual_max),
        r.converged.to_string(),
        fmt_real(r.energy_history.first().copied().unwrap_or(f64::NAN)),
        fmt_real(r.energy_history.last().copied().unwrap_or(f64::NAN)),
    ])?;
    let mut ok = r.converged;
    if args.verify {
        let d = args.d;
        let src = match args.potential {
            PotentialArg::Free => SourceTerm::zero(),
            PotentialArg::SineGordon => SourceTerm::autonomous(move |u: f64| u.sin() / d, move |u: f64| u.cos() / d),
        };
        let theta = args.theta_inf.map_or(ThetaInfSource::Corner, |t| ThetaInfSource::Given { plus: t, minus: t });
        let run = run_field("relaxed", &r.u, &src, theta, Kappa0Choice::Window, &[], &RunOptions::default())?;
        let mut diag = Table::new(RUN_HEADER);
        diag.push(run_row(&run, args.radius))?;
        emit(&table, None)?;
        emit(&diag, None)?;
        ok &= run.theorem.verdict == Verdict::Holds && run.remainder.passed();
    } else {
        emit(&table, None)?;
    }
    Ok(if ok { 0 } else { 2 })
}

fn cmd_export(args: &ExportArgs) -> anyhow::Result<u8> {
    let spec = selector(&args.example)?.build(args.h)?;
    let u = spec.field(args.example.radius)?;
    write_field_csv(&args.out, &u).with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(p) = &args.angular {
        let ang = decompose(&u)?;
        let file = std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
        write_angular(file, &ang)?;
    }
    Ok(0)
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    match &cli.command {
        Command::Verify(a) => cmd_verify(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Relax(a) => cmd_relax(a),
        Command::ExportField(a) => cmd_export(a),
    }
}

fn main() -> ExitCode {
    let args = match expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
