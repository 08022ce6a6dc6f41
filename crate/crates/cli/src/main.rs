//! `dcpf`: condition checks, solvers and Monte-Carlo studies for DC networks
//! with ZIP loads.
//!
//! JSON results go to stdout, progress to stderr. Exit codes: 0 success,
//! 1 usage, 2 unreadable or malformed case file, 3 invalid network,
//! 4 solver did not converge.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dcpf::harness::{run_trials, summarize, write_trials_csv, McConfig, McError};
use dcpf::solve::write_trace_csv;
use dcpf::{
    evaluate, load_case, solve_energy, solve_monotone, solve_zbus, BusId, CaseError, Method,
    ModelError, Network, NormOrder, SolveOptions, SolveResult, Status, VoltageBand,
    ZbusDiagnostics,
};

#[derive(Debug, Parser)]
#[command(name = "dcpf", version, about = "Power-flow solvers for DC networks with ZIP loads")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate every convergence condition and recommend a solver.
    Check(CheckArgs),
    /// Solve the power flow.
    Solve(SolveArgs),
    /// Run a Monte-Carlo loading study.
    Montecarlo(McArgs),
    /// Solve and write the per-iteration trace as CSV.
    Trace(TraceArgs),
}

#[derive(Debug, Args)]
struct CaseArgs {
    /// Case file (JSON).
    case: PathBuf,
    /// Norm for the contraction analysis: 1, 2 or inf. Overrides the case file.
    #[arg(long, value_parser = parse_norm)]
    q: Option<NormOrder>,
    /// Voltage band as `VMIN VMAX`. Overrides the case file.
    #[arg(long, num_args = 2, value_names = ["VMIN", "VMAX"])]
    band: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    case: CaseArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Auto,
    Monotone,
    Zbus,
    Energy,
}

#[derive(Debug, Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    method: MethodArg,
    /// Stopping tolerance. Defaults to 1e-6, or 1e-8 on the gradient for the
    /// energy solver.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    case: CaseArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Also write the iteration trace to this CSV file.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TraceArgs {
    #[command(flatten)]
    case: CaseArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct McArgs {
    #[command(flatten)]
    case: CaseArgs,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Range of the per-bus constant-power scale.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    p_range: Option<Vec<f64>>,
    /// Range of the per-bus constant-current and constant-conductance scales.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    iz_range: Option<Vec<f64>>,
    /// Summary JSON; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-trial records as CSV.
    #[arg(long)]
    trials_csv: Option<PathBuf>,
}

fn parse_norm(s: &str) -> Result<NormOrder, String> {
    NormOrder::parse(s).ok_or_else(|| format!("expected 1, 2 or inf, got `{s}`"))
}

/// Failure categories, each with its own exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Input(anyhow::Error),
    Invalid(anyhow::Error),
    NotConverged(Status),
    Other(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Other(_) => 1,
            Failure::Input(_) => 2,
            Failure::Invalid(_) => 3,
            Failure::NotConverged(_) => 4,
        }
    }
}

impl From<CaseError> for Failure {
    fn from(e: CaseError) -> Self {
        match e {
            CaseError::Invalid(_) => Failure::Invalid(e.into()),
            CaseError::Io { .. } | CaseError::Parse { .. } => Failure::Input(e.into()),
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::Invalid(e.into())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Other(e.into())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Usage(msg) => eprintln!("error: {msg}"),
                // Case and model errors already embed their cause.
                Failure::Input(e) | Failure::Invalid(e) => eprintln!("error: {e}"),
                Failure::Other(e) => eprintln!("error: {e:#}"),
                Failure::NotConverged(status) => {
                    eprintln!("solver stopped without converging: {}", status.as_str())
                }
            }
            ExitCode::from(failure.code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Check(args) => check(args),
        Command::Solve(args) => solve(args),
        Command::Montecarlo(args) => montecarlo(args),
        Command::Trace(args) => trace(args),
    }
}

fn load(args: &CaseArgs) -> Result<Network, Failure> {
    let mut net = load_case(&args.case)?;
    if let Some(q) = args.q {
        net.norm_q = q;
    }
    if let Some(b) = &args.band {
        net.band = VoltageBand::from_voltages(b[0], b[1]);
    }
    net.validate().map_err(CaseError::Invalid)?;
    Ok(net)
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, value).context("serializing output")?;
    writeln!(out)?;
    Ok(())
}

fn check(args: CheckArgs) -> Result<(), Failure> {
    let net = load(&args.case)?;
    let model = net.derive()?;
    let report = evaluate(&model, &net.band, net.norm_q);
    eprintln!("recommended: {}", report.recommended.method);
    print_json(&report)
}

#[derive(Debug, Serialize)]
struct SolveOutput<'a> {
    method: Method,
    bus_ids: &'a [BusId],
    #[serde(flatten)]
    result: &'a SolveResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    zbus: Option<&'a ZbusDiagnostics>,
}

fn run_solver(
    net: &Network,
    solver: &SolverArgs,
    record_trace: bool,
) -> Result<(Method, Vec<BusId>, SolveResult, Option<ZbusDiagnostics>), Failure> {
    let model = net.derive()?;
    let method = match solver.method {
        MethodArg::Auto => {
            let choice = evaluate(&model, &net.band, net.norm_q).recommended;
            eprintln!("auto-selected {}: {}", choice.method, choice.rationale);
            choice.method
        }
        MethodArg::Monotone => Method::Monotone,
        MethodArg::Zbus => Method::ZBus,
        MethodArg::Energy => Method::Energy,
    };
    let mut opts = match method {
        Method::Energy => SolveOptions::energy(),
        _ => SolveOptions::default(),
    };
    if let Some(tol) = solver.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Failure::Usage(format!("--tol must be positive, got {tol}")));
        }
        opts = opts.with_tol(tol);
    }
    if let Some(max_iter) = solver.max_iter {
        if max_iter == 0 {
            return Err(Failure::Usage("--max-iter must be at least 1".into()));
        }
        opts = opts.with_max_iter(max_iter);
    }
    if record_trace {
        opts = opts.with_trace();
    }
    let (result, diagnostics) = match method {
        Method::ZBus => {
            let (r, d) = solve_zbus(&model, &net.band, net.norm_q, &opts, None)
                .context("running the Z-bus solver")?;
            (r, Some(d))
        }
        Method::Monotone => (solve_monotone(&model, &net.band, &opts), None),
        Method::Energy => (
            solve_energy(&model, &opts, None).context("running the energy solver")?,
            None,
        ),
    };
    eprintln!(
        "{method}: {} after {} iterations",
        result.status.as_str(),
        result.iterations
    );
    Ok((method, model.zip_ids().to_vec(), result, diagnostics))
}

fn write_trace_file(path: &Path, result: &SolveResult) -> Result<(), Failure> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_trace_csv(BufWriter::new(file), result.trace.as_deref().unwrap_or_default())?;
    Ok(())
}

fn solve(args: SolveArgs) -> Result<(), Failure> {
    let net = load(&args.case)?;
    let (method, bus_ids, result, diagnostics) =
        run_solver(&net, &args.solver, args.trace.is_some())?;
    if let Some(path) = &args.trace {
        write_trace_file(path, &result)?;
    }
    print_json(&SolveOutput {
        method,
        bus_ids: &bus_ids,
        result: &result,
        zbus: diagnostics.as_ref(),
    })?;
    if result.converged() {
        Ok(())
    } else {
        Err(Failure::NotConverged(result.status))
    }
}

fn trace(args: TraceArgs) -> Result<(), Failure> {
    let net = load(&args.case)?;
    let (_, _, result, _) = run_solver(&net, &args.solver, true)?;
    match &args.out {
        Some(path) => write_trace_file(path, &result)?,
        None => write_trace_csv(io::stdout().lock(), result.trace.as_deref().unwrap_or_default())?,
    }
    if result.converged() {
        Ok(())
    } else {
        Err(Failure::NotConverged(result.status))
    }
}

fn range(values: &Option<Vec<f64>>, default: (f64, f64)) -> (f64, f64) {
    values.as_ref().map_or(default, |v| (v[0], v[1]))
}

fn montecarlo(args: McArgs) -> Result<(), Failure> {
    let net = load(&args.case)?;
    let defaults = McConfig::default();
    let cfg = McConfig {
        trials: args.trials as usize,
        seed: args.seed,
        p_scale_range: range(&args.p_range, defaults.p_scale_range),
        iz_scale_range: range(&args.iz_range, defaults.iz_scale_range),
        ..defaults
    };
    eprintln!("running {} trials (seed {})", cfg.trials, cfg.seed);
    let records = run_trials(&net, &cfg).map_err(|e| match e {
        McError::Model(m) => Failure::from(m),
        other => Failure::Usage(other.to_string()),
    })?;
    let summary = summarize(&records);
    eprintln!("{} of {} trials agree", summary.agree_count, summary.trials);
    if let Some(path) = &args.trials_csv {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_trials_csv(BufWriter::new(file), &records)?;
    }
    match &args.out {
        Some(path) => {
            let mut text = serde_json::to_string_pretty(&summary).context("serializing summary")?;
            text.push('\n');
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            Ok(())
        }
        None => print_json(&summary),
    }
}
