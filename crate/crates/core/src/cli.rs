//! `nlwr` command line: `single`, `experiment {1|2|3|4}` and `check`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numerical
//! failure (including any failed sweep entry).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::diagnostics::{delta0, Delta0Inputs};
use crate::error::{Error, Result};
use crate::experiments::{self, run_monitored, ExperimentId, ExperimentOptions};
use crate::flux::{FluxFunction, FluxKind, DEFAULT_ALPHA};
use crate::kernel::{Kernel, KernelProfile};
use crate::output;
use crate::quadrature::{build_weights, check_assumption3, WeightRule};
use crate::solver::{RunConfig, DEFAULT_LAMBDA};

#[derive(Debug, Parser)]
#[command(name = "nlwr", version, about = "Finite-volume solver for the nonlocal LWR traffic model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one configuration and write its snapshots and diagnostics.
    Single(SingleArgs),
    /// Run one of the four convergence experiments.
    Experiment(ExperimentArgs),
    /// Report the weight, flux and CFL assumptions for a parameter choice.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Snapshot times, overriding the config.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub snapshot_times: Option<Vec<f64>>,
    /// Skip per-step property checks.
    #[arg(long)]
    pub no_diagnostics: bool,
}

#[derive(Debug, Args)]
pub struct SingleArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment number.
    #[arg(value_parser = clap::value_parser!(u8).range(1..=4))]
    pub id: u8,
    /// Optional JSON experiment options (flux, alpha, lambda, final_time,
    /// initial, rules, snapshot_times, diagnostics).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads for independent sweep entries.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, default_value = "lf")]
    pub flux: String,
    #[arg(long, default_value = "exact")]
    pub rule: String,
    #[arg(long, default_value = "linear")]
    pub kernel: String,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Stencil width; the check uses `δ = m·h`.
    #[arg(long, default_value_t = 8)]
    pub m: usize,
    /// `inf ρ_0`, for the horizon threshold.
    #[arg(long)]
    pub rho_min: Option<f64>,
    /// One-sided Lipschitz constant of `ρ_0`, for the horizon threshold.
    #[arg(long = "lipschitz")]
    pub lipschitz: Option<f64>,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
    /// Also write `check.json` into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are reported as "errors" on stdout
            if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                return 2;
            }
            let _ = write!(stdout, "{e}");
            return 0;
        }
    };
    match dispatch(cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Single(args) => cmd_single(&args, stdout, stderr),
        Command::Experiment(args) => cmd_experiment(&args, stdout, stderr),
        Command::Check(args) => cmd_check(&args, stdout),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn report(out: &mut dyn Write, line: std::fmt::Arguments<'_>) {
    // a closed pipe must not turn a finished run into a failure
    let _ = writeln!(out, "{line}");
}

pub fn cmd_single(args: &SingleArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let mut config = RunConfig::from_json(&read(&args.config)?)?;
    if let Some(times) = &args.output.snapshot_times {
        config.snapshot_times = Some(times.clone());
        config.validate()?;
    }
    let run = run_monitored(&config, !args.output.no_diagnostics)?;
    for w in &run.trajectory.warnings {
        report(stderr, format_args!("warning: {w}"));
    }
    let dir = output::write_run(&args.output.out.join("single"), &run)?;
    report(stdout, format_args!("{}", dir.display()));
    Ok(0)
}

pub fn cmd_experiment(
    args: &ExperimentArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32> {
    let id: ExperimentId = args.id.to_string().parse()?;
    let mut options = match &args.config {
        Some(path) => ExperimentOptions::from_json(&read(path)?)?,
        None => ExperimentOptions::default(),
    };
    if let Some(times) = &args.output.snapshot_times {
        options.snapshot_times = Some(times.clone());
    }
    if args.output.no_diagnostics {
        options.diagnostics = false;
    }
    let pool = experiments::thread_pool(args.jobs)?;
    let plan = experiments::plan(id, &options)?;
    let result = experiments::execute(plan, &pool);
    let root = output::write_experiment(&args.output.out, &result)?;
    for f in &result.failures {
        report(
            stderr,
            format_args!(
                "failed: {} h={} delta={} rule={} kernel={}: {}",
                f.config.initial.name(),
                f.config.h,
                f.config.delta,
                f.config.rule,
                f.config.kernel,
                f.error
            ),
        );
    }
    for fit in experiments::series_fits(&result.rows) {
        if let Some(slope) = fit.slope {
            report(
                stdout,
                format_args!(
                    "{} {} {} {:?}: slope {slope:.3}",
                    fit.initial, fit.rule, fit.kernel, fit.key
                ),
            );
        }
    }
    report(stdout, format_args!("{}", root.display()));
    Ok(if result.failures.is_empty() { 0 } else { 3 })
}

pub fn cmd_check(args: &CheckArgs, stdout: &mut dyn Write) -> Result<i32> {
    let flux_kind: FluxKind = args.flux.parse()?;
    let rule: WeightRule = args.rule.parse()?;
    let profile: KernelProfile = args.kernel.parse()?;
    if args.m == 0 {
        return Err(Error::config("--m must be at least 1"));
    }
    if !(args.lambda > 0.0) || !(args.alpha >= 0.0) {
        return Err(Error::config("--lambda must be positive and --alpha non-negative"));
    }
    let kernel = Kernel::new(profile);
    // weights depend on δ/h only
    let h = 1.0;
    let delta = args.m as f64 * h;
    let weights = build_weights(&kernel, delta, h, rule)?;
    let a3 = check_assumption3(&weights, &kernel, delta, h);
    let flux = FluxFunction::new(flux_kind, args.alpha);
    let a4 = flux.check_assumption4();
    let a5 = flux.check_assumption5(args.lambda);
    let d0 = match (args.rho_min, args.lipschitz) {
        (Some(rho_min), Some(l)) => {
            let inputs = Delta0Inputs {
                c: a3.gap_constant,
                rho_min,
                l,
                w0: kernel.value_at_zero,
            };
            Some((inputs, delta0(&inputs)))
        }
        (None, None) => None,
        _ => return Err(Error::config("--rho-min and --lipschitz must be given together")),
    };
    let value = json!({
        "flux": flux_kind,
        "alpha": args.alpha,
        "rule": rule,
        "kernel": profile,
        "m": args.m,
        "lambda": args.lambda,
        "weights": weights.weights,
        "weight_sum": weights.weight_sum,
        "assumption3": a3,
        "assumption3_satisfied": a3.satisfied(),
        "assumption4": a4,
        "assumption4_satisfied": a4.all_passed(),
        "assumption5": a5,
        "delta0_inputs": d0.as_ref().map(|d| d.0),
        "delta0": d0.as_ref().and_then(|d| d.1.as_ref().ok().copied()),
        "delta0_error": d0.as_ref().and_then(|d| d.1.as_ref().err().map(|e| e.to_string())),
    });
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("check.json");
        let text = serde_json::to_string_pretty(&value)? + "\n";
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    if args.json {
        report(stdout, format_args!("{}", serde_json::to_string_pretty(&value)?));
        return Ok(0);
    }
    let mark = |ok: bool| if ok { "pass" } else { "FAIL" };
    report(stdout, format_args!("weights ({rule}, {profile}, m = {}): {:?}", args.m, weights.weights));
    report(stdout, format_args!("assumption 3: {}", mark(a3.satisfied())));
    report(stdout, format_args!("  sandwich      {}", mark(a3.sandwich_ok)));
    report(
        stdout,
        format_args!("  normalized    {} (sum {})", mark(a3.normalized), weights.weight_sum),
    );
    report(
        stdout,
        format_args!(
            "  strict gap    {} (gap_constant {}, tail {}, guaranteed {})",
            mark(a3.strict_gap_ok),
            a3.gap_constant,
            a3.tail_gap_constant,
            a3.c_theoretical
        ),
    );
    report(stdout, format_args!("assumption 4 ({flux_kind}, alpha {}): {}", args.alpha, mark(a4.all_passed())));
    for c in &a4.clauses {
        match c.witness {
            Some(w) if !c.passed => report(
                stdout,
                format_args!("  {:<24} FAIL at (rhoL, rhoR, qL, qR) = {w:?}", c.name),
            ),
            _ => report(stdout, format_args!("  {:<24} {}", c.name, mark(c.passed))),
        }
    }
    report(
        stdout,
        format_args!(
            "assumption 5 (lambda {}): {} (margin {})",
            args.lambda,
            mark(a5.ok),
            a5.margin
        ),
    );
    if let Some((inputs, d)) = &d0 {
        match d {
            Ok(d) => report(stdout, format_args!("delta0 {:?} from {inputs:?}", d)),
            Err(e) => report(stdout, format_args!("delta0 unavailable: {e}")),
        }
    }
    Ok(0)
}
