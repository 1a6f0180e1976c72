//! Parameter sweeps for the four numerical experiments, and monitored runs.
//!
//! A plan lists reference runs and sweep jobs; every job names the reference
//! it is measured against. Execution solves all references first, then the
//! jobs, each set in parallel on the caller's thread pool.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{fit_rate, l1_error, LipschitzGate, PropertyMonitor, PropertyReport};
use crate::error::{Error, Result};
use crate::flux::{FluxKind, DEFAULT_ALPHA};
use crate::kernel::KernelProfile;
use crate::quadrature::WeightRule;
use crate::solver::{run_observed, InitialData, Model, RunConfig, Trajectory, DEFAULT_LAMBDA};

/// `h = 0.01·2^{-l}`, `l = 0..3`.
pub const H_LADDER: [f64; 4] = [0.01, 0.005, 0.0025, 0.00125];
/// Fine mesh `0.01·2^{-5}` of the convergence studies.
pub const CONVERGENCE_REFERENCE_H: f64 = 0.01 / 32.0;
/// Fine mesh of the snapshot experiment.
pub const SNAPSHOT_REFERENCE_H: f64 = 0.0002;
pub const SNAPSHOT_DELTA: f64 = 0.005;
pub const SNAPSHOT_H: f64 = 0.001;
pub const STENCIL_MULTIPLES: [usize; 3] = [1, 2, 5];
pub const FIXED_HORIZONS: [f64; 3] = [0.01, 0.005, 0.0025];
pub const FINAL_TIME: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentId {
    /// Snapshots at `t = 0, 0.5, 1` for every rule and initial datum.
    Snapshots,
    /// `δ = mh → 0` against the local solution.
    LocalLimit,
    /// Fixed `δ`, `h → 0` against a fine nonlocal solution.
    UniformInDelta,
    /// `δ = mh → 0` with exact weights for every kernel.
    Kernels,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 4] = [
        ExperimentId::Snapshots,
        ExperimentId::LocalLimit,
        ExperimentId::UniformInDelta,
        ExperimentId::Kernels,
    ];

    pub fn number(self) -> u8 {
        match self {
            ExperimentId::Snapshots => 1,
            ExperimentId::LocalLimit => 2,
            ExperimentId::UniformInDelta => 3,
            ExperimentId::Kernels => 4,
        }
    }

    pub fn dir_name(self) -> String {
        format!("experiment{}", self.number())
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.number().to_string() == s.trim())
            .ok_or_else(|| Error::config(format!("unknown experiment `{s}` (expected 1, 2, 3 or 4)")))
    }
}

fn default_flux() -> FluxKind {
    FluxKind::LaxFriedrichs
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

fn default_final_time() -> f64 {
    FINAL_TIME
}

fn default_initials() -> Vec<InitialData> {
    vec![InitialData::BellShape, InitialData::riemann(0.1, 0.6)]
}

/// Knobs shared by every experiment; the sweep axes themselves are fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentOptions {
    #[serde(default = "default_flux")]
    pub flux: FluxKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_final_time", alias = "T")]
    pub final_time: f64,
    #[serde(default = "default_initials")]
    pub initial: Vec<InitialData>,
    /// Rules swept by experiments 1-3; experiment 4 always uses exact weights.
    #[serde(default = "all_rules")]
    pub rules: Vec<WeightRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_times: Option<Vec<f64>>,
    /// Collect maximum-principle/TVD/Lipschitz diagnostics for every run.
    #[serde(default = "yes")]
    pub diagnostics: bool,
}

fn all_rules() -> Vec<WeightRule> {
    WeightRule::ALL.to_vec()
}

fn yes() -> bool {
    true
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            flux: default_flux(),
            alpha: default_alpha(),
            lambda: default_lambda(),
            final_time: default_final_time(),
            initial: default_initials(),
            rules: all_rules(),
            snapshot_times: None,
            diagnostics: true,
        }
    }
}

impl ExperimentOptions {
    pub fn from_json(text: &str) -> Result<Self> {
        let opts: ExperimentOptions =
            serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        opts.validate()?;
        Ok(opts)
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial.is_empty() {
            return Err(Error::config("initial: at least one initial datum is required"));
        }
        if self.rules.is_empty() {
            return Err(Error::config("rules: at least one rule is required"));
        }
        // every run shares these fields, so one probe config validates them
        let probe = self.config(0.01, 0.01, self.initial[0].clone());
        probe.validate()?;
        for init in &self.initial {
            init.validate()?;
        }
        Ok(())
    }

    fn config(&self, delta: f64, h: f64, initial: InitialData) -> RunConfig {
        RunConfig {
            flux: self.flux,
            alpha: self.alpha,
            lambda: self.lambda,
            snapshot_times: self.snapshot_times.clone(),
            ..RunConfig::new(delta, h, self.final_time, initial)
        }
    }

    fn local_reference(&self, h: f64, initial: InitialData) -> RunConfig {
        RunConfig {
            model: Model::Local,
            snapshot_times: Some(vec![self.final_time]),
            ..self.config(h, h, initial)
        }
    }
}

/// One sweep entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Job {
    pub config: RunConfig,
    /// Index into [`ExperimentPlan::references`].
    pub reference: usize,
    /// `m = ⌈δ/h⌉`.
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentPlan {
    pub id: ExperimentId,
    pub options: ExperimentOptions,
    pub references: Vec<RunConfig>,
    pub jobs: Vec<Job>,
}

fn push_reference(refs: &mut Vec<RunConfig>, cfg: RunConfig) -> usize {
    refs.iter().position(|r| *r == cfg).unwrap_or_else(|| {
        refs.push(cfg);
        refs.len() - 1
    })
}

pub fn plan(id: ExperimentId, options: &ExperimentOptions) -> Result<ExperimentPlan> {
    options.validate()?;
    let mut references = Vec::new();
    let mut jobs = Vec::new();
    let mut add_job = |cfg: RunConfig, reference: usize| -> Result<()> {
        let m = cfg.plan()?.m;
        jobs.push(Job { config: cfg, reference, m });
        Ok(())
    };
    for initial in &options.initial {
        match id {
            ExperimentId::Snapshots => {
                let r = push_reference(
                    &mut references,
                    options.local_reference(SNAPSHOT_REFERENCE_H, initial.clone()),
                );
                for &rule in &options.rules {
                    let mut cfg = options
                        .config(SNAPSHOT_DELTA, SNAPSHOT_H, initial.clone())
                        .with_rule(rule);
                    if cfg.snapshot_times.is_none() {
                        cfg.snapshot_times = Some(vec![0.0, 0.5 * options.final_time, options.final_time]);
                    }
                    add_job(cfg, r)?;
                }
            }
            ExperimentId::LocalLimit | ExperimentId::Kernels => {
                let r = push_reference(
                    &mut references,
                    options.local_reference(CONVERGENCE_REFERENCE_H, initial.clone()),
                );
                let variants: Vec<(KernelProfile, WeightRule)> = if id == ExperimentId::Kernels {
                    KernelProfile::ALL
                        .iter()
                        .map(|&k| (k, WeightRule::ExactQuadrature))
                        .collect()
                } else {
                    options
                        .rules
                        .iter()
                        .map(|&rule| (KernelProfile::LinearDecreasing, rule))
                        .collect()
                };
                for (kernel, rule) in variants {
                    for m in STENCIL_MULTIPLES {
                        for h in H_LADDER {
                            let cfg = options
                                .config(m as f64 * h, h, initial.clone())
                                .with_kernel(kernel)
                                .with_rule(rule);
                            add_job(final_only(cfg), r)?;
                        }
                    }
                }
            }
            ExperimentId::UniformInDelta => {
                for &rule in &options.rules {
                    for delta in FIXED_HORIZONS {
                        let reference = final_only(
                            options
                                .config(delta, CONVERGENCE_REFERENCE_H, initial.clone())
                                .with_rule(rule),
                        );
                        let r = push_reference(&mut references, reference);
                        for h in H_LADDER {
                            let cfg = options.config(delta, h, initial.clone()).with_rule(rule);
                            add_job(final_only(cfg), r)?;
                        }
                    }
                }
            }
        }
    }
    Ok(ExperimentPlan {
        id,
        options: options.clone(),
        references,
        jobs,
    })
}

/// Convergence sweeps keep only the final level unless told otherwise.
fn final_only(mut cfg: RunConfig) -> RunConfig {
    if cfg.snapshot_times.is_none() {
        cfg.snapshot_times = Some(vec![cfg.final_time]);
    }
    cfg
}

/// A completed run with its runtime property checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitoredRun {
    pub trajectory: Trajectory,
    pub properties: Option<PropertyReport>,
}

/// Run `config`, optionally checking the maximum principle, conservation,
/// TVD and one-sided Lipschitz bounds at every step.
pub fn run_monitored(config: &RunConfig, diagnostics: bool) -> Result<MonitoredRun> {
    if !diagnostics {
        return Ok(MonitoredRun {
            trajectory: crate::solver::run(config)?,
            properties: None,
        });
    }
    config.validate()?;
    let grid = config.grid()?;
    let initial = config.initial.discretize(&grid);
    let (inputs, d0) = config.delta0()?;
    let margin = config.flux_function().check_assumption5(config.lambda).margin;
    let effective_delta = match config.model {
        Model::Local => 0.0,
        Model::Nonlocal => config.delta,
    };
    let gate = match d0 {
        Ok(_) => LipschitzGate::new(&inputs, effective_delta, config.h, margin),
        Err(_) => LipschitzGate {
            delta_admitted: false,
            below_h0: false,
        },
    };
    let mut monitor = PropertyMonitor::new(
        &initial,
        config.initial.inf(),
        config.initial.sup(),
        inputs.l,
        gate,
    );
    let trajectory = run_observed(config, &mut monitor)?;
    Ok(MonitoredRun {
        trajectory,
        properties: Some(monitor.finish()),
    })
}

/// One line of an error table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    pub h: f64,
    pub delta: f64,
    pub m: usize,
    pub rule: WeightRule,
    pub flux: FluxKind,
    pub kernel: KernelProfile,
    pub initial: String,
    pub error: f64,
}

impl ErrorRow {
    pub const CSV_HEADER: &'static str = "h,delta,m,rule,flux,kernel,initial,error";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.17e}",
            self.h, self.delta, self.m, self.rule, self.flux, self.kernel, self.initial, self.error
        )
    }
}

/// What distinguishes the curves of one panel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKey {
    /// `δ = mh`
    M(usize),
    /// fixed `δ`
    Delta(f64),
}

/// Least-squares convergence fit of one error curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesFit {
    pub initial: String,
    pub rule: WeightRule,
    pub kernel: KernelProfile,
    pub flux: FluxKind,
    pub key: SeriesKey,
    /// `(h, error)`, decreasing `h`.
    pub points: Vec<(f64, f64)>,
    /// `None` with fewer than two points.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

impl SeriesFit {
    /// Errors strictly decrease along the ladder.
    pub fn monotone(&self) -> bool {
        self.points.windows(2).all(|p| p[1].1 < p[0].1)
    }
}

/// Group rows into curves and fit each. Rows whose `δ` is an exact multiple
/// of `h` for every `h` of their group are keyed by `m`; otherwise by `δ`.
pub fn series_fits(rows: &[ErrorRow]) -> Vec<SeriesFit> {
    let by_m = rows.iter().all(|r| (r.delta - r.m as f64 * r.h).abs() <= 1e-12 * r.delta);
    let mut fits: Vec<SeriesFit> = Vec::new();
    for row in rows {
        let key = if by_m { SeriesKey::M(row.m) } else { SeriesKey::Delta(row.delta) };
        let found = fits.iter_mut().find(|f| {
            f.initial == row.initial
                && f.rule == row.rule
                && f.kernel == row.kernel
                && f.flux == row.flux
                && f.key == key
        });
        match found {
            Some(f) => f.points.push((row.h, row.error)),
            None => fits.push(SeriesFit {
                initial: row.initial.clone(),
                rule: row.rule,
                kernel: row.kernel,
                flux: row.flux,
                key,
                points: vec![(row.h, row.error)],
                slope: None,
                intercept: None,
            }),
        }
    }
    for f in &mut fits {
        f.points.sort_by(|a, b| b.0.total_cmp(&a.0));
        if let Ok((slope, intercept)) = fit_rate(&f.points) {
            f.slope = Some(slope);
            f.intercept = Some(intercept);
        }
    }
    fits
}

#[derive(Debug)]
pub struct JobFailure {
    pub config: RunConfig,
    pub error: Error,
}

#[derive(Debug)]
pub struct ExperimentResult {
    pub plan: ExperimentPlan,
    pub references: Vec<Result<MonitoredRun>>,
    /// Parallel to `plan.jobs`.
    pub runs: Vec<Result<MonitoredRun>>,
    /// One row per successful job, in plan order.
    pub rows: Vec<ErrorRow>,
    pub failures: Vec<JobFailure>,
}

impl ExperimentResult {
    /// `(h, error)` pairs of the rows matching `select`, ordered by decreasing `h`.
    pub fn series(&self, select: impl Fn(&ErrorRow) -> bool) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| select(r))
            .map(|r| (r.h, r.error))
            .collect();
        out.sort_by(|a, b| b.0.total_cmp(&a.0));
        out
    }
}

/// Error of a job's final field against its reference's final field over
/// the report window.
pub fn job_error(job: &MonitoredRun, reference: &MonitoredRun) -> Result<f64> {
    let coarse = &job.trajectory.final_field;
    l1_error(coarse, &reference.trajectory.final_field, coarse.grid.report_window)
}

pub fn execute(plan: ExperimentPlan, pool: &rayon::ThreadPool) -> ExperimentResult {
    let diagnostics = plan.options.diagnostics;
    let references: Vec<Result<MonitoredRun>> = pool.install(|| {
        plan.references
            .par_iter()
            .map(|cfg| run_monitored(cfg, diagnostics))
            .collect()
    });
    let runs: Vec<Result<MonitoredRun>> = pool.install(|| {
        plan.jobs
            .par_iter()
            .map(|job| run_monitored(&job.config, diagnostics))
            .collect()
    });
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (job, run) in plan.jobs.iter().zip(&runs) {
        let outcome = match (run, &references[job.reference]) {
            (Ok(run), Ok(reference)) => job_error(run, reference),
            (Err(e), _) => Err(clone_error(e)),
            (_, Err(e)) => Err(Error::Reference(e.to_string())),
        };
        match outcome {
            Ok(error) => rows.push(ErrorRow {
                h: job.config.h,
                delta: job.config.delta,
                m: job.m,
                rule: job.config.rule,
                flux: job.config.flux,
                kernel: job.config.kernel,
                initial: job.config.initial.name().to_string(),
                error,
            }),
            Err(error) => failures.push(JobFailure {
                config: job.config.clone(),
                error,
            }),
        }
    }
    ExperimentResult {
        plan,
        references,
        runs,
        rows,
        failures,
    }
}

fn clone_error(e: &Error) -> Error {
    match e {
        Error::Numerical { step, cell, value } => Error::Numerical {
            step: *step,
            cell: *cell,
            value: *value,
        },
        Error::Domain(s) => Error::Domain(s.clone()),
        other => Error::config(other.to_string()),
    }
}

pub fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::config("--jobs must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
}
