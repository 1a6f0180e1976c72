//! Uniform-grid finite-volume stepping for the nonlocal LWR model and its
//! local counterpart.
//!
//! Cells are `C_j = ((j - 1/2)h, (j + 1/2)h)` for `j_min ≤ j ≤ j_max`. Reads
//! past either end of the stored range return the nearest stored value
//! (constant extension); ghost cells are never materialized in the field.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, Delta0, Delta0Inputs};
use crate::error::{Error, Result};
use crate::flux::{FluxFunction, FluxKind, DEFAULT_ALPHA};
use crate::kernel::{Kernel, KernelProfile};
use crate::quadrature::{build_weights, check_assumption3, QuadratureWeights, WeightRule};

pub const DEFAULT_LAMBDA: f64 = 0.25;

/// Relative slack when comparing times and grid positions.
const TIME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub h: f64,
    pub lambda: f64,
    pub j_min: i64,
    pub j_max: i64,
    pub report_window: (f64, f64),
}

impl Grid {
    pub fn new(h: f64, lambda: f64, j_min: i64, j_max: i64, report_window: (f64, f64)) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::domain(format!("cell width must be positive, got {h}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::domain(format!("CFL ratio must be positive, got {lambda}")));
        }
        if j_max < j_min {
            return Err(Error::domain(format!("empty index range {j_min}..={j_max}")));
        }
        Ok(Grid {
            h,
            lambda,
            j_min,
            j_max,
            report_window,
        })
    }

    /// Grid whose stored range covers the report window padded by `pad` on
    /// both sides.
    pub fn padded(h: f64, lambda: f64, report_window: (f64, f64), pad: f64) -> Result<Self> {
        let (lo, hi) = report_window;
        if !(lo < hi) {
            return Err(Error::domain(format!("report window ({lo}, {hi}) is empty")));
        }
        let j_min = ((lo - pad) / h).floor() as i64;
        let j_max = ((hi + pad) / h).ceil() as i64;
        Grid::new(h, lambda, j_min, j_max, report_window)
    }

    pub fn tau(&self) -> f64 {
        self.lambda * self.h
    }

    pub fn len(&self) -> usize {
        (self.j_max - self.j_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell center `x_j = jh`.
    pub fn x(&self, j: i64) -> f64 {
        j as f64 * self.h
    }

    pub fn cell_bounds(&self, j: i64) -> (f64, f64) {
        ((j as f64 - 0.5) * self.h, (j as f64 + 0.5) * self.h)
    }

    pub fn index(&self, offset: usize) -> i64 {
        self.j_min + offset as i64
    }

    /// Stored offsets whose cell centers lie in the report window.
    pub fn report_range(&self) -> std::ops::Range<usize> {
        let (lo, hi) = self.report_window;
        let slack = TIME_TOL * self.h;
        let first = ((lo - slack) / self.h).ceil() as i64;
        let last = ((hi + slack) / self.h).floor() as i64;
        let a = (first.max(self.j_min) - self.j_min) as usize;
        let b = (last.min(self.j_max) - self.j_min + 1).max(0) as usize;
        a..b.max(a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionField {
    pub grid: Grid,
    /// Time level `n`.
    pub n: u64,
    pub values: Vec<f64>,
}

impl SolutionField {
    pub fn new(grid: Grid, n: u64, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::domain(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        Ok(SolutionField { grid, n, values })
    }

    pub fn uniform(grid: Grid, value: f64) -> Self {
        SolutionField {
            grid,
            n: 0,
            values: vec![value; grid.len()],
        }
    }

    pub fn time(&self) -> f64 {
        self.n as f64 * self.grid.tau()
    }

    /// `ρ_j` with constant extension past the stored range.
    pub fn at(&self, j: i64) -> f64 {
        let j = j.clamp(self.grid.j_min, self.grid.j_max);
        self.values[(j - self.grid.j_min) as usize]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `h Σ_j ρ_j` over the stored range.
    pub fn mass(&self) -> f64 {
        self.grid.h * self.values.iter().sum::<f64>()
    }

    /// `(x_j, ρ_j)` for cells centered in the report window.
    pub fn report_cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid
            .report_range()
            .map(move |i| (self.grid.x(self.grid.index(i)), self.values[i]))
    }
}

/// Initial traffic density `ρ_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialData {
    /// `0.4 + 0.4 exp(-100 (x - 0.5)^2)`
    #[serde(rename = "bell")]
    BellShape,
    /// `ρ_L` for `x < 0.5`, `ρ_R` for `x > 0.5`.
    Riemann { left: f64, right: f64 },
    /// Piecewise-linear interpolation of `(x, ρ)` samples, constant outside.
    #[serde(rename = "table")]
    UserTable { x: Vec<f64>, rho: Vec<f64> },
}

const RIEMANN_JUMP: f64 = 0.5;

// 5-point Gauss-Legendre rule on [-1, 1].
const GL_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

impl InitialData {
    pub fn riemann(left: f64, right: f64) -> Self {
        InitialData::Riemann { left, right }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InitialData::BellShape => "bell",
            InitialData::Riemann { .. } => "riemann",
            InitialData::UserTable { .. } => "table",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        match self {
            InitialData::BellShape => Ok(()),
            InitialData::Riemann { left, right } => {
                if in_unit(*left) && in_unit(*right) {
                    Ok(())
                } else {
                    Err(Error::config(format!(
                        "initial: Riemann states ({left}, {right}) must lie in [0, 1]"
                    )))
                }
            }
            InitialData::UserTable { x, rho } => {
                if x.is_empty() || x.len() != rho.len() {
                    return Err(Error::config(
                        "initial: table needs equally many x and rho entries (at least one)",
                    ));
                }
                if !x.windows(2).all(|p| p[0] < p[1]) {
                    return Err(Error::config("initial: table x must be strictly increasing"));
                }
                if !rho.iter().all(|&v| in_unit(v)) {
                    return Err(Error::config("initial: table rho must lie in [0, 1]"));
                }
                Ok(())
            }
        }
    }

    /// Pointwise `ρ_0(x)`. At the Riemann jump itself the mean is returned.
    pub fn value(&self, x: f64) -> f64 {
        match self {
            InitialData::BellShape => 0.4 + 0.4 * (-100.0 * (x - 0.5).powi(2)).exp(),
            InitialData::Riemann { left, right } => {
                if x < RIEMANN_JUMP {
                    *left
                } else if x > RIEMANN_JUMP {
                    *right
                } else {
                    0.5 * (left + right)
                }
            }
            InitialData::UserTable { x: xs, rho } => {
                if x <= xs[0] {
                    return rho[0];
                }
                if x >= xs[xs.len() - 1] {
                    return rho[rho.len() - 1];
                }
                let i = xs.partition_point(|&t| t <= x) - 1;
                let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
                rho[i] + t * (rho[i + 1] - rho[i])
            }
        }
    }

    /// `(1/h) ∫_{C_j} ρ_0`.
    pub fn cell_average(&self, a: f64, b: f64) -> f64 {
        match self {
            InitialData::Riemann { left, right } => {
                if b <= RIEMANN_JUMP {
                    *left
                } else if a >= RIEMANN_JUMP {
                    *right
                } else {
                    ((RIEMANN_JUMP - a) * left + (b - RIEMANN_JUMP) * right) / (b - a)
                }
            }
            InitialData::BellShape => gauss_legendre(|x| self.value(x), a, b) / (b - a),
            InitialData::UserTable { x: xs, .. } => {
                // integrate each linear piece separately so breakpoints are exact
                let mut knots = vec![a];
                knots.extend(xs.iter().copied().filter(|&t| t > a && t < b));
                knots.push(b);
                let total: f64 = knots
                    .windows(2)
                    .map(|p| 0.5 * (p[1] - p[0]) * (self.value(p[0]) + self.value(p[1])))
                    .sum();
                total / (b - a)
            }
        }
    }

    pub fn discretize(&self, grid: &Grid) -> SolutionField {
        let values = (0..grid.len())
            .map(|i| {
                let (a, b) = grid.cell_bounds(grid.index(i));
                self.cell_average(a, b)
            })
            .collect();
        SolutionField { grid: *grid, n: 0, values }
    }

    pub fn inf(&self) -> f64 {
        match self {
            InitialData::BellShape => 0.4,
            InitialData::Riemann { left, right } => left.min(*right),
            InitialData::UserTable { rho, .. } => rho.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            InitialData::BellShape => 0.8,
            InitialData::Riemann { left, right } => left.max(*right),
            InitialData::UserTable { rho, .. } => rho.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// One-sided Lipschitz constant `L = sup -(ρ_0(y) - ρ_0(x))/(y - x)`.
    ///
    /// Smooth data is sampled at spacing `resolution` over `[lo, hi]`; a
    /// downward Riemann jump gives `+∞`, an upward one `0`.
    pub fn one_sided_lipschitz(&self, resolution: f64, lo: f64, hi: f64) -> f64 {
        match self {
            InitialData::Riemann { left, right } => {
                if right >= left {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            InitialData::UserTable { x, rho } => x
                .windows(2)
                .zip(rho.windows(2))
                .map(|(xs, rs)| -(rs[1] - rs[0]) / (xs[1] - xs[0]))
                .fold(0.0, f64::max),
            InitialData::BellShape => {
                let n = ((hi - lo) / resolution).ceil() as usize;
                (0..n)
                    .map(|i| {
                        let x = lo + i as f64 * resolution;
                        -(self.value(x + resolution) - self.value(x)) / resolution
                    })
                    .fold(0.0, f64::max)
            }
        }
    }
}

fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    half * GL_NODES
        .iter()
        .zip(GL_WEIGHTS.iter())
        .map(|(t, w)| w * f(mid + half * t))
        .sum::<f64>()
}

/// `q_j = Σ_k w_k ρ_{j+k}` with constant extension past the stored range.
pub fn nonlocal_density(field: &SolutionField, weights: &QuadratureWeights, j: i64) -> f64 {
    weights
        .weights
        .iter()
        .enumerate()
        .map(|(k, w)| w * field.at(j + k as i64))
        .sum()
}

/// Which update rule advances the field.
#[derive(Debug, Clone, PartialEq)]
pub enum Stepper {
    /// `ρ_j += λ[g(ρ_{j-1}, ρ_j, q_{j-1}, q_j) - g(ρ_j, ρ_{j+1}, q_j, q_{j+1})]`
    Nonlocal {
        flux: FluxFunction,
        weights: QuadratureWeights,
    },
    /// `ρ_j += λ[g(ρ_{j-1}, ρ_j) - g(ρ_j, ρ_{j+1})]` with the two-point local flux.
    Local { flux: FluxFunction },
}

/// Fluxes through the two outer faces of the stored range during one step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct BoundaryFlux {
    pub inflow: f64,
    pub outflow: f64,
}

#[derive(Debug, Default)]
struct Workspace {
    ext: Vec<f64>,
    q: Vec<f64>,
    faces: Vec<f64>,
}

impl Stepper {
    fn advance(
        &self,
        lambda: f64,
        rho: &[f64],
        out: &mut Vec<f64>,
        ws: &mut Workspace,
    ) -> BoundaryFlux {
        let n = rho.len();
        let (first, last) = (rho[0], rho[n - 1]);
        ws.faces.clear();
        match self {
            Stepper::Nonlocal { flux, weights } => {
                let m = weights.m();
                // ext[i] = ρ_{i-1}, i.e. one ghost on the left, m on the right
                ws.ext.clear();
                ws.ext.push(first);
                ws.ext.extend_from_slice(rho);
                ws.ext.resize(n + m + 1, last);
                // q[i] = q_{i-1} for j = -1..=n
                ws.q.clear();
                let w = &weights.weights;
                for i in 0..n + 2 {
                    let window = &ws.ext[i..i + m];
                    ws.q.push(w.iter().zip(window).map(|(a, b)| a * b).sum());
                }
                // faces[i] = F_{i - 1/2}, i = 0..=n
                for i in 0..=n {
                    ws.faces.push(flux.eval(ws.ext[i], ws.ext[i + 1], ws.q[i], ws.q[i + 1]));
                }
            }
            Stepper::Local { flux } => {
                for i in 0..=n {
                    let l = if i == 0 { first } else { rho[i - 1] };
                    let r = if i == n { last } else { rho[i] };
                    ws.faces.push(flux.eval_local(l, r));
                }
            }
        }
        out.clear();
        out.extend(
            rho.iter()
                .enumerate()
                .map(|(i, r)| r + lambda * (ws.faces[i] - ws.faces[i + 1])),
        );
        BoundaryFlux {
            inflow: ws.faces[0],
            outflow: ws.faces[n],
        }
    }

    pub fn step(&self, field: &SolutionField) -> Result<SolutionField> {
        let mut ws = Workspace::default();
        let mut out = Vec::with_capacity(field.values.len());
        self.advance(field.grid.lambda, &field.values, &mut out, &mut ws);
        check_finite(&out, &field.grid, field.n)?;
        Ok(SolutionField {
            grid: field.grid,
            n: field.n + 1,
            values: out,
        })
    }
}

/// One conservative update of the nonlocal scheme.
pub fn step(
    field: &SolutionField,
    flux: &FluxFunction,
    weights: &QuadratureWeights,
) -> Result<SolutionField> {
    Stepper::Nonlocal {
        flux: *flux,
        weights: weights.clone(),
    }
    .step(field)
}

fn check_finite(values: &[f64], grid: &Grid, n: u64) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::Numerical {
            step: n,
            cell: grid.index(i),
            value: values[i],
        }),
    }
}

/// Whether a run uses the nonlocal scheme or the local two-point scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    #[default]
    Nonlocal,
    Local,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

fn default_window() -> (f64, f64) {
    (0.0, 1.0)
}

fn default_kernel() -> KernelProfile {
    KernelProfile::LinearDecreasing
}

fn default_rule() -> WeightRule {
    WeightRule::ExactQuadrature
}

fn default_flux() -> FluxKind {
    FluxKind::LaxFriedrichs
}

/// Full parameterization of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: Model,
    #[serde(default = "default_kernel")]
    pub kernel: KernelProfile,
    #[serde(default = "default_rule")]
    pub rule: WeightRule,
    #[serde(default = "default_flux")]
    pub flux: FluxKind,
    /// Horizon `δ`; ignored by the local model.
    pub delta: f64,
    pub h: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(alias = "T")]
    pub final_time: f64,
    pub initial: InitialData,
    #[serde(default = "default_window")]
    pub report_window: (f64, f64),
    /// Requested snapshot times; defaults to `{0, T/2, T}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_times: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn new(delta: f64, h: f64, final_time: f64, initial: InitialData) -> Self {
        RunConfig {
            model: Model::Nonlocal,
            kernel: default_kernel(),
            rule: default_rule(),
            flux: default_flux(),
            delta,
            h,
            lambda: DEFAULT_LAMBDA,
            alpha: DEFAULT_ALPHA,
            final_time,
            initial,
            report_window: default_window(),
            snapshot_times: None,
        }
    }

    /// Local Lax-Friedrichs reference on mesh `h`.
    pub fn local_reference(h: f64, final_time: f64, initial: InitialData) -> Self {
        RunConfig {
            model: Model::Local,
            ..RunConfig::new(h, h, final_time, initial)
        }
    }

    pub fn with_kernel(mut self, kernel: KernelProfile) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_rule(mut self, rule: WeightRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_flux(mut self, flux: FluxKind, alpha: f64) -> Self {
        self.flux = flux;
        self.alpha = alpha;
        self
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = Some(times);
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{name}: must be a positive number, got {v}")))
            }
        };
        positive("h", self.h)?;
        positive("lambda", self.lambda)?;
        if self.model == Model::Nonlocal {
            positive("delta", self.delta)?;
        }
        if !(self.final_time >= 0.0 && self.final_time.is_finite()) {
            return Err(Error::config(format!(
                "final_time: must be non-negative, got {}",
                self.final_time
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config(format!("alpha: must be non-negative, got {}", self.alpha)));
        }
        let (lo, hi) = self.report_window;
        if !(lo < hi) {
            return Err(Error::config(format!("report_window: ({lo}, {hi}) is empty")));
        }
        if let Some(times) = &self.snapshot_times {
            if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
                return Err(Error::config(format!("snapshot_times: invalid time {t}")));
            }
        }
        self.initial.validate()
    }

    pub fn kernel(&self) -> Kernel {
        Kernel::new(self.kernel)
    }

    pub fn flux_function(&self) -> FluxFunction {
        FluxFunction::new(self.flux, self.alpha)
    }

    pub fn weights(&self) -> Result<QuadratureWeights> {
        match self.model {
            Model::Local => Ok(QuadratureWeights::local()),
            Model::Nonlocal => build_weights(&self.kernel(), self.delta, self.h, self.rule),
        }
    }

    pub fn stepper(&self) -> Result<Stepper> {
        let flux = self.flux_function();
        Ok(match self.model {
            Model::Local => Stepper::Local { flux },
            Model::Nonlocal => Stepper::Nonlocal {
                flux,
                weights: self.weights()?,
            },
        })
    }

    /// Stored grid: the report window padded by `T + δ + 2h` on both sides.
    /// The local model pads by its `delta` too, so that a local run and a
    /// nonlocal run of the same config share one grid.
    pub fn grid(&self) -> Result<Grid> {
        let delta = if self.delta.is_finite() { self.delta.max(0.0) } else { 0.0 };
        let pad = self.final_time + delta + 2.0 * self.h;
        Grid::padded(self.h, self.lambda, self.report_window, pad)
    }

    pub fn plan(&self) -> Result<RunPlan> {
        let grid = self.grid()?;
        let tau = grid.tau();
        let steps = (self.final_time / tau).round() as u64;
        let actual_final_time = steps as f64 * tau;
        let requested: Vec<f64> = match &self.snapshot_times {
            Some(t) => t.clone(),
            None if self.final_time == 0.0 => vec![0.0],
            None => vec![0.0, 0.5 * self.final_time, self.final_time],
        };
        let mut snapshot_levels: Vec<(f64, u64)> = requested
            .iter()
            .map(|&t| (t, nearest_level(t, tau).min(steps)))
            .collect();
        snapshot_levels.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.total_cmp(&b.0)));
        snapshot_levels.dedup_by_key(|s| s.1);
        Ok(RunPlan {
            grid,
            tau,
            steps,
            actual_final_time,
            final_time_adjusted: (actual_final_time - self.final_time).abs()
                > TIME_TOL * self.final_time.max(tau),
            m: self.weights()?.m(),
            snapshot_levels,
        })
    }

    /// Horizon threshold `δ₀` for this configuration's kernel, rule and data.
    pub fn delta0(&self) -> Result<(Delta0Inputs, Result<Delta0>)> {
        let grid = self.grid()?;
        let kernel = self.kernel();
        let weights = self.weights()?;
        let report = check_assumption3(&weights, &kernel, self.delta, self.h);
        let initial = self.initial.discretize(&grid);
        let (lo, hi) = (grid.cell_bounds(grid.j_min).0, grid.cell_bounds(grid.j_max).1);
        let sampled = self.initial.one_sided_lipschitz(self.h / 10.0, lo, hi);
        let inputs = Delta0Inputs {
            c: report.gap_constant,
            rho_min: self.initial.inf(),
            l: sampled.max(diagnostics::one_sided_lipschitz(&initial)),
            w0: kernel.value_at_zero,
        };
        let d0 = diagnostics::delta0(&inputs);
        Ok((inputs, d0))
    }

    /// Non-fatal problems with the configuration.
    pub fn warnings(&self) -> Result<Vec<String>> {
        let mut out = Vec::new();
        let a5 = self.flux_function().check_assumption5(self.lambda);
        if !a5.ok {
            out.push(format!(
                "CFL ratio {} violates the monotonicity condition for flux {} (margin {:.6})",
                self.lambda, self.flux, a5.margin
            ));
        }
        if self.model == Model::Nonlocal {
            match self.delta0()?.1 {
                Ok(Delta0::Bounded(d0)) if self.delta > d0 => out.push(format!(
                    "horizon {} exceeds delta0 = {d0:.6}; a-priori bounds do not apply",
                    self.delta
                )),
                Ok(_) => {}
                Err(e) => out.push(format!("delta0 unavailable ({e}); a-priori bounds do not apply")),
            }
        }
        Ok(out)
    }
}

/// Nearest time level to `t`, ties toward the earlier level.
fn nearest_level(t: f64, tau: f64) -> u64 {
    let x = t / tau;
    let n = (x - 0.5).ceil();
    // guard against roundoff pushing an exact level over a tie
    let n = if (x - x.round()).abs() <= TIME_TOL * x.max(1.0) { x.round() } else { n };
    n.max(0.0) as u64
}

/// Derived quantities of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunPlan {
    pub grid: Grid,
    pub tau: f64,
    pub steps: u64,
    pub actual_final_time: f64,
    pub final_time_adjusted: bool,
    pub m: usize,
    /// `(requested time, level)`, sorted by level, one entry per level.
    pub snapshot_levels: Vec<(f64, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub requested_time: f64,
    pub actual_time: f64,
    pub field: SolutionField,
}

/// Receives every pair of consecutive time levels of a run.
pub trait StepObserver {
    fn observe(&mut self, prev: &SolutionField, next: &SolutionField, boundary: BoundaryFlux);
}

impl StepObserver for () {
    fn observe(&mut self, _: &SolutionField, _: &SolutionField, _: BoundaryFlux) {}
}

impl<A: StepObserver, B: StepObserver> StepObserver for (A, B) {
    fn observe(&mut self, prev: &SolutionField, next: &SolutionField, boundary: BoundaryFlux) {
        self.0.observe(prev, next, boundary);
        self.1.observe(prev, next, boundary);
    }
}

/// A time-stepping session holding the current level and scratch buffers.
pub struct Simulation {
    stepper: Stepper,
    field: SolutionField,
    next: Vec<f64>,
    ws: Workspace,
}

impl Simulation {
    pub fn new(stepper: Stepper, initial: SolutionField) -> Self {
        Simulation {
            stepper,
            next: Vec::with_capacity(initial.values.len()),
            field: initial,
            ws: Workspace::default(),
        }
    }

    pub fn from_config(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let grid = config.grid()?;
        Ok(Simulation::new(config.stepper()?, config.initial.discretize(&grid)))
    }

    pub fn field(&self) -> &SolutionField {
        &self.field
    }

    pub fn into_field(self) -> SolutionField {
        self.field
    }

    pub fn stepper(&self) -> &Stepper {
        &self.stepper
    }

    /// Advance one level; the previous level is handed to `observer`.
    pub fn step_observed(&mut self, observer: &mut dyn StepObserver) -> Result<()> {
        let boundary = self.stepper.advance(
            self.field.grid.lambda,
            &self.field.values,
            &mut self.next,
            &mut self.ws,
        );
        check_finite(&self.next, &self.field.grid, self.field.n)?;
        std::mem::swap(&mut self.field.values, &mut self.next);
        self.field.n += 1;
        let prev = SolutionField {
            grid: self.field.grid,
            n: self.field.n - 1,
            values: std::mem::take(&mut self.next),
        };
        observer.observe(&prev, &self.field, boundary);
        self.next = prev.values;
        Ok(())
    }

    pub fn step(&mut self) -> Result<()> {
        self.step_observed(&mut ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub config: RunConfig,
    pub plan: RunPlan,
    pub snapshots: Vec<Snapshot>,
    pub final_field: SolutionField,
    pub warnings: Vec<String>,
}

impl Trajectory {
    /// Snapshot nearest to `t` among those taken.
    pub fn snapshot(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.actual_time - t).abs().total_cmp(&(b.actual_time - t).abs()))
    }
}

/// Run `config` to its final time, emitting snapshots and feeding every step
/// to `observer`.
pub fn run_observed(config: &RunConfig, observer: &mut dyn StepObserver) -> Result<Trajectory> {
    config.validate()?;
    let plan = config.plan()?;
    let warnings = config.warnings()?;
    let mut sim = Simulation::from_config(config)?;
    let mut snapshots = Vec::with_capacity(plan.snapshot_levels.len());
    let mut pending = plan.snapshot_levels.iter().peekable();
    loop {
        let n = sim.field().n;
        while let Some(&&(requested_time, level)) = pending.peek() {
            if level != n {
                break;
            }
            snapshots.push(Snapshot {
                requested_time,
                actual_time: sim.field().time(),
                field: sim.field().clone(),
            });
            pending.next();
        }
        if n >= plan.steps {
            break;
        }
        sim.step_observed(observer)?;
    }
    Ok(Trajectory {
        config: config.clone(),
        plan,
        snapshots,
        final_field: sim.into_field(),
        warnings,
    })
}

pub fn run(config: &RunConfig) -> Result<Trajectory> {
    run_observed(config, &mut ())
}

/// Final field of the local two-point scheme on the config's mesh, whatever
/// the config's own model.
pub fn run_local_reference(config: &RunConfig) -> Result<SolutionField> {
    let local = RunConfig {
        model: Model::Local,
        snapshot_times: Some(vec![]),
        ..config.clone()
    };
    Ok(run(&local)?.final_field)
}
