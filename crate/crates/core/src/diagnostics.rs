//! Runtime checks of the discrete a-priori estimates, error norms and
//! convergence-rate fits.
//!
//! Checks come in two shapes: functions over retained time levels, and
//! streaming monitors implementing [`StepObserver`] that hold one level.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::solver::{BoundaryFlux, SolutionField, StepObserver};

/// Slack on every discrete inequality.
pub const INEQ_TOL: f64 = 1e-12;

/// Slack when testing grid nesting and common final times.
const NEST_TOL: f64 = 1e-9;

pub fn total_variation_of(values: &[f64]) -> f64 {
    values.windows(2).map(|p| (p[1] - p[0]).abs()).sum()
}

/// `Σ_j |ρ_{j+1} - ρ_j|` over the stored range.
pub fn total_variation(field: &SolutionField) -> f64 {
    total_variation_of(&field.values)
}

/// `L^n = max_j max(-(ρ_{j+1} - ρ_j)/h, 0)`.
pub fn one_sided_lipschitz(field: &SolutionField) -> f64 {
    let h = field.grid.h;
    field
        .values
        .windows(2)
        .map(|p| -(p[1] - p[0]) / h)
        .fold(0.0, f64::max)
}

/// Inputs of the horizon threshold `δ₀ = cρ_min/(2Lw(0))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Delta0Inputs {
    /// Weight-gap constant.
    pub c: f64,
    pub rho_min: f64,
    /// One-sided Lipschitz constant of the initial data.
    pub l: f64,
    /// Kernel profile value `w(0)`.
    pub w0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Delta0 {
    Bounded(f64),
    /// `L = 0`: no decreasing variation, every horizon qualifies.
    Unbounded,
}

impl Delta0 {
    pub fn admits(&self, delta: f64) -> bool {
        match self {
            Delta0::Bounded(d0) => delta <= *d0,
            Delta0::Unbounded => true,
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Delta0::Bounded(d0) => *d0,
            Delta0::Unbounded => f64::INFINITY,
        }
    }
}

pub fn delta0(inputs: &Delta0Inputs) -> Result<Delta0> {
    let Delta0Inputs { c, rho_min, l, w0 } = *inputs;
    for (name, v) in [("c", c), ("rho_min", rho_min), ("w0", w0)] {
        if !(v > 0.0) {
            return Err(Error::domain(format!("delta0 needs {name} > 0, got {v}")));
        }
    }
    if !(l >= 0.0) {
        return Err(Error::domain(format!("delta0 needs L ≥ 0, got {l}")));
    }
    if l == 0.0 {
        return Ok(Delta0::Unbounded);
    }
    Ok(Delta0::Bounded(c * rho_min / (2.0 * l * w0)))
}

/// Mesh size below which the Lipschitz decay bound is asserted rather than
/// reported: `margin·(δ₀ - δ)/4`, with `margin` the Assumption 5 margin.
pub fn decay_threshold_h0(margin: f64, delta0: Delta0, delta: f64) -> f64 {
    match delta0 {
        Delta0::Unbounded => f64::INFINITY,
        Delta0::Bounded(d0) => (margin * (d0 - delta) / 4.0).max(0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvdViolation {
    pub step: u64,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TvdReport {
    /// TV per time level, starting at level 0.
    pub tv: Vec<f64>,
    /// Steps where TV grew by more than [`INEQ_TOL`].
    pub violations: Vec<TvdViolation>,
    /// Steps where `Σ_j |ρ_j^{n+1} - ρ_j^n| > TV(ρ^n)`.
    pub increment_violations: Vec<u64>,
    /// `max_n Σ_j |ρ_j^{n+1} - ρ_j^n|`.
    pub max_increment: f64,
    /// `τ Σ_{n<N} TV(ρ^n)`, the spatial variation integrated over `[0, T]`.
    pub spatial_tv_integral: f64,
    /// `T·TV(ρ^0)`.
    pub spatial_bound: f64,
    /// `τ Σ_n TV(ρ^n) + h Σ_n Σ_j |ρ^{n+1}_j - ρ^n_j|`, the variation of the
    /// piecewise-constant space-time field.
    pub space_time_tv: f64,
    /// `T·TV(ρ^0)·(1 + 1/λ)`.
    pub space_time_bound: f64,
}

impl TvdReport {
    pub fn passed(&self) -> bool {
        let slack = INEQ_TOL * self.tv.len() as f64;
        self.violations.is_empty()
            && self.increment_violations.is_empty()
            && self.spatial_tv_integral <= self.spatial_bound + slack
            && self.space_time_tv <= self.space_time_bound + slack
    }
}

/// Streaming TVD check.
///
/// Besides the per-step TV comparison, the time increments are checked
/// against `Σ_j |ρ^{n+1}_j - ρ^n_j| ≤ λ‖∇g‖ TV(ρ^n) ≤ TV(ρ^n)`, which holds
/// whenever the CFL condition does.
#[derive(Debug, Clone)]
pub struct TvdMonitor {
    h: f64,
    tau: f64,
    tv: Vec<f64>,
    violations: Vec<TvdViolation>,
    increment_violations: Vec<u64>,
    increments: Vec<f64>,
}

impl TvdMonitor {
    pub fn new(initial: &SolutionField) -> Self {
        TvdMonitor {
            h: initial.grid.h,
            tau: initial.grid.tau(),
            tv: vec![total_variation(initial)],
            violations: Vec::new(),
            increment_violations: Vec::new(),
            increments: Vec::new(),
        }
    }

    pub fn finish(self) -> TvdReport {
        let tv0 = self.tv[0];
        let steps = self.increments.len();
        let final_time = steps as f64 * self.tau;
        let spatial_tv_integral = self.tau * self.tv[..steps].iter().sum::<f64>();
        let increments: f64 = self.increments.iter().sum();
        TvdReport {
            max_increment: self.increments.iter().copied().fold(0.0, f64::max),
            spatial_tv_integral,
            spatial_bound: final_time * tv0,
            space_time_tv: spatial_tv_integral + self.h * increments,
            space_time_bound: final_time * tv0 * (1.0 + self.h / self.tau),
            tv: self.tv,
            violations: self.violations,
            increment_violations: self.increment_violations,
        }
    }
}

impl StepObserver for TvdMonitor {
    fn observe(&mut self, prev: &SolutionField, next: &SolutionField, _: BoundaryFlux) {
        let before = *self.tv.last().expect("initial level recorded");
        let after = total_variation(next);
        if after > before + INEQ_TOL {
            self.violations.push(TvdViolation {
                step: prev.n,
                before,
                after,
            });
        }
        let increment: f64 = prev
            .values
            .iter()
            .zip(&next.values)
            .map(|(a, b)| (b - a).abs())
            .sum();
        if increment > before + INEQ_TOL {
            self.increment_violations.push(prev.n);
        }
        self.tv.push(after);
        self.increments.push(increment);
    }
}

/// TVD check over retained consecutive levels.
pub fn check_tvd(levels: &[SolutionField]) -> TvdReport {
    let mut monitor = TvdMonitor::new(&levels[0]);
    for pair in levels.windows(2) {
        monitor.observe(&pair[0], &pair[1], BoundaryFlux::default());
    }
    monitor.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LipschitzBound {
    /// `r_j^n ≥ -Lh`
    Floor,
    /// `L^n ≤ 1/(1/L⁰ + 2nτ)`
    Decay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzViolation {
    pub step: u64,
    pub bound: LipschitzBound,
    pub value: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzTrace {
    /// `L` of the initial data (the floor constant).
    pub l_initial: f64,
    /// `L⁰` of the discretized initial field, the decay bound's anchor.
    pub l0: f64,
    /// `L^n` per level.
    pub ln: Vec<f64>,
    /// `1/(1/L⁰ + 2nτ)` per level.
    pub bound: Vec<f64>,
    /// Whether `δ ≤ δ₀`, so that violations count.
    pub asserted: bool,
    /// Whether `h < h₀`, so that decay violations count.
    pub decay_asserted: bool,
    pub violations: Vec<LipschitzViolation>,
    /// Out-of-regime observations, recorded but not failing.
    pub warnings: Vec<LipschitzViolation>,
}

impl LipschitzTrace {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// `max_n (L^n - bound_n)` over `n ≥ 1`.
    pub fn worst_decay_excess(&self) -> f64 {
        self.ln
            .iter()
            .zip(&self.bound)
            .skip(1)
            .map(|(l, b)| l - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Regime flags for [`LipschitzMonitor`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzGate {
    pub delta_admitted: bool,
    pub below_h0: bool,
}

impl LipschitzGate {
    pub fn new(inputs: &Delta0Inputs, delta: f64, h: f64, assumption5_margin: f64) -> Self {
        match delta0(inputs) {
            Ok(d0) => LipschitzGate {
                delta_admitted: d0.admits(delta),
                below_h0: h < decay_threshold_h0(assumption5_margin, d0, delta),
            },
            Err(_) => LipschitzGate {
                delta_admitted: false,
                below_h0: false,
            },
        }
    }

    pub fn always() -> Self {
        LipschitzGate {
            delta_admitted: true,
            below_h0: true,
        }
    }
}

/// Streaming one-sided Lipschitz check.
#[derive(Debug, Clone)]
pub struct LipschitzMonitor {
    trace: LipschitzTrace,
    tau: f64,
    h: f64,
}

impl LipschitzMonitor {
    pub fn new(initial: &SolutionField, l_initial: f64, gate: LipschitzGate) -> Self {
        let l0 = one_sided_lipschitz(initial);
        let mut m = LipschitzMonitor {
            trace: LipschitzTrace {
                l_initial,
                l0,
                ln: Vec::new(),
                bound: Vec::new(),
                asserted: gate.delta_admitted,
                decay_asserted: gate.delta_admitted && gate.below_h0,
                violations: Vec::new(),
                warnings: Vec::new(),
            },
            tau: initial.grid.tau(),
            h: initial.grid.h,
        };
        m.record(initial);
        m
    }

    fn record(&mut self, field: &SolutionField) {
        let n = field.n;
        let ln = one_sided_lipschitz(field);
        let bound = 1.0 / (1.0 / self.trace.l0 + 2.0 * n as f64 * self.tau);
        let t = &mut self.trace;
        t.ln.push(ln);
        t.bound.push(bound);
        // the floor r ≥ -Lh is the same as L^n ≤ L
        let floor = self.trace.l_initial;
        if ln * self.h > floor * self.h + INEQ_TOL {
            let v = LipschitzViolation {
                step: n,
                bound: LipschitzBound::Floor,
                value: -ln * self.h,
                limit: -floor * self.h,
            };
            if self.trace.asserted {
                self.trace.violations.push(v);
            } else {
                self.trace.warnings.push(v);
            }
        }
        if n >= 1 && ln > bound + INEQ_TOL {
            let v = LipschitzViolation {
                step: n,
                bound: LipschitzBound::Decay,
                value: ln,
                limit: bound,
            };
            if self.trace.decay_asserted {
                self.trace.violations.push(v);
            } else {
                self.trace.warnings.push(v);
            }
        }
    }

    pub fn finish(self) -> LipschitzTrace {
        self.trace
    }
}

impl StepObserver for LipschitzMonitor {
    fn observe(&mut self, _: &SolutionField, next: &SolutionField, _: BoundaryFlux) {
        self.record(next);
    }
}

/// Lipschitz trace over retained consecutive levels.
pub fn check_lipschitz(
    levels: &[SolutionField],
    inputs: &Delta0Inputs,
    gate: LipschitzGate,
) -> LipschitzTrace {
    let mut monitor = LipschitzMonitor::new(&levels[0], inputs.l, gate);
    for pair in levels.windows(2) {
        monitor.observe(&pair[0], &pair[1], BoundaryFlux::default());
    }
    monitor.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RangeViolation {
    pub step: u64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub lower: f64,
    pub upper: f64,
    pub observed_min: f64,
    pub observed_max: f64,
    pub range_violations: Vec<RangeViolation>,
    /// Levels whose range widened relative to the previous level.
    pub monotone_range_violations: Vec<RangeViolation>,
    /// `max_n |Δmass - τ(F_in - F_out)|`.
    pub conservation_residual: f64,
    pub tvd: TvdReport,
    pub lipschitz: LipschitzTrace,
}

impl PropertyReport {
    pub fn max_principle_ok(&self) -> bool {
        self.range_violations.is_empty() && self.monotone_range_violations.is_empty()
    }

    pub fn conservation_ok(&self) -> bool {
        self.conservation_residual <= INEQ_TOL
    }
}

/// Maximum principle, conservation, TVD and Lipschitz checks in one pass.
#[derive(Debug, Clone)]
pub struct PropertyMonitor {
    lower: f64,
    upper: f64,
    observed_min: f64,
    observed_max: f64,
    range_violations: Vec<RangeViolation>,
    monotone_range_violations: Vec<RangeViolation>,
    conservation_residual: f64,
    tvd: TvdMonitor,
    lipschitz: LipschitzMonitor,
}

impl PropertyMonitor {
    /// `lower`/`upper` are `inf ρ_0` and `sup ρ_0`.
    pub fn new(
        initial: &SolutionField,
        lower: f64,
        upper: f64,
        l_initial: f64,
        gate: LipschitzGate,
    ) -> Self {
        PropertyMonitor {
            lower,
            upper,
            observed_min: initial.min(),
            observed_max: initial.max(),
            range_violations: Vec::new(),
            monotone_range_violations: Vec::new(),
            conservation_residual: 0.0,
            tvd: TvdMonitor::new(initial),
            lipschitz: LipschitzMonitor::new(initial, l_initial, gate),
        }
    }

    pub fn finish(self) -> PropertyReport {
        PropertyReport {
            lower: self.lower,
            upper: self.upper,
            observed_min: self.observed_min,
            observed_max: self.observed_max,
            range_violations: self.range_violations,
            monotone_range_violations: self.monotone_range_violations,
            conservation_residual: self.conservation_residual,
            tvd: self.tvd.finish(),
            lipschitz: self.lipschitz.finish(),
        }
    }
}

impl StepObserver for PropertyMonitor {
    fn observe(&mut self, prev: &SolutionField, next: &SolutionField, boundary: BoundaryFlux) {
        let (lo, hi) = (next.min(), next.max());
        self.observed_min = self.observed_min.min(lo);
        self.observed_max = self.observed_max.max(hi);
        let violation = RangeViolation {
            step: next.n,
            min: lo,
            max: hi,
        };
        if lo < self.lower - INEQ_TOL || hi > self.upper + INEQ_TOL {
            self.range_violations.push(violation);
        }
        if lo < prev.min() - INEQ_TOL || hi > prev.max() + INEQ_TOL {
            self.monotone_range_violations.push(violation);
        }
        let tau = next.grid.tau();
        let residual =
            (next.mass() - prev.mass()) - tau * (boundary.inflow - boundary.outflow);
        self.conservation_residual = self.conservation_residual.max(residual.abs());
        self.tvd.observe(prev, next, boundary);
        self.lipschitz.observe(prev, next, boundary);
    }
}

/// `∫_window |a - b|` for two piecewise-constant functions given by face
/// positions (`faces.len() == vals.len() + 1`, increasing) and cell values.
/// Outside its faces each function extends its boundary value.
pub fn l1_distance_piecewise(
    faces_a: &[f64],
    vals_a: &[f64],
    faces_b: &[f64],
    vals_b: &[f64],
    window: (f64, f64),
) -> Result<f64> {
    for (faces, vals) in [(faces_a, vals_a), (faces_b, vals_b)] {
        if vals.is_empty() || faces.len() != vals.len() + 1 {
            return Err(Error::domain("piecewise function needs len(faces) = len(values) + 1 ≥ 2"));
        }
    }
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(Error::domain(format!("empty window ({lo}, {hi})")));
    }
    // value on the segment starting at `x`
    let value_at = |faces: &[f64], vals: &[f64], x: f64| -> f64 {
        let i = faces.partition_point(|&f| f <= x);
        vals[i.saturating_sub(1).min(vals.len() - 1)]
    };
    let mut cuts: Vec<f64> = faces_a
        .iter()
        .chain(faces_b)
        .copied()
        .filter(|&x| x > lo && x < hi)
        .collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    Ok(cuts
        .windows(2)
        .map(|p| {
            let mid = 0.5 * (p[0] + p[1]);
            let d = value_at(faces_a, vals_a, mid) - value_at(faces_b, vals_b, mid);
            d.abs() * (p[1] - p[0])
        })
        .sum())
}

fn faces_of(field: &SolutionField) -> Vec<f64> {
    let g = &field.grid;
    (0..=g.len())
        .map(|i| (g.index(i) as f64 - 0.5) * g.h)
        .collect()
}

/// Spatial L¹ distance over `window` between a coarse field and a finer
/// reference at the same time. The coarse mesh must be an integer multiple
/// of the fine one.
pub fn l1_error(coarse: &SolutionField, fine: &SolutionField, window: (f64, f64)) -> Result<f64> {
    let ratio = coarse.grid.h / fine.grid.h;
    if ratio < 1.0 - NEST_TOL || (ratio - ratio.round()).abs() > NEST_TOL * ratio {
        return Err(Error::domain(format!(
            "coarse spacing {} is not an integer multiple of fine spacing {}",
            coarse.grid.h, fine.grid.h
        )));
    }
    let (tc, tf) = (coarse.time(), fine.time());
    if (tc - tf).abs() > NEST_TOL * tc.abs().max(1.0) {
        return Err(Error::domain(format!("fields at different times {tc} and {tf}")));
    }
    l1_distance_piecewise(
        &faces_of(coarse),
        &coarse.values,
        &faces_of(fine),
        &fine.values,
        window,
    )
}

/// Least-squares fit of `log(error) = slope·log(h) + intercept`.
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<(f64, f64)> {
    if pairs.len() < 2 {
        return Err(Error::domain("fit_rate needs at least two (h, error) pairs"));
    }
    if let Some(p) = pairs.iter().find(|(h, e)| !(*h > 0.0 && *e > 0.0)) {
        return Err(Error::domain(format!("fit_rate needs positive entries, got {p:?}")));
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("fit_rate needs at least two distinct h"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{run_observed, Grid, InitialData, RunConfig};

    fn field(h: f64, j_min: i64, values: Vec<f64>) -> SolutionField {
        let n = values.len() as i64;
        let g = Grid::new(h, 0.25, j_min, j_min + n - 1, (0.0, 1.0)).unwrap();
        SolutionField::new(g, 0, values).unwrap()
    }

    #[test]
    fn delta0_examples() {
        let bell_l = InitialData::BellShape.one_sided_lipschitz(1e-5, 0.0, 1.0);
        // max of -ρ0' is 0.8·10·e^{-1/2}·... at x = 0.5 + 1/√200
        let analytic = 0.4 * 200.0 * (1.0 / 200f64).sqrt() * (-0.5f64).exp();
        assert!((bell_l - analytic).abs() < 1e-4, "{bell_l} vs {analytic}");
        let d = delta0(&Delta0Inputs { c: 2.0, rho_min: 0.4, l: bell_l, w0: 2.0 }).unwrap();
        assert!((d.value() - 0.2 / bell_l).abs() < 1e-15);
        let d = delta0(&Delta0Inputs { c: 2.0, rho_min: 1.0, l: 1.0, w0: 2.0 }).unwrap();
        assert_eq!(d, Delta0::Bounded(0.5));
        let riemann_l = InitialData::riemann(0.1, 0.6).one_sided_lipschitz(1e-3, 0.0, 1.0);
        let d = delta0(&Delta0Inputs { c: 2.0, rho_min: 0.1, l: riemann_l, w0: 2.0 }).unwrap();
        assert_eq!(d, Delta0::Unbounded);
        for bad in [
            Delta0Inputs { c: 0.0, rho_min: 1.0, l: 1.0, w0: 2.0 },
            Delta0Inputs { c: 1.0, rho_min: 0.0, l: 1.0, w0: 2.0 },
            Delta0Inputs { c: 1.0, rho_min: 1.0, l: -1.0, w0: 2.0 },
        ] {
            assert!(matches!(delta0(&bad), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn total_variation_examples() {
        assert_eq!(total_variation(&field(0.1, 0, vec![0.3; 8])), 0.0);
        let riemann = InitialData::riemann(0.1, 0.6);
        let cfg = RunConfig::new(0.005, 0.001, 0.0, riemann.clone());
        let f = riemann.discretize(&cfg.grid().unwrap());
        assert!((total_variation(&f) - 0.5).abs() < 1e-14);
        let cfg = RunConfig::new(0.005, 0.001, 0.0, InitialData::BellShape);
        let f = InitialData::BellShape.discretize(&cfg.grid().unwrap());
        // dense-sampling oracle for TV of the bell profile
        let dense: f64 = (0..200_000)
            .map(|i| {
                let x = -1.0 + 3.0 * i as f64 / 200_000.0;
                let y = x + 3.0 / 200_000.0;
                (InitialData::BellShape.value(y) - InitialData::BellShape.value(x)).abs()
            })
            .sum();
        assert!((total_variation(&f) - 0.8).abs() < 1e-3);
        assert!((dense - 0.8).abs() < 1e-3);
    }

    #[test]
    fn tvd_detects_corruption() {
        let cfg = RunConfig::new(0.005, 0.001, 0.05, InitialData::BellShape);
        let grid = cfg.grid().unwrap();
        let mut sim = crate::solver::Simulation::from_config(&cfg).unwrap();
        let mut levels = vec![sim.field().clone()];
        for _ in 0..10 {
            sim.step().unwrap();
            levels.push(sim.field().clone());
        }
        assert!(check_tvd(&levels).passed());
        let mid = grid.len() / 3;
        levels[6].values[mid] += 0.05;
        let report = check_tvd(&levels);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].step, 5);
    }

    #[test]
    fn riemann_run_properties() {
        let cfg = RunConfig::new(0.005, 0.002, 0.5, InitialData::riemann(0.1, 0.6));
        let grid = cfg.grid().unwrap();
        let init = cfg.initial.discretize(&grid);
        let (inputs, d0) = cfg.delta0().unwrap();
        assert_eq!(inputs.l, 0.0);
        assert_eq!(d0.unwrap(), Delta0::Unbounded);
        let gate = LipschitzGate::new(&inputs, cfg.delta, cfg.h, 0.125);
        let mut mon = PropertyMonitor::new(&init, 0.1, 0.6, inputs.l, gate);
        run_observed(&cfg, &mut mon).unwrap();
        let report = mon.finish();
        assert!(report.max_principle_ok());
        assert!(report.conservation_ok(), "{}", report.conservation_residual);
        assert!(report.tvd.passed());
        assert!(report.lipschitz.passed());
        assert!(report.lipschitz.ln.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn constant_data_has_zero_lipschitz() {
        let f = field(0.01, -5, vec![0.7; 20]);
        let trace = check_lipschitz(
            &[f.clone(), f],
            &Delta0Inputs { c: 2.0, rho_min: 0.7, l: 0.0, w0: 2.0 },
            LipschitzGate::always(),
        );
        assert_eq!(trace.ln, vec![0.0, 0.0]);
        assert!(trace.passed());
    }

    #[test]
    fn l1_examples() {
        let a = field(0.25, 0, vec![0.2, 0.4, 0.6, 0.3]);
        assert_eq!(l1_error(&a, &a, (0.0, 1.0)).unwrap(), 0.0);
        let c = field(0.01, -10, vec![0.4; 120]);
        let f = field(0.005, -20, vec![0.5; 240]);
        assert!((l1_error(&c, &f, (0.0, 1.0)).unwrap() - 0.1).abs() < 1e-14);
        let e = l1_distance_piecewise(
            &[0.0, 0.5, 1.0],
            &[0.2, 0.6],
            &[0.0, 0.25, 0.5, 0.75, 1.0],
            &[0.2, 0.2, 0.4, 0.6],
            (0.0, 1.0),
        )
        .unwrap();
        assert!((e - 0.05).abs() < 1e-15);
        let odd = field(0.003, 0, vec![0.4; 10]);
        assert!(matches!(l1_error(&c, &odd, (0.0, 0.01)), Err(Error::Domain(_))));
    }

    #[test]
    fn l1_between_cell_centered_levels() {
        // brute-force oracle: midpoint sampling on a much finer lattice
        let coarse = field(0.01, 0, (0..100).map(|i| ((i * 37) % 11) as f64 / 10.0).collect());
        let fine = field(0.0025, 0, (0..400).map(|i| ((i * 13) % 7) as f64 / 6.0).collect());
        let exact = l1_error(&coarse, &fine, (0.1, 0.9)).unwrap();
        let samples = 800_000;
        let dx = 0.8 / samples as f64;
        let brute: f64 = (0..samples)
            .map(|i| {
                let x = 0.1 + (i as f64 + 0.5) * dx;
                let a = coarse.at((x / 0.01).round() as i64);
                let b = fine.at((x / 0.0025).round() as i64);
                (a - b).abs() * dx
            })
            .sum();
        assert!((exact - brute).abs() < 1e-5, "{exact} vs {brute}");
    }

    #[test]
    fn fit_rate_examples() {
        let (s, _) = fit_rate(&[(0.01, 0.01), (0.005, 0.005)]).unwrap();
        assert!((s - 1.0).abs() < 1e-14);
        let (s, _) = fit_rate(&[(0.01, 0.3), (0.005, 0.3)]).unwrap();
        assert!(s.abs() < 1e-14);
        assert!(fit_rate(&[(0.01, 0.3)]).is_err());
        assert!(fit_rate(&[(0.01, 0.3), (0.005, 0.0)]).is_err());
        assert!(fit_rate(&[(-0.01, 0.3), (0.005, 0.1)]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn fit_rate_scale_invariant(
                errs in proptest::collection::vec(1e-4f64..1.0, 4),
            ) {
                let table: Vec<(f64, f64)> =
                    errs.iter().enumerate().map(|(l, e)| (0.01 / 2f64.powi(l as i32), *e)).collect();
                let scaled: Vec<(f64, f64)> = table.iter().map(|(h, e)| (*h, 7.0 * e)).collect();
                let (s1, i1) = fit_rate(&table).unwrap();
                let (s2, i2) = fit_rate(&scaled).unwrap();
                prop_assert!((s1 - s2).abs() < 1e-12);
                prop_assert!((i2 - i1 - 7f64.ln()).abs() < 1e-12);
            }

            #[test]
            fn l1_symmetric_and_reflexive(
                a in proptest::collection::vec(0.0f64..=1.0, 10),
                b in proptest::collection::vec(0.0f64..=1.0, 30),
            ) {
                let fa = field(0.03, 0, a);
                let fb = field(0.01, 0, b);
                let w = (0.0, 0.25);
                let ab = l1_error(&fa, &fb, w).unwrap();
                let ba = l1_distance_piecewise(&faces_of(&fb), &fb.values, &faces_of(&fa), &fa.values, w).unwrap();
                prop_assert!((ab - ba).abs() < 1e-15);
                prop_assert_eq!(l1_error(&fa, &fa, w).unwrap(), 0.0);
            }

            #[test]
            fn tv_nonnegative_and_shift_invariant(vals in proptest::collection::vec(0.0f64..=1.0, 2..50), c in -1.0f64..1.0) {
                let tv = total_variation_of(&vals);
                prop_assert!(tv >= 0.0);
                let shifted: Vec<f64> = vals.iter().map(|v| v + c).collect();
                prop_assert!((total_variation_of(&shifted) - tv).abs() < 1e-12);
            }
        }
    }
}
