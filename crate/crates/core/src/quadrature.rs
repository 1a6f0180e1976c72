//! Discrete weights `{w_k}` for the nonlocal density `q_j = Σ_k w_k ρ_{j+k}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// Slack used when deciding whether `δ/h` is an integer.
const RATIO_TOL: f64 = 1e-9;

const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WeightRule {
    #[serde(rename = "left")]
    LeftEndpoint,
    #[serde(rename = "normalized-left")]
    NormalizedLeftEndpoint,
    #[serde(rename = "exact")]
    ExactQuadrature,
}

impl WeightRule {
    pub const ALL: [WeightRule; 3] = [
        WeightRule::LeftEndpoint,
        WeightRule::NormalizedLeftEndpoint,
        WeightRule::ExactQuadrature,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WeightRule::LeftEndpoint => "left",
            WeightRule::NormalizedLeftEndpoint => "normalized-left",
            WeightRule::ExactQuadrature => "exact",
        }
    }
}

impl fmt::Display for WeightRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(WeightRule::LeftEndpoint),
            "normalized-left" => Ok(WeightRule::NormalizedLeftEndpoint),
            "exact" => Ok(WeightRule::ExactQuadrature),
            other => Err(Error::config(format!(
                "unknown weight rule `{other}` (expected left, normalized-left or exact)"
            ))),
        }
    }
}

/// Number of stencil cells `m = ⌈δ/h⌉`.
///
/// A ratio within `1e-9` (relative) of an integer is taken as that integer,
/// so `δ = 0.005, h = 0.001` gives `m = 5` despite `0.005/0.001 > 5` in
/// binary floating point.
pub fn stencil_width(delta: f64, h: f64) -> Result<usize> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::domain(format!("horizon must be positive, got {delta}")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::domain(format!("cell width must be positive, got {h}")));
    }
    let ratio = delta / h;
    let nearest = ratio.round();
    let m = if (ratio - nearest).abs() <= RATIO_TOL * nearest.max(1.0) {
        nearest
    } else {
        ratio.ceil()
    };
    Ok((m as usize).max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureWeights {
    pub rule: WeightRule,
    pub weights: Vec<f64>,
    pub weight_sum: f64,
}

impl QuadratureWeights {
    /// Single-cell stencil `w_0 = 1`, which turns the nonlocal scheme into
    /// its local counterpart.
    pub fn local() -> Self {
        QuadratureWeights {
            rule: WeightRule::ExactQuadrature,
            weights: vec![1.0],
            weight_sum: 1.0,
        }
    }

    pub fn m(&self) -> usize {
        self.weights.len()
    }

    /// `w_k`, with the convention `w_k = 0` for `k ≥ m` and `k < 0`.
    pub fn get(&self, k: isize) -> f64 {
        if k < 0 {
            0.0
        } else {
            self.weights.get(k as usize).copied().unwrap_or(0.0)
        }
    }

    pub fn is_normalized(&self) -> bool {
        (self.weight_sum - 1.0).abs() <= SUM_TOL
    }
}

pub fn build_weights(
    kernel: &Kernel,
    delta: f64,
    h: f64,
    rule: WeightRule,
) -> Result<QuadratureWeights> {
    let m = stencil_width(delta, h)?;
    let left_samples = || -> Vec<f64> {
        (0..m)
            .map(|k| {
                let s = (k as f64 * h) / delta;
                kernel.base(s) * (h / delta)
            })
            .collect()
    };
    let weights = match rule {
        WeightRule::LeftEndpoint => left_samples(),
        WeightRule::NormalizedLeftEndpoint => {
            if m == 1 {
                vec![1.0]
            } else {
                let raw = left_samples();
                let sum: f64 = raw.iter().sum();
                raw.into_iter().map(|w| w / sum).collect()
            }
        }
        WeightRule::ExactQuadrature => (0..m)
            .map(|k| {
                let lo = k as f64 * h;
                // the last cell is truncated at δ by definition of m
                let hi = if k + 1 == m { delta } else { (k + 1) as f64 * h };
                kernel.integral_scaled(delta, lo, hi)
            })
            .collect(),
    };
    let weight_sum = weights.iter().sum();
    Ok(QuadratureWeights {
        rule,
        weights,
        weight_sum,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assumption3Report {
    /// `w_δ(kh)h ≥ w_k ≥ w_δ((k+1)h)h` for every k (kernel extended by zero past δ).
    pub sandwich_ok: bool,
    /// `min_k (w_k - w_{k+1})·m²` over consecutive stored weights. For `m = 1`
    /// there is no such pair and the tail gap is used instead.
    pub gap_constant: f64,
    /// `w_{m-1}·m²`, the gap against the phantom entry `w_m = 0`.
    pub tail_gap_constant: f64,
    /// `|Σ w_k - 1| ≤ 1e-12`.
    pub normalized: bool,
    /// Gap constant guaranteed for this rule and kernel.
    pub c_theoretical: f64,
    /// `gap_constant > 0`: the strict gap condition holds.
    pub strict_gap_ok: bool,
}

impl Assumption3Report {
    pub fn satisfied(&self) -> bool {
        self.sandwich_ok && self.strict_gap_ok && self.normalized
    }
}

pub fn check_assumption3(
    weights: &QuadratureWeights,
    kernel: &Kernel,
    delta: f64,
    h: f64,
) -> Assumption3Report {
    let m = weights.m();
    let sample = |s: f64| -> f64 {
        if s > delta * (1.0 + 1e-12) {
            0.0
        } else {
            kernel.base((s / delta).min(1.0)) * (h / delta)
        }
    };
    let sandwich_ok = weights.weights.iter().enumerate().all(|(k, &w)| {
        let upper = sample(k as f64 * h);
        let lower = sample((k + 1) as f64 * h);
        let slack = 1e-12 * upper.abs().max(1.0);
        w <= upper + slack && w >= lower - slack
    });

    let m2 = (m * m) as f64;
    let tail_gap_constant = weights.weights[m - 1] * m2;
    let gap_constant = if m == 1 {
        tail_gap_constant
    } else {
        weights
            .weights
            .windows(2)
            .map(|p| (p[0] - p[1]) * m2)
            .fold(f64::INFINITY, f64::min)
    };
    let c_theoretical = match weights.rule {
        WeightRule::LeftEndpoint | WeightRule::ExactQuadrature => kernel.min_neg_slope,
        WeightRule::NormalizedLeftEndpoint => kernel.min_neg_slope / (1.0 + kernel.value_at_zero),
    };
    Assumption3Report {
        sandwich_ok,
        gap_constant,
        tail_gap_constant,
        normalized: weights.is_normalized(),
        c_theoretical,
        strict_gap_ok: gap_constant > 1e-12,
    }
}
