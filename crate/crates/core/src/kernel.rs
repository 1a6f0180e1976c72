//! Nonlocal kernel profiles.
//!
//! A profile `w` is a probability density on `[0, 1]`; the horizon-`δ`
//! kernel is the rescaling `w_δ(s) = w(s/δ)/δ` supported on `[0, δ]`.
//! Every profile carries closed forms for its value, derivative and
//! antiderivative, so the quadrature weights and the constants entering the
//! horizon threshold are exact rather than sampled.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `1 - e^{-1}`, the normalizing constant of the truncated exponential.
fn exp_norm() -> f64 {
    -(-1.0f64).exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelProfile {
    /// `w(s) = 2(1 - s)`
    #[serde(rename = "linear")]
    LinearDecreasing,
    /// `w(s) = e^{-s} / (1 - e^{-1})`
    Exponential,
    /// `w(s) = 1`
    Constant,
}

impl KernelProfile {
    pub const ALL: [KernelProfile; 3] = [
        KernelProfile::LinearDecreasing,
        KernelProfile::Exponential,
        KernelProfile::Constant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelProfile::LinearDecreasing => "linear",
            KernelProfile::Exponential => "exponential",
            KernelProfile::Constant => "constant",
        }
    }
}

impl fmt::Display for KernelProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(KernelProfile::LinearDecreasing),
            "exponential" => Ok(KernelProfile::Exponential),
            "constant" => Ok(KernelProfile::Constant),
            other => Err(Error::config(format!(
                "unknown kernel `{other}` (expected linear, exponential or constant)"
            ))),
        }
    }
}

/// A kernel profile together with the two constants the a-priori estimates
/// need: `w(0)` and `min_{s∈[0,1]} -w'(s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub profile: KernelProfile,
    pub value_at_zero: f64,
    pub min_neg_slope: f64,
}

impl Kernel {
    pub fn new(profile: KernelProfile) -> Self {
        let (value_at_zero, min_neg_slope) = match profile {
            KernelProfile::LinearDecreasing => (2.0, 2.0),
            // -w'(s) = e^{-s}/(1-e^{-1}) is decreasing, so its minimum is at s = 1.
            KernelProfile::Exponential => (1.0 / exp_norm(), (-1.0f64).exp() / exp_norm()),
            KernelProfile::Constant => (1.0, 0.0),
        };
        Kernel {
            profile,
            value_at_zero,
            min_neg_slope,
        }
    }

    pub fn linear() -> Self {
        Self::new(KernelProfile::LinearDecreasing)
    }

    pub fn exponential() -> Self {
        Self::new(KernelProfile::Exponential)
    }

    pub fn constant() -> Self {
        Self::new(KernelProfile::Constant)
    }

    /// `(w(0), min -w')`.
    pub fn profile_constants(&self) -> (f64, f64) {
        (self.value_at_zero, self.min_neg_slope)
    }

    /// Whether the profile is strictly decreasing. The constant kernel is
    /// admitted by the solver but reported here as not satisfying it.
    pub fn is_strictly_decreasing(&self) -> bool {
        self.min_neg_slope > 0.0
    }

    /// Base profile `w(s)` for `s ∈ [0, 1]` (no range check).
    pub fn base(&self, s: f64) -> f64 {
        match self.profile {
            KernelProfile::LinearDecreasing => 2.0 * (1.0 - s),
            KernelProfile::Exponential => (-s).exp() / exp_norm(),
            KernelProfile::Constant => 1.0,
        }
    }

    /// Derivative `w'(s)` of the base profile.
    pub fn base_derivative(&self, s: f64) -> f64 {
        match self.profile {
            KernelProfile::LinearDecreasing => -2.0,
            KernelProfile::Exponential => -(-s).exp() / exp_norm(),
            KernelProfile::Constant => 0.0,
        }
    }

    /// Antiderivative `W(s) = ∫_0^s w`, with `W(1) = 1`.
    pub fn base_cumulative(&self, s: f64) -> f64 {
        match self.profile {
            KernelProfile::LinearDecreasing => s * (2.0 - s),
            KernelProfile::Exponential => -(-s).exp_m1() / exp_norm(),
            KernelProfile::Constant => s,
        }
    }

    /// `w_δ(s) = w(s/δ)/δ` on `[0, δ]`.
    pub fn eval_scaled(&self, delta: f64, s: f64) -> Result<f64> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::domain(format!("horizon must be positive, got {delta}")));
        }
        if !(0.0..=delta).contains(&s) {
            return Err(Error::domain(format!(
                "kernel argument {s} outside support [0, {delta}]"
            )));
        }
        Ok(self.base(s / delta) / delta)
    }

    /// `∫_a^b w_δ(s) ds` for `0 ≤ a ≤ b ≤ δ`, by the closed-form antiderivative.
    pub fn integral_scaled(&self, delta: f64, a: f64, b: f64) -> f64 {
        self.base_cumulative(b / delta) - self.base_cumulative(a / delta)
    }
}
