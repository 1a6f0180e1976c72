//! Finite-volume solver for the nonlocal LWR traffic model
//! `∂_t ρ + ∂_x(ρ v(q)) = 0`, `v(q) = 1 - q`, where `q` is a look-ahead
//! average of the density over a horizon `δ`.
//!
//! Layers, bottom up: [`kernel`] profiles, [`quadrature`] weights,
//! numerical [`flux`] functions, the [`solver`] stepper, runtime
//! [`diagnostics`], and the [`experiments`] / [`output`] drivers behind the
//! `nlwr` binary.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod flux;
pub mod kernel;
pub mod output;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
pub use flux::{FluxFunction, FluxKind};
pub use kernel::{Kernel, KernelProfile};
pub use quadrature::{build_weights, QuadratureWeights, WeightRule};
pub use solver::{run, InitialData, RunConfig, SolutionField, Trajectory};
