//! Spin-selective recombination of radical-ion pairs with a single (singlet)
//! reaction channel.
//!
//! * [`spin`]: Hilbert spaces, spin operators, singlet/triplet projectors and density matrices.
//! * [`master`]: the trace-decaying equation, its normalized flow and the
//!   stay-or-project mixture equation, with RK4 integration and closed forms.
//! * [`trajectory`]: the three-outcome quantum-jump ensemble.
//! * [`analysis`]: observables, trace distances and the early-time check.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod master;
pub mod spin;
pub mod trajectory;

pub use error::{Error, Result};
pub use master::{Model, ModelSpec, Solution, TimeGrid};
pub use spin::{DensityMatrix, OperatorMatrix, Preset, Projectors, SpinSystem};
pub use trajectory::{EnsembleEstimate, Execution, TrajectoryConfig};
