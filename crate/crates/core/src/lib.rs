//! Residual-wrapped stochastic optimizers.
//!
//! A base optimizer (SGD, SGD with momentum, ASGD, Adam, AdaGrad) produces a
//! reference trajectory. The residual wrapper keeps the iterate in the
//! proximity of that trajectory: every step it applies only part of the
//! proposed move (as chosen by a [`schemes::SchemeSpec`]) and carries the rest
//! as a residual, while gradients are always evaluated on the reference
//! trajectory itself.
//!
//! The crate also contains the desk-scale problems used to exercise the
//! optimizers, compression baselines (SignSGD, error feedback), evaluators
//! for the convergence and uniform-stability bounds of the scaling scheme,
//! and a deterministic experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod harness;
pub mod optim;
pub mod problems;
pub mod schemes;
pub mod vecmath;

pub use error::{Error, Result};
pub use vecmath::{ParamVector, RngStream};

/// Version string embedded in run logs.
pub const VERSION: &str = concat!("rsgd ", env!("CARGO_PKG_VERSION"));
