//! The residual wrapper.
//!
//! Per step, with `x_ref = x_t − r_t` the current reference point:
//!
//! ```text
//! g          = ∇f(x_ref, z_t)
//! x_ref'     = x_ref − s_t                (base optimizer step s_t)
//! delta      = x_t − x_ref' = r_t + s_t
//! r̂          = R(delta)
//! x_{t+1}    = x_t − r̂
//! r_{t+1}    = delta − r̂
//! ```
//!
//! `x_ref` is stored and advanced by the base optimizer directly, never
//! recomputed from `x − r`. The stored reference sequence is therefore the
//! unwrapped base trajectory bit for bit, and `delta` is formed as `r_t + s_t`
//! so the residual recursion carries no cancellation error from `x_t`.

use super::base::{Advance, BaseOptimizer};
use crate::error::Result;
use crate::problems::{Dataset, Problem};
use crate::schemes::SchemeSpec;
use crate::vecmath::{check_dim, ParamVector};

/// Everything produced by one wrapped step.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualStep {
    /// `x_t − x_{t+1/2}`.
    pub delta: ParamVector,
    /// `r̂_t`.
    pub applied: ParamVector,
    /// `r_{t+1}`.
    pub residual: ParamVector,
    /// Base optimizer step `s_t = x_{t−1/2} − x_{t+1/2}`.
    pub base_step: ParamVector,
    /// `x_{t+1/2}`.
    pub next_ref: ParamVector,
    /// `x_{t+1}`.
    pub next: ParamVector,
    pub lr: f64,
    /// `‖x_{t+1} − x_{t+1/2}‖₁ / ‖x_{t+1/2}‖₁`, absent when the reference is zero.
    pub proximity: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ResidualOptimizer {
    x: ParamVector,
    x_ref: ParamVector,
    r: ParamVector,
    scheme: SchemeSpec,
    base: BaseOptimizer,
    last_proximity: Option<f64>,
}

impl ResidualOptimizer {
    pub fn new(x0: ParamVector, scheme: SchemeSpec, base: BaseOptimizer) -> Result<Self> {
        scheme.validate()?;
        let d = x0.len();
        Ok(ResidualOptimizer {
            x_ref: x0.clone(),
            x: x0,
            r: ParamVector::zeros(d),
            scheme,
            base,
            last_proximity: None,
        })
    }

    pub fn x(&self) -> &ParamVector {
        &self.x
    }

    pub fn x_ref(&self) -> &ParamVector {
        &self.x_ref
    }

    pub fn residual(&self) -> &ParamVector {
        &self.r
    }

    pub fn scheme(&self) -> &SchemeSpec {
        &self.scheme
    }

    pub fn base(&self) -> &BaseOptimizer {
        &self.base
    }

    pub fn base_mut(&mut self) -> &mut BaseOptimizer {
        &mut self.base
    }

    pub fn last_proximity(&self) -> Option<f64> {
        self.last_proximity
    }

    /// One step of the wrapped method given `g = ∇f(x_ref, z)`.
    pub fn apply_gradient(&mut self, g: &ParamVector) -> Result<ResidualStep> {
        check_dim(self.x.len(), g.len())?;
        let Advance { next, step, lr } = self.base.advance(&self.x_ref, g)?;
        let delta = self.r.add(&step)?;
        let split = self.scheme.split(&delta)?;
        let x_next = self.x.sub(&split.applied)?;
        let proximity = super::proximity_of(&x_next, &next);

        self.x = x_next;
        self.r = split.residual;
        self.x_ref = next;
        self.last_proximity = proximity;
        debug_assert!(
            self.drift() <= 1e-12 * (1.0 + self.x_ref.norm_inf()),
            "x − r drifted from x_ref"
        );

        Ok(ResidualStep {
            delta,
            applied: split.applied,
            residual: self.r.clone(),
            base_step: step,
            next_ref: self.x_ref.clone(),
            next: self.x.clone(),
            lr,
            proximity,
        })
    }

    /// Samples a gradient at the reference point and takes one step.
    pub fn wrapped_step(&mut self, problem: &Problem, data: &Dataset, batch: &[usize]) -> Result<ResidualStep> {
        let g = problem.batch_grad(&self.x_ref, data, batch)?;
        self.apply_gradient(&g)
    }

    /// `‖(x − r) − x_ref‖∞`.
    pub fn drift(&self) -> f64 {
        self.x
            .iter()
            .zip(&self.r)
            .zip(&self.x_ref)
            .fold(0.0, |m, ((x, r), xr)| f64::max(m, ((x - r) - xr).abs()))
    }

    /// Drops the residual: `r ← 0`, `x ← x_ref`.
    pub fn reset_residual(&mut self) {
        self.r = ParamVector::zeros(self.x.len());
        self.x = self.x_ref.clone();
    }
}
