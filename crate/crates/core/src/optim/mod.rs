//! Base optimizers, the residual wrapper, and compression baselines, plus the
//! uniform [`Optimizer`] interface the harness drives.

mod base;
mod compress;
mod residual;
mod schedule;
mod spec;
mod trigger;

pub use base::{Advance, BaseKind, BaseOptimizer, ADAGRAD_EPS, ADAM_BETA1, ADAM_BETA2, ADAM_EPS, DEFAULT_MOMENTUM};
pub use compress::{ef_signsgd_step, signsgd_step, ErrorFeedbackState, FeedbackStep};
pub use residual::{ResidualOptimizer, ResidualStep};
pub use schedule::LrSchedule;
pub use spec::{BaseName, Method, OptimizerSpec};
pub use trigger::{asgd_switch, NonMonotoneTrigger};

use crate::error::Result;
use crate::vecmath::ParamVector;

/// `‖x − x_ref‖₁ / ‖x_ref‖₁`, `None` when `x_ref = 0`.
pub(crate) fn proximity_of(x: &ParamVector, x_ref: &ParamVector) -> Option<f64> {
    let denom = x_ref.norm1();
    if denom == 0.0 {
        return None;
    }
    let mut num = 0.0;
    for (a, b) in x.iter().zip(x_ref) {
        num += (a - b).abs();
    }
    Some(num / denom)
}

/// A stateful first-order method driven one gradient at a time.
pub trait Optimizer: Send {
    /// Where the next gradient must be evaluated.
    fn grad_point(&self) -> &ParamVector;

    /// The method's own iterate `x_t`.
    fn params(&self) -> &ParamVector;

    /// Parameters to evaluate: the Polyak average once ASGD averaging is on,
    /// otherwise [`Optimizer::params`].
    fn eval_params(&self) -> &ParamVector {
        self.params()
    }

    fn step(&mut self, g: &ParamVector) -> Result<()>;

    /// Learning rate of the next step.
    fn lr(&self) -> f64;

    fn steps_taken(&self) -> u64;

    fn residual(&self) -> Option<&ParamVector> {
        None
    }

    fn last_proximity(&self) -> Option<f64> {
        None
    }

    fn reset_residual(&mut self) {}

    fn start_averaging(&mut self) {}
}

/// A base optimizer run on its own iterate.
#[derive(Clone, Debug)]
pub struct PlainOptimizer {
    x: ParamVector,
    base: BaseOptimizer,
}

impl PlainOptimizer {
    pub fn new(x0: ParamVector, base: BaseOptimizer) -> Self {
        PlainOptimizer { x: x0, base }
    }

    pub fn base(&self) -> &BaseOptimizer {
        &self.base
    }
}

impl Optimizer for PlainOptimizer {
    fn grad_point(&self) -> &ParamVector {
        &self.x
    }

    fn params(&self) -> &ParamVector {
        &self.x
    }

    fn eval_params(&self) -> &ParamVector {
        self.base.average().unwrap_or(&self.x)
    }

    fn step(&mut self, g: &ParamVector) -> Result<()> {
        self.x = self.base.base_step(&self.x, g)?;
        Ok(())
    }

    fn lr(&self) -> f64 {
        self.base.current_lr()
    }

    fn steps_taken(&self) -> u64 {
        self.base.step_count()
    }

    fn start_averaging(&mut self) {
        self.base.start_averaging();
    }
}

impl Optimizer for ResidualOptimizer {
    fn grad_point(&self) -> &ParamVector {
        self.x_ref()
    }

    fn params(&self) -> &ParamVector {
        self.x()
    }

    /// With ASGD as the base, the average is taken over reference points.
    fn eval_params(&self) -> &ParamVector {
        self.base().average().unwrap_or(self.x())
    }

    fn step(&mut self, g: &ParamVector) -> Result<()> {
        self.apply_gradient(g).map(|_| ())
    }

    fn lr(&self) -> f64 {
        self.base().current_lr()
    }

    fn steps_taken(&self) -> u64 {
        self.base().step_count()
    }

    fn residual(&self) -> Option<&ParamVector> {
        Some(ResidualOptimizer::residual(self))
    }

    fn last_proximity(&self) -> Option<f64> {
        ResidualOptimizer::last_proximity(self)
    }

    fn reset_residual(&mut self) {
        ResidualOptimizer::reset_residual(self);
    }

    fn start_averaging(&mut self) {
        self.base_mut().start_averaging();
    }
}

/// Compresses the base step with the scaled sign before applying it.
#[derive(Clone, Debug)]
pub struct SignOptimizer {
    x: ParamVector,
    base: BaseOptimizer,
}

impl SignOptimizer {
    pub fn new(x0: ParamVector, base: BaseOptimizer) -> Self {
        SignOptimizer { x: x0, base }
    }
}

impl Optimizer for SignOptimizer {
    fn grad_point(&self) -> &ParamVector {
        &self.x
    }

    fn params(&self) -> &ParamVector {
        &self.x
    }

    fn step(&mut self, g: &ParamVector) -> Result<()> {
        let adv = self.base.advance(&self.x, g)?;
        let applied = crate::schemes::apply(&crate::schemes::SchemeSpec::ScaledSign, &adv.step)?;
        self.x = self.x.sub(&applied)?;
        Ok(())
    }

    fn lr(&self) -> f64 {
        self.base.current_lr()
    }

    fn steps_taken(&self) -> u64 {
        self.base.step_count()
    }
}

/// Error-feedback compression of the base step.
#[derive(Clone, Debug)]
pub struct FeedbackOptimizer {
    x: ParamVector,
    base: BaseOptimizer,
    state: ErrorFeedbackState,
}

impl FeedbackOptimizer {
    pub fn new(x0: ParamVector, base: BaseOptimizer, compressor: crate::schemes::SchemeSpec) -> Self {
        let d = x0.len();
        FeedbackOptimizer {
            x: x0,
            base,
            state: ErrorFeedbackState::new(d, compressor),
        }
    }

    pub fn error(&self) -> &ParamVector {
        &self.state.error
    }

    /// Like [`Optimizer::step`] but returns the full update record.
    pub fn feedback_step(&mut self, g: &ParamVector) -> Result<FeedbackStep> {
        let adv = self.base.advance(&self.x, g)?;
        let out = self.state.feed(&self.x, &adv.step)?;
        self.x = out.next.clone();
        Ok(out)
    }
}

impl Optimizer for FeedbackOptimizer {
    fn grad_point(&self) -> &ParamVector {
        &self.x
    }

    fn params(&self) -> &ParamVector {
        &self.x
    }

    fn step(&mut self, g: &ParamVector) -> Result<()> {
        self.feedback_step(g).map(|_| ())
    }

    fn lr(&self) -> f64 {
        self.base.current_lr()
    }

    fn steps_taken(&self) -> u64 {
        self.base.step_count()
    }

    /// The accumulated compression error plays the residual's role.
    fn residual(&self) -> Option<&ParamVector> {
        Some(&self.state.error)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proximity_examples() {
        let x = ParamVector::from_slice(&[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(proximity_of(&x, &x), Some(0.0));
        let scaled = x.scale(1.01).unwrap();
        assert!((proximity_of(&scaled, &x).unwrap() - 0.01).abs() < 1e-14);
        assert_eq!(proximity_of(&x, &ParamVector::zeros(3)), None);
    }
}
