//! Single-process compression baselines: scaled SignSGD and error feedback.

use crate::error::Result;
use crate::schemes::SchemeSpec;
use crate::vecmath::ParamVector;

/// `x − R_sign(γ·g)`.
pub fn signsgd_step(x: &ParamVector, g: &ParamVector, lr: f64) -> Result<ParamVector> {
    let step = g.scale(lr)?;
    x.sub(&SchemeSpec::ScaledSign.split(&step)?.applied)
}

/// Accumulated compression error `e` and the compressor that produces it.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorFeedbackState {
    pub error: ParamVector,
    pub compressor: SchemeSpec,
}

/// One error-feedback update.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackStep {
    /// `p = s + e`.
    pub corrected: ParamVector,
    /// `c = C(p)`.
    pub compressed: ParamVector,
    /// `e' = p − c`.
    pub error: ParamVector,
    pub next: ParamVector,
}

impl ErrorFeedbackState {
    pub fn new(dim: usize, compressor: SchemeSpec) -> Self {
        ErrorFeedbackState {
            error: ParamVector::zeros(dim),
            compressor,
        }
    }

    /// Applies a proposed step `s` (e.g. `γ·g`) with error feedback.
    pub fn feed(&mut self, x: &ParamVector, step: &ParamVector) -> Result<FeedbackStep> {
        let corrected = step.add(&self.error)?;
        let split = self.compressor.split(&corrected)?;
        let next = x.sub(&split.applied)?;
        self.error = split.residual.clone();
        Ok(FeedbackStep {
            corrected,
            compressed: split.applied,
            error: split.residual,
            next,
        })
    }
}

/// `p = γg + e; c = C(p); x' = x − c; e' = p − c`.
pub fn ef_signsgd_step(
    ef: &ErrorFeedbackState,
    x: &ParamVector,
    g: &ParamVector,
    lr: f64,
) -> Result<(ParamVector, ErrorFeedbackState)> {
    let mut next_state = ef.clone();
    let out = next_state.feed(x, &g.scale(lr)?)?;
    Ok((out.next, next_state))
}
