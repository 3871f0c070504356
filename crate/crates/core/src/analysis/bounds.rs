//! Closed-form convergence and stability bounds for the residual wrapper,
//! with their plain-SGD counterparts.

use crate::error::{Error, Result};

/// Constants shared by the bound evaluators.
///
/// `lrs` holds `γ_0 … γ_{T−1}`, so `T = lrs.len()`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundInputs {
    /// Smoothness constant `β`.
    pub beta: f64,
    /// Second-moment bound `σ²` on stochastic gradients.
    pub sigma2: f64,
    /// Lipschitz constant `L` of the loss.
    pub lipschitz: f64,
    pub lrs: Vec<f64>,
    /// Training set size `N`.
    pub n: usize,
    /// Scale factor `α` of the residual scheme.
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
    /// `R_S(x_0) − R_S(x_*)`.
    pub r0_gap: f64,
}

impl BoundInputs {
    /// Constant learning rate `lr` for `steps` steps; other fields default to 1
    /// (and `σ² = R0_gap = 0`).
    pub fn constant(lr: f64, steps: usize) -> Self {
        BoundInputs {
            beta: 1.0,
            sigma2: 0.0,
            lipschitz: 1.0,
            lrs: vec![lr; steps],
            n: 1,
            alpha: 1.0,
            c1: 1.0,
            c2: 1.0,
            r0_gap: 0.0,
        }
    }

    pub fn steps(&self) -> usize {
        self.lrs.len()
    }

    /// The common learning rate, if the schedule is constant and non-empty.
    fn constant_lr(&self) -> Result<f64> {
        let gamma = *self
            .lrs
            .first()
            .ok_or_else(|| Error::Precondition("step count T must be positive".into()))?;
        if self.lrs.iter().any(|&g| g != gamma) {
            return Err(Error::Precondition("bound requires a constant learning rate".into()));
        }
        if !(gamma > 0.0) {
            return Err(Error::Precondition(format!(
                "learning rate must be positive, got {gamma}"
            )));
        }
        Ok(gamma)
    }

    fn check_common(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Precondition(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.sigma2 >= 0.0) {
            return Err(Error::Precondition(format!(
                "sigma2 must be nonnegative, got {}",
                self.sigma2
            )));
        }
        Ok(())
    }

    fn check_alpha(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Precondition(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    fn check_stability(&self) -> Result<()> {
        self.check_alpha()?;
        if self.n == 0 {
            return Err(Error::Precondition("dataset size N must be positive".into()));
        }
        if !(self.lipschitz > 0.0) {
            return Err(Error::Precondition(format!(
                "L must be positive, got {}",
                self.lipschitz
            )));
        }
        if let Some(t) = self.lrs.iter().position(|&g| !(g > 0.0) || !g.is_finite()) {
            return Err(Error::Precondition(format!(
                "learning rate at step {t} must be positive"
            )));
        }
        Ok(())
    }

    fn convergence_terms(&self) -> Result<(f64, f64)> {
        self.check_common()?;
        let gamma = self.constant_lr()?;
        if !(self.c1 > 0.0) {
            return Err(Error::Precondition(format!("c1 must be positive, got {}", self.c1)));
        }
        let t = self.steps() as f64;
        let k = 1.0 + self.c1;
        Ok((k * self.r0_gap / (gamma * t), k * self.beta * gamma * self.sigma2 / 2.0))
    }
}

/// Plain SGD: `R0_gap/(γT) + βγσ²/2`.
pub fn sgd_convergence_bound(b: &BoundInputs) -> Result<f64> {
    b.check_common()?;
    let gamma = b.constant_lr()?;
    let t = b.steps() as f64;
    Ok(b.r0_gap / (gamma * t) + b.beta * gamma * b.sigma2 / 2.0)
}

/// Bound on `min_t E‖∇R_S(x_t)‖²` for the residual wrapper given the mean
/// squared residual norm along the run:
/// `(1+c₁)R0_gap/(γT) + (1+c₁)βγσ²/2 + (1+1/c₁)β²·residual_sq_mean`.
pub fn bound_theorem4(b: &BoundInputs, residual_sq_mean: f64) -> Result<f64> {
    let (a, s) = b.convergence_terms()?;
    if !(residual_sq_mean >= 0.0) {
        return Err(Error::Precondition(format!(
            "residual_sq_mean must be nonnegative, got {residual_sq_mean}"
        )));
    }
    Ok(a + s + (1.0 + 1.0 / b.c1) * b.beta * b.beta * residual_sq_mean)
}

/// The scale-scheme specialisation, with the residual term replaced by
/// `(1−α)²(1+1/c₂)(1+1/c₁)/(1−(1−α)²(1+c₂)) · β²γ²σ²`.
///
/// `α = 1` is accepted and makes the residual term vanish.
pub fn bound_corollary_scale(b: &BoundInputs) -> Result<f64> {
    let (a, s) = b.convergence_terms()?;
    b.check_alpha()?;
    if !(b.c2 > 0.0) {
        return Err(Error::Precondition(format!("c2 must be positive, got {}", b.c2)));
    }
    let q = (1.0 - b.alpha) * (1.0 - b.alpha);
    let contraction = q * (1.0 + b.c2);
    if !(contraction < 1.0) {
        return Err(Error::Precondition(format!(
            "(1-alpha)^2 (1+c2) = {contraction} must be below 1"
        )));
    }
    let gamma = b.lrs[0];
    let coeff = q * (1.0 + 1.0 / b.c2) * (1.0 + 1.0 / b.c1) / (1.0 - contraction);
    Ok(a + s + coeff * b.beta * b.beta * gamma * gamma * b.sigma2)
}

/// The `c₂` minimising the scale-scheme residual coefficient,
/// `α/(1−α)`, for which `(1−α)²(1+c₂) = 1−α`. Returns 1 at `α = 1`.
pub fn best_c2(alpha: f64) -> f64 {
    if alpha >= 1.0 {
        1.0
    } else {
        alpha / (1.0 - alpha)
    }
}

/// `(2L²/N) Σ_t γ_t`.
pub fn sgd_stability_convex(b: &BoundInputs) -> Result<f64> {
    b.check_stability()?;
    let sum: f64 = b.lrs.iter().sum();
    Ok(2.0 * b.lipschitz * b.lipschitz / b.n as f64 * sum)
}

/// Uniform-stability bound for convex losses:
/// `(2L²/N) Σ_{t<T} (1 − (1−α)^{T−t}) γ_t`, requiring `γ_t ≤ 2/β`.
pub fn bound_stability_convex(b: &BoundInputs) -> Result<f64> {
    b.check_common()?;
    b.check_stability()?;
    let limit = 2.0 / b.beta;
    if let Some(t) = b.lrs.iter().position(|&g| g > limit) {
        return Err(Error::Precondition(format!(
            "learning rate {} at step {t} exceeds 2/beta = {limit}",
            b.lrs[t]
        )));
    }
    let steps = b.steps();
    let q = 1.0 - b.alpha;
    let mut sum = 0.0;
    for (t, &g) in b.lrs.iter().enumerate() {
        sum += (1.0 - q.powi((steps - t) as i32)) * g;
    }
    Ok(2.0 * b.lipschitz * b.lipschitz / b.n as f64 * sum)
}

fn nonconvex_summand(b: &BoundInputs, gamma: f64, ref_div: f64) -> f64 {
    let n = b.n as f64;
    let l = b.lipschitz;
    2.0 * gamma * l * l / n + (1.0 - 1.0 / n) * gamma * b.beta * l * ref_div
}

fn check_ref_divergence(b: &BoundInputs, ref_divergence: &[f64]) -> Result<()> {
    if ref_divergence.len() != b.steps() {
        return Err(Error::DimensionMismatch {
            expected: b.steps(),
            found: ref_divergence.len(),
        });
    }
    if let Some(t) = ref_divergence.iter().position(|&d| !(d >= 0.0)) {
        return Err(Error::Precondition(format!(
            "reference divergence at step {t} must be nonnegative"
        )));
    }
    Ok(())
}

/// `Σ_t [2γ_tL²/N + (1−1/N)γ_tβL·ref_divergence_t]`.
pub fn sgd_stability_nonconvex(b: &BoundInputs, ref_divergence: &[f64]) -> Result<f64> {
    b.check_common()?;
    b.check_stability()?;
    check_ref_divergence(b, ref_divergence)?;
    let mut sum = 0.0;
    for (&g, &d) in b.lrs.iter().zip(ref_divergence) {
        sum += nonconvex_summand(b, g, d);
    }
    Ok(sum)
}

/// Uniform-stability bound for nonconvex losses:
/// `Σ_t [1 − (1−α)^{T−t−1}]·[2γ_tL²/N + (1−1/N)γ_tβL·ref_divergence_t]`,
/// where `ref_divergence_t` estimates `E‖x_{t−1/2} − x'_{t−1/2}‖`.
pub fn bound_stability_nonconvex(b: &BoundInputs, ref_divergence: &[f64]) -> Result<f64> {
    b.check_common()?;
    b.check_stability()?;
    check_ref_divergence(b, ref_divergence)?;
    let steps = b.steps();
    let q = 1.0 - b.alpha;
    let mut sum = 0.0;
    for (t, (&g, &d)) in b.lrs.iter().zip(ref_divergence).enumerate() {
        sum += (1.0 - q.powi((steps - t - 1) as i32)) * nonconvex_summand(b, g, d);
    }
    Ok(sum)
}
