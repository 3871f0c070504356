//! Stability and bound reports built from a run config.

use super::config::RunConfig;
use super::run::{prepare, run, RunLog};
use crate::analysis::{
    best_c2, bound_corollary_scale, bound_stability_convex, bound_stability_nonconvex, bound_theorem4, twin_training,
    BoundInputs, BoundRow, StabilityTrace, TwinConfig,
};
use crate::error::{Error, Result};
use crate::optim::{BaseName, Method};
use crate::problems::{Dataset, Problem};
use crate::schemes::SchemeSpec;

/// `α` of the scale scheme, 1 for plain SGD, `None` for anything the
/// stability bounds do not cover.
fn stability_alpha(cfg: &RunConfig) -> Option<f64> {
    match (cfg.optimizer.method, cfg.optimizer.scheme) {
        (Method::Plain(BaseName::Sgd), _) => Some(1.0),
        (Method::Residual(BaseName::Sgd), Some(SchemeSpec::Scale { alpha })) => Some(alpha),
        _ => None,
    }
}

fn beta_for(cfg: &RunConfig, problem: &Problem, train: &Dataset) -> Result<f64> {
    cfg.beta
        .or_else(|| problem.smoothness_bound(train))
        .ok_or_else(|| Error::invalid("no closed-form smoothness bound for this problem; set beta="))
}

#[derive(Clone, Debug)]
pub struct StabilityReport {
    pub trace: StabilityTrace,
    /// `true` when the convex bound was used.
    pub convex: bool,
    /// Mean heldout loss divergence against the stability bound, when the
    /// method is covered by one.
    pub bounds: Option<Vec<BoundRow>>,
}

/// Twin training for the config's problem and optimizer.
///
/// Replacement samples come from the training data generator, or from the
/// heldout set for CSV data.
pub fn stability_report(cfg: &RunConfig) -> Result<StabilityReport> {
    let p = prepare(cfg)?;
    let heldout = p
        .heldout
        .clone()
        .ok_or_else(|| Error::invalid("stability needs a heldout set (heldout=...)"))?;
    let mut twin = TwinConfig::new(p.problem.clone(), cfg.optimizer.clone(), p.steps, cfg.pairs, cfg.seed);
    twin.batch = p.batch;
    twin.replace = cfg.replace;
    twin.init = cfg.init;
    twin.sampling = cfg.sampling;
    twin.milestone_unit = p.steps_per_epoch;
    twin.loss_every = cfg.loss_every;

    let generator = cfg.data.generator()?;
    let pool = heldout.clone();
    let trace = twin_training(&twin, &p.train, &heldout, move |_, rng| match &generator {
        Some(g) => g.sample(rng),
        None => pool.samples()[rng.index(pool.len())].clone(),
    })?;

    let convex = p.problem.is_convex();
    let bounds = match stability_alpha(cfg) {
        None => None,
        Some(alpha) => {
            let base = BoundInputs {
                beta: beta_for(cfg, &p.problem, &p.train)?,
                lipschitz: trace.lipschitz.max(f64::MIN_POSITIVE),
                n: p.train.len(),
                alpha,
                ..BoundInputs::constant(1.0, 0)
            };
            let mut rows = Vec::new();
            for &(t, mean, _) in &trace.loss_divergence {
                let t_us = t as usize;
                let inputs = BoundInputs {
                    lrs: trace.lrs[..t_us].to_vec(),
                    ..base.clone()
                };
                let bound = if convex {
                    bound_stability_convex(&inputs)?
                } else {
                    bound_stability_nonconvex(&inputs, &trace.ref_divergence[..t_us])?
                };
                rows.push(BoundRow {
                    t,
                    empirical: mean,
                    bound,
                });
            }
            Some(rows)
        }
    };
    Ok(StabilityReport { trace, convex, bounds })
}

#[derive(Clone, Debug)]
pub struct BoundsReport {
    pub log: RunLog,
    /// Running minimum of `‖∇R_S(x_t)‖²` against the convergence bound with
    /// the measured residual mean and `c₁ = 1`.
    pub convergence: Vec<BoundRow>,
    /// The same minimum against the scale-scheme closed form, with `c₂`
    /// chosen by [`best_c2`].
    pub scale_form: Option<Vec<BoundRow>>,
    pub beta: f64,
    pub r0_gap: f64,
}

/// Runs the config and evaluates the convergence bounds at every
/// evaluation step after the first.
///
/// `R_S(x_0) − R_S(x_*)` is exact for the quadratic problem and bounded by
/// `R_S(x_0)` otherwise, since all losses are nonnegative.
pub fn bounds_report(cfg: &RunConfig) -> Result<BoundsReport> {
    let p = prepare(cfg)?;
    let schedule = cfg.optimizer.schedule(p.steps_per_epoch)?;
    if !schedule.is_constant() {
        return Err(Error::invalid("convergence bounds need a constant learning rate"));
    }
    let gamma = schedule.base();
    let beta = beta_for(cfg, &p.problem, &p.train)?;
    let r0 = p.problem.empirical_risk(&p.x0, &p.train)?;
    let r_star = match p.problem.quadratic_minimizer(&p.train) {
        Some(x_star) => p.problem.empirical_risk(&x_star, &p.train)?,
        None => 0.0,
    };
    let r0_gap = (r0 - r_star).max(0.0);
    let log = run(cfg)?;
    let alpha = match cfg.optimizer.scheme {
        Some(SchemeSpec::Scale { alpha }) if matches!(cfg.optimizer.method, Method::Residual(_)) => Some(alpha),
        _ if matches!(cfg.optimizer.method, Method::Plain(_)) => Some(1.0),
        _ => None,
    };

    let mut convergence = Vec::new();
    let mut scale_form = alpha.map(|_| Vec::new());
    let mut min_grad = f64::INFINITY;
    let mut sigma2: f64 = 0.0;
    for (k, rec) in log.records.iter().enumerate() {
        sigma2 = sigma2.max(rec.grad_second_moment);
        if k > 0 {
            let inputs = BoundInputs {
                beta,
                sigma2,
                r0_gap,
                alpha: alpha.unwrap_or(1.0),
                c2: alpha.map_or(1.0, best_c2),
                ..BoundInputs::constant(gamma, rec.step as usize)
            };
            let b4 = bound_theorem4(&inputs, rec.residual_sq_mean.unwrap_or(0.0))?;
            convergence.push(BoundRow {
                t: rec.step,
                empirical: min_grad,
                bound: b4,
            });
            if let Some(rows) = scale_form.as_mut() {
                rows.push(BoundRow {
                    t: rec.step,
                    empirical: min_grad,
                    bound: bound_corollary_scale(&inputs)?,
                });
            }
        }
        min_grad = min_grad.min(rec.grad_norm_sq);
    }
    Ok(BoundsReport {
        log,
        convergence,
        scale_form,
        beta,
        r0_gap,
    })
}
