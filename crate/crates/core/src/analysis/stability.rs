//! Twin training: run seed-matched optimizers on two datasets that differ in
//! one sample and measure how far apart they drift.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::optim::OptimizerSpec;
use crate::problems::{Dataset, Init, Problem, Sample, Sampler, Sampling};
use crate::vecmath::{ParamVector, RngStream};

const STREAM_INIT: u64 = 1;
const STREAM_SAMPLER: u64 = 2;
const STREAM_INDEX: u64 = 3;
const STREAM_REPLACEMENT: u64 = 4;

/// Which training sample each pair replaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReplaceMode {
    /// A uniformly random index per pair.
    Random,
    Fixed(usize),
    /// One pair per index; only for `N ≤ 16`.
    Sweep,
}

#[derive(Clone, Debug)]
pub struct TwinConfig {
    pub problem: Problem,
    pub optimizer: OptimizerSpec,
    pub steps: u64,
    pub batch: usize,
    pub pairs: usize,
    pub seed: u64,
    pub replace: ReplaceMode,
    pub init: Init,
    pub sampling: Sampling,
    /// Steps per unit of the optimizer's decay milestones.
    pub milestone_unit: u64,
    /// Heldout loss divergence is recorded every this many steps (and at `T`);
    /// 0 records it at `T` only.
    pub loss_every: u64,
}

impl TwinConfig {
    pub fn new(problem: Problem, optimizer: OptimizerSpec, steps: u64, pairs: usize, seed: u64) -> Self {
        TwinConfig {
            problem,
            optimizer,
            steps,
            batch: 1,
            pairs,
            seed,
            replace: ReplaceMode::Random,
            init: Init::Default,
            sampling: Sampling::WithReplacement,
            milestone_unit: 1,
            loss_every: 0,
        }
    }
}

/// Outcome of one seed pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PairTrace {
    pub replaced: usize,
    /// `‖x_t − x'_t‖₂` for `t = 0..=T`.
    pub divergence: Vec<f64>,
    /// `‖x_{t−1/2} − x'_{t−1/2}‖₂` at the gradient points, `t = 0..=T`.
    pub ref_divergence: Vec<f64>,
    /// `(t, max_z |f(x_t, z) − f(x'_t, z)|)` over heldout samples.
    pub loss_divergence: Vec<(u64, f64)>,
    /// Largest per-sample gradient norm seen by either run, including all
    /// training and heldout samples at the final points.
    pub lipschitz: f64,
}

/// Mean and standard error over seed pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityTrace {
    pub pairs: Vec<PairTrace>,
    /// Learning rates `γ_0 … γ_{T−1}` actually used.
    pub lrs: Vec<f64>,
    pub divergence: Vec<f64>,
    pub divergence_stderr: Vec<f64>,
    pub ref_divergence: Vec<f64>,
    pub loss_divergence: Vec<(u64, f64, f64)>,
    /// Max of the per-pair Lipschitz estimates.
    pub lipschitz: f64,
}

impl StabilityTrace {
    pub fn steps(&self) -> u64 {
        self.lrs.len() as u64
    }

    /// `E‖x_{t−1/2} − x'_{t−1/2}‖` for `t = 0..T−1`, as consumed by the
    /// nonconvex bound.
    pub fn ref_divergence_for_bound(&self) -> &[f64] {
        &self.ref_divergence[..self.lrs.len()]
    }

    /// Final heldout loss divergence of every pair.
    pub fn final_loss_divergences(&self) -> Vec<f64> {
        self.pairs
            .iter()
            .map(|p| p.loss_divergence.last().map_or(0.0, |&(_, v)| v))
            .collect()
    }

    pub fn final_divergence(&self) -> (f64, f64) {
        let t = self.divergence.len() - 1;
        (self.divergence[t], self.divergence_stderr[t])
    }
}

/// Sample mean and standard error of the mean (0 for a single value).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn max_loss_gap(problem: &Problem, x: &ParamVector, y: &ParamVector, data: &Dataset) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for z in data.samples() {
        worst = worst.max((problem.loss(x, z)? - problem.loss(y, z)?).abs());
    }
    Ok(worst)
}

fn max_grad_norm<'a>(problem: &Problem, x: &ParamVector, samples: impl IntoIterator<Item = &'a Sample>) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for z in samples {
        worst = worst.max(problem.grad(x, z)?.norm2());
    }
    Ok(worst)
}

/// Runs one seed-matched pair.
///
/// `replacement(i, rng)` yields the sample substituted at index `i`.
pub fn run_pair<F>(
    cfg: &TwinConfig,
    train: &Dataset,
    heldout: &Dataset,
    pair: usize,
    replacement: &F,
) -> Result<PairTrace>
where
    F: Fn(usize, &mut RngStream) -> Sample + Sync,
{
    let n = train.len();
    let pair_seed = cfg.seed.wrapping_add(pair as u64);
    let replaced = match cfg.replace {
        ReplaceMode::Fixed(i) => i,
        ReplaceMode::Sweep => pair % n,
        ReplaceMode::Random => RngStream::with_stream(pair_seed, STREAM_INDEX).index(n),
    };
    if replaced >= n {
        return Err(Error::invalid(format!(
            "replacement index {replaced} out of range for N = {n}"
        )));
    }
    let z_new = replacement(replaced, &mut RngStream::with_stream(pair_seed, STREAM_REPLACEMENT));
    let twin = train.with_replaced(replaced, z_new)?;

    let x0 = cfg
        .problem
        .init_params(cfg.init, &mut RngStream::with_stream(pair_seed, STREAM_INIT))?;
    let mut a = cfg.optimizer.build(x0.clone(), cfg.milestone_unit)?;
    let mut b = cfg.optimizer.build(x0, cfg.milestone_unit)?;
    let mut sampler = Sampler::new(n, cfg.sampling, RngStream::with_stream(pair_seed, STREAM_SAMPLER))?;

    let p = &cfg.problem;
    let steps = cfg.steps as usize;
    let mut divergence = Vec::with_capacity(steps + 1);
    let mut ref_divergence = Vec::with_capacity(steps + 1);
    let mut loss_divergence = Vec::new();
    let mut lipschitz: f64 = 0.0;

    for t in 0..=cfg.steps {
        divergence.push(a.params().sub(b.params())?.norm2());
        ref_divergence.push(a.grad_point().sub(b.grad_point())?.norm2());
        let record = t == cfg.steps || (cfg.loss_every > 0 && t % cfg.loss_every == 0);
        if record {
            loss_divergence.push((t, max_loss_gap(p, a.eval_params(), b.eval_params(), heldout)?));
        }
        if t == cfg.steps {
            break;
        }
        let batch = sampler.next_batch(cfg.batch);
        let ga = p.batch_grad(a.grad_point(), train, &batch)?;
        let gb = p.batch_grad(b.grad_point(), &twin, &batch)?;
        if batch.len() == 1 {
            lipschitz = lipschitz.max(ga.norm2()).max(gb.norm2());
        } else {
            lipschitz = lipschitz
                .max(max_grad_norm(
                    p,
                    a.grad_point(),
                    batch.iter().map(|&i| &train.samples()[i]),
                )?)
                .max(max_grad_norm(
                    p,
                    b.grad_point(),
                    batch.iter().map(|&i| &twin.samples()[i]),
                )?);
        }
        a.step(&ga)?;
        b.step(&gb)?;
    }
    for x in [a.eval_params(), b.eval_params()] {
        lipschitz = lipschitz
            .max(max_grad_norm(p, x, heldout.samples())?)
            .max(max_grad_norm(p, x, train.samples())?)
            .max(max_grad_norm(p, x, twin.samples())?);
    }

    Ok(PairTrace {
        replaced,
        divergence,
        ref_divergence,
        loss_divergence,
        lipschitz,
    })
}

/// Trains `cfg.pairs` seed-matched pairs in parallel and aggregates them in
/// pair order.
pub fn twin_training<F>(cfg: &TwinConfig, train: &Dataset, heldout: &Dataset, replacement: F) -> Result<StabilityTrace>
where
    F: Fn(usize, &mut RngStream) -> Sample + Sync,
{
    let n = train.len();
    if let ReplaceMode::Fixed(i) = cfg.replace {
        if i >= n {
            return Err(Error::invalid(format!(
                "replacement index {i} out of range for N = {n}"
            )));
        }
    }
    let pairs = match cfg.replace {
        ReplaceMode::Sweep if n > 16 => {
            return Err(Error::invalid(format!("sweep mode needs N <= 16, got {n}")));
        }
        ReplaceMode::Sweep => n,
        _ => cfg.pairs,
    };
    if pairs == 0 {
        return Err(Error::invalid("need at least one seed pair"));
    }
    let traces = (0..pairs)
        .into_par_iter()
        .map(|k| run_pair(cfg, train, heldout, k, &replacement))
        .collect::<Result<Vec<_>>>()?;

    let len = traces[0].divergence.len();
    let mut divergence = Vec::with_capacity(len);
    let mut divergence_stderr = Vec::with_capacity(len);
    let mut ref_divergence = Vec::with_capacity(len);
    let mut column = Vec::with_capacity(pairs);
    for t in 0..len {
        column.clear();
        column.extend(traces.iter().map(|p| p.divergence[t]));
        let (m, s) = mean_stderr(&column);
        divergence.push(m);
        divergence_stderr.push(s);
        column.clear();
        column.extend(traces.iter().map(|p| p.ref_divergence[t]));
        ref_divergence.push(mean_stderr(&column).0);
    }
    let mut loss_divergence = Vec::new();
    for (k, &(t, _)) in traces[0].loss_divergence.iter().enumerate() {
        column.clear();
        column.extend(traces.iter().map(|p| p.loss_divergence[k].1));
        let (m, s) = mean_stderr(&column);
        loss_divergence.push((t, m, s));
    }
    let lipschitz = traces.iter().map(|p| p.lipschitz).fold(0.0, f64::max);
    let lrs = cfg.optimizer.schedule(cfg.milestone_unit)?.rates(cfg.steps);

    Ok(StabilityTrace {
        pairs: traces,
        lrs,
        divergence,
        divergence_stderr,
        ref_divergence,
        loss_divergence,
        lipschitz,
    })
}
