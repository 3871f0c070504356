//! Single training runs and their logs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::optim::{NonMonotoneTrigger, Optimizer};
use crate::problems::{Dataset, Problem, Sampler};
use crate::vecmath::{write_checkpoint, ParamVector, RngStream, RNG_ALGORITHM};
use crate::VERSION;

pub const STREAM_INIT: u64 = 1;
pub const STREAM_SAMPLER: u64 = 2;

pub const LOG_COLUMNS: [&str; 10] = [
    "step",
    "lr",
    "train_loss",
    "heldout_loss",
    "heldout_acc",
    "grad_norm_sq",
    "grad_second_moment",
    "residual_norm",
    "residual_sq_mean",
    "proximity_mean",
];

pub const LOG_FILE: &str = "log.csv";
pub const CHECKPOINT_FILE: &str = "final.ckpt";

/// Metrics at one evaluation step.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    pub step: u64,
    /// Learning rate of the next step.
    pub lr: f64,
    pub train_loss: f64,
    pub heldout_loss: Option<f64>,
    pub heldout_acc: Option<f64>,
    /// `‖∇R_S(x_t)‖²` over the full training set.
    pub grad_norm_sq: f64,
    /// `E_z‖∇f(·, z)‖²`, the larger of its values at `x_t` and at the
    /// gradient point.
    pub grad_second_moment: f64,
    pub residual_norm: Option<f64>,
    /// Mean of `‖r_s‖²` over steps `s < t`.
    pub residual_sq_mean: Option<f64>,
    /// Mean proximity over the steps since the previous evaluation.
    pub proximity_mean: Option<f64>,
}

impl EvalRecord {
    /// Values in [`LOG_COLUMNS`] order, after `step`.
    pub fn values(&self) -> [Option<f64>; 9] {
        [
            Some(self.lr),
            Some(self.train_loss),
            self.heldout_loss,
            self.heldout_acc,
            Some(self.grad_norm_sq),
            Some(self.grad_second_moment),
            self.residual_norm,
            self.residual_sq_mean,
            self.proximity_mean,
        ]
    }

    fn from_values(step: u64, v: [Option<f64>; 9]) -> Result<Self> {
        let req = |x: Option<f64>, name: &str| x.ok_or_else(|| Error::RunLog(format!("missing {name} at step {step}")));
        Ok(EvalRecord {
            step,
            lr: req(v[0], "lr")?,
            train_loss: req(v[1], "train_loss")?,
            heldout_loss: v[2],
            heldout_acc: v[3],
            grad_norm_sq: req(v[4], "grad_norm_sq")?,
            grad_second_moment: req(v[5], "grad_second_moment")?,
            residual_norm: v[6],
            residual_sq_mean: v[7],
            proximity_mean: v[8],
        })
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        let idx = LOG_COLUMNS[1..].iter().position(|c| *c == name)?;
        self.values()[idx]
    }
}

/// The result of [`run`]: header, per-evaluation records and a footer.
#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub run_id: String,
    pub version: String,
    pub seed: u64,
    pub rng: String,
    /// Config text exactly as given.
    pub config: String,
    pub records: Vec<EvalRecord>,
    /// Smallest `grad_norm_sq` over evaluation steps before the last step.
    pub min_grad_norm_sq: f64,
    /// Step at which ASGD averaging was switched on by the trigger.
    pub averaging_started: Option<u64>,
    pub checkpoint: String,
    /// Final parameters; persisted in the checkpoint, not in the log text.
    pub final_params: ParamVector,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::RunLog(format!("bad number {s:?}")))
}

impl RunLog {
    pub fn steps(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.step).collect()
    }

    pub fn last(&self) -> &EvalRecord {
        self.records.last().expect("a run log has at least one record")
    }

    /// Serialized form. Float fields use the shortest round-tripping decimal.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# version={}", self.version);
        let _ = writeln!(out, "# run_id={}", self.run_id);
        let _ = writeln!(out, "# seed={}", self.seed);
        let _ = writeln!(out, "# rng={}", self.rng);
        for line in self.config.lines() {
            let _ = writeln!(out, "#| {line}");
        }
        let _ = writeln!(out, "{}", LOG_COLUMNS.join(","));
        for r in &self.records {
            let mut row = r.step.to_string();
            for v in r.values() {
                row.push(',');
                row.push_str(&fmt_opt(v));
            }
            let _ = writeln!(out, "{row}");
        }
        let _ = writeln!(out, "# min_grad_norm_sq={}", self.min_grad_norm_sq);
        let _ = writeln!(
            out,
            "# averaging_started={}",
            self.averaging_started.map_or_else(String::new, |s| s.to_string())
        );
        let _ = writeln!(out, "# checkpoint={}", self.checkpoint);
        out
    }

    /// Inverse of [`RunLog::to_text`]; `final_params` is left empty.
    pub fn parse(text: &str) -> Result<Self> {
        let mut fields: Vec<(String, String)> = Vec::new();
        let mut config = String::new();
        let mut records = Vec::new();
        let mut header_seen = false;
        let mut last_step = None;
        for line in text.lines() {
            if let Some(c) = line.strip_prefix("#| ") {
                config.push_str(c);
                config.push('\n');
            } else if line == "#|" {
                config.push('\n');
            } else if let Some(kv) = line.strip_prefix("# ") {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::RunLog(format!("bad header line {line:?}")))?;
                fields.push((k.to_string(), v.to_string()));
            } else if line == LOG_COLUMNS.join(",") {
                header_seen = true;
            } else if !line.is_empty() {
                if !header_seen {
                    return Err(Error::RunLog("data row before column header".into()));
                }
                let cells: Vec<&str> = line.split(',').collect();
                if cells.len() != LOG_COLUMNS.len() {
                    return Err(Error::RunLog(format!(
                        "expected {} columns, got {}",
                        LOG_COLUMNS.len(),
                        cells.len()
                    )));
                }
                let step: u64 = cells[0]
                    .parse()
                    .map_err(|_| Error::RunLog(format!("bad step {:?}", cells[0])))?;
                if last_step.is_some_and(|s| s >= step) {
                    return Err(Error::RunLog(format!("steps not increasing at {step}")));
                }
                last_step = Some(step);
                let mut values = [None; 9];
                for (slot, cell) in values.iter_mut().zip(&cells[1..]) {
                    *slot = parse_opt(cell)?;
                }
                records.push(EvalRecord::from_values(step, values)?);
            }
        }
        let get = |k: &str| {
            fields
                .iter()
                .find(|(name, _)| name == k)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| Error::RunLog(format!("missing {k}")))
        };
        if records.is_empty() {
            return Err(Error::RunLog("no records".into()));
        }
        Ok(RunLog {
            run_id: get("run_id")?,
            version: get("version")?,
            seed: get("seed")?.parse().map_err(|_| Error::RunLog("bad seed".into()))?,
            rng: get("rng")?,
            config,
            records,
            min_grad_norm_sq: parse_opt(&get("min_grad_norm_sq")?)?.unwrap_or(f64::NAN),
            averaging_started: {
                let s = get("averaging_started")?;
                if s.is_empty() {
                    None
                } else {
                    Some(s.parse().map_err(|_| Error::RunLog("bad averaging_started".into()))?)
                }
            },
            checkpoint: get("checkpoint")?,
            final_params: ParamVector::zeros(0),
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        RunLog::parse(&fs::read_to_string(path)?)
    }
}

fn numerical(step: u64, what: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite { .. } => Error::Numerical { what, step },
        other => other,
    }
}

/// Training state shared by [`run`] and callers that need the raw pieces.
pub struct Prepared {
    pub problem: Problem,
    pub train: Dataset,
    pub heldout: Option<Dataset>,
    pub x0: ParamVector,
    pub steps: u64,
    pub batch: usize,
    pub steps_per_epoch: u64,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let (train, heldout) = cfg.datasets()?;
    let problem = cfg.build_problem(&train, heldout.as_ref())?;
    let x0 = problem.init_params(cfg.init, &mut RngStream::with_stream(cfg.seed, STREAM_INIT))?;
    Ok(Prepared {
        steps: cfg.total_steps(train.len()),
        batch: cfg.batch_size(train.len()),
        steps_per_epoch: cfg.steps_per_epoch(train.len()),
        problem,
        train,
        heldout,
        x0,
    })
}

fn evaluate(
    p: &Prepared,
    opt: &dyn Optimizer,
    step: u64,
    residual_sq_sum: f64,
    proximity: (f64, u64),
) -> Result<EvalRecord> {
    let problem = &p.problem;
    let eval = opt.eval_params();
    let train_loss = problem
        .empirical_risk(eval, &p.train)
        .map_err(numerical(step, "training loss"))?;
    let (heldout_loss, heldout_acc) = match &p.heldout {
        None => (None, None),
        Some(h) => (
            Some(
                problem
                    .empirical_risk(eval, h)
                    .map_err(numerical(step, "heldout loss"))?,
            ),
            problem.accuracy(eval, h)?,
        ),
    };
    let grad_norm_sq = problem
        .full_gradient(opt.params(), &p.train)
        .map_err(numerical(step, "gradient"))?
        .norm2_sq();
    let mut grad_second_moment = problem.gradient_second_moment(opt.params(), &p.train)?;
    if opt.grad_point() != opt.params() {
        grad_second_moment = grad_second_moment.max(problem.gradient_second_moment(opt.grad_point(), &p.train)?);
    }
    let residual = opt.residual();
    Ok(EvalRecord {
        step,
        lr: opt.lr(),
        train_loss,
        heldout_loss,
        heldout_acc,
        grad_norm_sq,
        grad_second_moment,
        residual_norm: residual.map(ParamVector::norm2),
        residual_sq_mean: match residual {
            Some(_) if step > 0 => Some(residual_sq_sum / step as f64),
            _ => None,
        },
        proximity_mean: (proximity.1 > 0).then(|| proximity.0 / proximity.1 as f64),
    })
}

/// Runs a configuration in memory. The result depends only on the config.
pub fn run(cfg: &RunConfig) -> Result<RunLog> {
    let p = prepare(cfg)?;
    let mut opt = cfg.optimizer.build(p.x0.clone(), p.steps_per_epoch)?;
    let schedule = cfg.optimizer.schedule(p.steps_per_epoch)?;
    let mut sampler = Sampler::new(
        p.train.len(),
        cfg.sampling,
        RngStream::with_stream(cfg.seed, STREAM_SAMPLER),
    )?;
    let mut trigger = cfg.optimizer.asgd_window.map(NonMonotoneTrigger::new);
    let mut averaging_started = None;

    let mut records = Vec::new();
    let mut residual_sq_sum = 0.0;
    let mut proximity = (0.0, 0u64);
    for t in 0..=p.steps {
        if t % cfg.eval_every == 0 || t == p.steps {
            let rec = evaluate(&p, opt.as_ref(), t, residual_sq_sum, proximity)?;
            proximity = (0.0, 0);
            if let Some(trig) = trigger.as_mut() {
                let metric = rec.heldout_loss.unwrap_or(rec.train_loss);
                if !trig.fired() && trig.observe(metric) {
                    opt.start_averaging();
                    averaging_started = Some(t);
                }
            }
            records.push(rec);
        }
        if t == p.steps {
            break;
        }
        if cfg.reset_residual_on_decay && t > 0 && schedule.is_boundary(t) {
            opt.reset_residual();
        }
        if let Some(r) = opt.residual() {
            residual_sq_sum += r.norm2_sq();
        }
        let batch = sampler.next_batch(p.batch);
        let g = p
            .problem
            .batch_grad(opt.grad_point(), &p.train, &batch)
            .map_err(numerical(t, "gradient"))?;
        opt.step(&g).map_err(numerical(t, "parameters"))?;
        if let Some(prox) = opt.last_proximity() {
            proximity.0 += prox;
            proximity.1 += 1;
        }
    }

    let before_end: Vec<f64> = records
        .iter()
        .filter(|r| r.step < p.steps || p.steps == 0)
        .map(|r| r.grad_norm_sq)
        .collect();
    Ok(RunLog {
        run_id: cfg.name.clone(),
        version: VERSION.to_string(),
        seed: cfg.seed,
        rng: RNG_ALGORITHM.to_string(),
        config: cfg.source.clone(),
        records,
        min_grad_norm_sq: before_end.into_iter().fold(f64::INFINITY, f64::min),
        averaging_started,
        checkpoint: CHECKPOINT_FILE.to_string(),
        final_params: opt.eval_params().clone(),
    })
}

/// Output root: `$RSGD_OUTPUT_ROOT`, or `./runs`.
pub fn output_root() -> PathBuf {
    std::env::var_os("RSGD_OUTPUT_ROOT").map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

/// Writes `log.csv` and `final.ckpt` under `root/<run_id>/`.
pub fn persist(log: &RunLog, root: &Path) -> Result<PathBuf> {
    let dir = root.join(&log.run_id);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join(LOG_FILE), log.to_text())?;
    let mut ckpt = Vec::new();
    write_checkpoint(&mut ckpt, &log.final_params, log.seed)?;
    fs::write(dir.join(&log.checkpoint), ckpt)?;
    Ok(dir)
}

/// [`run`] followed by [`persist`].
pub fn execute(cfg: &RunConfig, root: &Path) -> Result<(RunLog, PathBuf)> {
    let log = run(cfg)?;
    let dir = persist(&log, root)?;
    Ok((log, dir))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CFG: &str = "name=t\nproblem=logistic\ndata=blobs:2:20:3:1\nheldout=blobs:2:10:3:1\n\
                       opt=rsgd\nscheme=scale:0.5\nlr=0.1\nsteps=25\neval_every=10\nseed=3\n";

    #[test]
    fn log_round_trip() {
        let cfg = RunConfig::parse(CFG).unwrap();
        let log = run(&cfg).unwrap();
        assert_eq!(log.steps(), vec![0, 10, 20, 25]);
        let parsed = RunLog::parse(&log.to_text()).unwrap();
        assert_eq!(parsed.to_text(), log.to_text());
        assert_eq!(parsed.records, log.records);
        assert_eq!(RunConfig::parse(&parsed.config).unwrap(), cfg);
    }

    #[test]
    fn deterministic() {
        let cfg = RunConfig::parse(CFG).unwrap();
        assert_eq!(run(&cfg).unwrap().to_text(), run(&cfg).unwrap().to_text());
    }

    #[test]
    fn divergence_reports_step() {
        let cfg = RunConfig::parse("problem=quadratic\ndata=gauss:5:2:5\nlr=3\nsteps=2000\neval_every=1000\n").unwrap();
        let err = run(&cfg).unwrap_err();
        assert!(err.is_numerical(), "{err}");
    }

    #[test]
    fn residual_columns_only_for_residual_methods() {
        let cfg = RunConfig::parse("problem=quadratic\ndata=gauss:5:2:5\nsteps=5\n").unwrap();
        let log = run(&cfg).unwrap();
        assert!(log
            .records
            .iter()
            .all(|r| r.residual_norm.is_none() && r.proximity_mean.is_none()));
    }
}
