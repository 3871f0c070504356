//! Flat `key=value` run configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::analysis::ReplaceMode;
use crate::error::{Error, Result};
use crate::optim::{BaseName, Method, OptimizerSpec};
use crate::problems::{
    load_csv, Activation, BlobGenerator, Dataset, GaussianGenerator, Init, Problem, Sample, Sampling,
};
use crate::vecmath::RngStream;

/// Problem family; feature width and class count come from the data.
#[derive(Clone, Debug, PartialEq)]
pub enum ProblemSpec {
    Quadratic,
    Logistic,
    Mlp { hidden: Vec<usize>, activation: Activation },
}

impl FromStr for ProblemSpec {
    type Err = Error;

    /// `quadratic`, `logistic`, or `mlp:<h1>[,<h2>…][:tanh|relu]`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        match parts.next() {
            Some("quadratic") if parts.next().is_none() => Ok(ProblemSpec::Quadratic),
            Some("logistic") if parts.next().is_none() => Ok(ProblemSpec::Logistic),
            Some("mlp") => {
                let widths = parts
                    .next()
                    .ok_or_else(|| Error::invalid("mlp needs hidden widths, e.g. mlp:32"))?;
                let hidden = widths
                    .split(',')
                    .map(|w| {
                        w.parse::<usize>()
                            .map_err(|_| Error::invalid(format!("bad hidden width {w:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let activation = match parts.next() {
                    None | Some("tanh") => Activation::Tanh,
                    Some("relu") => Activation::Relu,
                    Some(a) => return Err(Error::invalid(format!("unknown activation {a:?}"))),
                };
                if parts.next().is_some() {
                    return Err(Error::invalid(format!("malformed problem {s:?}")));
                }
                Ok(ProblemSpec::Mlp { hidden, activation })
            }
            _ => Err(Error::invalid(format!("unknown problem {s:?}"))),
        }
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemSpec::Quadratic => write!(f, "quadratic"),
            ProblemSpec::Logistic => write!(f, "logistic"),
            ProblemSpec::Mlp { hidden, activation } => {
                let widths: Vec<String> = hidden.iter().map(usize::to_string).collect();
                let act = match activation {
                    Activation::Tanh => "tanh",
                    Activation::Relu => "relu",
                };
                write!(f, "mlp:{}:{act}", widths.join(","))
            }
        }
    }
}

/// Where samples come from.
#[derive(Clone, Debug, PartialEq)]
pub enum DataSpec {
    /// `blobs:k:n:d:spread`, `n` samples in total split evenly over `k` classes.
    Blobs {
        classes: usize,
        n: usize,
        dim: usize,
        spread: f64,
    },
    /// `gauss:n:d:clip`, standard normal features clipped to norm `clip`.
    Gauss { n: usize, dim: usize, clip: f64 },
    /// `csv:path`, resolved against the config file's directory.
    Csv(PathBuf),
}

impl FromStr for DataSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(path) = s.strip_prefix("csv:") {
            return Ok(DataSpec::Csv(PathBuf::from(path)));
        }
        let parts: Vec<&str> = s.split(':').collect();
        let int = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::invalid(format!("bad integer {v:?} in {s:?}")))
        };
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad number {v:?} in {s:?}")))
        };
        match parts.as_slice() {
            ["blobs", k, n, d, spread] => {
                let (classes, n) = (int(k)?, int(n)?);
                if classes == 0 || n % classes != 0 {
                    return Err(Error::invalid(format!(
                        "blobs: n = {n} must be a multiple of k = {classes}"
                    )));
                }
                Ok(DataSpec::Blobs {
                    classes,
                    n,
                    dim: int(d)?,
                    spread: num(spread)?,
                })
            }
            ["gauss", n, d, clip] => Ok(DataSpec::Gauss {
                n: int(n)?,
                dim: int(d)?,
                clip: num(clip)?,
            }),
            _ => Err(Error::invalid(format!("unknown data source {s:?}"))),
        }
    }
}

/// A sample generator behind a [`DataSpec`].
#[derive(Clone, Debug)]
pub enum Generator {
    Blobs(BlobGenerator),
    Gauss(GaussianGenerator),
}

impl Generator {
    pub fn sample(&self, rng: &mut RngStream) -> Sample {
        match self {
            Generator::Blobs(g) => g.sample(rng),
            Generator::Gauss(g) => g.sample(rng),
        }
    }
}

impl DataSpec {
    pub fn generator(&self) -> Result<Option<Generator>> {
        Ok(match *self {
            DataSpec::Blobs {
                classes, dim, spread, ..
            } => Some(Generator::Blobs(BlobGenerator::new(classes, dim, spread)?)),
            DataSpec::Gauss { dim, clip, .. } => Some(Generator::Gauss(GaussianGenerator::new(dim, 1.0, clip)?)),
            DataSpec::Csv(_) => None,
        })
    }

    pub fn load(&self, seed: u64, base_dir: Option<&Path>) -> Result<Dataset> {
        match self {
            DataSpec::Blobs { classes, n, .. } => match self.generator()? {
                Some(Generator::Blobs(g)) => g.generate(n / classes, seed),
                _ => unreachable!(),
            },
            DataSpec::Gauss { n, .. } => match self.generator()? {
                Some(Generator::Gauss(g)) => g.generate(*n, seed),
                _ => unreachable!(),
            },
            DataSpec::Csv(path) => match base_dir {
                Some(dir) if path.is_relative() => load_csv(dir.join(path)),
                _ => load_csv(path),
            },
        }
    }
}

fn parse_init(s: &str) -> Result<Init> {
    let bad = || Error::invalid(format!("unknown init {s:?}"));
    Ok(match s.split_once(':') {
        None if s == "default" => Init::Default,
        None if s == "zeros" => Init::Zeros,
        Some(("const", v)) => Init::Constant(v.parse().map_err(|_| bad())?),
        Some(("normal", v)) => Init::Normal(v.parse().map_err(|_| bad())?),
        _ => return Err(bad()),
    })
}

fn parse_replace(s: &str) -> Result<ReplaceMode> {
    Ok(match s.split_once(':') {
        None if s == "random" => ReplaceMode::Random,
        None if s == "sweep" => ReplaceMode::Sweep,
        Some(("fixed", i)) => ReplaceMode::Fixed(i.parse().map_err(|_| Error::invalid(format!("bad index {i:?}")))?),
        _ => return Err(Error::invalid(format!("unknown replace mode {s:?}"))),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchSize {
    Size(usize),
    /// Every step uses the whole training set.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Budget {
    Steps(u64),
    Epochs(u64),
}

/// Everything needed to reproduce one run.
///
/// Decay milestones are counted in epochs of `ceil(N / batch)` steps.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// The text the config was parsed from, echoed into run logs.
    pub source: String,
    pub base_dir: Option<PathBuf>,
    pub name: String,
    pub problem: ProblemSpec,
    pub bias: bool,
    pub weight_decay: f64,
    pub optimizer: OptimizerSpec,
    pub data: DataSpec,
    pub heldout: Option<DataSpec>,
    pub batch: BatchSize,
    pub budget: Budget,
    pub seed: u64,
    pub data_seed: Option<u64>,
    pub eval_every: u64,
    pub init: Init,
    pub sampling: Sampling,
    pub reset_residual_on_decay: bool,
    /// Overrides the closed-form smoothness estimate in bound reports.
    pub beta: Option<f64>,
    pub pairs: usize,
    pub replace: ReplaceMode,
    pub loss_every: u64,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig {
            source: text.to_string(),
            base_dir: None,
            name: "run".to_string(),
            problem: ProblemSpec::Logistic,
            bias: true,
            weight_decay: 0.0,
            optimizer: OptimizerSpec::new(Method::Plain(BaseName::Sgd), 0.1),
            data: DataSpec::Blobs {
                classes: 2,
                n: 100,
                dim: 2,
                spread: 1.0,
            },
            heldout: None,
            batch: BatchSize::Size(1),
            budget: Budget::Steps(100),
            seed: 0,
            data_seed: None,
            eval_every: 10,
            init: Init::Default,
            sampling: Sampling::WithReplacement,
            reset_residual_on_decay: false,
            beta: None,
            pairs: 20,
            replace: ReplaceMode::Random,
            loss_every: 0,
        };
        let mut seen: Vec<String> = Vec::new();
        let mut budget_line = None;
        let mut data_line = None;
        let mut last_line = 1;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            last_line = line_no;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(line_no, format!("expected key=value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(Error::config(line_no, format!("duplicate key {key:?}")));
            }
            seen.push(key.to_string());
            if matches!(key, "steps" | "epochs") {
                if budget_line.is_some() {
                    return Err(Error::config(line_no, "set either steps or epochs, not both"));
                }
                budget_line = Some(line_no);
            }
            if key == "data" {
                data_line = Some(line_no);
            }
            cfg.set(key, value).map_err(|e| Error::config(line_no, e.to_string()))?;
        }
        if data_line.is_none() {
            return Err(Error::config(last_line, "missing required key \"data\""));
        }
        cfg.validate().map_err(|e| Error::config(last_line, e.to_string()))?;
        Ok(cfg)
    }

    /// Reads a config file; relative CSV paths resolve against its directory
    /// and the run name defaults to the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = RunConfig::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        if !cfg.has_key("name") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                cfg.set("name", stem)?;
            }
        }
        Ok(cfg)
    }

    /// Whether the source text sets `key`.
    pub fn has_key(&self, key: &str) -> bool {
        self.source.lines().any(|raw| {
            let line = raw.split('#').next().unwrap_or("");
            line.split_once('=').is_some_and(|(k, _)| k.trim() == key)
        })
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let int = |v: &str| {
            v.parse::<u64>()
                .map_err(|_| Error::invalid(format!("expected an integer, got {v:?}")))
        };
        let boolean = |v: &str| match v {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(Error::invalid(format!("expected true or false, got {v:?}"))),
        };
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::invalid(format!("expected a number, got {v:?}")))
        };
        match key {
            "name" => {
                if value.is_empty() || value.contains(['/', '\\']) || value.starts_with('.') {
                    return Err(Error::invalid(format!("unusable run name {value:?}")));
                }
                self.name = value.to_string();
            }
            "problem" => self.problem = value.parse()?,
            "bias" => self.bias = boolean(value)?,
            "weight_decay" => self.weight_decay = num(value)?,
            "data" => self.data = value.parse()?,
            "heldout" => self.heldout = if value == "none" { None } else { Some(value.parse()?) },
            "batch" => {
                self.batch = if value == "full" {
                    BatchSize::Full
                } else {
                    BatchSize::Size(int(value)? as usize)
                }
            }
            "steps" => self.budget = Budget::Steps(int(value)?),
            "epochs" => self.budget = Budget::Epochs(int(value)?),
            "seed" => self.seed = int(value)?,
            "data_seed" => self.data_seed = Some(int(value)?),
            "eval_every" => self.eval_every = int(value)?,
            "init" => self.init = parse_init(value)?,
            "sampling" => self.sampling = value.parse()?,
            "reset_residual_on_decay" => self.reset_residual_on_decay = boolean(value)?,
            "beta" => self.beta = Some(num(value)?),
            "pairs" => self.pairs = int(value)? as usize,
            "replace" => self.replace = parse_replace(value)?,
            "loss_every" => self.loss_every = int(value)?,
            _ => {
                if !self.optimizer.set(key, value)? {
                    return Err(Error::invalid(format!("unknown key {key:?}")));
                }
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.batch == BatchSize::Size(0) {
            return Err(Error::invalid("batch must be positive"));
        }
        if self.eval_every == 0 {
            return Err(Error::invalid("eval_every must be positive"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::invalid("weight_decay must be nonnegative"));
        }
        if let Some(b) = self.beta {
            if !(b > 0.0) {
                return Err(Error::invalid("beta must be positive"));
            }
        }
        Ok(())
    }

    pub fn data_seed(&self) -> u64 {
        self.data_seed.unwrap_or(self.seed)
    }

    /// Training and (optional) heldout sets. Generated heldout data uses an
    /// independent seed.
    pub fn datasets(&self) -> Result<(Dataset, Option<Dataset>)> {
        let dir = self.base_dir.as_deref();
        let train = self.data.load(self.data_seed(), dir)?;
        let heldout = match &self.heldout {
            None => None,
            Some(spec) => {
                let h = spec.load(self.data_seed().wrapping_add(0x9e37_79b9_7f4a_7c15), dir)?;
                if h.feature_dim() != train.feature_dim() {
                    return Err(Error::DimensionMismatch {
                        expected: train.feature_dim(),
                        found: h.feature_dim(),
                    });
                }
                Some(h)
            }
        };
        Ok((train, heldout))
    }

    pub fn build_problem(&self, train: &Dataset, heldout: Option<&Dataset>) -> Result<Problem> {
        let features = train.feature_dim();
        let classes = train.num_classes().max(heldout.map_or(0, Dataset::num_classes));
        let problem = match &self.problem {
            ProblemSpec::Quadratic => Problem::quadratic(features),
            ProblemSpec::Logistic => Problem::logistic(features, classes)?.with_bias(self.bias)?,
            ProblemSpec::Mlp { hidden, activation } => Problem::mlp(features, hidden, classes, *activation)?,
        };
        problem.with_weight_decay(self.weight_decay)
    }

    pub fn batch_size(&self, n: usize) -> usize {
        match self.batch {
            BatchSize::Size(b) => b,
            BatchSize::Full => n,
        }
    }

    pub fn steps_per_epoch(&self, n: usize) -> u64 {
        n.div_ceil(self.batch_size(n)) as u64
    }

    pub fn total_steps(&self, n: usize) -> u64 {
        match self.budget {
            Budget::Steps(t) => t,
            Budget::Epochs(e) => e * self.steps_per_epoch(n),
        }
    }

    /// Copy with a different seed and name, as used for sweep replicas.
    pub fn replica(&self, replica: usize) -> RunConfig {
        let mut cfg = self.clone();
        cfg.seed = self.seed.wrapping_add(replica as u64);
        cfg.name = format!("{}-r{replica}", self.name);
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::SchemeSpec;

    #[test]
    fn parses_full_config() {
        let text = "# demo\nname=demo\nproblem=mlp:16,8:relu\ndata=blobs:3:60:4:1.5\nheldout=blobs:3:30:4:1.5\n\
                    opt=rsgdm scheme=scale:0.25\nlr=0.05\nepochs=3\nbatch=4\ndecay=0.1@2\n";
        // Multiple keys per line are not allowed.
        assert!(RunConfig::parse(text).is_err());
        let text = text.replace("opt=rsgdm scheme=scale:0.25", "opt=rsgdm\nscheme=scale:0.25");
        let cfg = RunConfig::parse(&text).unwrap();
        assert_eq!(cfg.name, "demo");
        assert_eq!(cfg.optimizer.scheme, Some(SchemeSpec::Scale { alpha: 0.25 }));
        assert_eq!(cfg.steps_per_epoch(60), 15);
        assert_eq!(cfg.total_steps(60), 45);
        assert_eq!(
            cfg.problem,
            ProblemSpec::Mlp {
                hidden: vec![16, 8],
                activation: Activation::Relu
            }
        );
        assert_eq!(cfg.source, text);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = RunConfig::parse("data=gauss:10:2:5\nlr=abc\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }), "{err}");
        let err = RunConfig::parse("data=gauss:10:2:5\n\nbogus=1\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 3, .. }), "{err}");
        let err = RunConfig::parse("data=gauss:10:2:5\nsteps=3\nepochs=1\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 3, .. }), "{err}");
        let err = RunConfig::parse("lr=0.1\n").unwrap_err();
        assert!(matches!(err, Error::Config { .. }), "{err}");
        let err = RunConfig::parse("data=gauss:10:2:5\nlr=0.1\nlr=0.2\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 3, .. }), "{err}");
    }

    #[test]
    fn data_specs() {
        assert!("blobs:3:10:2:1".parse::<DataSpec>().is_err());
        assert!("blobs:2:10:2:1".parse::<DataSpec>().is_ok());
        assert_eq!(
            "csv:a/b.csv".parse::<DataSpec>().unwrap(),
            DataSpec::Csv("a/b.csv".into())
        );
        assert!("gauss:1:2".parse::<DataSpec>().is_err());
    }

    #[test]
    fn problem_spec_round_trip() {
        for s in ["quadratic", "logistic", "mlp:4:tanh", "mlp:4,3:relu"] {
            assert_eq!(s.parse::<ProblemSpec>().unwrap().to_string(), s);
        }
        assert!("mlp".parse::<ProblemSpec>().is_err());
        assert!("mlp:4:sigmoid".parse::<ProblemSpec>().is_err());
    }

    #[test]
    fn full_batch() {
        let cfg = RunConfig::parse("data=gauss:10:2:5\nbatch=full\nepochs=4\n").unwrap();
        assert_eq!(cfg.batch_size(10), 10);
        assert_eq!(cfg.total_steps(10), 4);
    }
}
