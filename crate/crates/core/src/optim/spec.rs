//! Text form of an optimizer choice, e.g.
//! `opt=rsgdm scheme=scale:0.0625 lr=0.1 momentum=0.9 decay=0.1@100,200`.

use std::fmt;
use std::str::FromStr;

use super::{
    BaseKind, BaseOptimizer, FeedbackOptimizer, LrSchedule, Optimizer, PlainOptimizer, ResidualOptimizer,
    SignOptimizer, ADAGRAD_EPS, ADAM_BETA1, ADAM_BETA2, ADAM_EPS, DEFAULT_MOMENTUM,
};
use crate::error::{Error, Result};
use crate::schemes::SchemeSpec;
use crate::vecmath::ParamVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseName {
    Sgd,
    Sgdm,
    Asgd,
    Adam,
    Adagrad,
}

impl BaseName {
    fn as_str(self) -> &'static str {
        match self {
            BaseName::Sgd => "sgd",
            BaseName::Sgdm => "sgdm",
            BaseName::Asgd => "asgd",
            BaseName::Adam => "adam",
            BaseName::Adagrad => "adagrad",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "sgd" => BaseName::Sgd,
            "sgdm" => BaseName::Sgdm,
            "asgd" => BaseName::Asgd,
            "adam" => BaseName::Adam,
            "adagrad" => BaseName::Adagrad,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// The base optimizer alone (`sgd`, `sgdm`, `asgd`, `adam`, `adagrad`).
    Plain(BaseName),
    /// Residual-wrapped base (`rsgd`, `rsgdm`, `rasgd`, `radam`, `radagrad`).
    Residual(BaseName),
    /// `signsgd` / `signsgdm`.
    Sign { momentum: bool },
    /// `efsignsgd` / `efsignsgdm`.
    ErrorFeedback { momentum: bool },
}

impl Method {
    pub fn base(&self) -> BaseName {
        match *self {
            Method::Plain(b) | Method::Residual(b) => b,
            Method::Sign { momentum } | Method::ErrorFeedback { momentum } => {
                if momentum {
                    BaseName::Sgdm
                } else {
                    BaseName::Sgd
                }
            }
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = |momentum: bool| if momentum { "m" } else { "" };
        match *self {
            Method::Plain(b) => write!(f, "{}", b.as_str()),
            Method::Residual(b) => write!(f, "r{}", b.as_str()),
            Method::Sign { momentum } => write!(f, "signsgd{}", m(momentum)),
            Method::ErrorFeedback { momentum } => write!(f, "efsignsgd{}", m(momentum)),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(b) = BaseName::parse(s) {
            return Ok(Method::Plain(b));
        }
        let method = match s {
            "signsgd" => Method::Sign { momentum: false },
            "signsgdm" => Method::Sign { momentum: true },
            "efsignsgd" => Method::ErrorFeedback { momentum: false },
            "efsignsgdm" => Method::ErrorFeedback { momentum: true },
            _ => match s.strip_prefix('r').and_then(BaseName::parse) {
                Some(b) => Method::Residual(b),
                None => return Err(Error::invalid(format!("unknown optimizer {s:?}"))),
            },
        };
        Ok(method)
    }
}

/// Complete optimizer configuration.
///
/// Decay milestones are stored in abstract units; [`OptimizerSpec::build`]
/// multiplies them by the number of steps per unit (e.g. steps per epoch).
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerSpec {
    pub method: Method,
    /// Residual scheme, or the compressor for error feedback.
    pub scheme: Option<SchemeSpec>,
    pub lr: f64,
    pub momentum: f64,
    pub decay: Option<(f64, Vec<u64>)>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: Option<f64>,
    pub asgd_start: Option<u64>,
    pub asgd_window: Option<usize>,
}

impl OptimizerSpec {
    pub fn new(method: Method, lr: f64) -> Self {
        OptimizerSpec {
            method,
            scheme: None,
            lr,
            momentum: DEFAULT_MOMENTUM,
            decay: None,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: None,
            asgd_start: None,
            asgd_window: None,
        }
    }

    pub fn with_scheme(mut self, scheme: SchemeSpec) -> Self {
        self.scheme = Some(scheme);
        self
    }

    pub fn with_momentum(mut self, momentum: f64) -> Self {
        self.momentum = momentum;
        self
    }

    pub fn with_decay(mut self, factor: f64, milestones: Vec<u64>) -> Self {
        self.decay = Some((factor, milestones));
        self
    }

    /// Applies one `key=value` setting. Returns `Ok(false)` for keys that do
    /// not belong to the optimizer.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        let num = |v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| Error::invalid(format!("{key}: expected a number, got {v:?}")))
        };
        let int = |v: &str| -> Result<u64> {
            v.parse()
                .map_err(|_| Error::invalid(format!("{key}: expected an integer, got {v:?}")))
        };
        match key {
            "opt" => self.method = value.parse()?,
            "scheme" | "compressor" => self.scheme = Some(value.parse()?),
            "lr" => self.lr = num(value)?,
            "momentum" => self.momentum = num(value)?,
            "beta1" => self.beta1 = num(value)?,
            "beta2" => self.beta2 = num(value)?,
            "eps" => self.eps = Some(num(value)?),
            "asgd_start" => self.asgd_start = Some(int(value)?),
            "asgd_trigger" => self.asgd_window = Some(int(value)? as usize),
            "decay" => {
                let (factor, at) = value
                    .split_once('@')
                    .ok_or_else(|| Error::invalid(format!("decay must look like 0.1@100,200, got {value:?}")))?;
                let milestones = at.split(',').map(|m| int(m.trim())).collect::<Result<Vec<_>>>()?;
                self.decay = Some((num(factor)?, milestones));
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<()> {
        match (self.method, &self.scheme) {
            (Method::Residual(_), None) => {
                return Err(Error::invalid(format!("{} needs a residual scheme", self.method)));
            }
            (Method::Plain(_) | Method::Sign { .. }, Some(_)) => {
                return Err(Error::invalid(format!("{} takes no scheme", self.method)));
            }
            _ => {}
        }
        if let Some(s) = &self.scheme {
            s.validate()?;
        }
        if (self.asgd_start.is_some() || self.asgd_window.is_some()) && self.method.base() != BaseName::Asgd {
            return Err(Error::invalid("asgd_start/asgd_trigger need an asgd base"));
        }
        self.schedule(1).map(|_| ())
    }

    pub fn schedule(&self, steps_per_unit: u64) -> Result<LrSchedule> {
        match &self.decay {
            None => LrSchedule::constant(self.lr),
            Some((factor, milestones)) => LrSchedule::piecewise(
                self.lr,
                *factor,
                milestones.iter().map(|m| m * steps_per_unit).collect(),
            ),
        }
    }

    pub fn base_kind(&self) -> BaseKind {
        match self.method.base() {
            BaseName::Sgd => BaseKind::Sgd,
            BaseName::Sgdm => BaseKind::Sgdm {
                momentum: self.momentum,
            },
            BaseName::Asgd => BaseKind::Asgd {
                averaging_start: self.asgd_start,
            },
            BaseName::Adam => BaseKind::Adam {
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps.unwrap_or(ADAM_EPS),
            },
            BaseName::Adagrad => BaseKind::Adagrad {
                eps: self.eps.unwrap_or(ADAGRAD_EPS),
            },
        }
    }

    pub fn base_optimizer(&self, dim: usize, steps_per_unit: u64) -> Result<BaseOptimizer> {
        BaseOptimizer::new(self.base_kind(), self.schedule(steps_per_unit)?, dim)
    }

    pub fn build(&self, x0: ParamVector, steps_per_unit: u64) -> Result<Box<dyn Optimizer>> {
        self.validate()?;
        let base = self.base_optimizer(x0.len(), steps_per_unit)?;
        Ok(match self.method {
            Method::Plain(_) => Box::new(PlainOptimizer::new(x0, base)),
            Method::Residual(_) => {
                let scheme = self.scheme.expect("validated");
                Box::new(ResidualOptimizer::new(x0, scheme, base)?)
            }
            Method::Sign { .. } => Box::new(SignOptimizer::new(x0, base)),
            Method::ErrorFeedback { .. } => Box::new(FeedbackOptimizer::new(
                x0,
                base,
                self.scheme.unwrap_or(SchemeSpec::ScaledSign),
            )),
        })
    }
}

impl FromStr for OptimizerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut spec = OptimizerSpec::new(Method::Plain(BaseName::Sgd), 0.1);
        for token in s.split_whitespace() {
            let (k, v) = token
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("expected key=value, got {token:?}")))?;
            if !spec.set(k, v)? {
                return Err(Error::invalid(format!("unknown optimizer key {k:?}")));
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for OptimizerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "opt={}", self.method)?;
        if let Some(s) = &self.scheme {
            write!(f, " scheme={s}")?;
        }
        write!(f, " lr={}", self.lr)?;
        if self.method.base() == BaseName::Sgdm {
            write!(f, " momentum={}", self.momentum)?;
        }
        if let Some((factor, ms)) = &self.decay {
            let ms: Vec<String> = ms.iter().map(u64::to_string).collect();
            write!(f, " decay={factor}@{}", ms.join(","))?;
        }
        if self.method.base() == BaseName::Adam {
            write!(f, " beta1={} beta2={}", self.beta1, self.beta2)?;
        }
        if let Some(eps) = self.eps {
            write!(f, " eps={eps}")?;
        }
        if let Some(s) = self.asgd_start {
            write!(f, " asgd_start={s}")?;
        }
        if let Some(w) = self.asgd_window {
            write!(f, " asgd_trigger={w}")?;
        }
        Ok(())
    }
}
