//! Differentiable empirical-risk problems.
//!
//! Three problem families are provided:
//!
//! * the stochastic quadratic `f(x, z) = ½‖x − z‖²`,
//! * multinomial logistic regression (softmax cross-entropy on a linear map),
//! * a fully connected network with `tanh` (or ReLU) hidden layers and a
//!   softmax cross-entropy head.
//!
//! Weight decay `λ` is part of the loss: every `f(x, z)` carries `(λ/2)‖x‖²`.

mod data;
mod network;
mod sampler;

pub use data::{
    generate_blobs, generate_gaussian, load_csv, write_csv, BlobGenerator, GaussianGenerator, BLOB_CENTER_SCALE,
};
pub use sampler::{Sampler, Sampling};

use crate::error::{Error, Result};
use crate::vecmath::{check_dim, ParamVector, RngStream};
use network::Network;

/// One training example. The quadratic problem reads only `features`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Sample { features, label }
    }
}

/// An ordered, non-empty collection of samples with a common feature width.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    feature_dim: usize,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyDataset)?;
        let feature_dim = first.features.len();
        for s in &samples {
            check_dim(feature_dim, s.features.len())?;
        }
        Ok(Dataset { samples, feature_dim })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; datasets are non-empty by construction.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn get(&self, i: usize) -> Option<&Sample> {
        self.samples.get(i)
    }

    /// Largest label plus one.
    pub fn num_classes(&self) -> usize {
        self.samples.iter().map(|s| s.label).max().unwrap_or(0) + 1
    }

    /// Copy of the dataset with sample `i` replaced.
    pub fn with_replaced(&self, i: usize, sample: Sample) -> Result<Dataset> {
        if i >= self.len() {
            return Err(Error::invalid(format!(
                "sample index {i} out of range for dataset of size {}",
                self.len()
            )));
        }
        check_dim(self.feature_dim, sample.features.len())?;
        let mut samples = self.samples.clone();
        samples[i] = sample;
        Ok(Dataset {
            samples,
            feature_dim: self.feature_dim,
        })
    }

    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        check_dim(self.feature_dim, other.feature_dim)?;
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().cloned());
        Dataset::new(samples)
    }

    /// Largest squared feature norm, used by smoothness estimates.
    pub fn max_feature_norm_sq(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.features.iter().map(|v| v * v).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemKind {
    StochasticQuadratic,
    LogisticRegression {
        classes: usize,
    },
    Mlp {
        hidden: Vec<usize>,
        classes: usize,
        activation: Activation,
    },
}

/// Parameter initialisation rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Zeros for the quadratic and logistic problems, fan-in scaled
    /// uniform weights (zero biases) for networks.
    Default,
    Zeros,
    Constant(f64),
    Normal(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    kind: ProblemKind,
    features: usize,
    weight_decay: f64,
    network: Option<Network>,
}

impl Problem {
    pub fn quadratic(d: usize) -> Self {
        Problem {
            kind: ProblemKind::StochasticQuadratic,
            features: d,
            weight_decay: 0.0,
            network: None,
        }
    }

    pub fn logistic(features: usize, classes: usize) -> Result<Self> {
        Self::from_kind(ProblemKind::LogisticRegression { classes }, features, true)
    }

    pub fn mlp(features: usize, hidden: &[usize], classes: usize, activation: Activation) -> Result<Self> {
        let kind = ProblemKind::Mlp {
            hidden: hidden.to_vec(),
            classes,
            activation,
        };
        Self::from_kind(kind, features, true)
    }

    fn from_kind(kind: ProblemKind, features: usize, bias: bool) -> Result<Self> {
        let network = match &kind {
            ProblemKind::StochasticQuadratic => None,
            ProblemKind::LogisticRegression { classes } => {
                Some(Network::new(features, &[], *classes, Activation::Tanh, bias)?)
            }
            ProblemKind::Mlp {
                hidden,
                classes,
                activation,
            } => Some(Network::new(features, hidden, *classes, *activation, bias)?),
        };
        Ok(Problem {
            kind,
            features,
            weight_decay: 0.0,
            network,
        })
    }

    /// Enables or disables bias parameters (no effect on the quadratic).
    pub fn with_bias(self, bias: bool) -> Result<Self> {
        let weight_decay = self.weight_decay;
        let mut p = Self::from_kind(self.kind, self.features, bias)?;
        p.weight_decay = weight_decay;
        Ok(p)
    }

    pub fn with_weight_decay(mut self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("weight decay must be >= 0, got {lambda}")));
        }
        self.weight_decay = lambda;
        Ok(self)
    }

    pub fn kind(&self) -> &ProblemKind {
        &self.kind
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn weight_decay(&self) -> f64 {
        self.weight_decay
    }

    pub fn has_bias(&self) -> bool {
        self.network.as_ref().is_some_and(|n| n.bias)
    }

    /// Flattened parameter count.
    pub fn dimension(&self) -> usize {
        match &self.network {
            None => self.features,
            Some(n) => n.num_params(),
        }
    }

    /// Whether every `f(·, z)` is convex.
    pub fn is_convex(&self) -> bool {
        !matches!(self.kind, ProblemKind::Mlp { .. })
    }

    pub fn num_classes(&self) -> Option<usize> {
        match &self.kind {
            ProblemKind::StochasticQuadratic => None,
            ProblemKind::LogisticRegression { classes } | ProblemKind::Mlp { classes, .. } => Some(*classes),
        }
    }

    fn check_inputs(&self, x: &ParamVector, z: &Sample) -> Result<()> {
        check_dim(self.dimension(), x.len())?;
        check_dim(self.features, z.features.len())?;
        if let Some(k) = self.num_classes() {
            if z.label >= k {
                return Err(Error::invalid(format!(
                    "label {} out of range for {k} classes",
                    z.label
                )));
            }
        }
        Ok(())
    }

    fn decay_term(&self, x: &ParamVector) -> f64 {
        if self.weight_decay > 0.0 {
            0.5 * self.weight_decay * x.norm2_sq()
        } else {
            0.0
        }
    }

    /// `f(x, z)`.
    pub fn loss(&self, x: &ParamVector, z: &Sample) -> Result<f64> {
        self.check_inputs(x, z)?;
        let data = match &self.network {
            None => {
                let mut acc = 0.0;
                for (a, b) in x.iter().zip(&z.features) {
                    acc += (a - b) * (a - b);
                }
                0.5 * acc
            }
            Some(net) => net.loss(x.as_slice(), z),
        };
        let value = data + self.decay_term(x);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NonFinite { context: "loss" })
        }
    }

    /// `∇f(x, z)`, analytic (backpropagation for networks).
    pub fn grad(&self, x: &ParamVector, z: &Sample) -> Result<ParamVector> {
        self.check_inputs(x, z)?;
        let mut g = match &self.network {
            None => x.iter().zip(&z.features).map(|(a, b)| a - b).collect(),
            Some(net) => net.grad(x.as_slice(), z),
        };
        if self.weight_decay > 0.0 {
            for (gi, xi) in g.iter_mut().zip(x) {
                *gi += self.weight_decay * xi;
            }
        }
        ParamVector::from_vec(g).map_err(|_| Error::NonFinite { context: "gradient" })
    }

    /// Mean gradient over the samples at `indices`.
    pub fn batch_grad(&self, x: &ParamVector, data: &Dataset, indices: &[usize]) -> Result<ParamVector> {
        if indices.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut acc = vec![0.0; x.len()];
        for &i in indices {
            let z = data
                .get(i)
                .ok_or_else(|| Error::invalid(format!("sample index {i} out of range")))?;
            let g = self.grad(x, z)?;
            for (a, gi) in acc.iter_mut().zip(&g) {
                *a += gi;
            }
        }
        let n = indices.len() as f64;
        ParamVector::from_vec(acc.into_iter().map(|a| a / n).collect())
    }

    /// `R_S(x) = (1/N) Σ f(x, z_i)`.
    pub fn empirical_risk(&self, x: &ParamVector, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut acc = 0.0;
        for z in data.samples() {
            acc += self.loss(x, z)?;
        }
        Ok(acc / data.len() as f64)
    }

    /// `∇R_S(x)`, computed with a full pass over the dataset.
    pub fn full_gradient(&self, x: &ParamVector, data: &Dataset) -> Result<ParamVector> {
        let all: Vec<usize> = (0..data.len()).collect();
        self.batch_grad(x, data, &all)
    }

    /// Mean squared per-sample gradient norm `E_z ‖∇f(x, z)‖²` over the dataset.
    pub fn gradient_second_moment(&self, x: &ParamVector, data: &Dataset) -> Result<f64> {
        let mut acc = 0.0;
        for z in data.samples() {
            acc += self.grad(x, z)?.norm2_sq();
        }
        Ok(acc / data.len() as f64)
    }

    /// Central finite differences `(f(x + h e_i) − f(x − h e_i)) / 2h`.
    pub fn fd_gradient_oracle(&self, x: &ParamVector, z: &Sample, h: f64) -> Result<ParamVector> {
        if !(h > 0.0) {
            return Err(Error::invalid(format!(
                "finite-difference step must be positive, got {h}"
            )));
        }
        self.check_inputs(x, z)?;
        let mut probe = x.as_slice().to_vec();
        let mut out = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let orig = probe[i];
            probe[i] = orig + h;
            let plus = self.loss(&ParamVector::from_slice(&probe)?, z)?;
            probe[i] = orig - h;
            let minus = self.loss(&ParamVector::from_slice(&probe)?, z)?;
            probe[i] = orig;
            out.push((plus - minus) / (2.0 * h));
        }
        ParamVector::from_vec(out)
    }

    /// Predicted class (lowest index on ties); `None` for the quadratic.
    pub fn predict(&self, x: &ParamVector, features: &[f64]) -> Option<usize> {
        let net = self.network.as_ref()?;
        let logits = net.logits(x.as_slice(), features);
        let mut best = 0;
        for (k, v) in logits.iter().enumerate() {
            if *v > logits[best] {
                best = k;
            }
        }
        Some(best)
    }

    /// Fraction of correctly classified samples; `None` for the quadratic.
    pub fn accuracy(&self, x: &ParamVector, data: &Dataset) -> Result<Option<f64>> {
        check_dim(self.dimension(), x.len())?;
        check_dim(self.features, data.feature_dim())?;
        if self.network.is_none() {
            return Ok(None);
        }
        let correct = data
            .samples()
            .iter()
            .filter(|z| self.predict(x, &z.features) == Some(z.label))
            .count();
        Ok(Some(correct as f64 / data.len() as f64))
    }

    pub fn init_params(&self, init: Init, rng: &mut RngStream) -> Result<ParamVector> {
        let d = self.dimension();
        match init {
            Init::Zeros => Ok(ParamVector::zeros(d)),
            Init::Constant(c) => ParamVector::from_vec(vec![c; d]),
            Init::Normal(std) => ParamVector::from_fn(d, |_| std * rng.normal()),
            Init::Default => match &self.network {
                Some(net) if !net.is_linear() => ParamVector::from_vec(net.default_init(rng)),
                _ => Ok(ParamVector::zeros(d)),
            },
        }
    }

    /// Upper bound on the per-sample smoothness constant `β`, when one is
    /// available in closed form.
    ///
    /// Quadratic: `1 + λ`. Softmax regression: the Hessian of the
    /// cross-entropy is `(diag(p) − ppᵀ) ⊗ aaᵀ`, whose first factor has
    /// spectral norm at most `½`, so `β ≤ ½·max‖a‖² + λ` with `a` the
    /// (bias-augmented) feature vector. Networks: `None`.
    pub fn smoothness_bound(&self, data: &Dataset) -> Option<f64> {
        match &self.kind {
            ProblemKind::StochasticQuadratic => Some(1.0 + self.weight_decay),
            ProblemKind::LogisticRegression { .. } => {
                let bias = if self.has_bias() { 1.0 } else { 0.0 };
                Some(0.5 * (data.max_feature_norm_sq() + bias) + self.weight_decay)
            }
            ProblemKind::Mlp { .. } => None,
        }
    }

    /// Closed-form minimiser of `R_S` for the quadratic problem.
    pub fn quadratic_minimizer(&self, data: &Dataset) -> Option<ParamVector> {
        if self.kind != ProblemKind::StochasticQuadratic {
            return None;
        }
        let n = data.len() as f64;
        let mut mean = vec![0.0; self.features];
        for z in data.samples() {
            for (m, v) in mean.iter_mut().zip(&z.features) {
                *m += v;
            }
        }
        ParamVector::from_vec(mean.into_iter().map(|m| m / n / (1.0 + self.weight_decay)).collect()).ok()
    }
}
