//! Dense feed-forward network with a softmax cross-entropy head.
//!
//! Parameters are flattened layer by layer: the row-major `outputs × inputs`
//! weight matrix, followed by the `outputs` biases when biases are enabled.
//! Softmax regression is the special case with no hidden layers.

use super::{Activation, Sample};
use crate::error::{Error, Result};
use crate::vecmath::RngStream;

#[derive(Clone, Debug, PartialEq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    offset: usize,
}

impl Layer {
    fn weight_len(&self) -> usize {
        self.inputs * self.outputs
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(super) struct Network {
    layers: Vec<Layer>,
    activation: Activation,
    pub(super) bias: bool,
    num_params: usize,
}

impl Network {
    pub(super) fn new(
        inputs: usize,
        hidden: &[usize],
        classes: usize,
        activation: Activation,
        bias: bool,
    ) -> Result<Self> {
        if classes < 2 {
            return Err(Error::invalid(format!("need at least 2 classes, got {classes}")));
        }
        if inputs == 0 || hidden.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        let mut widths = vec![inputs];
        widths.extend_from_slice(hidden);
        widths.push(classes);
        let mut layers = Vec::with_capacity(widths.len() - 1);
        let mut offset = 0;
        for w in widths.windows(2) {
            let layer = Layer {
                inputs: w[0],
                outputs: w[1],
                offset,
            };
            offset += layer.weight_len() + if bias { layer.outputs } else { 0 };
            layers.push(layer);
        }
        Ok(Network {
            layers,
            activation,
            bias,
            num_params: offset,
        })
    }

    pub(super) fn num_params(&self) -> usize {
        self.num_params
    }

    pub(super) fn is_linear(&self) -> bool {
        self.layers.len() == 1
    }

    fn affine(&self, layer: &Layer, params: &[f64], input: &[f64]) -> Vec<f64> {
        let w = &params[layer.offset..layer.offset + layer.weight_len()];
        let mut out = Vec::with_capacity(layer.outputs);
        for o in 0..layer.outputs {
            let row = &w[o * layer.inputs..(o + 1) * layer.inputs];
            let mut acc = 0.0;
            for (wi, xi) in row.iter().zip(input) {
                acc += wi * xi;
            }
            if self.bias {
                acc += params[layer.offset + layer.weight_len() + o];
            }
            out.push(acc);
        }
        out
    }

    fn activate(&self, v: f64) -> f64 {
        match self.activation {
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(0.0),
        }
    }

    /// Derivative expressed through the activation output.
    fn activate_grad(&self, out: f64) -> f64 {
        match self.activation {
            Activation::Tanh => 1.0 - out * out,
            Activation::Relu => {
                if out > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Post-activation outputs of every layer; the last entry holds logits.
    fn forward(&self, params: &[f64], features: &[f64]) -> Vec<Vec<f64>> {
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        acts.push(features.to_vec());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = self.affine(layer, params, &acts[l]);
            if l != last {
                for v in &mut z {
                    *v = self.activate(*v);
                }
            }
            acts.push(z);
        }
        acts
    }

    pub(super) fn logits(&self, params: &[f64], features: &[f64]) -> Vec<f64> {
        self.forward(params, features).pop().unwrap_or_default()
    }

    pub(super) fn loss(&self, params: &[f64], z: &Sample) -> f64 {
        let logits = self.logits(params, &z.features);
        log_sum_exp(&logits) - logits[z.label]
    }

    pub(super) fn grad(&self, params: &[f64], z: &Sample) -> Vec<f64> {
        let acts = self.forward(params, &z.features);
        let mut grad = vec![0.0; self.num_params];
        let mut delta = softmax(&acts[self.layers.len()]);
        delta[z.label] -= 1.0;

        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &acts[l];
            let w_off = layer.offset;
            for o in 0..layer.outputs {
                let d = delta[o];
                let row = &mut grad[w_off + o * layer.inputs..w_off + (o + 1) * layer.inputs];
                for (g, a) in row.iter_mut().zip(input) {
                    *g = d * a;
                }
            }
            if self.bias {
                let b_off = w_off + layer.weight_len();
                grad[b_off..b_off + layer.outputs].copy_from_slice(&delta);
            }
            if l == 0 {
                break;
            }
            let w = &params[w_off..w_off + layer.weight_len()];
            let mut below = vec![0.0; layer.inputs];
            for o in 0..layer.outputs {
                let d = delta[o];
                let row = &w[o * layer.inputs..(o + 1) * layer.inputs];
                for (b, wi) in below.iter_mut().zip(row) {
                    *b += wi * d;
                }
            }
            for (b, a) in below.iter_mut().zip(input) {
                *b *= self.activate_grad(*a);
            }
            delta = below;
        }
        grad
    }

    /// Weights uniform in `±1/√fan_in`, biases zero.
    pub(super) fn default_init(&self, rng: &mut RngStream) -> Vec<f64> {
        let mut params = vec![0.0; self.num_params];
        for layer in &self.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in &mut params[layer.offset..layer.offset + layer.weight_len()] {
                *w = bound * (2.0 * rng.uniform() - 1.0);
            }
        }
        params
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut acc = 0.0;
    for x in v {
        acc += (x - max).exp();
    }
    max + acc.ln()
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let mut total = 0.0;
    for e in &exps {
        total += e;
    }
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_layout() {
        let net = Network::new(4, &[3], 2, Activation::Tanh, true).unwrap();
        assert_eq!(net.num_params(), 4 * 3 + 3 + 3 * 2 + 2);
        let linear = Network::new(4, &[], 3, Activation::Tanh, false).unwrap();
        assert_eq!(linear.num_params(), 12);
        assert!(linear.is_linear());
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let p = softmax(&[1000.0, 1000.0]);
        assert_eq!(p, vec![0.5, 0.5]);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + std::f64::consts::LN_2)).abs() < 1e-12);
    }
}
