//! Small dense networks with hand-written backpropagation.
//!
//! Everything runs in `f64` on plain row-major `Vec`s; the networks used
//! here have a few hundred to a few thousand parameters, where a BLAS call
//! would cost more than it saves.

use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Tanh,
    Relu,
    Softmax,
}

/// One affine layer followed by an activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    /// Row-major, `outputs` rows of `inputs` columns.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Self {
            inputs,
            outputs,
            activation,
            weights,
            bias: vec![0.0; outputs],
        }
    }

    fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.bias
                .iter()
                .zip(self.weights.chunks_exact(self.inputs))
                .map(|(b, row)| b + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>()),
        );
        match self.activation {
            Activation::Linear => {}
            Activation::Tanh => out.iter_mut().for_each(|z| *z = z.tanh()),
            Activation::Relu => out.iter_mut().for_each(|z| *z = z.max(0.0)),
            Activation::Softmax => softmax_in_place(out),
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

/// Feed-forward network: a stack of [`Layer`]s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    layers: Vec<Layer>,
}

/// Activations recorded during a forward pass, input first, output last.
#[derive(Debug, Clone)]
pub struct Trace {
    activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace holds at least the input")
    }
}

impl DenseNet {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let net = Self { layers };
        net.validate()?;
        Ok(net)
    }

    /// Builds a Glorot-initialized network from `(width, activation)` pairs.
    pub fn build<R: Rng + ?Sized>(input: usize, shape: &[(usize, Activation)], rng: &mut R) -> Result<Self> {
        let mut fan_in = input;
        let mut layers = Vec::with_capacity(shape.len());
        for &(width, activation) in shape {
            layers.push(Layer::glorot(fan_in, width, activation, rng));
            fan_in = width;
        }
        Self::new(layers)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.layers.first() else {
            return Err(Error::InvalidNetwork("no layers".into()));
        };
        let mut expected = first.inputs;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.inputs == 0 || layer.outputs == 0 {
                return Err(Error::InvalidNetwork(format!("layer {i} has a zero dimension")));
            }
            if layer.inputs != expected {
                return Err(Error::InvalidNetwork(format!(
                    "layer {i} expects {} inputs but the previous layer yields {expected}",
                    layer.inputs
                )));
            }
            if layer.weights.len() != layer.inputs * layer.outputs || layer.bias.len() != layer.outputs {
                return Err(Error::InvalidNetwork(format!("layer {i} parameter shape mismatch")));
            }
            if layer.activation == Activation::Softmax && i + 1 != self.layers.len() {
                return Err(Error::InvalidNetwork(format!(
                    "softmax on layer {i} is not the final layer"
                )));
            }
            if layer.weights.iter().chain(&layer.bias).any(|p| !p.is_finite()) {
                return Err(Error::InvalidNetwork(format!("layer {i} has non-finite parameters")));
            }
            expected = layer.outputs;
        }
        Ok(())
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut current = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.forward_into(&current, &mut next);
            std::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }

    /// Forward pass that keeps every intermediate activation for [`DenseNet::backward`].
    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for layer in &self.layers {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.forward_into(activations.last().expect("non-empty"), &mut out);
            activations.push(out);
        }
        Ok(Trace { activations })
    }

    /// Parameter gradients for one sample, given dL/d(output).
    pub fn backward(&self, trace: &Trace, upstream: &[f64]) -> Result<Gradients> {
        let mut grads = Gradients::zeros_like(self);
        self.accumulate_backward(trace, upstream, &mut grads)?;
        Ok(grads)
    }

    /// Adds this sample's parameter gradients into `grads`.
    pub fn accumulate_backward(&self, trace: &Trace, upstream: &[f64], grads: &mut Gradients) -> Result<()> {
        if trace.activations.len() != self.layers.len() + 1 {
            return Err(Error::InvalidNetwork("trace does not match network depth".into()));
        }
        if upstream.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                actual: upstream.len(),
            });
        }
        if grads.layers.len() != self.layers.len() {
            return Err(Error::InvalidNetwork("gradient buffer does not match network".into()));
        }

        let mut delta = upstream.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let x = &trace.activations[idx];
            let y = &trace.activations[idx + 1];
            // delta becomes dL/dz for this layer's pre-activation
            match layer.activation {
                Activation::Linear => {}
                Activation::Tanh => delta.iter_mut().zip(y).for_each(|(d, y)| *d *= 1.0 - y * y),
                Activation::Relu => delta.iter_mut().zip(y).for_each(|(d, y)| {
                    if *y <= 0.0 {
                        *d = 0.0
                    }
                }),
                Activation::Softmax => {
                    let dot: f64 = delta.iter().zip(y).map(|(d, y)| d * y).sum();
                    delta.iter_mut().zip(y).for_each(|(d, y)| *d = y * (*d - dot));
                }
            }

            let g = &mut grads.layers[idx];
            for (o, dz) in delta.iter().enumerate() {
                g.bias[o] += dz;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                row.iter_mut().zip(x).for_each(|(gw, xi)| *gw += dz * xi);
            }

            if idx > 0 {
                let mut prev = vec![0.0; layer.inputs];
                for (dz, row) in delta.iter().zip(layer.weights.chunks_exact(layer.inputs)) {
                    prev.iter_mut().zip(row).for_each(|(p, w)| *p += dz * w);
                }
                delta = prev;
            }
        }
        Ok(())
    }

    /// Serializes as checkpoint JSON.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Reads checkpoint JSON and validates shapes.
    pub fn from_json(text: &str) -> Result<Self> {
        let net: DenseNet = serde_json::from_str(text)?;
        net.validate()?;
        Ok(net)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Parameter-shaped buffer: gradients, or optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.values_mut().for_each(|g| *g *= factor);
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    fn matches(&self, net: &DenseNet) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weights.len() == l.weights.len() && g.bias.len() == l.bias.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    RmsProp,
}

impl FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "rmsprop" => Ok(OptimizerKind::RmsProp),
            other => Err(format!("unknown optimizer `{other}` (expected adam|rmsprop)")),
        }
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const RMSPROP_DECAY: f64 = 0.9;
pub const OPTIMIZER_EPS: f64 = 1e-8;

/// Adam or RMSProp state for one network.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    first: Gradients,
    second: Gradients,
    step: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, net: &DenseNet) -> Self {
        Self {
            kind,
            learning_rate,
            first: Gradients::zeros_like(net),
            second: Gradients::zeros_like(net),
            step: 0,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one descent step along `grads`.
    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<()> {
        if !grads.matches(net) || !self.first.matches(net) {
            return Err(Error::InvalidNetwork(
                "gradient shape does not match the network".into(),
            ));
        }
        self.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Adam => {
                let t = self.step as i32;
                let c1 = 1.0 - ADAM_BETA1.powi(t);
                let c2 = 1.0 - ADAM_BETA2.powi(t);
                for (((layer, g), m), v) in net
                    .layers
                    .iter_mut()
                    .zip(&grads.layers)
                    .zip(&mut self.first.layers)
                    .zip(&mut self.second.layers)
                {
                    let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
                    let gs = g.weights.iter().chain(&g.bias);
                    let ms = m.weights.iter_mut().chain(m.bias.iter_mut());
                    let vs = v.weights.iter_mut().chain(v.bias.iter_mut());
                    for (((p, g), m), v) in params.zip(gs).zip(ms).zip(vs) {
                        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + OPTIMIZER_EPS);
                    }
                }
            }
            OptimizerKind::RmsProp => {
                for ((layer, g), v) in net.layers.iter_mut().zip(&grads.layers).zip(&mut self.second.layers) {
                    let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
                    let gs = g.weights.iter().chain(&g.bias);
                    let vs = v.weights.iter_mut().chain(v.bias.iter_mut());
                    for ((p, g), v) in params.zip(gs).zip(vs) {
                        *v = RMSPROP_DECAY * *v + (1.0 - RMSPROP_DECAY) * g * g;
                        *p -= lr * g / (v.sqrt() + OPTIMIZER_EPS);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Mean squared error.
pub fn mse(prediction: &[f64], target: &[f64]) -> Result<f64> {
    if prediction.len() != target.len() || prediction.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            actual: prediction.len(),
        });
    }
    let sum: f64 = prediction.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / prediction.len() as f64)
}

/// d(mse)/d(prediction).
pub fn mse_gradient(prediction: &[f64], target: &[f64]) -> Vec<f64> {
    let n = prediction.len() as f64;
    prediction.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect()
}

fn check_probabilities(probs: &[f64], class: usize) -> Result<()> {
    if class >= probs.len() {
        return Err(Error::InvalidProbabilities(format!(
            "class {class} out of range for {} outputs",
            probs.len()
        )));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::InvalidProbabilities(format!("non-positive entry in {probs:?}")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidProbabilities(format!("entries sum to {sum}")));
    }
    Ok(())
}

/// `-ln p[class]`.
pub fn cross_entropy(probs: &[f64], class: usize) -> Result<f64> {
    check_probabilities(probs, class)?;
    Ok(-probs[class].ln())
}

/// d(cross_entropy)/d(probs), scaled by `weight`.
pub fn cross_entropy_gradient(probs: &[f64], class: usize, weight: f64) -> Vec<f64> {
    let mut g = vec![0.0; probs.len()];
    g[class] = -weight / probs[class];
    g
}

/// Sum over samples of `class_weights[class] * CE`.
pub fn weighted_cross_entropy(samples: &[(&[f64], usize)], class_weights: &[f64]) -> Result<f64> {
    samples.iter().try_fold(0.0, |acc, (probs, class)| {
        let w = class_weights
            .get(*class)
            .ok_or_else(|| Error::InvalidProbabilities(format!("no weight for class {class}")))?;
        Ok(acc + w * cross_entropy(probs, *class)?)
    })
}
