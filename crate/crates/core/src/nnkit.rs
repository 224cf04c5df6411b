//! Small fully-connected classifiers with exact forward evaluation,
//! per-sample losses and per-class parameter gradients.
//!
//! Parameters live in one flat vector. Layer `l` stores its `fan_out x fan_in`
//! weight block row-major, followed by its `fan_out` biases. A layer computes
//! `z = scale * W h + b`, where `scale` is 1 under the standard scheme and
//! `1/sqrt(fan_in)` under the NTK parameterization. Hidden layers apply the
//! configured activation; the output layer is linear and yields logits.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::pool::{LabeledPool, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Weights ~ N(0, 2/fan_in), biases zero, unit layer scale.
    Standard,
    /// Weights ~ N(0, 1), biases zero, layer output scaled by 1/sqrt(fan_in).
    NtkParameterization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    Mse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub num_classes: usize,
    pub activation: Activation,
    pub init_scheme: InitScheme,
    pub seed: u64,
}

impl NetworkConfig {
    /// The default desk-scale architecture: one ReLU hidden layer of width 256.
    pub fn mlp(input_dim: usize, num_classes: usize, seed: u64) -> Self {
        Self {
            input_dim,
            hidden_dims: vec![256],
            num_classes,
            activation: Activation::Relu,
            init_scheme: InitScheme::Standard,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("input_dim must be at least 1".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Config(format!("num_classes must be >= 2, got {}", self.num_classes)));
        }
        if let Some(pos) = self.hidden_dims.iter().position(|&h| h == 0) {
            return Err(Error::Config(format!("hidden layer {pos} has width 0")));
        }
        Ok(())
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut fan_in = self.input_dim;
        for &h in self.hidden_dims.iter().chain(std::iter::once(&self.num_classes)) {
            dims.push((fan_in, h));
            fan_in = h;
        }
        dims
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerLayout {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
    pub scale: f64,
}

impl LayerLayout {
    fn weight(&self, params: &[f64], o: usize, i: usize) -> f64 {
        params[self.weight_offset + o * self.fan_in + i]
    }
}

/// Flat parameter-space vector aligned with a network's layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector(pub Vec<f64>);

impl GradientVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &GradientVector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &GradientVector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += alpha * b;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    params: Vec<f64>,
    layout: Vec<LayerLayout>,
}

struct ForwardTrace {
    /// Input to each layer (`inputs[0]` is x).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer; the last entry is the logits.
    pre: Vec<Vec<f64>>,
}

impl Network {
    /// Initializes parameters deterministically from `config.seed`.
    pub fn init(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        let layout = Self::build_layout(config);
        let total = layout.last().map_or(0, |l| l.bias_offset + l.fan_out);
        let mut params = vec![0.0; total];
        let mut rng = crate::rng::stream(config.seed, "network-init", 0);
        for layer in &layout {
            let std = match config.init_scheme {
                InitScheme::Standard => (2.0 / layer.fan_in as f64).sqrt(),
                InitScheme::NtkParameterization => 1.0,
            };
            let weights = &mut params[layer.weight_offset..layer.bias_offset];
            for w in weights.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *w = std * z;
            }
        }
        Ok(Self { config: config.clone(), params, layout })
    }

    /// Wraps an explicit parameter vector.
    pub fn from_params(config: &NetworkConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layout = Self::build_layout(config);
        let total = layout.last().map_or(0, |l| l.bias_offset + l.fan_out);
        if params.len() != total {
            return Err(Error::Input(format!("expected {total} parameters, got {}", params.len())));
        }
        Ok(Self { config: config.clone(), params, layout })
    }

    fn build_layout(config: &NetworkConfig) -> Vec<LayerLayout> {
        let mut offset = 0;
        config
            .layer_dims()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let scale = match config.init_scheme {
                    InitScheme::Standard => 1.0,
                    InitScheme::NtkParameterization => 1.0 / (fan_in as f64).sqrt(),
                };
                let layer = LayerLayout {
                    fan_in,
                    fan_out,
                    weight_offset: offset,
                    bias_offset: offset + fan_in * fan_out,
                    scale,
                };
                offset += fan_in * fan_out + fan_out;
                layer
            })
            .collect()
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn layout(&self) -> &[LayerLayout] {
        &self.layout
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.input_dim {
            return Err(Error::Input(format!(
                "feature vector has length {}, network expects {}",
                x.len(),
                self.config.input_dim
            )));
        }
        Ok(())
    }

    fn activate(&self, z: f64) -> f64 {
        match self.config.activation {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    fn activation_slope(&self, z: f64) -> f64 {
        match self.config.activation {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    fn trace(&self, x: &[f64]) -> ForwardTrace {
        let depth = self.layout.len();
        let mut inputs = Vec::with_capacity(depth);
        let mut pre = Vec::with_capacity(depth);
        let mut h = x.to_vec();
        for (l, layer) in self.layout.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.fan_out);
            for o in 0..layer.fan_out {
                let row =
                    &self.params[layer.weight_offset + o * layer.fan_in..layer.weight_offset + (o + 1) * layer.fan_in];
                z.push(layer.scale * dot(row, &h) + self.params[layer.bias_offset + o]);
            }
            let next = if l + 1 < depth { z.iter().map(|&v| self.activate(v)).collect() } else { Vec::new() };
            inputs.push(std::mem::replace(&mut h, next));
            pre.push(z);
        }
        ForwardTrace { inputs, pre }
    }

    /// Logits `f(x; θ)`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.trace(x).pre.pop().unwrap_or_default())
    }

    /// Activations of the last hidden layer, or `x` itself for a network
    /// without hidden layers.
    pub fn last_hidden(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.trace(x).inputs.pop().unwrap_or_default())
    }

    /// Argmax of the logits, ties to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    /// Accumulates `weight * J(x)^T seed` into `out`, with `J` the Jacobian of
    /// the logits.
    fn backward_into(&self, trace: &ForwardTrace, seed: &[f64], weight: f64, out: &mut [f64]) {
        let mut delta: Vec<f64> = seed.iter().map(|s| s * weight).collect();
        for l in (0..self.layout.len()).rev() {
            let layer = &self.layout[l];
            let h = &trace.inputs[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let base = layer.weight_offset + o * layer.fan_in;
                let ds = d * layer.scale;
                for (g, &hi) in out[base..base + layer.fan_in].iter_mut().zip(h) {
                    *g += ds * hi;
                }
                out[layer.bias_offset + o] += d;
            }
            if l == 0 {
                break;
            }
            let z_prev = &trace.pre[l - 1];
            let mut prev = vec![0.0; layer.fan_in];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let ds = d * layer.scale;
                for (i, p) in prev.iter_mut().enumerate() {
                    *p += ds * layer.weight(&self.params, o, i);
                }
            }
            for (p, &z) in prev.iter_mut().zip(z_prev) {
                *p *= self.activation_slope(z);
            }
            delta = prev;
        }
    }

    /// Vector-Jacobian product `Σ_i seed_i ∇_θ f^i(x)`.
    pub fn output_gradient(&self, x: &[f64], seed: &[f64]) -> Result<GradientVector> {
        self.check_input(x)?;
        if seed.len() != self.config.num_classes {
            return Err(Error::Input("seed length must equal num_classes".into()));
        }
        let trace = self.trace(x);
        let mut out = vec![0.0; self.params.len()];
        self.backward_into(&trace, seed, 1.0, &mut out);
        Ok(GradientVector(out))
    }

    /// `∇_θ f^i(x; θ)` for every class `i`.
    pub fn per_class_gradients(&self, x: &[f64]) -> Result<Vec<GradientVector>> {
        self.check_input(x)?;
        let trace = self.trace(x);
        let k = self.config.num_classes;
        Ok((0..k)
            .map(|i| {
                let mut seed = vec![0.0; k];
                seed[i] = 1.0;
                let mut out = vec![0.0; self.params.len()];
                self.backward_into(&trace, &seed, 1.0, &mut out);
                GradientVector(out)
            })
            .collect())
    }

    fn check_sample(&self, sample: &Sample) -> Result<()> {
        self.check_input(&sample.x)?;
        if sample.y >= self.config.num_classes {
            return Err(Error::Input(format!(
                "label {} out of range for {} classes",
                sample.y, self.config.num_classes
            )));
        }
        Ok(())
    }

    pub fn loss(&self, sample: &Sample, kind: LossKind) -> Result<f64> {
        self.check_sample(sample)?;
        let logits = self.trace(&sample.x).pre.pop().unwrap_or_default();
        Ok(loss_from_logits(&logits, sample.y, kind))
    }

    /// `∇_θ ℓ(f(x; θ), y)` via one backward pass seeded with the residual.
    pub fn loss_gradient(&self, sample: &Sample, kind: LossKind) -> Result<GradientVector> {
        let mut out = vec![0.0; self.params.len()];
        self.accumulate_loss_gradient(sample, kind, 1.0, &mut out)?;
        Ok(GradientVector(out))
    }

    /// Adds `weight * ∇_θ ℓ` to `out`; returns `(loss, predicted class)`.
    pub(crate) fn accumulate_loss_gradient(
        &self,
        sample: &Sample,
        kind: LossKind,
        weight: f64,
        out: &mut [f64],
    ) -> Result<(f64, usize)> {
        self.check_sample(sample)?;
        let trace = self.trace(&sample.x);
        let logits = trace.pre.last().expect("at least one layer");
        let seed = residual(logits, sample.y, kind);
        self.backward_into(&trace, &seed, weight, out);
        Ok((loss_from_logits(logits, sample.y, kind), argmax(logits)))
    }
}

/// Softmax with max subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Lowest index of the maximum entry.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn loss_from_logits(logits: &[f64], y: usize, kind: LossKind) -> f64 {
    match kind {
        LossKind::CrossEntropy => {
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
            lse - logits[y]
        }
        LossKind::Mse => {
            0.5 * logits
                .iter()
                .enumerate()
                .map(|(i, &f)| {
                    let t = if i == y { 1.0 } else { 0.0 };
                    (f - t) * (f - t)
                })
                .sum::<f64>()
        }
    }
}

/// `d = ∂ℓ/∂f`: `σ(f) - onehot(y)` for cross-entropy, `f - onehot(y)` for MSE.
pub fn residual(logits: &[f64], y: usize, kind: LossKind) -> Vec<f64> {
    let mut d = match kind {
        LossKind::CrossEntropy => softmax(logits),
        LossKind::Mse => logits.to_vec(),
    };
    d[y] -= 1.0;
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSchedule {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub accuracy_target: f64,
    pub loss_tolerance: f64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self { learning_rate: 0.001, max_epochs: 5000, accuracy_target: 0.99, loss_tolerance: 1e-7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolEvaluation {
    pub loss: f64,
    pub accuracy: f64,
}

/// Reduced loss and accuracy over `samples`, plus the reduced gradient.
pub fn evaluate_with_gradient(
    net: &Network,
    samples: &[Sample],
    kind: LossKind,
    reduction: Reduction,
) -> Result<(PoolEvaluation, GradientVector)> {
    let weight = match reduction {
        Reduction::Mean => 1.0 / samples.len().max(1) as f64,
        Reduction::Sum => 1.0,
    };
    let mut grad = vec![0.0; net.num_params()];
    let mut loss = 0.0;
    let mut correct = 0usize;
    for s in samples {
        let (l, pred) = net.accumulate_loss_gradient(s, kind, weight, &mut grad)?;
        loss += weight * l;
        correct += usize::from(pred == s.y);
    }
    let accuracy = correct as f64 / samples.len().max(1) as f64;
    Ok((PoolEvaluation { loss, accuracy }, GradientVector(grad)))
}

pub fn evaluate(net: &Network, samples: &[Sample], kind: LossKind, reduction: Reduction) -> Result<PoolEvaluation> {
    let weight = match reduction {
        Reduction::Mean => 1.0 / samples.len().max(1) as f64,
        Reduction::Sum => 1.0,
    };
    let mut loss = 0.0;
    let mut correct = 0usize;
    for s in samples {
        net.check_sample(s)?;
        let logits = net.trace(&s.x).pre.pop().unwrap_or_default();
        loss += weight * loss_from_logits(&logits, s.y, kind);
        correct += usize::from(argmax(&logits) == s.y);
    }
    Ok(PoolEvaluation { loss, accuracy: correct as f64 / samples.len().max(1) as f64 })
}

/// One full-batch gradient-descent step; returns the loss before the step.
pub fn gradient_step(
    net: &mut Network,
    samples: &[Sample],
    learning_rate: f64,
    kind: LossKind,
    reduction: Reduction,
) -> Result<f64> {
    let (eval, grad) = evaluate_with_gradient(net, samples, kind, reduction)?;
    for (p, g) in net.params.iter_mut().zip(&grad.0) {
        *p -= learning_rate * g;
    }
    Ok(eval.loss)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub net: Network,
    pub epochs_used: usize,
    pub final_loss: f64,
    pub final_accuracy: f64,
}

/// Full-batch gradient descent on the mean loss. Stops at the first of:
/// training accuracy reaching `accuracy_target`, an epoch-to-epoch loss change
/// below `loss_tolerance`, or `max_epochs`. The input network is untouched.
pub fn train_to_convergence(
    net: &Network,
    pool: &LabeledPool,
    schedule: &TrainSchedule,
    kind: LossKind,
) -> Result<TrainOutcome> {
    let mut trained = net.clone();
    let (epochs_used, eval) = train_in_place(&mut trained, pool, schedule, kind)?;
    Ok(TrainOutcome { net: trained, epochs_used, final_loss: eval.loss, final_accuracy: eval.accuracy })
}

/// As [`train_to_convergence`], mutating `net`. Returns `(epochs, final evaluation)`.
pub fn train_in_place(
    net: &mut Network,
    pool: &LabeledPool,
    schedule: &TrainSchedule,
    kind: LossKind,
) -> Result<(usize, PoolEvaluation)> {
    if pool.is_empty() {
        return Err(Error::Input("cannot train on an empty pool".into()));
    }
    if !(schedule.learning_rate >= 0.0) {
        return Err(Error::Config(format!("learning_rate must be >= 0, got {}", schedule.learning_rate)));
    }
    let samples = pool.samples();
    let mut previous: Option<f64> = None;
    let mut epochs = 0;
    while epochs < schedule.max_epochs {
        let (eval, grad) = evaluate_with_gradient(net, samples, kind, Reduction::Mean)?;
        if !eval.loss.is_finite() || grad.0.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { epoch: epochs, loss: eval.loss });
        }
        if eval.accuracy >= schedule.accuracy_target {
            break;
        }
        if let Some(prev) = previous {
            if (prev - eval.loss).abs() < schedule.loss_tolerance {
                break;
            }
        }
        for (p, g) in net.params.iter_mut().zip(&grad.0) {
            *p -= schedule.learning_rate * g;
        }
        previous = Some(eval.loss);
        epochs += 1;
    }
    let last = evaluate(net, samples, kind, Reduction::Mean)?;
    if !last.loss.is_finite() {
        return Err(Error::Divergence { epoch: epochs, loss: last.loss });
    }
    Ok((epochs, last))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_config(d: usize, k: usize) -> NetworkConfig {
        NetworkConfig {
            input_dim: d,
            hidden_dims: vec![],
            num_classes: k,
            activation: Activation::Identity,
            init_scheme: InitScheme::Standard,
            seed: 1,
        }
    }

    fn sample(x: Vec<f64>, y: usize) -> Sample {
        Sample { x, y, index: 0 }
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = NetworkConfig { seed: 7, ..NetworkConfig::mlp(5, 3, 0) };
        let a = Network::init(&cfg).unwrap();
        let b = Network::init(&cfg).unwrap();
        assert_eq!(
            a.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>(),
            b.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>()
        );
        let other = Network::init(&NetworkConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.params(), other.params());
    }

    #[test]
    fn degenerate_depth_is_one_linear_layer() {
        let net = Network::init(&linear_config(4, 3)).unwrap();
        assert_eq!(net.layout().len(), 1);
        assert_eq!(net.num_params(), 3 * 4 + 3);
        let l = net.layout()[0];
        assert_eq!((l.fan_in, l.fan_out, l.weight_offset, l.bias_offset), (4, 3, 0, 12));
        assert!(net.params()[12..].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(Network::init(&linear_config(0, 3)).is_err());
        assert!(Network::init(&linear_config(3, 1)).is_err());
        let cfg = NetworkConfig { hidden_dims: vec![4, 0], ..NetworkConfig::mlp(3, 2, 0) };
        assert!(matches!(Network::init(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn standard_init_variance() {
        let cfg = NetworkConfig {
            input_dim: 200,
            hidden_dims: vec![60],
            num_classes: 2,
            activation: Activation::Relu,
            init_scheme: InitScheme::Standard,
            seed: 3,
        };
        let net = Network::init(&cfg).unwrap();
        let l = net.layout()[0];
        let w = &net.params()[l.weight_offset..l.bias_offset];
        assert!(w.len() >= 10_000);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (w.len() - 1) as f64;
        assert!((var - 0.01).abs() < 0.001, "variance {var}");
    }

    #[test]
    fn zero_params_give_zero_logits() {
        let cfg = NetworkConfig::mlp(3, 4, 0);
        let net0 = Network::init(&cfg).unwrap();
        let net = Network::from_params(&cfg, vec![0.0; net0.num_params()]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 0.5]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn identity_layer() {
        let cfg = linear_config(3, 3);
        let mut params = vec![0.0; 12];
        for i in 0..3 {
            params[i * 3 + i] = 1.0;
        }
        let net = Network::from_params(&cfg, params).unwrap();
        assert_eq!(net.forward(&[1.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(matches!(net.forward(&[1.0, 0.0]), Err(Error::Input(_))));
    }

    #[test]
    fn uniform_logits_cross_entropy_is_ln_k() {
        for k in 2..6 {
            let l = loss_from_logits(&vec![0.3; k], 1, LossKind::CrossEntropy);
            assert!((l - (k as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn mse_exact_fit_is_zero() {
        assert_eq!(loss_from_logits(&[0.0, 1.0, 0.0], 1, LossKind::Mse), 0.0);
        assert_eq!(residual(&[0.0, 1.0, 0.0], 1, LossKind::Mse), vec![0.0; 3]);
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let l = loss_from_logits(&[1000.0, -1000.0, 999.0], 1, LossKind::CrossEntropy);
        assert!(l.is_finite());
        assert!((l - 2000.0 - (1.0 + (-1.0f64).exp()).ln()).abs() < 1e-9);
    }

    #[test]
    fn linear_loss_gradient_is_outer_product() {
        let mut net = Network::init(&linear_config(3, 2)).unwrap();
        net.params_mut()[6] = 0.4;
        let s = sample(vec![0.5, -1.0, 2.0], 1);
        let logits = net.forward(&s.x).unwrap();
        let d = residual(&logits, 1, LossKind::CrossEntropy);
        let g = net.loss_gradient(&s, LossKind::CrossEntropy).unwrap();
        for o in 0..2 {
            for i in 0..3 {
                assert!((g.0[o * 3 + i] - d[o] * s.x[i]).abs() < 1e-15);
            }
            assert!((g.0[6 + o] - d[o]).abs() < 1e-15);
        }
    }

    #[test]
    fn linear_per_class_structure() {
        let net = Network::init(&linear_config(3, 2)).unwrap();
        let x = [0.2, -0.7, 1.5];
        let grads = net.per_class_gradients(&x).unwrap();
        for (i, g) in grads.iter().enumerate() {
            for j in 0..2 {
                for c in 0..3 {
                    let expect = if i == j { x[c] } else { 0.0 };
                    assert_eq!(g.0[j * 3 + c], expect);
                }
                assert_eq!(g.0[6 + j], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn zero_learning_rate_leaves_params() {
        let net = Network::init(&NetworkConfig::mlp(2, 2, 4)).unwrap();
        let pool = LabeledPool::new(vec![sample(vec![1.0, 0.0], 0), sample(vec![0.0, 1.0], 1)]);
        let schedule = TrainSchedule { learning_rate: 0.0, accuracy_target: 2.0, ..Default::default() };
        let out = train_to_convergence(&net, &pool, &schedule, LossKind::CrossEntropy).unwrap();
        assert_eq!(out.net.params(), net.params());
        assert_eq!(out.epochs_used, 1);
    }

    #[test]
    fn divergence_names_epoch() {
        let cfg = linear_config(1, 2);
        let net = Network::from_params(&cfg, vec![1.0, -1.0, 0.0, 0.0]).unwrap();
        let pool = LabeledPool::new(vec![sample(vec![1e200], 1)]);
        let schedule = TrainSchedule { learning_rate: 1e200, accuracy_target: 2.0, ..Default::default() };
        match train_to_convergence(&net, &pool, &schedule, LossKind::Mse) {
            Err(Error::Divergence { epoch, .. }) => assert!(epoch <= 2),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
