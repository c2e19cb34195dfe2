//! Five-layer tanh perceptron trained by full-batch (or per-sample) gradient
//! descent with momentum on a sum-of-squares loss.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::FeatureVector;

/// Hidden layer widths between the feature input and the class outputs.
pub const HIDDEN_LAYERS: [usize; 3] = [100, 50, 10];
pub const DEFAULT_CLASSES: usize = 6;
const FORMAT_HEADER: &str = "thermoprint-mlp";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BatchMode {
    #[default]
    FullBatch,
    PerSample,
}

impl fmt::Display for BatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BatchMode::FullBatch => "full-batch",
            BatchMode::PerSample => "per-sample",
        })
    }
}

impl FromStr for BatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full-batch" => Ok(BatchMode::FullBatch),
            "per-sample" => Ok(BatchMode::PerSample),
            other => Err(Error::Config(format!("unknown batch mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_mode: BatchMode,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            epochs: 500,
            batch_mode: BatchMode::FullBatch,
            init_scale: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum {} is not in [0, 1)",
                self.momentum
            )));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Config(format!(
                "init scale {} must be positive",
                self.init_scale
            )));
        }
        Ok(())
    }
}

/// One fully connected layer; `weights` is row-major `fan_out x fan_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            fan_in,
            fan_out,
            weights: vec![0.0; fan_in * fan_out],
            biases: vec![0.0; fan_out],
        }
    }

    pub fn weight(&self, out: usize, inp: usize) -> f64 {
        self.weights[out * self.fan_in + inp]
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.biases.iter_mut())
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.biases.iter())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_dims: Vec<usize>,
    layers: Vec<Layer>,
    /// Raw feature counts are divided by this before entering the network.
    pub input_scale: f64,
    /// Echo of the configuration the model was trained with, if any.
    pub trained_with: Option<TrainConfig>,
}

/// Per-layer gradients, shaped like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    fn zeros_like(model: &MlpModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| Layer::zeros(l.fan_in, l.fan_out))
                .collect(),
        }
    }

    fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.params_mut().zip(b.params()) {
                *x += y;
            }
        }
    }

    fn scale(&mut self, k: f64) {
        for layer in &mut self.layers {
            for x in layer.params_mut() {
                *x *= k;
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.params())
    }
}

/// Output of a forward pass; `activations[0]` is the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub activations: Vec<Vec<f64>>,
}

impl Forward {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("at least the input")
    }
}

impl MlpModel {
    /// Standard topology: `input_dim -> 100 -> 50 -> 10 -> num_classes`.
    pub fn standard_dims(input_dim: usize, num_classes: usize) -> Vec<usize> {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(&HIDDEN_LAYERS);
        dims.push(num_classes);
        dims
    }

    /// All-zero model with the given five layer widths.
    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        if layer_dims.len() != 5 || layer_dims.contains(&0) {
            return Err(Error::Config(format!(
                "expected five non-zero layer widths, got {layer_dims:?}"
            )));
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            layers: layer_dims
                .windows(2)
                .map(|w| Layer::zeros(w[0], w[1]))
                .collect(),
            input_scale: 1.0,
            trained_with: None,
        })
    }

    /// Weights and biases uniform in `[-init_scale, init_scale]`.
    pub fn random(layer_dims: &[usize], init_scale: f64, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(layer_dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut model.layers {
            for p in layer.params_mut() {
                *p = rng.gen_range(-init_scale..=init_scale);
            }
        }
        Ok(model)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn num_classes(&self) -> usize {
        self.layer_dims[4]
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.params())
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::Shape {
                expected: self.input_dim(),
                got: len,
            });
        }
        Ok(())
    }

    /// Divides raw counts by the stored input scale.
    pub fn scale_input(&self, counts: &[u32]) -> Result<Vec<f64>> {
        self.check_input(counts.len())?;
        Ok(counts
            .iter()
            .map(|&c| f64::from(c) / self.input_scale)
            .collect())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        self.check_input(x.len())?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for layer in &self.layers {
            let input = activations.last().expect("non-empty");
            let out: Vec<f64> = (0..layer.fan_out)
                .map(|o| {
                    let row = &layer.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
                    let net: f64 = row.iter().zip(input).map(|(w, a)| w * a).sum();
                    (net + layer.biases[o]).tanh()
                })
                .collect();
            activations.push(out);
        }
        Ok(Forward { activations })
    }

    /// Gradients of `loss(forward(x), target)` by backpropagation.
    pub fn backward(&self, x: &[f64], target: &[f64]) -> Result<(Gradients, f64)> {
        if target.len() != self.num_classes() {
            return Err(Error::Shape {
                expected: self.num_classes(),
                got: target.len(),
            });
        }
        let fwd = self.forward(x)?;
        let out = fwd.output();
        let loss_value = loss(out, target);

        let mut grads = Gradients::zeros_like(self);
        // delta = dL/dnet for the current layer
        let mut delta: Vec<f64> = out
            .iter()
            .zip(target)
            .map(|(a, t)| (a - t) * (1.0 - a * a))
            .collect();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = &fwd.activations[k];
            let g = &mut grads.layers[k];
            for (o, &d) in delta.iter().enumerate() {
                g.biases[o] = d;
                let row = &mut g.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
                for (gw, a) in row.iter_mut().zip(input) {
                    *gw = d * a;
                }
            }
            if k > 0 {
                delta = (0..layer.fan_in)
                    .map(|i| {
                        let back: f64 = (0..layer.fan_out)
                            .map(|o| layer.weights[o * layer.fan_in + i] * delta[o])
                            .sum();
                        back * (1.0 - input[i] * input[i])
                    })
                    .collect();
            }
        }
        Ok((grads, loss_value))
    }

    pub fn predict_scaled(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(self.forward(x)?.output()))
    }

    pub fn predict(&self, counts: &[u32]) -> Result<usize> {
        self.predict_scaled(&self.scale_input(counts)?)
    }

    fn check_finite(&self) -> Result<()> {
        if self.params().all(|p| p.is_finite())
            && self.input_scale.is_finite()
            && self.input_scale > 0.0
        {
            Ok(())
        } else {
            Err(Error::parse("model", "non-finite parameter"))
        }
    }
}

/// Half the squared Euclidean distance.
pub fn loss(output: &[f64], target: &[f64]) -> f64 {
    0.5 * output
        .iter()
        .zip(target)
        .map(|(o, t)| (o - t) * (o - t))
        .sum::<f64>()
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// +1 at `label`, -1 elsewhere.
pub fn one_hot(label: usize, num_classes: usize) -> Vec<f64> {
    (0..num_classes)
        .map(|c| if c == label { 1.0 } else { -1.0 })
        .collect()
}

/// Momentum state for one training run.
pub struct Trainer {
    model: MlpModel,
    velocity: Gradients,
    cfg: TrainConfig,
}

impl Trainer {
    pub fn new(model: MlpModel, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let velocity = Gradients::zeros_like(&model);
        Ok(Self {
            model,
            velocity,
            cfg,
        })
    }

    pub fn model(&self) -> &MlpModel {
        &self.model
    }

    pub fn into_model(self) -> MlpModel {
        self.model
    }

    /// `v = momentum * v - lr * grad; theta += v`.
    pub fn apply(&mut self, grad: &Gradients) {
        let (mu, lr) = (self.cfg.momentum, self.cfg.learning_rate);
        for ((layer, vel), g) in self
            .model
            .layers
            .iter_mut()
            .zip(&mut self.velocity.layers)
            .zip(&grad.layers)
        {
            for ((p, v), d) in layer.params_mut().zip(vel.params_mut()).zip(g.params()) {
                *v = mu * *v - lr * d;
                *p += *v;
            }
        }
    }

    /// One pass over `samples`; returns the mean per-sample loss seen during
    /// the pass.
    ///
    /// Full-batch mode applies a single update with the gradient of the mean
    /// loss over all samples.
    pub fn epoch(&mut self, samples: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
        let mut total = 0.0;
        match self.cfg.batch_mode {
            BatchMode::FullBatch => {
                let mut sum = Gradients::zeros_like(&self.model);
                for (x, t) in samples {
                    let (g, l) = self.model.backward(x, t)?;
                    sum.accumulate(&g);
                    total += l;
                }
                sum.scale(1.0 / samples.len() as f64);
                self.apply(&sum);
            }
            BatchMode::PerSample => {
                for (x, t) in samples {
                    let (g, l) = self.model.backward(x, t)?;
                    total += l;
                    self.apply(&g);
                }
            }
        }
        Ok(total / samples.len().max(1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub loss_history: Vec<f64>,
}

/// Largest count in the training data, or 1 when every count is zero.
pub fn input_scale_for(train: &[FeatureVector]) -> f64 {
    let max = train
        .iter()
        .flat_map(|v| v.counts.iter().copied())
        .max()
        .unwrap_or(0);
    f64::from(max.max(1))
}

/// Trains a fresh standard-topology network on labeled feature vectors.
pub fn train(
    train: &[FeatureVector],
    num_classes: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let input_dim = train
        .first()
        .map(|v| v.len())
        .ok_or_else(|| Error::Config("empty training set".into()))?;
    let mut model = MlpModel::random(
        &MlpModel::standard_dims(input_dim, num_classes),
        cfg.init_scale,
        cfg.seed,
    )?;
    model.input_scale = input_scale_for(train);
    model.trained_with = Some(*cfg);

    let samples = train
        .iter()
        .map(|v| {
            let label = v
                .label
                .ok_or_else(|| Error::Config("unlabeled training sample".into()))?;
            if label >= num_classes {
                return Err(Error::Config(format!(
                    "label {label} outside 0..{num_classes}"
                )));
            }
            Ok((model.scale_input(&v.counts)?, one_hot(label, num_classes)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut trainer = Trainer::new(model, *cfg)?;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let l = trainer.epoch(&samples)?;
        if !l.is_finite() || trainer.model().params().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        history.push(l);
    }
    Ok(TrainOutcome {
        model: trainer.into_model(),
        loss_history: history,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub correct: usize,
    pub total: usize,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl Evaluation {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    pub fn trace(&self) -> usize {
        (0..self.confusion.len())
            .map(|i| self.confusion[i][i])
            .sum()
    }

    /// Accuracy as a percentage with two decimals, e.g. `91.47%`.
    pub fn percent(&self) -> String {
        format!("{:.2}%", 100.0 * self.accuracy())
    }

    pub fn confusion_table(&self) -> String {
        let n = self.confusion.len();
        let mut out = String::from("true\\pred");
        for c in 0..n {
            out.push_str(&format!("\t{c}"));
        }
        out.push('\n');
        for (t, row) in self.confusion.iter().enumerate() {
            out.push_str(&t.to_string());
            for v in row {
                out.push_str(&format!("\t{v}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn evaluate(model: &MlpModel, test: &[FeatureVector]) -> Result<Evaluation> {
    let n = model.num_classes();
    let mut confusion = vec![vec![0; n]; n];
    let mut correct = 0;
    for v in test {
        let label = v
            .label
            .ok_or_else(|| Error::Config("unlabeled test sample".into()))?;
        if label >= n {
            return Err(Error::Config(format!("label {label} outside 0..{n}")));
        }
        let predicted = model.predict(&v.counts)?;
        confusion[label][predicted] += 1;
        if predicted == label {
            correct += 1;
        }
    }
    Ok(Evaluation {
        correct,
        total: test.len(),
        confusion,
    })
}

fn join<T: fmt::Display>(values: impl IntoIterator<Item = T>) -> String {
    values
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Self-describing text encoding. `f64` values use Rust's shortest
/// round-trip formatting so save/load is bit-exact.
pub fn write_model(model: &MlpModel) -> String {
    let mut out = format!("{FORMAT_HEADER} {FORMAT_VERSION}\n");
    out.push_str(&format!("layer_dims {}\n", join(&model.layer_dims)));
    out.push_str(&format!("input_scale {}\n", model.input_scale));
    if let Some(cfg) = &model.trained_with {
        out.push_str(&format!("learning_rate {}\n", cfg.learning_rate));
        out.push_str(&format!("momentum {}\n", cfg.momentum));
        out.push_str(&format!("epochs {}\n", cfg.epochs));
        out.push_str(&format!("batch_mode {}\n", cfg.batch_mode));
        out.push_str(&format!("init_scale {}\n", cfg.init_scale));
        out.push_str(&format!("seed {}\n", cfg.seed));
    }
    for (k, layer) in model.layers.iter().enumerate() {
        out.push_str(&format!("weights {k} {} {}\n", layer.fan_out, layer.fan_in));
        for row in layer.weights.chunks(layer.fan_in) {
            out.push_str(&join(row));
            out.push('\n');
        }
        out.push_str(&format!("biases {k} {}\n", layer.fan_out));
        out.push_str(&join(&layer.biases));
        out.push('\n');
    }
    out
}

pub fn parse_model(text: &str) -> Result<MlpModel> {
    let bad = |msg: String| Error::parse("model", msg);
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::parse("model", format!("unexpected end before {what}")))
    };
    fn nums<T: FromStr>(s: &str) -> Result<Vec<T>> {
        s.split_whitespace()
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::parse("model", format!("bad number {v:?}")))
            })
            .collect()
    }

    let header = next("header")?;
    if header.trim() != format!("{FORMAT_HEADER} {FORMAT_VERSION}") {
        return Err(bad(format!("unsupported header {header:?}")));
    }

    let mut dims = None;
    let mut input_scale = None;
    let mut cfg = TrainConfig::default();
    let mut cfg_seen = false;
    let mut layers = Vec::new();
    while let Some(line) = lines.next() {
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        let rest = rest.trim();
        let single = |v: &str| bad(format!("bad value {v:?} for {key}"));
        match key {
            "layer_dims" => dims = Some(nums::<usize>(rest)?),
            "input_scale" => input_scale = Some(rest.parse::<f64>().map_err(|_| single(rest))?),
            "learning_rate" => {
                cfg.learning_rate = rest.parse().map_err(|_| single(rest))?;
                cfg_seen = true;
            }
            "momentum" => cfg.momentum = rest.parse().map_err(|_| single(rest))?,
            "epochs" => cfg.epochs = rest.parse().map_err(|_| single(rest))?,
            "batch_mode" => cfg.batch_mode = rest.parse()?,
            "init_scale" => cfg.init_scale = rest.parse().map_err(|_| single(rest))?,
            "seed" => cfg.seed = rest.parse().map_err(|_| single(rest))?,
            "weights" => {
                let shape = nums::<usize>(rest)?;
                let [k, fan_out, fan_in] = shape[..] else {
                    return Err(bad(format!("bad weights header {line:?}")));
                };
                if k != layers.len() {
                    return Err(bad(format!("layer {k} out of order")));
                }
                let mut weights = Vec::with_capacity(fan_in * fan_out);
                for _ in 0..fan_out {
                    let row = nums::<f64>(
                        lines
                            .next()
                            .ok_or_else(|| bad("missing weight row".into()))?,
                    )?;
                    if row.len() != fan_in {
                        return Err(bad(format!(
                            "layer {k} row has {} values, expected {fan_in}",
                            row.len()
                        )));
                    }
                    weights.extend(row);
                }
                let bias_header = lines.next().ok_or_else(|| bad("missing biases".into()))?;
                if nums::<usize>(bias_header.strip_prefix("biases").unwrap_or("x"))? != [k, fan_out]
                {
                    return Err(bad(format!("bad biases header {bias_header:?}")));
                }
                let biases =
                    nums::<f64>(lines.next().ok_or_else(|| bad("missing bias row".into()))?)?;
                if biases.len() != fan_out {
                    return Err(bad(format!(
                        "layer {k} has {} biases, expected {fan_out}",
                        biases.len()
                    )));
                }
                layers.push(Layer {
                    fan_in,
                    fan_out,
                    weights,
                    biases,
                });
            }
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
    }

    let dims = dims.ok_or_else(|| bad("missing layer_dims".into()))?;
    let mut model = MlpModel::zeros(&dims)?;
    if layers.len() != 4
        || layers
            .iter()
            .zip(dims.windows(2))
            .any(|(l, w)| l.fan_in != w[0] || l.fan_out != w[1])
    {
        return Err(bad("layer shapes do not chain with layer_dims".into()));
    }
    model.layers = layers;
    model.input_scale = input_scale.ok_or_else(|| bad("missing input_scale".into()))?;
    model.trained_with = cfg_seen.then_some(cfg);
    model.check_finite()?;
    Ok(model)
}

pub fn save_model(path: impl AsRef<Path>, model: &MlpModel) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text)
}
