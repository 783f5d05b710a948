//! A small learnable high-band predictor.
//!
//! The model maps a window of the (mean-centered) low band, the window's
//! voiced flags and a learned style vector to the high band over the same
//! window. It is a plain multilayer perceptron with `tanh` hidden units and
//! a linear output, trained by fixed-step SGD on the mean absolute error
//! between predicted and true high band.
//!
//! Whole contours are converted by sliding windows at a hop of half the
//! window length and overlap-adding the predictions with triangular
//! weights, then recomposing with the original low band.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::contour::{F0Contour, Style};
use crate::corpus::LabeledContour;
use crate::error::{Error, Result};
use crate::style_engine::{decompose, recompose_with_high, StyleBands};

pub const CHECKPOINT_VERSION: u32 = 1;
const NUM_STYLES: usize = 2;
/// Shrinks the output layer's initial weights. Small initial outputs keep
/// the untrained directions of the model close to zero, which matters when
/// converting contours unlike anything in the training set.
const OUTPUT_INIT_SCALE: f64 = 0.03;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Frames per window; must be even.
    pub window: usize,
    pub hidden_sizes: Vec<usize>,
    pub style_dim: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            window: 64,
            hidden_sizes: vec![128, 128],
            style_dim: 16,
            seed: 0,
        }
    }
}

impl ModelConfig {
    fn validate(&self) -> Result<()> {
        if self.window < 2 || !self.window.is_multiple_of(2) {
            return Err(Error::invalid(format!("window must be even and >= 2, got {}", self.window)));
        }
        if self.hidden_sizes.contains(&0) {
            return Err(Error::invalid("hidden layers must be non-empty"));
        }
        Ok(())
    }

    fn input_dim(&self) -> usize {
        2 * self.window + self.style_dim
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub steps: usize,
    /// Windows per step.
    pub batch: usize,
    pub seed: u64,
    /// Wavelet depth used to build training targets.
    pub levels: usize,
    /// Steps averaged into one loss-history entry.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            steps: 20_000,
            batch: 32,
            seed: 0,
            levels: crate::DEFAULT_LEVELS,
            log_every: 100,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::invalid("learning rate must be finite and >= 0"));
        }
        if self.steps == 0 || self.batch == 0 || self.log_every == 0 {
            return Err(Error::invalid("steps, batch and log interval must be >= 1"));
        }
        Ok(())
    }
}

/// One training or evaluation window.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Low band, mean-centered over the window.
    pub low: Vec<f64>,
    pub flags: Vec<bool>,
    pub style: Style,
    /// True high band.
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LayerShape {
    inputs: usize,
    outputs: usize,
    weights: usize,
    biases: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConverterModel {
    config: ModelConfig,
    layers: Vec<LayerShape>,
    style_offset: usize,
    params: Vec<f64>,
}

fn layout(config: &ModelConfig) -> (Vec<LayerShape>, usize, usize) {
    let mut sizes = vec![config.input_dim()];
    sizes.extend(&config.hidden_sizes);
    sizes.push(config.window);
    let mut offset = 0;
    let layers = sizes
        .windows(2)
        .map(|w| {
            let shape = LayerShape {
                inputs: w[0],
                outputs: w[1],
                weights: offset,
                biases: offset + w[0] * w[1],
            };
            offset += w[0] * w[1] + w[1];
            shape
        })
        .collect();
    let style_offset = offset;
    (layers, style_offset, offset + NUM_STYLES * config.style_dim)
}

/// Subtracts the window mean.
pub fn center_window(low: &[f64]) -> Vec<f64> {
    let mean = low.iter().sum::<f64>() / low.len().max(1) as f64;
    low.iter().map(|v| v - mean).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl ConverterModel {
    /// Randomly initialized model: Xavier-uniform hidden layers, a
    /// down-scaled output layer, zero biases, unit-normal style vectors.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (layers, style_offset, total) = layout(&config);
        let mut params = vec![0.0; total];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let last = layers.len() - 1;
        for (l, shape) in layers.iter().enumerate() {
            let mut limit = (6.0 / (shape.inputs + shape.outputs) as f64).sqrt();
            if l == last {
                limit *= OUTPUT_INIT_SCALE;
            }
            for w in &mut params[shape.weights..shape.biases] {
                *w = rng.gen_range(-limit..limit);
            }
        }
        for s in &mut params[style_offset..] {
            *s = rng.sample(StandardNormal);
        }
        Ok(ConverterModel {
            config,
            layers,
            style_offset,
            params,
        })
    }

    /// Model whose weights and style vectors are all zero.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        let mut m = Self::new(config)?;
        m.params.fill(0.0);
        Ok(m)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn window(&self) -> usize {
        self.config.window
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn style_vector(&self, style: Style) -> &[f64] {
        let d = self.config.style_dim;
        let start = self.style_offset + style.index() * d;
        &self.params[start..start + d]
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn check_shapes(&self, low: &[f64], flags: &[bool]) -> Result<()> {
        let w = self.config.window;
        for len in [low.len(), flags.len()] {
            if len != w {
                return Err(Error::LengthMismatch {
                    expected: w,
                    actual: len,
                });
            }
        }
        if let Some(i) = low.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(())
    }

    fn input(&self, low: &[f64], flags: &[bool], style: Style) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.config.input_dim());
        x.extend_from_slice(low);
        x.extend(flags.iter().map(|&f| if f { 1.0 } else { 0.0 }));
        x.extend_from_slice(self.style_vector(style));
        x
    }

    /// Activations of every layer, input first; the last entry is the output.
    fn activations(&self, input: Vec<f64>) -> Vec<Vec<f64>> {
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input);
        for (l, shape) in self.layers.iter().enumerate() {
            let a = &acts[l];
            let w = &self.params[shape.weights..shape.biases];
            let b = &self.params[shape.biases..shape.biases + shape.outputs];
            let out: Vec<f64> = (0..shape.outputs)
                .map(|o| {
                    let z = b[o] + dot(&w[o * shape.inputs..(o + 1) * shape.inputs], a);
                    if l == last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            acts.push(out);
        }
        acts
    }

    /// Predicts the high band over one window. `low` must already be
    /// mean-centered (see [`center_window`]).
    pub fn forward(&self, low: &[f64], flags: &[bool], style: Style) -> Result<Vec<f64>> {
        self.check_shapes(low, flags)?;
        let mut acts = self.activations(self.input(low, flags, style));
        Ok(acts.pop().expect("at least one layer"))
    }

    fn check_batch(&self, batch: &[Sample]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        for s in batch {
            self.check_shapes(&s.low, &s.flags)?;
            if s.target.len() != self.config.window {
                return Err(Error::LengthMismatch {
                    expected: self.config.window,
                    actual: s.target.len(),
                });
            }
        }
        Ok(())
    }

    /// Mean absolute error over every frame of every window in `batch`.
    pub fn loss(&self, batch: &[Sample]) -> Result<f64> {
        self.check_batch(batch)?;
        Ok(self.loss_unchecked(batch))
    }

    fn loss_unchecked(&self, batch: &[Sample]) -> f64 {
        let total: f64 = batch
            .iter()
            .map(|s| {
                let y = self.activations(self.input(&s.low, &s.flags, s.style)).pop().unwrap();
                y.iter().zip(&s.target).map(|(p, t)| (p - t).abs()).sum::<f64>()
            })
            .sum();
        total / (batch.len() * self.config.window) as f64
    }

    /// Loss and its gradient with respect to every parameter. The
    /// subgradient of `|r|` at `r = 0` is taken as zero.
    pub fn loss_and_grad(&self, batch: &[Sample]) -> Result<(f64, Vec<f64>)> {
        self.check_batch(batch)?;
        Ok(self.loss_and_grad_unchecked(batch))
    }

    fn loss_and_grad_unchecked(&self, batch: &[Sample]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let norm = 1.0 / (batch.len() * self.config.window) as f64;
        let mut loss = 0.0;
        let last = self.layers.len() - 1;
        for s in batch {
            let acts = self.activations(self.input(&s.low, &s.flags, s.style));
            let y = &acts[last + 1];
            let mut delta: Vec<f64> = y
                .iter()
                .zip(&s.target)
                .map(|(p, t)| {
                    loss += (p - t).abs();
                    sign(p - t) * norm
                })
                .collect();
            for l in (0..=last).rev() {
                let shape = self.layers[l];
                let a_prev = &acts[l];
                if l != last {
                    for (d, a) in delta.iter_mut().zip(&acts[l + 1]) {
                        *d *= 1.0 - a * a;
                    }
                }
                let mut d_prev = vec![0.0; shape.inputs];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = shape.weights + o * shape.inputs;
                    for (g, a) in grad[row..row + shape.inputs].iter_mut().zip(a_prev) {
                        *g += d * a;
                    }
                    grad[shape.biases + o] += d;
                    for (dp, w) in d_prev.iter_mut().zip(&self.params[row..row + shape.inputs]) {
                        *dp += d * w;
                    }
                }
                delta = d_prev;
            }
            // `delta` now holds the gradient with respect to the input.
            let d = self.config.style_dim;
            let start = self.style_offset + s.style.index() * d;
            let style_grad = &delta[2 * self.config.window..];
            for (g, v) in grad[start..start + d].iter_mut().zip(style_grad) {
                *g += v;
            }
        }
        (loss * norm, grad)
    }

    /// Model outputs for every frame of every window, concatenated.
    fn outputs(&self, batch: &[Sample]) -> Vec<f64> {
        batch
            .iter()
            .flat_map(|s| self.activations(self.input(&s.low, &s.flags, s.style)).pop().unwrap())
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string(&Checkpoint::from(self))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Checkpoint::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("unreadable checkpoint: {e}")))?;
        ck.into_model()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointLayer {
    inputs: usize,
    outputs: usize,
    /// Row-major `outputs x inputs`.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    config: ModelConfig,
    layers: Vec<CheckpointLayer>,
    style_vectors: Vec<Vec<f64>>,
}

impl From<&ConverterModel> for Checkpoint {
    fn from(m: &ConverterModel) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: m.config.clone(),
            layers: m
                .layers
                .iter()
                .map(|s| CheckpointLayer {
                    inputs: s.inputs,
                    outputs: s.outputs,
                    weights: m.params[s.weights..s.biases].to_vec(),
                    biases: m.params[s.biases..s.biases + s.outputs].to_vec(),
                })
                .collect(),
            style_vectors: Style::ALL.iter().map(|&s| m.style_vector(s).to_vec()).collect(),
        }
    }
}

impl Checkpoint {
    fn into_model(self) -> Result<ConverterModel> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "checkpoint version {} does not match supported version {CHECKPOINT_VERSION}",
                self.version
            )));
        }
        let mut model = ConverterModel::zeros(self.config)?;
        if self.layers.len() != model.layers.len() || self.style_vectors.len() != NUM_STYLES {
            return Err(Error::Checkpoint("layer or style count does not match config".into()));
        }
        for (shape, layer) in model.layers.clone().iter().zip(&self.layers) {
            if layer.inputs != shape.inputs
                || layer.outputs != shape.outputs
                || layer.weights.len() != shape.inputs * shape.outputs
                || layer.biases.len() != shape.outputs
            {
                return Err(Error::Checkpoint(format!(
                    "layer shape {}x{} does not match config {}x{}",
                    layer.outputs, layer.inputs, shape.outputs, shape.inputs
                )));
            }
            model.params[shape.weights..shape.biases].copy_from_slice(&layer.weights);
            model.params[shape.biases..shape.biases + shape.outputs].copy_from_slice(&layer.biases);
        }
        let d = model.config.style_dim;
        for (k, v) in self.style_vectors.iter().enumerate() {
            if v.len() != d {
                return Err(Error::Checkpoint(format!("style vector of length {}, expected {d}", v.len())));
            }
            let start = model.style_offset + k * d;
            model.params[start..start + d].copy_from_slice(v);
        }
        if !model.is_finite() {
            return Err(Error::Checkpoint("checkpoint holds non-finite weights".into()));
        }
        Ok(model)
    }
}

/// Cuts decomposed contours into windows on the same hop-`window/2` grid
/// that [`convert_style`] uses, anchored at frame 0.
pub fn training_windows(corpus: &[LabeledContour], window: usize, levels: usize) -> Result<Vec<Sample>> {
    let hop = window / 2;
    let mut out = Vec::new();
    for item in corpus {
        let bands = decompose(&item.contour, levels)?;
        let mut start = 0;
        while start + window <= bands.len() {
            out.push(window_sample(&bands, start, window, item.label));
            start += hop;
        }
    }
    Ok(out)
}

fn window_sample(bands: &StyleBands, start: usize, window: usize, style: Style) -> Sample {
    let r = start..start + window;
    Sample {
        low: center_window(&bands.low[r.clone()]),
        flags: bands.voiced[r.clone()].to_vec(),
        style,
        target: bands.high[r].to_vec(),
    }
}

/// Runs fixed-step SGD. Returns the trained model and the mean loss over
/// each block of `log_every` steps.
pub fn train(
    model: &ConverterModel,
    corpus: &[LabeledContour],
    config: &TrainConfig,
) -> Result<(ConverterModel, Vec<f64>)> {
    config.validate()?;
    let windows = training_windows(corpus, model.window(), config.levels)?;
    train_on_windows(model, &windows, config)
}

pub fn train_on_windows(
    model: &ConverterModel,
    windows: &[Sample],
    config: &TrainConfig,
) -> Result<(ConverterModel, Vec<f64>)> {
    config.validate()?;
    if windows.len() < config.batch {
        return Err(Error::invalid(format!(
            "corpus yields {} windows, fewer than the batch size {}",
            windows.len(),
            config.batch
        )));
    }
    model.check_batch(windows)?;
    let mut model = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = Vec::with_capacity(config.steps / config.log_every + 1);
    let mut acc = 0.0;
    let mut count = 0;
    let mut batch = Vec::with_capacity(config.batch);
    for step in 0..config.steps {
        batch.clear();
        batch.extend((0..config.batch).map(|_| windows[rng.gen_range(0..windows.len())].clone()));
        let (loss, grad) = model.loss_and_grad_unchecked(&batch);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { step, loss });
        }
        for (p, g) in model.params.iter_mut().zip(&grad) {
            *p -= config.learning_rate * g;
        }
        acc += loss;
        count += 1;
        if count == config.log_every {
            history.push(acc / count as f64);
            acc = 0.0;
            count = 0;
        }
    }
    if count > 0 {
        history.push(acc / count as f64);
    }
    Ok((model, history))
}

/// Compares analytic and central-difference gradients on at least 100
/// randomly chosen parameters and returns the largest
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
///
/// Coordinates whose `±epsilon` perturbation flips the sign of any residual
/// straddle a kink of the absolute loss and are redrawn.
pub fn grad_check(model: &ConverterModel, sample: &[Sample], epsilon: f64) -> Result<f64> {
    Ok(grad_check_report(model, sample, epsilon, 100)?.max_rel_error)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coords: Vec<usize>,
    pub skipped: usize,
}

pub fn grad_check_report(
    model: &ConverterModel,
    sample: &[Sample],
    epsilon: f64,
    min_coords: usize,
) -> Result<GradCheckReport> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    model.check_batch(sample)?;
    let (_, analytic) = model.loss_and_grad_unchecked(sample);
    let targets: Vec<f64> = sample.iter().flat_map(|s| s.target.iter().copied()).collect();
    let signs = |y: &[f64]| -> Vec<f64> { y.iter().zip(&targets).map(|(p, t)| sign(p - t)).collect() };
    let base_signs = signs(&model.outputs(sample));
    let norm = targets.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed ^ 0x6752_4144);
    let wanted = min_coords.min(model.num_params());
    let mut probe = model.clone();
    let mut coords = Vec::with_capacity(wanted);
    let mut max_rel: f64 = 0.0;
    let mut skipped = 0;
    let mut attempts = 0;
    while coords.len() < wanted {
        attempts += 1;
        if attempts > 100 * wanted + 1000 {
            return Err(Error::invalid("could not find enough differentiable coordinates"));
        }
        let i = rng.gen_range(0..model.num_params());
        if coords.contains(&i) {
            continue;
        }
        let orig = probe.params[i];
        probe.params[i] = orig + epsilon;
        let plus = probe.outputs(sample);
        probe.params[i] = orig - epsilon;
        let minus = probe.outputs(sample);
        probe.params[i] = orig;
        if signs(&plus) != base_signs || signs(&minus) != base_signs {
            skipped += 1;
            continue;
        }
        // With every residual sign fixed across the stencil the loss is
        // linear in the outputs, so the loss difference equals this signed
        // sum of output differences, which avoids cancelling the (much
        // larger) residual magnitudes.
        let diff: f64 = plus
            .iter()
            .zip(&minus)
            .zip(&base_signs)
            .map(|((p, m), s)| s * (p - m))
            .sum();
        let numeric = diff / (2.0 * epsilon * norm);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        max_rel = max_rel.max(rel);
        coords.push(i);
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        coords,
        skipped,
    })
}

/// Central-difference gradient of the loss at specific coordinates.
pub fn numeric_gradient(model: &ConverterModel, sample: &[Sample], coords: &[usize], epsilon: f64) -> Result<Vec<f64>> {
    model.check_batch(sample)?;
    let mut probe = model.clone();
    Ok(coords
        .iter()
        .map(|&i| {
            let orig = probe.params[i];
            probe.params[i] = orig + epsilon;
            let plus = probe.loss_unchecked(sample);
            probe.params[i] = orig - epsilon;
            let minus = probe.loss_unchecked(sample);
            probe.params[i] = orig;
            (plus - minus) / (2.0 * epsilon)
        })
        .collect())
}

/// Triangular overlap-add weight for position `k` of a window of length
/// `window`; weights at hop `window / 2` sum to one.
fn ola_weight(k: usize, window: usize) -> f64 {
    let half = window as f64 / 2.0;
    1.0 - ((k as f64 + 0.5) - half).abs() / half
}

/// Predicts the high band for a whole contour by overlap-adding window
/// predictions.
pub fn predict_high(model: &ConverterModel, bands: &StyleBands, style: Style) -> Result<Vec<f64>> {
    let n = bands.len();
    let w = model.window();
    if n < w {
        return Err(Error::invalid(format!("contour of {n} frames is shorter than the {w}-frame window")));
    }
    let hop = w / 2;
    let mut acc = vec![0.0; n];
    let mut weight = vec![0.0; n];
    // Windows start at -hop, 0, hop, ... so every frame is covered twice.
    let mut start = -(hop as isize);
    while start < n as isize {
        let idx: Vec<usize> = (0..w)
            .map(|k| (start + k as isize).clamp(0, n as isize - 1) as usize)
            .collect();
        let inside = |k: usize| {
            let p = start + k as isize;
            p >= 0 && p < n as isize
        };
        let low: Vec<f64> = idx.iter().map(|&i| bands.low[i]).collect();
        let flags: Vec<bool> = (0..w).map(|k| inside(k) && bands.voiced[idx[k]]).collect();
        let pred = model.forward(&center_window(&low), &flags, style)?;
        for (k, p) in pred.iter().enumerate() {
            if inside(k) {
                let wt = ola_weight(k, w);
                acc[idx[k]] += wt * p;
                weight[idx[k]] += wt;
            }
        }
        start += hop as isize;
    }
    Ok(acc.iter().zip(&weight).map(|(a, w)| a / w).collect())
}

/// Replaces a contour's high band with the model's prediction for
/// `target` style. The low band passes through untouched and unvoiced
/// frames stay unvoiced.
pub fn convert_style(model: &ConverterModel, contour: &F0Contour, target: Style, levels: usize) -> Result<F0Contour> {
    if !model.is_finite() {
        return Err(Error::invalid("model has non-finite weights"));
    }
    let bands = decompose(contour, levels)?;
    let high = predict_high(model, &bands, target)?;
    recompose_with_high(&bands, &high)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            window: 8,
            hidden_sizes: vec![6, 5],
            style_dim: 3,
            seed: 11,
        }
    }

    fn samples(n: usize, window: usize, seed: u64) -> Vec<Sample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|k| Sample {
                low: center_window(&(0..window).map(|_| rng.gen_range(-0.1..0.1)).collect::<Vec<_>>()),
                flags: (0..window).map(|_| rng.gen_bool(0.8)).collect(),
                style: if k % 2 == 0 { Style::Vibrato } else { Style::Straight },
                target: (0..window).map(|_| rng.gen_range(-0.05..0.05)).collect(),
            })
            .collect()
    }

    #[test]
    fn zero_model_outputs_zero() {
        let m = ConverterModel::zeros(tiny()).unwrap();
        let out = m.forward(&[0.1; 8], &[true; 8], Style::Vibrato).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_is_deterministic() {
        let a = ConverterModel::new(tiny()).unwrap();
        let b = ConverterModel::new(tiny()).unwrap();
        let low = center_window(&[0.01, 0.02, -0.03, 0.0, 0.05, 0.01, -0.02, 0.0]);
        let ya = a.forward(&low, &[true; 8], Style::Straight).unwrap();
        let yb = b.forward(&low, &[true; 8], Style::Straight).unwrap();
        assert_eq!(ya, yb);
        assert!(ya.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn shape_errors() {
        let m = ConverterModel::new(tiny()).unwrap();
        assert!(matches!(m.forward(&[0.0; 7], &[true; 8], Style::Vibrato), Err(Error::LengthMismatch { .. })));
        assert!(matches!(m.forward(&[0.0; 8], &[true; 9], Style::Vibrato), Err(Error::LengthMismatch { .. })));
        assert!(m.loss(&[]).is_err());
        assert!(ConverterModel::new(ModelConfig { window: 7, ..tiny() }).is_err());
    }

    #[test]
    fn loss_zero_iff_exact() {
        let m = ConverterModel::new(tiny()).unwrap();
        let mut s = samples(3, 8, 1);
        for x in &mut s {
            x.target = m.forward(&x.low, &x.flags, x.style).unwrap();
        }
        assert_eq!(m.loss(&s).unwrap(), 0.0);
        s[1].target[3] += 1e-3;
        assert!(m.loss(&s).unwrap() > 0.0);
    }

    #[test]
    fn zero_prediction_loss_is_mean_abs_of_sinusoid() {
        // Mean |A sin| over whole periods is 2A/pi.
        let window = 64;
        let amp = 0.03;
        let m = ConverterModel::zeros(ModelConfig { window, ..ModelConfig::default() }).unwrap();
        let target: Vec<f64> = (0..window)
            .map(|n| amp * (2.0 * std::f64::consts::PI * 4.0 * (n as f64 + 0.5) / window as f64).sin())
            .collect();
        let s = Sample {
            low: vec![0.0; window],
            flags: vec![true; window],
            style: Style::Vibrato,
            target,
        };
        let loss = m.loss(&[s]).unwrap();
        assert!((loss - 2.0 * amp / std::f64::consts::PI).abs() < 2e-4 * amp / 0.03, "{loss}");
    }

    #[test]
    fn loss_is_permutation_invariant() {
        let m = ConverterModel::new(tiny()).unwrap();
        let s = samples(5, 8, 2);
        let mut r = s.clone();
        r.reverse();
        r.swap(0, 2);
        assert!((m.loss(&s).unwrap() - m.loss(&r).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = ConverterModel::new(tiny()).unwrap();
        let err = grad_check(&m, &samples(4, 8, 3), 1e-5).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn zero_model_zero_input_has_zero_gradient() {
        let m = ConverterModel::zeros(tiny()).unwrap();
        let s = vec![Sample {
            low: vec![0.0; 8],
            flags: vec![false; 8],
            style: Style::Straight,
            target: vec![0.0; 8],
        }];
        let (loss, grad) = m.loss_and_grad(&s).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
        let coords: Vec<usize> = (0..m.num_params()).collect();
        assert!(numeric_gradient(&m, &s, &coords, 1e-5).unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn central_difference_error_is_second_order() {
        // Larger weights make the third derivative visible above round-off.
        let mut m = ConverterModel::new(tiny()).unwrap();
        for p in &mut m.params {
            *p *= 3.0;
        }
        let s = samples(2, 8, 4);
        let report = grad_check_report(&m, &s, 1e-2, 20).unwrap();
        let (_, analytic) = m.loss_and_grad(&s).unwrap();
        let err_at = |eps: f64| {
            let num = numeric_gradient(&m, &s, &report.coords, eps).unwrap();
            report
                .coords
                .iter()
                .zip(&num)
                .map(|(&i, n)| (analytic[i] - n).abs())
                .fold(0.0, f64::max)
        };
        let (e2, e3, e4) = (err_at(1e-2), err_at(1e-3), err_at(1e-4));
        assert!(e2 / e3 > 30.0 && e2 / e3 < 300.0, "{e2} {e3}");
        assert!(e3 / e4 > 30.0 && e3 / e4 < 300.0, "{e3} {e4}");
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let m = ConverterModel::new(tiny()).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            steps: 50,
            batch: 4,
            ..TrainConfig::default()
        };
        let (trained, hist) = train_on_windows(&m, &samples(10, 8, 5), &cfg).unwrap();
        assert_eq!(trained, m);
        assert_eq!(hist.len(), 1);
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let m = ConverterModel::new(tiny()).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.05,
            steps: 400,
            batch: 4,
            ..TrainConfig::default()
        };
        let data = samples(12, 8, 6);
        let (a, ha) = train_on_windows(&m, &data, &cfg).unwrap();
        let (b, hb) = train_on_windows(&m, &data, &cfg).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a, b);
        assert_eq!(ha.len(), 4);
        assert!(ha[3] < ha[0]);
    }

    #[test]
    fn too_small_corpus_and_divergence() {
        let m = ConverterModel::new(tiny()).unwrap();
        let cfg = TrainConfig {
            batch: 20,
            steps: 1,
            ..TrainConfig::default()
        };
        assert!(train_on_windows(&m, &samples(5, 8, 7), &cfg).is_err());

        let mut bad = samples(4, 8, 8);
        bad[0].target[0] = f64::INFINITY;
        let cfg = TrainConfig {
            batch: 4,
            steps: 3,
            ..TrainConfig::default()
        };
        assert!(matches!(train_on_windows(&m, &bad, &cfg), Err(Error::Diverged { step: 0, .. })));
    }

    #[test]
    fn checkpoint_roundtrip_and_version_check() {
        let m = ConverterModel::new(tiny()).unwrap();
        let json = m.to_json().unwrap();
        assert_eq!(ConverterModel::from_json(&json).unwrap(), m);
        let bumped = json.replacen("\"version\":1", "\"version\":2", 1);
        assert!(matches!(ConverterModel::from_json(&bumped), Err(Error::Checkpoint(_))));
        let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
        v["layers"][0]["biases"].as_array_mut().unwrap().pop();
        assert!(matches!(ConverterModel::from_json(&v.to_string()), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn ola_weights_partition_unity() {
        for k in 0..32 {
            assert!((ola_weight(k, 64) + ola_weight(k + 32, 64) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn conversion_substitutes_high_band_only() {
        let m = ConverterModel::new(ModelConfig { window: 16, hidden_sizes: vec![8], style_dim: 4, seed: 3 }).unwrap();
        let f0: Vec<f64> = (0..100).map(|i| 200.0 + 30.0 * (i as f64 / 9.0).sin()).collect();
        let c = F0Contour::from_voiced_hz(f0, 93.75).unwrap();
        let bands = decompose(&c, 3).unwrap();
        let pred = predict_high(&m, &bands, Style::Vibrato).unwrap();
        let out = convert_style(&m, &c, Style::Vibrato, 3).unwrap();
        for i in 0..c.len() {
            assert!((out.f0_hz()[i].ln() - bands.low[i] - pred[i]).abs() < 1e-12);
        }
    }
}
