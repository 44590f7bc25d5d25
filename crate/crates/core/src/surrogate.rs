//! The trainable velocity regressor.
//!
//! A per-point multilayer perceptron with tanh hidden layers and a linear
//! output. With `global_context` enabled the net is a small PointNet: the
//! leading hidden layers encode each point, the encodings are mean-pooled
//! over the shape, and the pooled vector is concatenated to every point's
//! encoding before the remaining (head) layers. Pooling a learned
//! encoding rather than raw features lets the head see global statistics
//! such as the vessel caliber while staying permutation equivariant.
//!
//! Layer split: with hidden widths [w_0, .., w_{n-1}], the encoder is
//! [w_0, .., w_{n-2}] and the head is [w_{n-1}, output]. A single hidden
//! width means an identity encoder, i.e. raw features are pooled.
//!
//! Inference can apply inverted-dropout unit masks (shared across points
//! within one pass) to realize a Monte Carlo committee. Training is plain
//! Adam over exact backpropagation in f64; everything is deterministic
//! given the configured seeds.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FeatureMode, Shape};
use crate::math::{self, Vec3};
use crate::oracle::VelocityField;

pub const OUTPUT_DIM: usize = 3;

/// Architecture and committee configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_widths: Vec<usize>,
    pub dropout_rate: f64,
    pub global_context: bool,
    #[serde(default = "default_feature_mode")]
    pub feature_mode: FeatureMode,
    /// Number of random Fourier frequencies appended to the normalized
    /// inputs (sin and cos each); 0 disables the lift. The projection is
    /// redrawn deterministically from `seed`.
    #[serde(default)]
    pub fourier_features: usize,
    /// Standard deviation of the random frequencies.
    #[serde(default = "default_fourier_scale")]
    pub fourier_scale: f64,
    pub seed: u64,
}

fn default_feature_mode() -> FeatureMode {
    FeatureMode::VectorOffset
}

fn default_fourier_scale() -> f64 {
    2.0
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_widths: vec![32, 32],
            dropout_rate: 0.1,
            global_context: true,
            feature_mode: FeatureMode::VectorOffset,
            fourier_features: 0,
            fourier_scale: default_fourier_scale(),
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidParams("hidden widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidParams(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// Per-point feature width (the model's input dimension).
    pub fn feature_dim(&self) -> usize {
        match self.feature_mode {
            FeatureMode::VectorOffset => 9,
            FeatureMode::ScalarDistance => 3,
        }
    }

    /// Network input width: the feature dimension plus the optional
    /// Fourier lift (sin and cos per frequency).
    pub fn lifted_dim(&self) -> usize {
        self.feature_dim() + 2 * self.fourier_features
    }

    /// Encoder layer widths, input first: the hidden stack before the
    /// pooling point. Empty hidden_widths or a single width leave the
    /// encoder as the identity.
    pub fn encoder_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.lifted_dim()];
        if self.hidden_widths.len() > 1 {
            dims.extend_from_slice(&self.hidden_widths[..self.hidden_widths.len() - 1]);
        }
        dims
    }

    /// Head layer widths, input first. The head input doubles when the
    /// pooled encoding is concatenated.
    pub fn head_dims(&self) -> Vec<usize> {
        let enc_out = *self.encoder_dims().last().expect("encoder has input dim");
        let mut dims = vec![if self.global_context { 2 * enc_out } else { enc_out }];
        if let Some(&last) = self.hidden_widths.last() {
            dims.push(last);
        }
        dims.push(OUTPUT_DIM);
        dims
    }

    /// Consecutive (fan_in, fan_out) pairs over encoder then head.
    fn layer_pairs(&self) -> Vec<(usize, usize)> {
        let enc = self.encoder_dims();
        let head = self.head_dims();
        enc.windows(2)
            .chain(head.windows(2))
            .map(|w| (w[0], w[1]))
            .collect()
    }

    /// Number of encoder weight layers.
    fn encoder_layers(&self) -> usize {
        self.encoder_dims().len() - 1
    }

    /// Total number of weights and biases.
    pub fn param_count(&self) -> usize {
        self.layer_pairs()
            .iter()
            .map(|(fan_in, fan_out)| fan_in * fan_out + fan_out)
            .sum()
    }
}

/// Per-dimension affine input normalization fitted on the training pool;
/// identity until a model has been trained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureNormalizer {
    pub mean: Vec<f64>,
    pub inv_std: Vec<f64>,
}

impl FeatureNormalizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            inv_std: vec![1.0; dim],
        }
    }

    fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for row in rows {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for row in rows {
            for ((v, m), x) in var.iter_mut().zip(&mean).zip(row) {
                *v += (x - m) * (x - m);
            }
        }
        let inv_std = var
            .iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    1.0 / s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, inv_std }
    }

    #[inline]
    fn apply(&self, row: &mut [f64]) {
        for ((x, m), s) in row.iter_mut().zip(&self.mean).zip(&self.inv_std) {
            *x = (*x - m) * s;
        }
    }
}

/// Trained (or freshly initialized) regressor parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateModel {
    pub config: ModelConfig,
    /// Flat layout: per layer, the out x in weight matrix row-major,
    /// then the bias vector.
    pub params: Vec<f64>,
    pub normalizer: FeatureNormalizer,
    /// Batch loss per optimization step of the most recent training run.
    pub train_log: Vec<f64>,
}

/// Optimization settings for [`train`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_shapes: usize,
    pub learning_rate: f64,
    /// Exponential step-size decay per step.
    pub lr_decay: f64,
    /// Weight of the cosine direction term in the loss.
    pub direction_weight: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_shapes: 2,
            learning_rate: 3e-4,
            lr_decay: 0.9989,
            direction_weight: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidParams("steps must be positive".into()));
        }
        if self.batch_shapes == 0 {
            return Err(Error::InvalidParams("batch_shapes must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParams("learning_rate must be positive".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::InvalidParams("lr_decay must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Initializes parameters with uniform fan-in scaling,
/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero. Deterministic in
/// `config.seed`.
pub fn init_model(config: &ModelConfig) -> Result<SurrogateModel> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = Vec::with_capacity(config.param_count());
    for (fan_in, fan_out) in config.layer_pairs() {
        let bound = 1.0 / (fan_in as f64).sqrt();
        for _ in 0..fan_in * fan_out {
            params.push(rng.gen_range(-bound..bound));
        }
        params.extend(std::iter::repeat(0.0).take(fan_out));
    }
    Ok(SurrogateModel {
        normalizer: FeatureNormalizer::identity(config.feature_dim()),
        config: config.clone(),
        params,
        train_log: Vec::new(),
    })
}

/// Raw (unnormalized) per-point feature rows of a shape.
fn assemble_inputs(config: &ModelConfig, shape: &Shape) -> Vec<Vec<f64>> {
    match config.feature_mode {
        FeatureMode::VectorOffset => shape.features.iter().map(|f| f.to_vec()).collect(),
        FeatureMode::ScalarDistance => {
            shape.scalar_features().iter().map(|f| f.to_vec()).collect()
        }
    }
}

/// Fixed random frequency rows of the Fourier lift, redrawn from the
/// model seed (not trained, not stored in checkpoints).
fn fourier_matrix(config: &ModelConfig) -> Vec<Vec<f64>> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = ChaCha8Rng::seed_from_u64(math::mix_seed(config.seed, 0xf0f0));
    (0..config.fourier_features)
        .map(|_| {
            (0..config.feature_dim())
                .map(|_| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    g * config.fourier_scale
                })
                .collect()
        })
        .collect()
}

/// Appends sin/cos of the random projections to a normalized feature row.
fn lift_row(row: &mut Vec<f64>, freqs: &[Vec<f64>]) {
    let base = row.len();
    row.reserve(2 * freqs.len());
    for b in freqs {
        let phase: f64 = b.iter().zip(row[..base].iter()).map(|(w, x)| w * x).sum();
        row.push(phase.sin());
        row.push(phase.cos());
    }
}

/// Inverted-dropout masks per hidden layer, shared by all points of one
/// forward pass. Entries are 0 or 1/(1-p).
fn dropout_masks(config: &ModelConfig, mask_seed: u64) -> Vec<Vec<f64>> {
    let p = config.dropout_rate;
    config
        .hidden_widths
        .iter()
        .enumerate()
        .map(|(layer, &width)| {
            if p == 0.0 {
                return vec![1.0; width];
            }
            let mut rng =
                ChaCha8Rng::seed_from_u64(math::mix_seed(mask_seed, 0x6d61736b + layer as u64));
            (0..width)
                .map(|_| {
                    if rng.gen_range(0.0..1.0) < p {
                        0.0
                    } else {
                        1.0 / (1.0 - p)
                    }
                })
                .collect()
        })
        .collect()
}

struct LayerView<'a> {
    weights: &'a [f64],
    biases: &'a [f64],
    fan_in: usize,
    fan_out: usize,
    /// Parameter offset of this layer's weight block.
    offset: usize,
}

fn layer_views<'a>(config: &ModelConfig, params: &'a [f64]) -> Result<Vec<LayerView<'a>>> {
    if params.len() != config.param_count() {
        return Err(Error::Format {
            format: "model",
            reason: format!(
                "parameter vector has {} entries, layout expects {}",
                params.len(),
                config.param_count()
            ),
        });
    }
    let pairs = config.layer_pairs();
    let mut offset = 0;
    let mut views = Vec::with_capacity(pairs.len());
    for (fan_in, fan_out) in pairs {
        let start = offset;
        let weights = &params[offset..offset + fan_in * fan_out];
        offset += fan_in * fan_out;
        let biases = &params[offset..offset + fan_out];
        offset += fan_out;
        views.push(LayerView {
            weights,
            biases,
            fan_in,
            fan_out,
            offset: start,
        });
    }
    Ok(views)
}

/// Applies one layer to a point's activations.
fn apply_layer(layer: &LayerView<'_>, input: &[f64], out: &mut Vec<f64>) {
    out.clear();
    for o in 0..layer.fan_out {
        let wrow = &layer.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
        let mut z = layer.biases[o];
        for (w, a) in wrow.iter().zip(input) {
            z += w * a;
        }
        out.push(z);
    }
}

/// Per-point encodings, the pooled encoding, and per-point head inputs.
struct ForwardTrace {
    /// Activations per encoder stage: [stage][point][unit]. Stage 0 holds
    /// the normalized inputs.
    enc_acts: Vec<Vec<Vec<f64>>>,
    /// Activations per head stage: stage 0 holds the head inputs
    /// (encoding, optionally concatenated with the pooled encoding).
    head_acts: Vec<Vec<Vec<f64>>>,
}

fn forward_trace(
    model: &SurrogateModel,
    shape: &Shape,
    masks: Option<&[Vec<f64>]>,
) -> Result<ForwardTrace> {
    let config = &model.config;
    let layers = layer_views(config, &model.params)?;
    if model.normalizer.mean.len() != config.feature_dim() {
        return Err(Error::Format {
            format: "model",
            reason: format!(
                "normalizer dimension {} does not match feature dimension {}",
                model.normalizer.mean.len(),
                config.feature_dim()
            ),
        });
    }
    let n_enc = config.encoder_layers();
    let (enc_layers, head_layers) = layers.split_at(n_enc);
    let n_points = shape.len();

    let mut inputs = assemble_inputs(config, shape);
    let freqs = if config.fourier_features > 0 {
        Some(fourier_matrix(config))
    } else {
        None
    };
    for row in &mut inputs {
        model.normalizer.apply(row);
        if let Some(freqs) = &freqs {
            lift_row(row, freqs);
        }
    }

    // Encoder: every layer is tanh with an optional dropout mask.
    let mut enc_acts: Vec<Vec<Vec<f64>>> = vec![inputs];
    for (l, layer) in enc_layers.iter().enumerate() {
        let prev = &enc_acts[l];
        let mut out = Vec::with_capacity(n_points);
        let mut z = Vec::new();
        for row in prev {
            apply_layer(layer, row, &mut z);
            let mut act: Vec<f64> = z.iter().map(|v| v.tanh()).collect();
            if let Some(masks) = masks {
                for (a, m) in act.iter_mut().zip(&masks[l]) {
                    *a *= m;
                }
            }
            out.push(act);
        }
        enc_acts.push(out);
    }

    // Pool encodings and assemble head inputs.
    let encodings = enc_acts.last().expect("encoder stages");
    let enc_dim = encodings[0].len();
    let head_inputs: Vec<Vec<f64>> = if config.global_context {
        let mut pooled = vec![0.0; enc_dim];
        for row in encodings {
            for (p, x) in pooled.iter_mut().zip(row) {
                *p += x;
            }
        }
        for p in &mut pooled {
            *p /= n_points.max(1) as f64;
        }
        encodings
            .iter()
            .map(|row| {
                let mut h = Vec::with_capacity(2 * enc_dim);
                h.extend_from_slice(row);
                h.extend_from_slice(&pooled);
                h
            })
            .collect()
    } else {
        encodings.clone()
    };

    // Head: hidden layers are tanh+mask, the final layer is linear.
    let mut head_acts: Vec<Vec<Vec<f64>>> = vec![head_inputs];
    let n_head = head_layers.len();
    for (l, layer) in head_layers.iter().enumerate() {
        let hidden = l + 1 < n_head;
        let prev = &head_acts[l];
        let mut out = Vec::with_capacity(n_points);
        let mut z = Vec::new();
        for row in prev {
            apply_layer(layer, row, &mut z);
            if hidden {
                let mut act: Vec<f64> = z.iter().map(|v| v.tanh()).collect();
                if let Some(masks) = masks {
                    for (a, m) in act.iter_mut().zip(&masks[n_enc + l]) {
                        *a *= m;
                    }
                }
                out.push(act);
            } else {
                out.push(z.clone());
            }
        }
        head_acts.push(out);
    }

    Ok(ForwardTrace {
        enc_acts,
        head_acts,
    })
}

/// Deterministic or stochastic forward pass. With `mask_seed` set and a
/// positive dropout rate, hidden activations are masked with inverted
/// scaling so the expected output matches the deterministic pass.
pub fn forward(
    model: &SurrogateModel,
    shape: &Shape,
    mask_seed: Option<u64>,
) -> Result<VelocityField> {
    let masks = match mask_seed {
        Some(seed) if model.config.dropout_rate > 0.0 => {
            Some(dropout_masks(&model.config, seed))
        }
        _ => None,
    };
    let trace = forward_trace(model, shape, masks.as_deref())?;
    let values = trace
        .head_acts
        .last()
        .expect("head stages")
        .iter()
        .map(|row| [row[0], row[1], row[2]])
        .collect();
    Ok(VelocityField::new(values))
}

/// Magnitude plus direction loss:
/// mean | ||pred|| - ||target|| | + beta * mean (1 - cos(pred, target)).
/// The cosine of a zero vector against anything is defined as 0.
pub fn loss(pred: &VelocityField, target: &VelocityField, beta: f64) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch {
            field: pred.len(),
            points: target.len(),
        });
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let mut magnitude = 0.0;
    let mut direction = 0.0;
    for (p, t) in pred.values.iter().zip(&target.values) {
        let np = math::norm(*p);
        let nt = math::norm(*t);
        magnitude += (np - nt).abs();
        let cos = if np > 0.0 && nt > 0.0 {
            math::dot(*p, *t) / (np * nt)
        } else {
            0.0
        };
        direction += 1.0 - cos;
    }
    let n = pred.len() as f64;
    Ok(magnitude / n + beta * direction / n)
}

/// Gradient of [`loss`] with respect to the predictions.
fn loss_gradient(pred: &[Vec3], target: &[Vec3], beta: f64) -> Vec<Vec3> {
    let n = pred.len() as f64;
    pred.iter()
        .zip(target)
        .map(|(p, t)| {
            let np = math::norm(*p);
            let nt = math::norm(*t);
            let mut g = [0.0; 3];
            if np > 0.0 {
                let sign = if np > nt {
                    1.0
                } else if np < nt {
                    -1.0
                } else {
                    0.0
                };
                g = math::scale(*p, sign / np);
                if nt > 0.0 {
                    // d(1 - cos)/dp = cos * p/|p|^2 - t/(|p||t|)
                    let cos = math::dot(*p, *t) / (np * nt);
                    let dcos = math::sub(
                        math::scale(*p, cos / (np * np)),
                        math::scale(*t, 1.0 / (np * nt)),
                    );
                    g = math::add(g, math::scale(dcos, beta));
                }
            }
            math::scale(g, 1.0 / n)
        })
        .collect()
}

/// One labeled training sample.
pub type TrainSample<'a> = (&'a Shape, &'a VelocityField);

/// Mean deterministic loss of a model over labeled samples, using the
/// model's stored normalizer.
pub fn batch_loss(model: &SurrogateModel, samples: &[TrainSample<'_>], beta: f64) -> Result<f64> {
    let mut total = 0.0;
    for (shape, target) in samples {
        let pred = forward(model, shape, None)?;
        total += loss(&pred, target, beta)?;
    }
    Ok(total / samples.len().max(1) as f64)
}

/// Converts activation gradients into pre-activation gradients for a
/// masked tanh layer; stored activations are post-mask.
fn tanh_mask_backward(dz: &mut [Vec<f64>], acts: &[Vec<f64>], mask: Option<&[f64]>) {
    for (row, a_row) in dz.iter_mut().zip(acts) {
        for (o, d) in row.iter_mut().enumerate() {
            let m = mask.map_or(1.0, |m| m[o]);
            if m == 0.0 {
                *d = 0.0;
                continue;
            }
            // a = m * tanh(z), so da/dz = m * (1 - tanh^2).
            let t = a_row[o] / m;
            *d *= m * (1.0 - t * t);
        }
    }
}

/// Accumulates weight/bias gradients of one layer and returns the
/// gradient with respect to its inputs.
fn layer_backward(
    layer: &LayerView<'_>,
    dz: &[Vec<f64>],
    prev: &[Vec<f64>],
    grad: &mut [f64],
) -> Vec<Vec<f64>> {
    let w_off = layer.offset;
    let b_off = w_off + layer.fan_in * layer.fan_out;
    let mut prev_delta = vec![vec![0.0; layer.fan_in]; dz.len()];
    for ((row_dz, row_prev), row_out) in dz.iter().zip(prev).zip(prev_delta.iter_mut()) {
        for o in 0..layer.fan_out {
            let d = row_dz[o];
            if d == 0.0 {
                continue;
            }
            grad[b_off + o] += d;
            let wrow = &layer.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
            let g_row = &mut grad[w_off + o * layer.fan_in..w_off + (o + 1) * layer.fan_in];
            for (g, a) in g_row.iter_mut().zip(row_prev) {
                *g += d * a;
            }
            for (out, w) in row_out.iter_mut().zip(wrow) {
                *out += d * w;
            }
        }
    }
    prev_delta
}

/// Forward pass plus exact backpropagation for a single shape. Returns
/// the shape loss and accumulates parameter gradients into `grad`.
fn backprop_shape(
    model: &SurrogateModel,
    shape: &Shape,
    target: &VelocityField,
    beta: f64,
    mask_seed: Option<u64>,
    grad: &mut [f64],
) -> Result<f64> {
    let config = &model.config;
    let layers = layer_views(config, &model.params)?;
    let n_enc = config.encoder_layers();
    let (enc_layers, head_layers) = layers.split_at(n_enc);
    let masks = match mask_seed {
        Some(seed) if config.dropout_rate > 0.0 => Some(dropout_masks(config, seed)),
        _ => None,
    };

    let trace = forward_trace(model, shape, masks.as_deref())?;
    let n_points = shape.len();
    let pred: Vec<Vec3> = trace
        .head_acts
        .last()
        .expect("head stages")
        .iter()
        .map(|row| [row[0], row[1], row[2]])
        .collect();
    let shape_loss = loss(&VelocityField::new(pred.clone()), target, beta)?;

    // Head backward.
    let mut delta: Vec<Vec<f64>> = loss_gradient(&pred, &target.values, beta)
        .into_iter()
        .map(|g| g.to_vec())
        .collect();
    let n_head = head_layers.len();
    for l in (0..n_head).rev() {
        let layer = &head_layers[l];
        // Hidden head layers carry tanh and masks; the output is linear.
        if l + 1 < n_head {
            tanh_mask_backward(
                &mut delta,
                &trace.head_acts[l + 1],
                masks.as_deref().map(|m| m[n_enc + l].as_slice()),
            );
        }
        delta = layer_backward(layer, &delta, &trace.head_acts[l], grad);
    }

    // Split the head-input gradient into the per-point encoding part and
    // the mean-pooled part; the pooled part spreads back to every point.
    let enc_dim = trace.enc_acts.last().expect("encoder stages")[0].len();
    let mut enc_delta: Vec<Vec<f64>> = if config.global_context {
        let mut pooled_sum = vec![0.0; enc_dim];
        for row in &delta {
            for (p, d) in pooled_sum.iter_mut().zip(&row[enc_dim..]) {
                *p += d;
            }
        }
        let inv_n = 1.0 / n_points.max(1) as f64;
        delta
            .iter()
            .map(|row| {
                row[..enc_dim]
                    .iter()
                    .zip(&pooled_sum)
                    .map(|(local, pooled)| local + pooled * inv_n)
                    .collect()
            })
            .collect()
    } else {
        delta
    };

    // Encoder backward.
    for l in (0..n_enc).rev() {
        let layer = &enc_layers[l];
        tanh_mask_backward(
            &mut enc_delta,
            &trace.enc_acts[l + 1],
            masks.as_deref().map(|m| m[l].as_slice()),
        );
        enc_delta = layer_backward(layer, &enc_delta, &trace.enc_acts[l], grad);
    }

    Ok(shape_loss)
}

/// Mean batch loss and its exact parameter gradient, with optional
/// per-slot dropout mask seeds (one per batch entry).
pub fn batch_loss_and_gradient(
    model: &SurrogateModel,
    samples: &[TrainSample<'_>],
    beta: f64,
    mask_seeds: Option<&[u64]>,
) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; model.params.len()];
    let mut total = 0.0;
    for (slot, (shape, target)) in samples.iter().enumerate() {
        let seed = mask_seeds.map(|s| s[slot]);
        total += backprop_shape(model, shape, target, beta, seed, &mut grad)?;
    }
    let scale = 1.0 / samples.len().max(1) as f64;
    for g in &mut grad {
        *g *= scale;
    }
    Ok((total * scale, grad))
}

/// Trains with Adam on minibatches of shapes. The input normalizer is
/// refitted on the training pool; parameters continue from `model`
/// (callers wanting a cold start pass a freshly initialized model).
pub fn train(
    model: &SurrogateModel,
    samples: &[TrainSample<'_>],
    tcfg: &TrainConfig,
) -> Result<SurrogateModel> {
    tcfg.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidParams("training needs at least one sample".into()));
    }

    let mut trained = model.clone();
    // Duplicate entries (same shape id) contribute once to the feature
    // statistics, so repeating a sample cannot perturb the normalizer.
    let mut seen = std::collections::HashSet::new();
    let all_rows: Vec<Vec<f64>> = samples
        .iter()
        .filter(|(shape, _)| seen.insert(shape.id.clone()))
        .flat_map(|(shape, _)| assemble_inputs(&model.config, shape))
        .collect();
    trained.normalizer = FeatureNormalizer::fit(&all_rows);
    trained.train_log = Vec::with_capacity(tcfg.steps);

    let beta = tcfg.direction_weight;
    let n_params = trained.params.len();
    let mut m = vec![0.0; n_params];
    let mut v = vec![0.0; n_params];
    let (beta1, beta2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut batch_rng = ChaCha8Rng::seed_from_u64(math::mix_seed(tcfg.seed, 0xba7c4));

    let mut lr = tcfg.learning_rate;
    for step in 0..tcfg.steps {
        let batch: Vec<TrainSample<'_>> = (0..tcfg.batch_shapes)
            .map(|_| samples[batch_rng.gen_range(0..samples.len())])
            .collect();
        // Training runs the deterministic network; dropout masks exist
        // for stochastic committee inference only.
        let (batch_loss, grad) = batch_loss_and_gradient(&trained, &batch, beta, None)?;
        if !batch_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                step,
                shape_id: batch[0].0.id.clone(),
            });
        }
        trained.train_log.push(batch_loss);

        let t = (step + 1) as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for i in 0..n_params {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            trained.params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        lr *= tcfg.lr_decay;
    }
    Ok(trained)
}

/// M stochastic forward passes with member mask seeds derived from
/// (seed, member index). With dropout disabled all members coincide.
pub fn committee_predict(
    model: &SurrogateModel,
    shape: &Shape,
    members: usize,
    seed: u64,
) -> Result<Vec<VelocityField>> {
    (0..members)
        .map(|i| forward(model, shape, Some(math::mix_seed(seed, i as u64))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_bifurcation, BifurcationParams, GeometryConfig, PointRole};
    use crate::oracle::{label_shape, FluidConstants};

    fn toy_shape(seed: u64) -> Shape {
        let params = BifurcationParams::straight_tube(1e-3, 4e-3, seed);
        generate_bifurcation(&params, &GeometryConfig::with_counts(6, 2, 1)).unwrap()
    }

    fn toy_config(seed: u64) -> ModelConfig {
        ModelConfig {
            hidden_widths: vec![8, 6],
            dropout_rate: 0.0,
            global_context: true,
            feature_mode: FeatureMode::VectorOffset,
            seed,
        }
    }

    #[test]
    fn init_is_deterministic() {
        let config = toy_config(5);
        let a = init_model(&config).unwrap();
        let b = init_model(&config).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn param_count_closed_form() {
        // Widths [16, 16] on 9 features with the global branch: the
        // encoder is 9 -> 16, the pooled encoding doubles the head input,
        // and the head is 32 -> 16 -> 3.
        let config = ModelConfig {
            hidden_widths: vec![16, 16],
            dropout_rate: 0.0,
            global_context: true,
            feature_mode: FeatureMode::VectorOffset,
            fourier_features: 0,
            fourier_scale: 2.0,
            seed: 0,
        };
        let expected = (9 * 16 + 16) + (32 * 16 + 16) + (16 * 3 + 3);
        assert_eq!(config.param_count(), expected);
        assert_eq!(init_model(&config).unwrap().params.len(), expected);

        // With a single hidden width the encoder is the identity and the
        // pooled vector is the 9 raw features: 9 (+9 global) inputs.
        let single = ModelConfig {
            hidden_widths: vec![16],
            ..config.clone()
        };
        let expected = (18 * 16 + 16) + (16 * 3 + 3);
        assert_eq!(single.param_count(), expected);
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let config = toy_config(1);
        let mut model = init_model(&config).unwrap();
        model.params.iter_mut().for_each(|p| *p = 0.0);
        let shape = toy_shape(3);
        let out = forward(&model, &shape, None).unwrap();
        assert!(out.values.iter().all(|v| *v == [0.0; 3]));
    }

    #[test]
    fn forward_is_permutation_equivariant() {
        let config = toy_config(2);
        let model = init_model(&config).unwrap();
        let shape = toy_shape(4);
        let base = forward(&model, &shape, None).unwrap();

        // Reverse the point order.
        let n = shape.len();
        let perm: Vec<usize> = (0..n).rev().collect();
        let permuted = Shape::new(
            "permuted",
            perm.iter().map(|&i| shape.points[i]).collect(),
            perm.iter().map(|&i| shape.roles[i]).collect(),
            shape.centerline.clone(),
        )
        .unwrap();
        let out = forward(&model, &permuted, None).unwrap();
        for (row, &src) in perm.iter().enumerate() {
            for a in 0..3 {
                assert!((out.values[row][a] - base.values[src][a]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stochastic_forward_is_deterministic_per_seed() {
        let mut config = toy_config(3);
        config.dropout_rate = 0.4;
        let model = init_model(&config).unwrap();
        let shape = toy_shape(5);
        let a = forward(&model, &shape, Some(77)).unwrap();
        let b = forward(&model, &shape, Some(77)).unwrap();
        let c = forward(&model, &shape, Some(78)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn loss_examples() {
        let target = VelocityField::new(vec![[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]);
        assert_eq!(loss(&target, &target, 1.0).unwrap(), 0.0);

        let negated = VelocityField::new(vec![[-1.0, 0.0, 0.0], [0.0, -2.0, 0.0]]);
        let beta = 0.7;
        assert!((loss(&negated, &target, beta).unwrap() - 2.0 * beta).abs() < 1e-15);

        // pred = 2 * target with unit target magnitudes: magnitude error 1,
        // no direction error.
        let unit = VelocityField::new(vec![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        let doubled = VelocityField::new(vec![[2.0, 0.0, 0.0], [0.0, 0.0, 2.0]]);
        assert!((loss(&doubled, &unit, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn loss_zero_vector_contributes_beta() {
        let target = VelocityField::new(vec![[1.0, 0.0, 0.0]]);
        let zero = VelocityField::new(vec![[0.0, 0.0, 0.0]]);
        // Magnitude term 1, direction term beta * (1 - 0).
        let beta = 0.5;
        assert!((loss(&zero, &target, beta).unwrap() - (1.0 + beta)).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let constants = FluidConstants::default();
        for trial in 0..4u64 {
            let mut config = toy_config(trial);
            config.dropout_rate = if trial % 2 == 0 { 0.0 } else { 0.25 };
            let mut model = init_model(&config).unwrap();
            let shape = toy_shape(trial + 10);
            let target = label_shape(&shape, &constants, 0.1).unwrap();
            // A non-identity normalizer exercises the full input path.
            let rows = assemble_inputs(&config, &shape);
            model.normalizer = FeatureNormalizer::fit(&rows);

            let samples = [(&shape, &target)];
            let mask_seeds: Option<Vec<u64>> =
                (config.dropout_rate > 0.0).then(|| vec![42u64]);
            let (_, grad) =
                batch_loss_and_gradient(&model, &samples, 1.0, mask_seeds.as_deref()).unwrap();

            let eval = |params: &[f64]| -> f64 {
                let mut probe = model.clone();
                probe.params = params.to_vec();
                let pred = match mask_seeds.as_ref() {
                    Some(seeds) => forward(&probe, &shape, Some(seeds[0])).unwrap(),
                    None => forward(&probe, &shape, None).unwrap(),
                };
                loss(&pred, &target, 1.0).unwrap()
            };

            let eps = 1e-6;
            let mut max_rel = 0.0f64;
            for i in 0..model.params.len() {
                let mut plus = model.params.clone();
                plus[i] += eps;
                let mut minus = model.params.clone();
                minus[i] -= eps;
                let fd = (eval(&plus) - eval(&minus)) / (2.0 * eps);
                let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-6);
                max_rel = max_rel.max(rel);
            }
            assert!(
                max_rel < 1e-4,
                "trial {trial}: max relative gradient error {max_rel}"
            );
        }
    }

    #[test]
    fn training_reduces_loss() {
        let constants = FluidConstants::default();
        let params = BifurcationParams::straight_tube(1e-3, 5e-3, 8);
        let shape =
            generate_bifurcation(&params, &GeometryConfig::with_counts(64, 32, 8)).unwrap();
        let target = label_shape(&shape, &constants, 0.1).unwrap();
        let config = ModelConfig {
            hidden_widths: vec![16, 16],
            dropout_rate: 0.0,
            global_context: true,
            feature_mode: FeatureMode::VectorOffset,
            fourier_features: 0,
            fourier_scale: 2.0,
            seed: 0,
        };
        let model = init_model(&config).unwrap();
        let tcfg = TrainConfig {
            steps: 500,
            batch_shapes: 1,
            seed: 1,
            ..TrainConfig::default()
        };
        let trained = train(&model, &[(&shape, &target)], &tcfg).unwrap();
        let first = trained.train_log[0];
        let last = *trained.train_log.last().unwrap();
        assert!(
            last < first,
            "training loss did not decrease: {first} -> {last}"
        );
    }

    #[test]
    fn duplicated_sample_leaves_training_unchanged() {
        let constants = FluidConstants::default();
        let shape = toy_shape(21);
        let target = label_shape(&shape, &constants, 0.1).unwrap();
        let config = toy_config(4);
        let model = init_model(&config).unwrap();
        let tcfg = TrainConfig {
            steps: 50,
            batch_shapes: 2,
            seed: 9,
            ..TrainConfig::default()
        };
        let single = train(&model, &[(&shape, &target)], &tcfg).unwrap();
        let doubled = train(&model, &[(&shape, &target), (&shape, &target)], &tcfg).unwrap();
        assert_eq!(single.params, doubled.params);
    }

    #[test]
    fn committee_without_dropout_is_constant() {
        let config = toy_config(6); // dropout 0
        let model = init_model(&config).unwrap();
        let shape = toy_shape(6);
        let members = committee_predict(&model, &shape, 4, 123).unwrap();
        for m in &members[1..] {
            assert_eq!(*m, members[0]);
        }
    }

    #[test]
    fn dropout_expectation_matches_deterministic_pass() {
        // With a single masked hidden layer everything downstream of the
        // mask is linear, so averaging many stochastic passes converges to
        // the deterministic pass at the Monte Carlo rate.
        let config = ModelConfig {
            hidden_widths: vec![16],
            dropout_rate: 0.3,
            global_context: false,
            feature_mode: FeatureMode::VectorOffset,
            fourier_features: 0,
            fourier_scale: 2.0,
            seed: 11,
        };
        let model = init_model(&config).unwrap();
        let shape = toy_shape(30);
        let deterministic = forward(&model, &shape, None).unwrap();

        let members = committee_predict(&model, &shape, 4000, 9).unwrap();
        let mut mean = vec![[0.0f64; 3]; shape.len()];
        for field in &members {
            for (acc, v) in mean.iter_mut().zip(&field.values) {
                *acc = math::add(*acc, *v);
            }
        }
        let scale_out: f64 = deterministic
            .values
            .iter()
            .map(|v| math::norm(*v))
            .fold(0.0, f64::max);
        for (acc, det) in mean.iter().zip(&deterministic.values) {
            let avg = math::scale(*acc, 1.0 / members.len() as f64);
            let err = math::norm(math::sub(avg, *det));
            assert!(
                err < 0.1 * scale_out.max(1e-6),
                "MC mean deviates: err {err}, scale {scale_out}"
            );
        }
    }

    #[test]
    fn scalar_feature_mode_shrinks_input() {
        let config = ModelConfig {
            hidden_widths: vec![8],
            dropout_rate: 0.0,
            global_context: true,
            feature_mode: FeatureMode::ScalarDistance,
            fourier_features: 0,
            fourier_scale: 2.0,
            seed: 0,
        };
        assert_eq!(config.feature_dim(), 3);
        assert_eq!(config.head_dims(), vec![6, 8, 3]);
        let model = init_model(&config).unwrap();
        let shape = toy_shape(2);
        assert!(forward(&model, &shape, None).is_ok());
    }

    #[test]
    fn wall_points_have_zero_wall_distance() {
        let shape = toy_shape(40);
        for (row, role) in shape.scalar_features().iter().zip(&shape.roles) {
            if *role == PointRole::Wall {
                // A wall point's nearest wall point is itself.
                assert_eq!(row[0], 0.0);
            }
        }
    }
}
