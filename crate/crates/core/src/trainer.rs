//! Linear-softmax classifier trained with focal loss, Adam and a
//! per-epoch cosine learning-rate schedule. Stands in for a CNN backbone
//! as a prediction source.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::focal::{focal_loss_with_grad, FocalLossParams};
use crate::model::{
    feature_dim, softmax, FramePrediction, LabeledSample, PredictionMatrix, CLASS_COUNT,
};
use crate::optim::{adam_step, cosine_lr, AdamHyper, AdamState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub min_lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub loss: FocalLossParams,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            initial_lr: 0.001,
            min_lr: 0.0,
            epochs: 30,
            batch_size: 256,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            loss: FocalLossParams::default(),
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::invalid(format!(
                "initial_lr must be > 0, got {}",
                self.initial_lr
            )));
        }
        if !(self.min_lr >= 0.0 && self.min_lr <= self.initial_lr) {
            return Err(Error::invalid(format!(
                "min_lr must lie in [0, initial_lr], got {}",
                self.min_lr
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        for (name, beta) in [
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
        ] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::invalid(format!(
                    "{name} must lie in [0, 1), got {beta}"
                )));
            }
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::invalid("adam_eps must be > 0"));
        }
        self.loss.validate()
    }

    pub fn adam(&self) -> AdamHyper {
        AdamHyper {
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

/// Scores `z = Wᵀx + b`; `weights` is `dim × 8`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSoftmaxModel {
    dim: usize,
    weights: Vec<f64>,
    bias: [f64; CLASS_COUNT],
}

impl LinearSoftmaxModel {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            weights: vec![0.0; dim * CLASS_COUNT],
            bias: [0.0; CLASS_COUNT],
        }
    }

    pub fn from_parts(dim: usize, weights: Vec<f64>, bias: [f64; CLASS_COUNT]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("model dimension must be >= 1"));
        }
        if weights.len() != dim * CLASS_COUNT {
            return Err(Error::LengthMismatch {
                what: "model weights vs dim x 8",
                left: weights.len(),
                right: dim * CLASS_COUNT,
            });
        }
        if let Some(index) = weights.iter().chain(&bias).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "model parameter",
                index,
            });
        }
        Ok(Self { dim, weights, bias })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64; CLASS_COUNT] {
        &self.bias
    }

    pub fn logits(&self, x: &[f64]) -> [f64; CLASS_COUNT] {
        let mut z = self.bias;
        for (xd, row) in x.iter().zip(self.weights.chunks_exact(CLASS_COUNT)) {
            for (zc, w) in z.iter_mut().zip(row) {
                *zc += xd * w;
            }
        }
        z
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut flat = self.weights.clone();
        flat.extend_from_slice(&self.bias);
        flat
    }

    fn from_flat(dim: usize, flat: &[f64]) -> Self {
        let split = dim * CLASS_COUNT;
        let mut bias = [0.0; CLASS_COUNT];
        bias.copy_from_slice(&flat[split..]);
        Self {
            dim,
            weights: flat[..split].to_vec(),
            bias,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: LinearSoftmaxModel,
    /// Mean focal loss of each epoch, accumulated while the epoch ran.
    pub loss_history: Vec<f64>,
}

pub fn train(samples: &[LabeledSample], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let dim = feature_dim(samples)?;
    let hyper = config.adam();
    let mut flat = LinearSoftmaxModel::zeros(dim).to_flat();
    let mut state = AdamState::new(flat.len());
    let mut grads = vec![0.0; flat.len()];
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    let mut loss_history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let lr = cosine_lr(epoch, config.epochs, config.initial_lr, config.min_lr)?;
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let model = LinearSoftmaxModel::from_flat(dim, &flat);
            let (weight_grads, bias_grads) = grads.split_at_mut(dim * CLASS_COUNT);
            for &i in batch {
                let sample = &samples[i];
                let z = model.logits(&sample.features);
                let (loss, dz) = focal_loss_with_grad(&z, sample.label, &config.loss);
                epoch_loss += loss;
                for (xd, row) in sample
                    .features
                    .iter()
                    .zip(weight_grads.chunks_exact_mut(CLASS_COUNT))
                {
                    for (g, d) in row.iter_mut().zip(&dz) {
                        *g += xd * d;
                    }
                }
                for (g, d) in bias_grads.iter_mut().zip(&dz) {
                    *g += d;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| *g *= scale);
            adam_step(&mut state, &mut flat, &grads, lr, &hyper)?;
        }
        loss_history.push(epoch_loss / samples.len() as f64);
    }

    Ok(TrainOutcome {
        model: LinearSoftmaxModel::from_flat(dim, &flat),
        loss_history,
    })
}

/// Softmax outputs for every sample, in input order.
pub fn predict(
    model: &LinearSoftmaxModel,
    samples: &[LabeledSample],
    source_id: &str,
) -> Result<PredictionMatrix> {
    let frames = samples
        .iter()
        .map(|s| {
            if s.features.len() != model.dim {
                return Err(Error::LengthMismatch {
                    what: "sample features vs model dimension",
                    left: s.features.len(),
                    right: model.dim,
                });
            }
            Ok(FramePrediction {
                frame_id: s.frame_id.clone(),
                video_id: s.video_id.clone(),
                probs: softmax(&model.logits(&s.features)),
            })
        })
        .collect::<Result<_>>()?;
    Ok(PredictionMatrix::new(source_id, frames))
}

/// Fraction of samples whose argmax prediction equals the label.
pub fn accuracy(model: &LinearSoftmaxModel, samples: &[LabeledSample]) -> Result<f64> {
    let preds = predict(model, samples, "accuracy")?;
    let hits = preds
        .labels()
        .iter()
        .zip(samples)
        .filter(|(p, s)| **p == s.label)
        .count();
    Ok(hits as f64 / samples.len().max(1) as f64)
}
