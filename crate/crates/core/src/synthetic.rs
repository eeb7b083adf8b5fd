//! Seeded synthetic stand-in for a video expression dataset: Gaussian class
//! clusters, frames grouped into videos with one dominant class each, and
//! simulated prediction sources with class-dependent noise.

use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{write_dataset, write_predictions};
use crate::model::{
    ExpressionClass, FramePrediction, LabeledSample, PredictionMatrix, CLASS_COUNT, SUM_TOLERANCE,
};

/// Imbalanced default label distribution, heavy on neutral and happiness.
pub const DEFAULT_PRIORS: [f64; CLASS_COUNT] = [0.08, 0.04, 0.04, 0.22, 0.10, 0.08, 0.30, 0.14];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub videos: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    pub class_priors: [f64; CLASS_COUNT],
    /// Probability that a frame carries its video's dominant class; other
    /// frames draw their label from `class_priors`.
    pub dominant_fraction: f64,
    pub feature_dim: usize,
    /// Standard deviation of the random class-cluster centres.
    pub class_separation: f64,
    /// Standard deviation of features around their cluster centre.
    pub feature_noise: f64,
    /// Base noise level of each simulated prediction source.
    pub source_noise: Vec<f64>,
    /// Noise multiplier on the classes a source is weak at.
    pub weak_class_factor: f64,
    /// Scale of the per-frame noise common to every source (correlated errors).
    pub shared_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            videos: 50,
            min_frames: 60,
            max_frames: 140,
            class_priors: DEFAULT_PRIORS,
            dominant_fraction: 0.5,
            feature_dim: 12,
            class_separation: 1.0,
            feature_noise: 1.0,
            source_noise: vec![0.45, 0.5, 0.55],
            weak_class_factor: 1.8,
            shared_noise: 0.4,
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let priors = &self.class_priors;
        if priors.iter().any(|p| !p.is_finite() || *p < 0.0)
            || (priors.iter().sum::<f64>() - 1.0).abs() > SUM_TOLERANCE
        {
            return Err(Error::invalid(format!(
                "class priors must be a probability distribution, got {priors:?}"
            )));
        }
        if self.videos == 0 || self.min_frames == 0 || self.max_frames < self.min_frames {
            return Err(Error::invalid(
                "need videos >= 1 and 1 <= min_frames <= max_frames",
            ));
        }
        if !(0.0..=1.0).contains(&self.dominant_fraction) {
            return Err(Error::invalid("dominant_fraction must lie in [0, 1]"));
        }
        if self.feature_dim == 0 {
            return Err(Error::invalid("feature_dim must be >= 1"));
        }
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !nonneg(self.class_separation)
            || !nonneg(self.feature_noise)
            || !nonneg(self.weak_class_factor)
            || !nonneg(self.shared_noise)
            || !self.source_noise.iter().all(|&v| nonneg(v))
        {
            return Err(Error::invalid(
                "separation, noise levels and factors must be >= 0",
            ));
        }
        Ok(())
    }

    /// Per-class noise of source `s`: classes with `(class + s) % 3 == 0` get
    /// the weak-class multiplier, so no two adjacent sources share weaknesses.
    pub fn source_class_noise(&self, s: usize) -> [f64; CLASS_COUNT] {
        std::array::from_fn(|c| {
            let base = self.source_noise[s];
            if (c + s) % 3 == 0 {
                base * self.weak_class_factor
            } else {
                base
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub samples: Vec<LabeledSample>,
    pub sources: Vec<PredictionMatrix>,
}

pub fn source_name(s: usize) -> String {
    format!("source_{s}")
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let means: Vec<Vec<f64>> = (0..CLASS_COUNT)
        .map(|_| {
            (0..spec.feature_dim)
                .map(|_| spec.class_separation * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();

    let lengths: Vec<usize> = (0..spec.videos)
        .map(|_| rng.random_range(spec.min_frames..=spec.max_frames))
        .collect();
    let dominant = assign_dominant_classes(&lengths, &spec.class_priors);

    let prior_draw = WeightedIndex::new(spec.class_priors)
        .map_err(|e| Error::invalid(format!("class priors: {e}")))?;
    let mut samples = Vec::with_capacity(lengths.iter().sum());
    for (v, (&len, &dom)) in lengths.iter().zip(&dominant).enumerate() {
        let video_id = format!("v{v:03}");
        for i in 0..len {
            let label = if rng.random::<f64>() < spec.dominant_fraction {
                dom
            } else {
                ExpressionClass::ALL[prior_draw.sample(&mut rng)]
            };
            let features = means[label.index()]
                .iter()
                .map(|m| m + spec.feature_noise * rng.sample::<f64, _>(StandardNormal))
                .collect();
            samples.push(LabeledSample {
                frame_id: format!("{video_id}_{i:05}"),
                video_id: video_id.clone(),
                features,
                label,
            });
        }
    }

    let mut shared_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    shared_rng.set_stream(SHARED_STREAM);
    let shared: Vec<[f64; CLASS_COUNT]> = samples
        .iter()
        .map(|_| {
            std::array::from_fn(|_| {
                spec.shared_noise * shared_rng.sample::<f64, _>(StandardNormal).abs()
            })
        })
        .collect();
    let sources = (0..spec.source_noise.len())
        .map(|s| simulate_source(spec, s, &samples, &shared))
        .collect();
    Ok(SyntheticData { samples, sources })
}

/// Gives each video a dominant class so that dominant-class frame mass
/// tracks the priors: longest videos first, each to the class with the
/// largest remaining deficit.
fn assign_dominant_classes(lengths: &[usize], priors: &[f64; CLASS_COUNT]) -> Vec<ExpressionClass> {
    let total: usize = lengths.iter().sum();
    let mut deficit: [f64; CLASS_COUNT] = std::array::from_fn(|c| priors[c] * total as f64);
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.sort_by(|&a, &b| lengths[b].cmp(&lengths[a]));
    let mut out = vec![ExpressionClass::Anger; lengths.len()];
    for v in order {
        let mut best = 0;
        for c in 1..CLASS_COUNT {
            if deficit[c] > deficit[best] {
                best = c;
            }
        }
        deficit[best] -= lengths[v] as f64;
        out[v] = ExpressionClass::ALL[best];
    }
    out
}

const SHARED_STREAM: u64 = u64::MAX;

/// True one-hot plus half-normal noise on every class, renormalized. The
/// source's own noise scale depends on the true class; `shared` adds the
/// per-frame component every source sees.
fn simulate_source(
    spec: &SyntheticSpec,
    s: usize,
    samples: &[LabeledSample],
    shared: &[[f64; CLASS_COUNT]],
) -> PredictionMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(s as u64 + 1);
    let noise = spec.source_class_noise(s);
    let frames = samples
        .iter()
        .zip(shared)
        .map(|(sample, common)| {
            let k = sample.label.index();
            let mut raw = [0.0; CLASS_COUNT];
            for (j, r) in raw.iter_mut().enumerate() {
                let eps = noise[k] * rng.sample::<f64, _>(StandardNormal).abs() + common[j];
                *r = if j == k { 1.0 + eps } else { eps };
            }
            let total: f64 = raw.iter().sum();
            FramePrediction {
                frame_id: sample.frame_id.clone(),
                video_id: sample.video_id.clone(),
                probs: raw.map(|r| r / total),
            }
        })
        .collect();
    PredictionMatrix::new(source_name(s), frames)
}

/// Writes `dataset.csv` and one `source_<s>.csv` per simulated source.
pub fn write_synthetic(data: &SyntheticData, dir: &Path) -> Result<(PathBuf, Vec<PathBuf>)> {
    let dataset = dir.join("dataset.csv");
    write_dataset(&data.samples, &dataset)?;
    let mut sources = Vec::with_capacity(data.sources.len());
    for m in &data.sources {
        let path = dir.join(format!("{}.csv", m.source_id));
        write_predictions(m, &path)?;
        sources.push(path);
    }
    Ok((dataset, sources))
}
