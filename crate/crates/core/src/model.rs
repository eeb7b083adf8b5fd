//! Shared domain types: the expression taxonomy, probability vectors,
//! per-source prediction matrices and labeled samples.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CLASS_COUNT: usize = 8;

/// Tolerance within which a row is accepted as-is.
pub const SUM_TOLERANCE: f64 = 1e-6;
/// Rows further than `SUM_TOLERANCE` but within this are renormalized.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-3;

/// The eight expression categories, in the frozen file-format order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpressionClass {
    Anger = 0,
    Disgust = 1,
    Fear = 2,
    Happiness = 3,
    Sadness = 4,
    Surprise = 5,
    Neutral = 6,
    Other = 7,
}

impl ExpressionClass {
    pub const ALL: [ExpressionClass; CLASS_COUNT] = [
        ExpressionClass::Anger,
        ExpressionClass::Disgust,
        ExpressionClass::Fear,
        ExpressionClass::Happiness,
        ExpressionClass::Sadness,
        ExpressionClass::Surprise,
        ExpressionClass::Neutral,
        ExpressionClass::Other,
    ];

    pub const NAMES: [&'static str; CLASS_COUNT] = [
        "anger",
        "disgust",
        "fear",
        "happiness",
        "sadness",
        "surprise",
        "neutral",
        "other",
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or_else(|| Error::invalid(format!("class index {index} outside 0..{CLASS_COUNT}")))
    }

    pub fn name(self) -> &'static str {
        Self::NAMES[self.index()]
    }
}

impl fmt::Display for ExpressionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExpressionClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Ok(i) = s.parse::<usize>() {
            return Self::from_index(i);
        }
        Self::NAMES
            .iter()
            .position(|n| n.eq_ignore_ascii_case(s))
            .map(|i| Self::ALL[i])
            .ok_or_else(|| Error::invalid(format!("unknown expression class {s:?}")))
    }
}

/// One model's class distribution for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityVector([f64; CLASS_COUNT]);

impl ProbabilityVector {
    /// Strict constructor: entries finite, in `[0, 1]`, summing to 1 within `SUM_TOLERANCE`.
    pub fn new(values: [f64; CLASS_COUNT]) -> Result<Self> {
        check_entries(&values, "")?;
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidProbability {
                context: String::new(),
                detail: format!("entries sum to {sum}"),
            });
        }
        if let Some(i) = values.iter().position(|&v| v > 1.0) {
            return Err(Error::InvalidProbability {
                context: String::new(),
                detail: format!("entry {i} is {} > 1", values[i]),
            });
        }
        Ok(Self(values))
    }

    pub fn uniform() -> Self {
        Self([1.0 / CLASS_COUNT as f64; CLASS_COUNT])
    }

    pub fn one_hot(class: ExpressionClass) -> Self {
        let mut v = [0.0; CLASS_COUNT];
        v[class.index()] = 1.0;
        Self(v)
    }

    pub fn values(&self) -> &[f64; CLASS_COUNT] {
        &self.0
    }

    pub fn get(&self, class: ExpressionClass) -> f64 {
        self.0[class.index()]
    }

    pub fn argmax(&self) -> ExpressionClass {
        argmax_scores(&self.0)
    }
}

fn check_entries(values: &[f64; CLASS_COUNT], context: &str) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::InvalidProbability {
                context: context.to_string(),
                detail: format!("entry {i} is not finite ({v})"),
            });
        }
        if v < 0.0 {
            return Err(Error::InvalidProbability {
                context: context.to_string(),
                detail: format!("entry {i} is negative ({v})"),
            });
        }
    }
    Ok(())
}

/// Index of the largest score; ties resolve to the lowest class index.
/// Operates on raw scores, so it is usable before normalization.
pub fn argmax_scores(scores: &[f64; CLASS_COUNT]) -> ExpressionClass {
    let mut best = 0;
    for i in 1..CLASS_COUNT {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    ExpressionClass::ALL[best]
}

/// Validates `values` as a probability vector and returns its decision.
pub fn argmax_label(values: &[f64; CLASS_COUNT]) -> Result<ExpressionClass> {
    ProbabilityVector::new(*values).map(|p| p.argmax())
}

/// Numerically stable softmax (max logit subtracted before exponentiation).
pub fn softmax(logits: &[f64; CLASS_COUNT]) -> [f64; CLASS_COUNT] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; CLASS_COUNT];
    let mut total = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        total += *o;
    }
    for o in &mut out {
        *o /= total;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct FramePrediction {
    pub frame_id: String,
    pub video_id: String,
    pub probs: [f64; CLASS_COUNT],
}

/// Per-frame class distributions emitted by one prediction source.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    pub source_id: String,
    pub frames: Vec<FramePrediction>,
}

impl PredictionMatrix {
    pub fn new(source_id: impl Into<String>, frames: Vec<FramePrediction>) -> Self {
        Self {
            source_id: source_id.into(),
            frames,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_ids(&self) -> impl Iterator<Item = &str> {
        self.frames.iter().map(|f| f.frame_id.as_str())
    }

    /// Decision sequence, one label per frame in matrix order.
    pub fn labels(&self) -> Vec<ExpressionClass> {
        self.frames
            .iter()
            .map(|f| argmax_scores(&f.probs))
            .collect()
    }
}

/// Checks frame-id uniqueness and every row; rows off by at most
/// `RENORMALIZE_TOLERANCE` are rescaled to sum exactly to one.
pub fn validate_prediction_matrix(mut m: PredictionMatrix) -> Result<PredictionMatrix> {
    let mut seen = HashSet::with_capacity(m.frames.len());
    for frame in &mut m.frames {
        if !seen.insert(frame.frame_id.as_str()) {
            return Err(Error::DuplicateFrame(frame.frame_id.clone()));
        }
        let context = format!(" for frame {:?}", frame.frame_id);
        check_entries(&frame.probs, &context)?;
        let sum: f64 = frame.probs.iter().sum();
        let off = (sum - 1.0).abs();
        if off > RENORMALIZE_TOLERANCE {
            return Err(Error::InvalidProbability {
                context,
                detail: format!("entries sum to {sum}"),
            });
        }
        if off > SUM_TOLERANCE {
            for p in &mut frame.probs {
                *p /= sum;
            }
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub frame_id: String,
    pub video_id: String,
    pub features: Vec<f64>,
    pub label: ExpressionClass,
}

/// Returns the shared feature dimension, or an error when the samples disagree.
pub fn feature_dim(samples: &[LabeledSample]) -> Result<usize> {
    let first = samples
        .first()
        .ok_or_else(|| Error::invalid("dataset is empty"))?;
    let dim = first.features.len();
    if dim == 0 {
        return Err(Error::invalid("feature dimension must be at least 1"));
    }
    for s in samples {
        if s.features.len() != dim {
            return Err(Error::LengthMismatch {
                what: "feature dimension",
                left: dim,
                right: s.features.len(),
            });
        }
        if let Some(i) = s.features.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "feature",
                index: i,
            });
        }
    }
    Ok(dim)
}
