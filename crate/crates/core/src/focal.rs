//! Multi-class focal loss: value on probability vectors, and value plus
//! analytic gradient with respect to pre-softmax scores.
//!
//! For true class `k` the loss is `α_k · (1 − p_k)^γ_k · (−ln p_k)`. It is
//! non-negative, reduces to cross-entropy at `γ = 0, α = 1`, and vanishes
//! as `p_k → 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ExpressionClass, ProbabilityVector, CLASS_COUNT};

/// Lower clamp applied to the true-class probability before the log.
pub const MIN_PROBABILITY: f64 = 1e-12;

/// Per-class balance weights and focusing exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocalLossParams {
    pub alpha: [f64; CLASS_COUNT],
    pub gamma: [f64; CLASS_COUNT],
}

impl Default for FocalLossParams {
    fn default() -> Self {
        Self {
            alpha: [1.0; CLASS_COUNT],
            gamma: [2.0; CLASS_COUNT],
        }
    }
}

impl FocalLossParams {
    pub fn new(alpha: [f64; CLASS_COUNT], gamma: [f64; CLASS_COUNT]) -> Result<Self> {
        let params = Self { alpha, gamma };
        params.validate()?;
        Ok(params)
    }

    /// Same `α` and `γ` for every class.
    pub fn shared(alpha: f64, gamma: f64) -> Result<Self> {
        Self::new([alpha; CLASS_COUNT], [gamma; CLASS_COUNT])
    }

    /// Plain cross-entropy (`α = 1`, `γ = 0`).
    pub fn cross_entropy() -> Self {
        Self {
            alpha: [1.0; CLASS_COUNT],
            gamma: [0.0; CLASS_COUNT],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, values) in [("alpha", &self.alpha), ("gamma", &self.gamma)] {
            if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid(format!(
                    "focal {name}[{i}] must be finite and >= 0, got {}",
                    values[i]
                )));
            }
        }
        Ok(())
    }
}

/// Unnormalized class scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogitVector([f64; CLASS_COUNT]);

impl LogitVector {
    pub fn new(z: [f64; CLASS_COUNT]) -> Result<Self> {
        if let Some(index) = z.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "logit",
                index,
            });
        }
        Ok(Self(z))
    }

    pub fn values(&self) -> &[f64; CLASS_COUNT] {
        &self.0
    }
}

pub fn focal_loss(p: &ProbabilityVector, label: ExpressionClass, params: &FocalLossParams) -> f64 {
    let k = label.index();
    let p_true = p.values()[k].max(MIN_PROBABILITY);
    let q = (1.0 - p_true).max(0.0);
    let nll = 0.0 - p_true.ln();
    params.alpha[k] * (q.powf(params.gamma[k]) * nll)
}

/// Mean focal loss over a non-empty batch.
pub fn focal_loss_batch(
    samples: &[(ProbabilityVector, ExpressionClass)],
    params: &FocalLossParams,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("focal loss over an empty batch"));
    }
    let total: f64 = samples
        .iter()
        .map(|(p, label)| focal_loss(p, *label, params))
        .sum();
    Ok(total / samples.len() as f64)
}

/// Gradient of `focal_loss(softmax(z), label)` with respect to `z`.
pub fn focal_loss_grad(
    z: &LogitVector,
    label: ExpressionClass,
    params: &FocalLossParams,
) -> [f64; CLASS_COUNT] {
    focal_loss_with_grad(z.values(), label, params).1
}

/// Focal loss evaluated directly from logits, without forming `1 − p` by
/// subtraction, so it stays accurate when the true class is confident.
pub fn focal_loss_from_logits(
    z: &LogitVector,
    label: ExpressionClass,
    params: &FocalLossParams,
) -> f64 {
    focal_loss_with_grad(z.values(), label, params).0
}

struct SoftmaxTerms {
    probs: [f64; CLASS_COUNT],
    /// `1 − p_k`, summed over the other classes.
    q: f64,
    /// `−ln p_k`.
    nll: f64,
}

fn softmax_terms(z: &[f64; CLASS_COUNT], k: usize) -> SoftmaxTerms {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut exps = [0.0; CLASS_COUNT];
    let mut total = 0.0;
    let mut others = 0.0;
    for (j, e) in exps.iter_mut().enumerate() {
        *e = (z[j] - max).exp();
        total += *e;
        if j != k {
            others += *e;
        }
    }
    let mut probs = exps;
    for p in &mut probs {
        *p /= total;
    }
    let nll = if z[k] == max {
        // ln(total / e_k) with e_k = 1
        others.ln_1p()
    } else {
        (max - z[k]) + total.ln()
    };
    SoftmaxTerms {
        probs,
        q: others / total,
        nll,
    }
}

/// Loss value and logit gradient in one pass. Callers are expected to pass
/// finite logits; see [`LogitVector`].
pub(crate) fn focal_loss_with_grad(
    z: &[f64; CLASS_COUNT],
    label: ExpressionClass,
    params: &FocalLossParams,
) -> (f64, [f64; CLASS_COUNT]) {
    let k = label.index();
    let alpha = params.alpha[k];
    let gamma = params.gamma[k];
    let SoftmaxTerms { probs, q, nll } = softmax_terms(z, k);

    let max_nll = -MIN_PROBABILITY.ln();
    let clamped = nll > max_nll;
    let nll = nll.min(max_nll);
    let p_true = probs[k];

    let focus = q.powf(gamma);
    let loss = alpha * (focus * nll);

    // dL/dz_j = α·h·(p_j − δ_jk) with h = γ·p·q^(γ−1)·nll + q^γ
    let modulating = if gamma == 0.0 || q == 0.0 {
        0.0
    } else {
        gamma * p_true * q.powf(gamma - 1.0) * nll
    };
    let h = if clamped {
        modulating
    } else {
        modulating + focus
    };
    let scale = alpha * h;

    let mut grad = [0.0; CLASS_COUNT];
    for (j, g) in grad.iter_mut().enumerate() {
        *g = if j == k {
            -(scale * q)
        } else {
            scale * probs[j]
        };
    }
    (loss, grad)
}
