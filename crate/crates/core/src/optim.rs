//! Adam and the single-cycle cosine-annealing learning-rate schedule.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Learning rate at epoch `t` of `total`:
/// `eta_min + (eta_max - eta_min) * (1 + cos(pi * t / total)) / 2`, no restarts.
pub fn cosine_lr(t: usize, total: usize, eta_max: f64, eta_min: f64) -> Result<f64> {
    if total == 0 {
        return Err(Error::invalid("cosine schedule needs at least one epoch"));
    }
    if t > total {
        return Err(Error::invalid(format!("epoch {t} outside 0..={total}")));
    }
    if !(eta_min >= 0.0 && eta_max >= eta_min && eta_max.is_finite()) {
        return Err(Error::invalid(format!(
            "need eta_max >= eta_min >= 0, got {eta_max} and {eta_min}"
        )));
    }
    if t == 0 {
        return Ok(eta_max);
    }
    if t == total {
        return Ok(eta_min);
    }
    let progress = t as f64 / total as f64;
    Ok(eta_min + 0.5 * (eta_max - eta_min) * (1.0 + (PI * progress).cos()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates for a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut [f64],
    grads: &[f64],
    lr: f64,
    hyper: &AdamHyper,
) -> Result<()> {
    if params.len() != grads.len() || state.first_moment.len() != params.len() {
        return Err(Error::LengthMismatch {
            what: "adam parameters vs gradients",
            left: params.len(),
            right: grads.len(),
        });
    }
    if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            what: "gradient",
            index,
        });
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bias1 = 1.0 - hyper.beta1.powi(t);
    let bias2 = 1.0 - hyper.beta2.powi(t);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
    {
        *m = hyper.beta1 * *m + (1.0 - hyper.beta1) * g;
        *v = hyper.beta2 * *v + (1.0 - hyper.beta2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *p -= lr * m_hat / (v_hat.sqrt() + hyper.eps);
    }
    Ok(())
}
