//! Adaptive-moment optimizer with decoupled weight decay, global
//! gradient-norm clipping, and a linear warmup/decay schedule.

use super::params::{Gradients, ModelParams, TensorRole};
use super::{ModelError, TrainConfig};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

/// First/second moment estimates plus the planned step count for the
/// learning-rate schedule.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub m: Gradients,
    pub v: Gradients,
    pub total_steps: usize,
}

impl OptimizerState {
    pub fn new(params: &ModelParams, total_steps: usize) -> Self {
        Self {
            m: Gradients::zeros(params),
            v: Gradients::zeros(params),
            total_steps,
        }
    }
}

/// Linear warmup to the base rate, then linear decay to zero:
/// `min(step/warmup, max(0, (total-step)/(total-warmup)))`.
pub fn schedule_factor(step: usize, warmup: usize, total: usize) -> f64 {
    let warm = if warmup == 0 { 1.0 } else { step as f64 / warmup as f64 };
    let decay = if total > warmup {
        ((total as f64 - step as f64) / (total - warmup) as f64).max(0.0)
    } else {
        1.0
    };
    warm.min(decay)
}

/// Global L2 norm over every gradient entry that will be applied.
pub fn global_grad_norm(grads: &Gradients, include_temperature: bool) -> f64 {
    let mut sum = 0.0;
    for (role, tensor) in grads.tensors() {
        if role == TensorRole::Temperature && !include_temperature {
            continue;
        }
        for g in tensor {
            sum += g * g;
        }
    }
    sum.sqrt()
}

/// One bias-corrected adaptive-moment update with decoupled weight decay.
///
/// The gradient is clipped to `config.clip_norm` by global norm before the
/// update. `step_index` is one-based. Temperature is excluded from weight
/// decay and updated only when `config.learn_temperature` is set.
pub fn optimizer_step(
    params: &mut ModelParams,
    grads: &Gradients,
    state: &mut OptimizerState,
    config: &TrainConfig,
    step_index: usize,
) -> Result<(), ModelError> {
    for ((role, p), (_, g)) in params.tensors().iter().zip(grads.tensors().iter()) {
        if p.len() != g.len() {
            return Err(ModelError::ShapeMismatch {
                what: role.name(),
                expected: p.len(),
                got: g.len(),
            });
        }
    }

    let norm = global_grad_norm(grads, config.learn_temperature);
    let clip_scale = if norm > config.clip_norm { config.clip_norm / norm } else { 1.0 };
    let lr = config.learning_rate
        * schedule_factor(step_index, config.warmup_steps, state.total_steps);
    let bias1 = 1.0 - BETA1.powi(step_index as i32);
    let bias2 = 1.0 - BETA2.powi(step_index as i32);

    let mut param_tensors = params.tensors_mut();
    let grad_tensors = grads.tensors();
    let mut m_tensors = state.m.tensors_mut();
    let mut v_tensors = state.v.tensors_mut();

    for t in 0..param_tensors.len() {
        let role = param_tensors[t].0;
        if role == TensorRole::Temperature && !config.learn_temperature {
            continue;
        }
        let decay = if role == TensorRole::Temperature { 0.0 } else { config.weight_decay };
        let p = &mut param_tensors[t].1;
        let g = grad_tensors[t].1;
        let m = &mut m_tensors[t].1;
        let v = &mut v_tensors[t].1;
        for c in 0..p.len() {
            let clipped = g[c] * clip_scale;
            m[c] = BETA1 * m[c] + (1.0 - BETA1) * clipped;
            v[c] = BETA2 * v[c] + (1.0 - BETA2) * clipped * clipped;
            let m_hat = m[c] / bias1;
            let v_hat = v[c] / bias2;
            p[c] -= lr * (m_hat / (v_hat.sqrt() + EPSILON) + decay * p[c]);
        }
    }

    if !params.all_finite() {
        return Err(ModelError::NonFinite { head: "parameters" });
    }
    Ok(())
}
