//! Adam with decoupled weight decay and a cosine learning-rate schedule.

use serde::{Deserialize, Serialize};

use super::{EncoderParams, ParamGrads};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrSchedule {
    Constant,
    /// Cosine decay from the base rate to zero over `total_steps`.
    Cosine { total_steps: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            weight_decay: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    pub schedule: LrSchedule,
    pub step: u64,
    m: ParamGrads,
    v: ParamGrads,
}

impl OptimizerState {
    pub fn new(params: &EncoderParams, config: OptimizerConfig, schedule: LrSchedule) -> Self {
        Self {
            config,
            schedule,
            step: 0,
            m: params.zero_grads(),
            v: params.zero_grads(),
        }
    }

    /// Learning rate used by the next step.
    pub fn current_lr(&self) -> f64 {
        scheduled_lr(self.config.lr, self.schedule, self.step)
    }
}

pub fn scheduled_lr(base: f64, schedule: LrSchedule, step: u64) -> f64 {
    match schedule {
        LrSchedule::Constant => base,
        LrSchedule::Cosine { total_steps: 0 } => base,
        LrSchedule::Cosine { total_steps } => {
            let t = step.min(total_steps) as f64 / total_steps as f64;
            0.5 * base * (1.0 + (std::f64::consts::PI * t).cos())
        }
    }
}

/// One AdamW update of a single tensor; `t` is the 1-based step number.
#[allow(clippy::too_many_arguments)]
pub fn adamw_update(
    param: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    weight_decay: f64,
    cfg: &OptimizerConfig,
    t: u64,
) {
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        param[i] -= lr * (m_hat / (v_hat.sqrt() + cfg.eps) + weight_decay * param[i]);
    }
}

/// Applies one optimizer step in place. Biases are exempt from weight decay.
pub fn optimizer_step(params: &mut EncoderParams, grads: &ParamGrads, state: &mut OptimizerState) -> Result<()> {
    if !grads.same_shape(params) || !state.m.same_shape(params) {
        return Err(Error::Dimension("gradient shapes do not match parameters".into()));
    }
    if !grads.all_finite() {
        return Err(Error::Numeric("non-finite gradient".into()));
    }
    let lr = state.current_lr();
    state.step += 1;
    let t = state.step;
    let cfg = state.config;
    let mask = params.decay_mask();
    let OptimizerState { m, v, .. } = state;
    for ((((p, g), m), v), decay) in params
        .slices_mut()
        .into_iter()
        .zip(grads.slices())
        .zip(m.slices_mut())
        .zip(v.slices_mut())
        .zip(mask)
    {
        let wd = if decay { cfg.weight_decay } else { 0.0 };
        adamw_update(p, g, m, v, lr, wd, &cfg, t);
    }
    Ok(())
}
