//! Adam optimizer with bias-corrected moment estimates.

use crate::error::{Error, Result};

/// Per-parameter optimizer state. `m` and `v` track the exponential moving
/// averages of the gradient and its square.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step_count: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    /// Fresh state with the canonical defaults β1=0.9, β2=0.999, ε=1e-8.
    pub fn new(param_count: usize, learning_rate: f64) -> Self {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }
}

/// One Adam update: `p ← p − η·m̂/(√v̂ + ε)` with bias-corrected `m̂`, `v̂`.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != state.m.len() || grads.len() != state.m.len() {
        return Err(Error::Mismatch {
            what: "adam parameter count",
            expected: state.m.len(),
            actual: if params.len() != state.m.len() { params.len() } else { grads.len() },
        });
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let m_corr = 1.0 - state.beta1.powi(t);
    let v_corr = 1.0 - state.beta2.powi(t);
    for idx in 0..params.len() {
        let g = grads[idx];
        state.m[idx] = state.beta1 * state.m[idx] + (1.0 - state.beta1) * g;
        state.v[idx] = state.beta2 * state.v[idx] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[idx] / m_corr;
        let v_hat = state.v[idx] / v_corr;
        params[idx] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}
