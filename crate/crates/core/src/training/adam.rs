use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Gradients, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates for every parameter in a store.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Vec<f64>> = store.iter().map(|(_, _, t)| vec![0.0; t.len()]).collect();
        Self { step: 0, m: zeros.clone(), v: zeros }
    }
}

/// One bias-corrected Adam update. Parameters missing from `grads` see a
/// zero gradient. A non-finite gradient aborts before anything changes.
pub fn adam_step(store: &mut ParamStore, grads: &Gradients, state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if let Some(id) = grads.first_non_finite() {
        return Err(Error::NonFinite(format!("gradient of {}", store.name(id))));
    }
    if state.m.len() != store.len() {
        return Err(Error::Precondition("optimizer state does not match the parameter store".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let k = id.index();
        let g = grads.dense(id, store);
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        let values = store.values_mut(id);
        for i in 0..values.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            values[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`. Returns
/// the norm before clipping.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm.is_finite() {
        grads.scale(max_norm / norm);
    }
    norm
}
