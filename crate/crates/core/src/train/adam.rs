//! Adam with bias correction, sweeping the parameter store in sorted name
//! order so updates are deterministic.

use std::collections::BTreeMap;

use crate::autodiff::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct AdamState {
    step: u64,
    first: BTreeMap<String, Vec<f64>>,
    second: BTreeMap<String, Vec<f64>>,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, name: &str) -> Option<&Vec<f64>> {
        self.first.get(name)
    }
}

/// One update from the gradients currently held in `store`.
pub fn adam_step(store: &mut ParamStore, state: &mut AdamState, cfg: &AdamConfig) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (name, entry) in store.iter_mut() {
        let m = state
            .first
            .entry(name.clone())
            .or_insert_with(|| vec![0.0; entry.values.len()]);
        let v = state
            .second
            .entry(name.clone())
            .or_insert_with(|| vec![0.0; entry.values.len()]);
        for i in 0..entry.values.len() {
            let g = entry.grad[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            entry.values[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}
