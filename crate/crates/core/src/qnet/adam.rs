use serde::{Deserialize, Serialize};

use super::{zero_gradients, Dense};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 0.0005, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// One bias-corrected Adam update of `params` in place; `t` is the 1-based
/// step number.
pub fn adam_update(params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64], t: u64, cfg: &AdamConfig) {
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// Adam state for a list of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Dense>,
    v: Vec<Dense>,
}

impl Adam {
    pub fn new(layers: &[Dense], config: AdamConfig) -> Self {
        Self { config, step: 0, m: zero_gradients(layers), v: zero_gradients(layers) }
    }

    pub fn step(&mut self, layers: &mut [Dense], grads: &[Dense]) {
        assert_eq!(layers.len(), grads.len(), "gradient layer count mismatch");
        self.step += 1;
        for (((layer, g), m), v) in layers.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            assert_eq!(layer.w.dim(), g.w.dim(), "gradient shape mismatch");
            adam_update(
                layer.w.as_slice_mut().expect("standard layout"),
                g.w.as_slice().expect("standard layout"),
                m.w.as_slice_mut().expect("standard layout"),
                v.w.as_slice_mut().expect("standard layout"),
                self.step,
                &self.config,
            );
            adam_update(
                layer.b.as_slice_mut().unwrap(),
                g.b.as_slice().unwrap(),
                m.b.as_slice_mut().unwrap(),
                v.b.as_slice_mut().unwrap(),
                self.step,
                &self.config,
            );
        }
    }
}
