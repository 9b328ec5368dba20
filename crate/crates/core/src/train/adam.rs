//! Bias-corrected Adam.

use serde::{Deserialize, Serialize};

use crate::tensor::Parameters;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam<P: Parameters> {
    config: AdamConfig,
    step: u64,
    m: P,
    v: P,
}

impl<P: Parameters> Adam<P> {
    pub fn new(config: AdamConfig, params: &P) -> Self {
        Adam {
            config,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update of `params` along `grads`. Updated parameters are rounded
    /// to `f32` so they survive a checkpoint round-trip unchanged.
    pub fn step(&mut self, params: &mut P, grads: &P) {
        self.step += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            eps,
        } = self.config;
        let c1 = 1.0 - b1.powi(self.step.min(i32::MAX as u64) as i32);
        let c2 = 1.0 - b2.powi(self.step.min(i32::MAX as u64) as i32);

        let gs = grads.tensors();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, g), m), v) in params.tensors_mut().into_iter().zip(gs).zip(ms).zip(vs) {
            let (g, m, v) = (g.data(), m.data_mut(), v.data_mut());
            for (k, pv) in p.data_mut().iter_mut().enumerate() {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                *pv = (*pv - lr * m_hat / (v_hat.sqrt() + eps)) as f32 as f64;
            }
        }
    }
}
