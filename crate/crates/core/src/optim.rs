//! Adam with bias-corrected moment estimates.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    timestep: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(num_params: usize, config: AdamConfig) -> Self {
        Self {
            config,
            timestep: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    pub fn timestep(&self) -> u64 {
        self.timestep
    }

    /// One update over `(parameter, gradient)` pairs, visited in a fixed order.
    ///
    /// # Panics
    /// If more pairs are supplied than the optimizer was sized for.
    pub fn step<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a mut f64, f64)>) {
        self.timestep += 1;
        let c = self.config;
        let t = self.timestep as i32;
        let bc1 = 1.0 - libm::pow(c.beta1, t as f64);
        let bc2 = 1.0 - libm::pow(c.beta2, t as f64);
        for (idx, (p, g)) in pairs.into_iter().enumerate() {
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            *m = c.beta1 * *m + (1.0 - c.beta1) * g;
            *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= c.lr * m_hat / (libm::sqrt(v_hat) + c.eps);
        }
    }

    pub fn step_slice(&mut self, params: &mut [f64], grads: &[f64]) {
        self.step(params.iter_mut().zip(grads.iter().copied()));
    }
}
