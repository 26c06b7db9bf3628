//! Adam with linear warmup and optional global-norm clipping.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::params::{Grads, ParamStore};
use super::tensor::Matrix;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub lr: f64,
    /// Steps over which the learning rate ramps linearly up to `lr`.
    pub warmup_steps: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Rescale gradients whose global L2 norm exceeds this.
    pub clip_norm: Option<f64>,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self { lr: 3e-4, warmup_steps: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8, clip_norm: Some(1.0) }
    }
}

impl OptimConfig {
    /// Warmup over `fraction` of `total_steps` (rounded up).
    pub fn with_warmup_fraction(mut self, total_steps: u64, fraction: f64) -> Self {
        self.warmup_steps = math::ceil(total_steps as f64 * fraction) as u64;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    config: OptimConfig,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    step: u64,
}

impl Adam {
    pub fn new(params: &ParamStore, config: OptimConfig) -> Self {
        let zeros = || params.values().iter().map(|p| Matrix::zeros(p.rows, p.cols)).collect();
        Self { config, m: zeros(), v: zeros(), step: 0 }
    }

    pub fn config(&self) -> &OptimConfig {
        &self.config
    }

    /// Updates applied so far.
    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Learning rate used for the update with 0-based index `step`.
    pub fn lr_at(&self, step: u64) -> f64 {
        let w = self.config.warmup_steps;
        if w == 0 || step >= w {
            self.config.lr
        } else {
            self.config.lr * (step + 1) as f64 / w as f64
        }
    }

    /// Applies one update and returns the learning rate used.
    pub(crate) fn update(&mut self, params: &mut ParamStore, grads: &Grads) -> f64 {
        let lr = self.lr_at(self.step);
        self.step += 1;
        let c = &self.config;
        let clip = match c.clip_norm {
            Some(max) => {
                let n = grads.norm();
                if n > max { max / n } else { 1.0 }
            }
            None => 1.0,
        };
        let t = self.step as i32;
        let bc1 = 1.0 - math::pow(c.beta1, t as f64);
        let bc2 = 1.0 - math::pow(c.beta2, t as f64);
        for (((p, g), m), v) in params.values_mut().iter_mut().zip(grads.values()).zip(&mut self.m).zip(&mut self.v) {
            for (((w, &g), m), v) in p.data.iter_mut().zip(&g.data).zip(&mut m.data).zip(&mut v.data) {
                let g = g * clip;
                *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                let mh = *m / bc1;
                let vh = *v / bc2;
                *w -= lr * mh / (math::sqrt(vh) + c.eps);
            }
        }
        lr
    }
}
