//! Adam with L2 weight decay folded into the gradient.

use ndarray::{Array2, Zip};

use super::Params;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Coefficient of the L2 penalty, added to the gradient as `wd * θ`.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 5e-4,
        }
    }
}

/// Optimizer state: first and second moment estimates and the step count.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig, params: &Params) -> Self {
        let zeros = || params.tensors().iter().map(|t| Array2::zeros(t.value.raw_dim())).collect();
        Self {
            cfg,
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    /// Number of steps taken so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update of `params` in place.
    pub fn step(&mut self, params: &mut Params, grads: &Params) -> Result<()> {
        params.check_same_shape(grads)?;
        if self.m.len() != params.len() {
            return Err(Error::dims("optimizer state", self.m.len(), params.len()));
        }
        if !grads.all_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.cfg;
        let t = self.t as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for i in 0..params.len() {
            let g = grads.tensor(i);
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            Zip::from(params.tensor_mut(i))
                .and(g)
                .and(m)
                .and(v)
                .for_each(|p, &g, m, v| {
                    let g = g + weight_decay * *p;
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= lr * m_hat / (v_hat.sqrt() + eps);
                });
        }
        if !params.all_finite() {
            return Err(Error::NonFinite("parameters after update".into()));
        }
        Ok(())
    }
}
