//! Adam with bias correction, shared by the local optimizer and the
//! network trainer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    1e-8
}

impl AdamConfig {
    pub fn new(alpha: f64, beta1: f64, beta2: f64) -> Self {
        AdamConfig {
            alpha,
            beta1,
            beta2,
            epsilon: default_epsilon(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::invalid(format!("adam alpha must be > 0, got {}", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid(format!(
                "adam betas must lie in [0, 1), got {} and {}",
                self.beta1, self.beta2
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("adam epsilon must be > 0"));
        }
        Ok(())
    }
}

impl Default for AdamConfig {
    /// Network-training defaults.
    fn default() -> Self {
        AdamConfig::new(0.001, 0.9, 0.999)
    }
}

/// Moment estimates for one parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pow1: f64,
    pow2: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            pow1: 1.0,
            pow2: 1.0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One descent step: `params -= alpha * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, cfg: &AdamConfig, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), self.m.len());
        debug_assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        self.pow1 *= cfg.beta1;
        self.pow2 *= cfg.beta2;
        let c1 = 1.0 - self.pow1;
        let c2 = 1.0 - self.pow2;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= cfg.alpha * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}
