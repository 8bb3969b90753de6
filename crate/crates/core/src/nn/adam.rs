use crate::error::{Error, Result};
use crate::nn::tensor::ParamSet;

#[derive(Debug, Clone, Copy, PartialEq)]
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

/// Adam moments for one [`ParamSet`].
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParamSet) -> Self {
        let zeros = || params.iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        Adam {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, index: usize) -> &[f64] {
        &self.m[index]
    }

    pub fn second_moment(&self, index: usize) -> &[f64] {
        &self.v[index]
    }

    /// Applies one bias-corrected update to every parameter that holds a
    /// gradient, then clears all gradients. Parameters without a gradient are
    /// left untouched.
    pub fn step(&mut self, params: &mut ParamSet) -> Result<()> {
        if self.m.len() != params.len() {
            return Err(Error::Usage("optimizer built for a different parameter set".into()));
        }
        if !params.has_grads() {
            return Err(Error::Usage("adam step without gradients".into()));
        }
        for t in params.tensors_mut() {
            if t.grad().is_some_and(|g| g.iter().any(|v| !v.is_finite())) {
                return Err(Error::Numeric("non-finite gradient".into()));
            }
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for ((t, m), v) in params.tensors_mut().zip(&mut self.m).zip(&mut self.v) {
            let Some(g) = t.grad().map(<[f64]>::to_vec) else {
                continue;
            };
            let values = t.values_mut();
            for j in 0..g.len() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                values[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            t.clear_grad();
        }
        Ok(())
    }
}
