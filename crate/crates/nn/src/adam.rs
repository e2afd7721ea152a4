use serde::{Deserialize, Serialize};

use crate::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
}

impl AdamState {
    pub fn new(parameter_count: usize, lr: f64) -> Self {
        Self::with_config(parameter_count, AdamConfig::with_lr(lr))
    }

    pub fn with_config(parameter_count: usize, config: AdamConfig) -> Self {
        Self {
            config,
            first_moment: vec![0.0; parameter_count],
            second_moment: vec![0.0; parameter_count],
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }

    /// One bias-corrected Adam descent step on a flat vector.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if grads.len() != params.len() {
            return Err(NnError::Dimension {
                context: "adam gradient",
                expected: params.len(),
                got: grads.len(),
            });
        }
        self.step_slices(&mut [(params, grads)])
    }

    /// Same as [`AdamState::step`] over a parameter vector split into
    /// consecutive slices. Nothing is modified if any gradient is non-finite.
    pub fn step_slices(&mut self, slices: &mut [(&mut [f64], &[f64])]) -> Result<()> {
        let total: usize = slices.iter().map(|(p, _)| p.len()).sum();
        if total != self.first_moment.len() {
            return Err(NnError::Dimension {
                context: "adam parameters",
                expected: self.first_moment.len(),
                got: total,
            });
        }
        let mut index = 0;
        for (params, grads) in slices.iter() {
            if params.len() != grads.len() {
                return Err(NnError::Dimension {
                    context: "adam gradient",
                    expected: params.len(),
                    got: grads.len(),
                });
            }
            if let Some(bad) = grads.iter().position(|g| !g.is_finite()) {
                return Err(NnError::NonFiniteGradient { index: index + bad });
            }
            index += grads.len();
        }

        self.step_count += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step_count as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);

        let mut offset = 0;
        for (params, grads) in slices.iter_mut() {
            let m = &mut self.first_moment[offset..offset + params.len()];
            let v = &mut self.second_moment[offset..offset + params.len()];
            for (((p, &g), m), v) in params.iter_mut().zip(grads.iter()).zip(m).zip(v) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            offset += params.len();
        }
        Ok(())
    }
}
