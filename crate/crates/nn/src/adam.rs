use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::tensor::Param;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub base_lr: f64,
    /// Multiplicative learning-rate decay applied once per epoch.
    pub decay_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon_hat: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            base_lr: 1e-3,
            decay_rate: 0.96,
            beta1: 0.9,
            beta2: 0.999,
            epsilon_hat: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.base_lr * self.decay_rate.powi(epoch as i32)
    }
}

/// Adam moments for one set of parameters.
///
/// Uses the bias-corrected step size form
/// `lr_t = lr * sqrt(1 - beta2^t) / (1 - beta1^t)`,
/// `p -= lr_t * m / (sqrt(v) + epsilon_hat)`.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[&Param]) -> Self {
        let zeros = |p: &&Param| vec![0.0; p.value.len()];
        Self {
            config,
            first: params.iter().map(zeros).collect(),
            second: params.iter().map(zeros).collect(),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [&mut Param], epoch: usize) -> Result<()> {
        if params.len() != self.first.len()
            || params.iter().zip(&self.first).any(|(p, m)| p.value.len() != m.len())
        {
            return Err(NnError::ShapeMismatch {
                layer: "adam".into(),
                expected: self.first.iter().map(Vec::len).collect(),
                got: params.iter().map(|p| p.value.len()).collect(),
            });
        }
        self.step += 1;
        let AdamConfig {
            beta1,
            beta2,
            epsilon_hat,
            ..
        } = self.config;
        let t = self.step as i32;
        let lr_t = self.config.learning_rate(epoch) * (1.0 - beta2.powi(t)).sqrt() / (1.0 - beta1.powi(t));
        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let Param { value, grad } = &mut **p;
            for (((w, &g), m), v) in value.data_mut().iter_mut().zip(grad.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *w -= lr_t * *m / (v.sqrt() + epsilon_hat);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn scalar(v: f64) -> Param {
        Param::new(Tensor::from_vec(&[1], vec![v]).unwrap())
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut p = scalar(0.75);
        let mut state = AdamState::new(AdamConfig::default(), &[&p]);
        for epoch in 0..3 {
            state.step(&mut [&mut p], epoch).unwrap();
        }
        assert_eq!(p.value.data()[0], 0.75);
    }

    #[test]
    fn decayed_learning_rate() {
        let cfg = AdamConfig::default();
        assert!((cfg.learning_rate(2) - 1e-3 * 0.9216).abs() < 1e-18);
    }

    #[test]
    fn first_steps_match_hand_evaluated_recurrences() {
        // constant g = 1: m_t = 1 - 0.9^t, v_t = 1 - 0.999^t, so each step moves
        // by lr * (1 - 0.999^t)^½ / (1 - 0.9^t) * m_t / (v_t^½ + eps) = lr / (1 + eps/v_t^½)
        let cfg = AdamConfig::default();
        let mut p = scalar(0.0);
        p.grad.data_mut()[0] = 1.0;
        let mut state = AdamState::new(cfg, &[&p]);
        let mut expected = 0.0;
        for t in 1..=3 {
            state.step(&mut [&mut p], 0).unwrap();
            let v: f64 = 1.0 - 0.999f64.powi(t);
            expected -= 1e-3 / (1.0 + 1e-8 / v.sqrt());
            assert!((p.value.data()[0] - expected).abs() < 1e-15, "step {t}");
        }
        // first step is essentially lr
        assert!((expected / 3.0 + 1e-3).abs() < 1e-9);
    }
}
