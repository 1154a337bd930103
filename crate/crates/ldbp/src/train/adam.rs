//! Bias-corrected Adam over the flat real parameter vector.

use serde::{Deserialize, Serialize};

/// Optimizer hyperparameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment buffers aligned with the parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: usize,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        Self {
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            step_count: 0,
        }
    }

    /// Reset the moments of one parameter (used when its tap is pruned).
    pub fn zero_param(&mut self, index: usize) {
        self.first_moment[index] = 0.0;
        self.second_moment[index] = 0.0;
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64], cfg: &AdamConfig) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.first_moment.len());
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.first_moment[i] = cfg.beta1 * state.first_moment[i] + (1.0 - cfg.beta1) * g;
        state.second_moment[i] = cfg.beta2 * state.second_moment[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.first_moment[i] / bc1;
        let v_hat = state.second_moment[i] / bc2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        // Bias correction makes the very first update mu * g / (|g| + eps).
        let cfg = AdamConfig::default();
        let mut state = AdamState::new(1);
        let mut params = vec![3.0];
        adam_step(&mut state, &mut params, &[2.5], &cfg);
        let delta = 3.0 - params[0];
        assert!(delta > 0.0, "positive gradient must decrease the parameter");
        assert!((0.999 * cfg.learning_rate..=cfg.learning_rate).contains(&delta));
    }

    #[test]
    fn zero_gradient_never_moves() {
        let cfg = AdamConfig::default();
        let mut state = AdamState::new(3);
        let mut params = vec![1.0, -2.0, 0.5];
        for _ in 0..50 {
            adam_step(&mut state, &mut params, &[0.0, 0.0, 0.0], &cfg);
        }
        assert_eq!(params, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn deterministic_trajectories() {
        let cfg = AdamConfig::default();
        let run = || {
            let mut state = AdamState::new(2);
            let mut params = vec![0.3, -0.7];
            for k in 0..100 {
                let g = [params[0] * 0.1 + k as f64 * 1e-3, params[1].sin()];
                adam_step(&mut state, &mut params, &g, &cfg);
            }
            params
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }
}
