//! Adam optimizer over a flat parameter vector.

use alloc::vec;
use alloc::vec::Vec;

use crate::flt;

/// Adam hyperparameters. `epsilon` is added outside the square root of the
/// second-moment estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 0.001, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err("lr must be finite and > 0");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err("betas must be in [0, 1)");
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err("epsilon must be finite and > 0");
        }
        Ok(())
    }
}

/// First/second moment buffers plus running `beta^t` products for bias
/// correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1_pow: f64,
    beta2_pow: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], t: 0, beta1_pow: 1.0, beta2_pow: 1.0 }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One Adam update of `params` in place.
    pub fn step(&mut self, config: &AdamConfig, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "adam state length");
        assert_eq!(grads.len(), self.m.len(), "gradient length");
        self.t += 1;
        self.beta1_pow *= config.beta1;
        self.beta2_pow *= config.beta2;
        let m_corr = 1.0 / (1.0 - self.beta1_pow);
        let v_corr = 1.0 / (1.0 - self.beta2_pow);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = config.beta1 * self.m[i] + (1.0 - config.beta1) * g;
            self.v[i] = config.beta2 * self.v[i] + (1.0 - config.beta2) * g * g;
            let m_hat = self.m[i] * m_corr;
            let v_hat = self.v[i] * v_corr;
            params[i] -= config.lr * m_hat / (flt::sqrt(v_hat) + config.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_roughly_lr() {
        // With bias correction, the first step is lr * g / (|g| + eps).
        let cfg = AdamConfig::default();
        let mut state = AdamState::new(3);
        let mut p = [1.0, -2.0, 0.25];
        state.step(&cfg, &mut p, &[10.0, -0.5, 1e-3]);
        assert!((p[0] - (1.0 - cfg.lr)).abs() < 1e-9);
        assert!((p[1] - (-2.0 + cfg.lr)).abs() < 1e-9);
        assert!((p[2] - (0.25 - cfg.lr)).abs() < 1e-6);
        assert_eq!(state.steps_taken(), 1);
    }

    #[test]
    fn three_step_trajectory_matches_reference() {
        // Reference values computed independently from the published update
        // rule for gradients [1.0, -0.5, 2.0] on a single parameter at 0.5.
        let cfg = AdamConfig::default();
        let mut state = AdamState::new(1);
        let mut p = [0.5];
        let expected = [0.49900000001, 0.498733662973709, 0.498075551378428];
        for (g, want) in [1.0, -0.5, 2.0].iter().zip(expected) {
            state.step(&cfg, &mut p, &[*g]);
            assert!((p[0] - want).abs() < 1e-12, "got {} want {want}", p[0]);
        }
    }

    #[test]
    fn zero_gradient_does_not_move_parameters() {
        let cfg = AdamConfig::default();
        let mut state = AdamState::new(2);
        let mut p = [3.0, -4.0];
        state.step(&cfg, &mut p, &[0.0, 0.0]);
        assert_eq!(p, [3.0, -4.0]);
    }

    #[test]
    #[should_panic(expected = "adam state length")]
    fn length_mismatch_is_detected() {
        let cfg = AdamConfig::default();
        let mut state = AdamState::new(2);
        let mut p = [0.0; 3];
        state.step(&cfg, &mut p, &[0.0; 3]);
    }

    #[test]
    fn config_validation() {
        assert!(AdamConfig::default().validate().is_ok());
        assert!(AdamConfig { lr: 0.0, ..Default::default() }.validate().is_err());
        assert!(AdamConfig { beta1: 1.0, ..Default::default() }.validate().is_err());
        assert!(AdamConfig { epsilon: 0.0, ..Default::default() }.validate().is_err());
    }
}
