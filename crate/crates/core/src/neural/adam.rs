//! Adaptive moment estimation over a flat parameter vector.

use serde::{Deserialize, Serialize};

use crate::Float;

use super::NeuralError;

/// ADAM hyperparameters. Defaults are learning rate 1e-3, decay rates 0.9 and
/// 0.999, epsilon 1e-8.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamSettings {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamSettings {
    fn default() -> Self {
        Self { alpha: 0.001, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Optimizer state: first/second moment accumulators and the step counter.
#[derive(Debug, Clone)]
pub struct AdamState<S> {
    pub m: Vec<S>,
    pub v: Vec<S>,
    pub t: u64,
    pub alpha: S,
    pub beta1: S,
    pub beta2: S,
    pub epsilon: S,
}

impl<S: Float> AdamState<S> {
    pub fn new(n_params: usize, settings: AdamSettings) -> Self {
        Self {
            m: vec![S::zero(); n_params],
            v: vec![S::zero(); n_params],
            t: 0,
            alpha: S::cast(settings.alpha),
            beta1: S::cast(settings.beta1),
            beta2: S::cast(settings.beta2),
            epsilon: S::cast(settings.epsilon),
        }
    }
}

/// One ADAM update in place: moments decay toward the gradient, bias
/// correction rescales them, and each parameter moves by
/// `alpha * m_hat / (sqrt(v_hat) + epsilon)`.
pub fn adam_step<S: Float>(
    params: &mut [S],
    grads: &[S],
    state: &mut AdamState<S>,
) -> Result<(), NeuralError> {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    if let Some(idx) = grads.iter().position(|g| !g.is_finite()) {
        return Err(NeuralError::NonFiniteGradient { index: idx });
    }
    state.t += 1;
    let one = S::one();
    let bc1 = one - state.beta1.powi(state.t as i32);
    let bc2 = one - state.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (one - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (one - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] = params[i] - state.alpha * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_but_advances_time() {
        let mut params = vec![0.5f64, -1.25];
        let mut state = AdamState::new(2, AdamSettings::default());
        adam_step(&mut params, &[0.0, 0.0], &mut state).unwrap();
        assert_eq!(params, vec![0.5, -1.25]);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn single_step_matches_hand_derivation() {
        // theta = 0, g = 1: m_hat = v_hat = 1, so the update is
        // -alpha / (1 + eps) = -0.001 / (1 + 1e-8).
        let mut params = vec![0.0f64];
        let mut state = AdamState::new(1, AdamSettings::default());
        adam_step(&mut params, &[1.0], &mut state).unwrap();
        let expected = -0.001 / (1.0 + 1e-8);
        assert!((params[0] - expected).abs() < 1e-12, "got {}", params[0]);
    }

    #[test]
    fn constant_gradient_approaches_fixed_step_of_alpha() {
        let mut params = vec![0.0f64];
        let mut state = AdamState::new(1, AdamSettings::default());
        let mut prev = params[0];
        let mut last_step = 0.0;
        for _ in 0..5000 {
            adam_step(&mut params, &[1.0], &mut state).unwrap();
            last_step = prev - params[0];
            prev = params[0];
        }
        // Moments settle at m_hat = 1, v_hat = 1, so each step tends to alpha.
        assert!((last_step - 0.001).abs() < 1e-6, "step {last_step}");
    }

    #[test]
    fn second_moment_stays_nonnegative_and_time_increases() {
        let mut params = vec![0.1f64, 0.2, -0.3];
        let mut state = AdamState::new(3, AdamSettings::default());
        for step in 1..=50u64 {
            let g = [0.5 * step as f64, -1.0, 2.0];
            adam_step(&mut params, &g, &mut state).unwrap();
            assert_eq!(state.t, step);
            assert!(state.v.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut params = vec![0.0f64];
        let mut state = AdamState::new(1, AdamSettings::default());
        let err = adam_step(&mut params, &[f64::NAN], &mut state).unwrap_err();
        assert!(matches!(err, NeuralError::NonFiniteGradient { index: 0 }));
    }
}
