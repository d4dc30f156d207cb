//! Adam optimizer and the MSE objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adam hyperparameters. The defaults are the single setting used for every
/// network family in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyperParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyperParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Per-parameter first/second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update with bias-corrected moments.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    hyper: &AdamHyperParams,
) {
    assert_eq!(params.len(), grads.len(), "parameter/gradient length mismatch");
    assert_eq!(params.len(), state.m.len(), "optimizer state length mismatch");
    state.t += 1;
    let bias1 = 1.0 - hyper.beta1.powi(state.t as i32);
    let bias2 = 1.0 - hyper.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
        let m_hat = state.m[i] / bias1;
        let v_hat = state.v[i] / bias2;
        params[i] -= hyper.learning_rate * m_hat / (v_hat.sqrt() + hyper.epsilon);
    }
}

/// Mean of squared differences.
pub fn mse_loss(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.is_empty() || preds.len() != targets.len() {
        return Err(Error::InvalidConfig(format!(
            "mse requires equal nonempty lengths, got {} and {}",
            preds.len(),
            targets.len()
        )));
    }
    let n = preds.len() as f64;
    Ok(preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut params = vec![1.0, -2.0, 3.5];
        let grads = vec![0.0; 3];
        let mut state = AdamState::new(3);
        adam_step(&mut params, &grads, &mut state, &AdamHyperParams::default());
        assert_eq!(params, vec![1.0, -2.0, 3.5]);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_roughly_lr() {
        // From zero state: delta = -lr * sign(g) / (1 + eps/|g|).
        let hyper = AdamHyperParams::default();
        for g in [0.5, -3.0, 1e-4] {
            let mut params = vec![0.0];
            let mut state = AdamState::new(1);
            adam_step(&mut params, &[g], &mut state, &hyper);
            let expected = -hyper.learning_rate * g.signum() / (1.0 + hyper.epsilon / g.abs());
            assert!(
                (params[0] - expected).abs() < 1e-12,
                "g={g}: got {} expected {expected}",
                params[0]
            );
        }
    }

    #[test]
    fn constant_gradient_update_approaches_lr() {
        // Iterate the update rule numerically; with a constant gradient the
        // step magnitude converges to the learning rate.
        let hyper = AdamHyperParams::default();
        let mut params = vec![0.0];
        let mut state = AdamState::new(1);
        let mut last = params[0];
        let mut step = 0.0;
        for _ in 0..5000 {
            adam_step(&mut params, &[0.7], &mut state, &hyper);
            step = (params[0] - last).abs();
            last = params[0];
        }
        assert!(
            (step - hyper.learning_rate).abs() < 1e-6,
            "final step {step}"
        );
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[0.0], &[3.0]).unwrap(), 9.0);
        assert!(mse_loss(&[], &[]).is_err());
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mse_matches_two_pass_oracle() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let preds: Vec<f64> = (0..500).map(|_| rng.random::<f64>() * 100.0).collect();
        let targets: Vec<f64> = (0..500).map(|_| rng.random::<f64>() * 100.0).collect();
        let mut total = 0.0;
        for i in 0..preds.len() {
            let d = preds[i] - targets[i];
            total += d * d;
        }
        let oracle = total / preds.len() as f64;
        assert!((mse_loss(&preds, &targets).unwrap() - oracle).abs() < 1e-12);
    }
}
