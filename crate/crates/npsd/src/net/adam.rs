//! Bias-corrected Adam over the flat parameter buffer.

use super::{r, NetworkParams, Real};

#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second-moment estimates plus the step counter.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    m: Vec<T>,
    v: Vec<T>,
    step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(param_count: usize) -> Self {
        Self {
            m: vec![T::zero(); param_count],
            v: vec![T::zero(); param_count],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One optimizer step:
/// `m ← β1·m + (1−β1)·g`, `v ← β2·v + (1−β2)·g²`,
/// `θ ← θ − η·m̂ / (√v̂ + ε)` with `m̂ = m/(1−β1^t)`, `v̂ = v/(1−β2^t)`.
pub fn adam_step<T: Real>(
    params: &mut NetworkParams<T>,
    grads: &NetworkParams<T>,
    state: &mut AdamState<T>,
    config: &AdamConfig,
) {
    assert_eq!(params.data().len(), grads.data().len());
    assert_eq!(params.data().len(), state.m.len());
    state.step += 1;
    let t = state.step as i32;
    let beta1 = r::<T>(config.beta1);
    let beta2 = r::<T>(config.beta2);
    let one_m_beta1 = r::<T>(1.0 - config.beta1);
    let one_m_beta2 = r::<T>(1.0 - config.beta2);
    let corr1 = r::<T>(1.0 - config.beta1.powi(t));
    let corr2 = r::<T>(1.0 - config.beta2.powi(t));
    let lr = r::<T>(config.learning_rate);
    let eps = r::<T>(config.epsilon);

    let data = params.data_mut();
    for idx in 0..data.len() {
        let g = grads.data()[idx];
        state.m[idx] = beta1 * state.m[idx] + one_m_beta1 * g;
        state.v[idx] = beta2 * state.v[idx] + one_m_beta2 * g * g;
        let m_hat = state.m[idx] / corr1;
        let v_hat = state.v[idx] / corr2;
        data[idx] = data[idx] - lr * m_hat / (v_hat.sqrt() + eps);
    }
}
