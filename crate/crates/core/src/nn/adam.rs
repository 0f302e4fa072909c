use serde::{Deserialize, Serialize};

use super::{Mlp, NnError};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn for_net(net: &Mlp) -> Self {
        Self::new(net.weights().len())
    }
}

/// One bias-corrected Adam update of `net` in place.
pub fn adam_step(
    net: &mut Mlp,
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
) -> Result<(), NnError> {
    if !(lr > 0.0) {
        return Err(NnError::InvalidLearningRate(lr));
    }
    let n = net.weights().len();
    for len in [grads.len(), state.m.len(), state.v.len()] {
        if len != n {
            return Err(NnError::LengthMismatch { expected: n, got: len });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    for (((w, &g), m), v) in net
        .weights_mut()
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *w -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
    Ok(())
}
