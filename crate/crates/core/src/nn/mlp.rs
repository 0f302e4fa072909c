use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NnError;
use crate::LossFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

/// A scalar loss over a batch of network outputs, evaluated one sample at a
/// time. The batch loss is the mean of the per-sample values.
pub trait BatchLoss {
    /// Loss of sample `index` given its network `output`. Adds the derivative
    /// of that loss with respect to `output` into `grad`, which the caller
    /// zeroes beforehand.
    fn sample_loss(&self, index: usize, output: &[f64], grad: &mut [f64]) -> f64;

    /// Whether the loss is differentiable within `h` of `output`.
    /// Gradient checks skip samples for which this is false.
    fn is_smooth_at(&self, _index: usize, _output: &[f64], _h: f64) -> bool {
        true
    }
}

/// Elementwise regression against fixed targets, summed over output units.
#[derive(Debug, Clone, PartialEq)]
pub struct Regression {
    pub targets: Vec<Vec<f64>>,
    pub loss: LossFn,
}

impl BatchLoss for Regression {
    fn sample_loss(&self, index: usize, output: &[f64], grad: &mut [f64]) -> f64 {
        let target = &self.targets[index];
        let mut total = 0.0;
        for ((o, t), g) in output.iter().zip(target).zip(grad.iter_mut()) {
            total += self.loss.eval(*t, *o);
            *g += self.loss.grad_pred(*t, *o);
        }
        total
    }

    fn is_smooth_at(&self, index: usize, output: &[f64], h: f64) -> bool {
        match self.loss {
            LossFn::L2 => true,
            LossFn::L1 => output
                .iter()
                .zip(&self.targets[index])
                .all(|(o, t)| (o - t).abs() >= 10.0 * h),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    activation: Activation,
    weights: Vec<f64>,
}

// Per-sample activations kept for the backward pass.
struct Trace {
    // pre-activations of every non-input layer
    z: Vec<Vec<f64>>,
    // a[0] is the input, a[l] the post-activation of layer l
    a: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn param_count(layer_sizes: &[usize]) -> usize {
        layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    fn check_sizes(layer_sizes: &[usize]) -> Result<(), NnError> {
        if layer_sizes.len() < 2 {
            return Err(NnError::InvalidShape(format!(
                "need at least an input and an output layer, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(NnError::InvalidShape(format!(
                "layer sizes must be positive, got {layer_sizes:?}"
            )));
        }
        Ok(())
    }

    pub fn zeros(layer_sizes: &[usize], activation: Activation) -> Result<Self, NnError> {
        Self::check_sizes(layer_sizes)?;
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            weights: vec![0.0; Self::param_count(layer_sizes)],
        })
    }

    pub fn from_weights(
        layer_sizes: &[usize],
        activation: Activation,
        weights: Vec<f64>,
    ) -> Result<Self, NnError> {
        Self::check_sizes(layer_sizes)?;
        let expected = Self::param_count(layer_sizes);
        if weights.len() != expected {
            return Err(NnError::LengthMismatch {
                expected,
                got: weights.len(),
            });
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            weights,
        })
    }

    /// He-uniform weights `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero biases.
    pub fn init<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let mut net = Self::zeros(layer_sizes, activation)?;
        let mut offset = 0;
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            for v in &mut net.weights[offset..offset + fan_in * fan_out] {
                *v = rng.gen_range(-bound..bound);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Overwrites `target`'s parameters with this network's.
    pub fn copy_into(&self, target: &mut Mlp) -> Result<(), NnError> {
        if target.layer_sizes != self.layer_sizes {
            return Err(NnError::InvalidShape(format!(
                "cannot copy {:?} into {:?}",
                self.layer_sizes, target.layer_sizes
            )));
        }
        target.activation = self.activation;
        target.weights.copy_from_slice(&self.weights);
        Ok(())
    }

    fn check_input(&self, input: &[f64]) -> Result<(), NnError> {
        if input.len() != self.input_dim() {
            return Err(NnError::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        self.check_input(input)?;
        Ok(self.forward_unchecked(input))
    }

    fn forward_unchecked(&self, input: &[f64]) -> Vec<f64> {
        let n_layers = self.layer_sizes.len() - 1;
        let mut a = input.to_vec();
        let mut offset = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let w = &self.weights[offset..offset + n_in * n_out];
            let b = &self.weights[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let hidden = l + 1 < n_layers;
            a = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    let z = b[o] + dot(row, &a);
                    if hidden {
                        self.activation.apply(z)
                    } else {
                        z
                    }
                })
                .collect();
            offset += n_in * n_out + n_out;
        }
        a
    }

    fn trace(&self, input: &[f64]) -> Trace {
        let n_layers = self.layer_sizes.len() - 1;
        let mut zs = Vec::with_capacity(n_layers);
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(input.to_vec());
        let mut offset = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let w = &self.weights[offset..offset + n_in * n_out];
            let b = &self.weights[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let prev = &acts[l];
            let z: Vec<f64> = (0..n_out)
                .map(|o| b[o] + dot(&w[o * n_in..(o + 1) * n_in], prev))
                .collect();
            let a = if l + 1 < n_layers {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            } else {
                z.clone()
            };
            zs.push(z);
            acts.push(a);
            offset += n_in * n_out + n_out;
        }
        Trace { z: zs, a: acts }
    }

    /// Mean loss over `inputs` and its exact gradient with respect to every
    /// parameter.
    pub fn loss_and_grad<I: AsRef<[f64]>>(
        &self,
        inputs: &[I],
        loss: &dyn BatchLoss,
    ) -> Result<(f64, Vec<f64>), NnError> {
        let indices: Vec<usize> = (0..inputs.len()).collect();
        self.loss_and_grad_subset(inputs, &indices, loss)
    }

    pub(crate) fn loss_and_grad_subset<I: AsRef<[f64]>>(
        &self,
        inputs: &[I],
        indices: &[usize],
        loss: &dyn BatchLoss,
    ) -> Result<(f64, Vec<f64>), NnError> {
        if indices.is_empty() {
            return Err(NnError::EmptyBatch);
        }
        for &i in indices {
            self.check_input(inputs[i].as_ref())?;
        }
        let n_layers = self.layer_sizes.len() - 1;
        let offsets = self.layer_offsets();
        let mut grad = vec![0.0; self.weights.len()];
        let mut total = 0.0;
        let mut d_out = vec![0.0; self.output_dim()];
        for &i in indices {
            let tr = self.trace(inputs[i].as_ref());
            d_out.iter_mut().for_each(|g| *g = 0.0);
            total += loss.sample_loss(i, &tr.a[n_layers], &mut d_out);

            // delta holds dL/dz for layer l
            let mut delta = d_out.clone();
            for l in (0..n_layers).rev() {
                let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
                let off = offsets[l];
                let prev = &tr.a[l];
                for o in 0..n_out {
                    let d = delta[o];
                    if d != 0.0 {
                        let g_row = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                        for (g, &p) in g_row.iter_mut().zip(prev) {
                            *g += d * p;
                        }
                    }
                    grad[off + n_in * n_out + o] += d;
                }
                if l > 0 {
                    let w = &self.weights[off..off + n_in * n_out];
                    let mut d_prev = vec![0.0; n_in];
                    for o in 0..n_out {
                        let d = delta[o];
                        if d != 0.0 {
                            for (dp, &wv) in d_prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                                *dp += wv * d;
                            }
                        }
                    }
                    let (z, a) = (&tr.z[l - 1], &tr.a[l]);
                    for k in 0..n_in {
                        d_prev[k] *= self.activation.derivative(z[k], a[k]);
                    }
                    delta = d_prev;
                }
            }
        }
        let scale = 1.0 / indices.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        Ok((total * scale, grad))
    }

    /// Mean loss only, for finite differences.
    pub(crate) fn loss_value_subset<I: AsRef<[f64]>>(
        &self,
        inputs: &[I],
        indices: &[usize],
        loss: &dyn BatchLoss,
    ) -> f64 {
        let mut scratch = vec![0.0; self.output_dim()];
        let total: f64 = indices
            .iter()
            .map(|&i| {
                let out = self.forward_unchecked(inputs[i].as_ref());
                scratch.iter_mut().for_each(|g| *g = 0.0);
                loss.sample_loss(i, &out, &mut scratch)
            })
            .sum();
        total / indices.len() as f64
    }

    /// Runs every input forward and returns the outputs that
    /// `BatchLoss::is_smooth_at` would see.
    pub(crate) fn forward_batch_unchecked<I: AsRef<[f64]>>(&self, inputs: &[I]) -> Vec<Vec<f64>> {
        inputs
            .iter()
            .map(|x| self.forward_unchecked(x.as_ref()))
            .collect()
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.layer_sizes.len() - 1);
        let mut off = 0;
        for w in self.layer_sizes.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        offsets
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
