use serde::{Deserialize, Serialize};

use super::{BatchLoss, Mlp, NnError};

/// Largest relative error a passing gradient check may show.
pub const GRAD_CHECK_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub passed: bool,
    /// Samples excluded because the loss has a kink within `10h` of them.
    pub skipped_samples: usize,
}

/// Compares the analytic gradient of `loss` against central differences with
/// step `h`, coordinate by coordinate. The relative error of a coordinate is
/// `|g_a - g_n| / max(1, |g_a|, |g_n|)`.
pub fn grad_check<I: AsRef<[f64]>>(
    net: &Mlp,
    inputs: &[I],
    loss: &dyn BatchLoss,
    h: f64,
) -> Result<GradCheckReport, NnError> {
    let smooth = smooth_indices(net, inputs, loss, h)?;
    if smooth.is_empty() {
        return Ok(empty_report(inputs.len()));
    }
    let (_, analytic) = net.loss_and_grad_subset(inputs, &smooth, loss)?;
    Ok(compare(net, inputs, &smooth, loss, h, &analytic))
}

/// Like [`grad_check`] but judges a caller-supplied gradient, which must be
/// the gradient over the samples [`grad_check`] would keep.
pub fn grad_check_against<I: AsRef<[f64]>>(
    net: &Mlp,
    inputs: &[I],
    loss: &dyn BatchLoss,
    h: f64,
    analytic: &[f64],
) -> Result<GradCheckReport, NnError> {
    if analytic.len() != net.weights().len() {
        return Err(NnError::LengthMismatch {
            expected: net.weights().len(),
            got: analytic.len(),
        });
    }
    let smooth = smooth_indices(net, inputs, loss, h)?;
    if smooth.is_empty() {
        return Ok(empty_report(inputs.len()));
    }
    Ok(compare(net, inputs, &smooth, loss, h, analytic))
}

fn smooth_indices<I: AsRef<[f64]>>(
    net: &Mlp,
    inputs: &[I],
    loss: &dyn BatchLoss,
    h: f64,
) -> Result<Vec<usize>, NnError> {
    if inputs.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    for x in inputs {
        if x.as_ref().len() != net.input_dim() {
            return Err(NnError::DimensionMismatch {
                expected: net.input_dim(),
                got: x.as_ref().len(),
            });
        }
    }
    Ok(net
        .forward_batch_unchecked(inputs)
        .iter()
        .enumerate()
        .filter(|(i, out)| loss.is_smooth_at(*i, out, h))
        .map(|(i, _)| i)
        .collect())
}

fn empty_report(n: usize) -> GradCheckReport {
    GradCheckReport {
        max_rel_err: 0.0,
        worst_index: 0,
        passed: true,
        skipped_samples: n,
    }
}

fn compare<I: AsRef<[f64]>>(
    net: &Mlp,
    inputs: &[I],
    indices: &[usize],
    loss: &dyn BatchLoss,
    h: f64,
    analytic: &[f64],
) -> GradCheckReport {
    let mut probe = net.clone();
    let mut max_rel_err = 0.0;
    let mut worst_index = 0;
    for k in 0..analytic.len() {
        let w0 = probe.weights()[k];
        probe.weights_mut()[k] = w0 + h;
        let up = probe.loss_value_subset(inputs, indices, loss);
        probe.weights_mut()[k] = w0 - h;
        let down = probe.loss_value_subset(inputs, indices, loss);
        probe.weights_mut()[k] = w0;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[k];
        let rel = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
        if rel > max_rel_err {
            max_rel_err = rel;
            worst_index = k;
        }
    }
    GradCheckReport {
        max_rel_err,
        worst_index,
        passed: max_rel_err < GRAD_CHECK_TOL,
        skipped_samples: inputs.len() - indices.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Regression};
    use crate::{rng_from_seed, LossFn};
    use proptest::prelude::*;
    use rand::Rng;

    fn random_case(seed: u64, act: Activation) -> (Mlp, Vec<Vec<f64>>, Regression) {
        let mut rng = rng_from_seed(seed);
        let depth = rng.gen_range(1..=3);
        let mut sizes = vec![rng.gen_range(1..=6)];
        for _ in 0..depth {
            sizes.push(rng.gen_range(1..=32));
        }
        sizes.push(rng.gen_range(1..=4));
        let mut net = Mlp::init(&sizes, act, &mut rng).unwrap();
        for b in net.weights_mut() {
            *b += rng.gen_range(-0.1..0.1);
        }
        let batch = rng.gen_range(1..=16);
        let inputs: Vec<Vec<f64>> = (0..batch)
            .map(|_| (0..sizes[0]).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let targets = (0..batch)
            .map(|_| (0..*sizes.last().unwrap()).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        (net, inputs, Regression { targets, loss: LossFn::L2 })
    }

    #[test]
    fn zero_gradient_case_reports_zero_error() {
        let net = Mlp::zeros(&[2, 3, 3, 1], Activation::Relu).unwrap();
        let inputs = vec![vec![1.0, -1.0], vec![0.5, 2.0]];
        let loss = Regression { targets: vec![vec![0.0], vec![0.0]], loss: LossFn::L2 };
        let r = grad_check(&net, &inputs, &loss, 1e-6).unwrap();
        assert_eq!(r.max_rel_err, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn corrupted_gradient_fails() {
        let (net, inputs, loss) = random_case(17, Activation::Tanh);
        let (_, mut g) = net.loss_and_grad(&inputs, &loss).unwrap();
        let k = g
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap()
            .0;
        g[k] *= 2.0;
        let r = grad_check_against(&net, &inputs, &loss, 1e-6, &g).unwrap();
        assert!(!r.passed);
        assert_eq!(r.worst_index, k);
    }

    #[test]
    fn l1_skips_samples_near_the_kink() {
        let net = Mlp::from_weights(&[1, 1], Activation::Relu, vec![1.0, 0.0]).unwrap();
        let inputs = vec![vec![1.0], vec![2.0]];
        // first sample's residual is 1e-7, inside 10h
        let loss = Regression { targets: vec![vec![1.0 + 1e-7], vec![0.0]], loss: LossFn::L1 };
        let r = grad_check(&net, &inputs, &loss, 1e-6).unwrap();
        assert_eq!(r.skipped_samples, 1);
        assert!(r.passed);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn backprop_matches_central_differences(seed in any::<u64>(), tanh in any::<bool>()) {
            let act = if tanh { Activation::Tanh } else { Activation::Relu };
            let (net, inputs, loss) = random_case(seed, act);
            let r = grad_check(&net, &inputs, &loss, 1e-6).unwrap();
            prop_assert!(r.passed, "{:?}", r);
        }
    }
}
