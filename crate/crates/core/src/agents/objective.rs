use std::cell::Cell;

use crate::nn::BatchLoss;
use crate::LossFn;

/// Per-sample critic loss `L(y_i, f_i) + lambda_tf * L(v_i, f_i)`, where `f_i`
/// is output `output_index[i]` of the value network, `y_i` the frozen TD
/// target and `v_i` the stored behavior value.
///
/// Both `y_i` and `v_i` are constants; the gradient reaches the network only
/// through `f_i`. With `lambda_tf == 0` the second term is never evaluated,
/// so the gradient is exactly that of the plain TD loss.
#[derive(Debug)]
pub struct SuftObjective {
    pub targets: Vec<f64>,
    pub v_behavior: Vec<f64>,
    pub output_index: Vec<usize>,
    pub loss: LossFn,
    pub lambda_tf: f64,
    td_sum: Cell<f64>,
    suft_sum: Cell<f64>,
}

impl SuftObjective {
    pub fn new(
        targets: Vec<f64>,
        v_behavior: Vec<f64>,
        output_index: Vec<usize>,
        loss: LossFn,
        lambda_tf: f64,
    ) -> Self {
        assert_eq!(targets.len(), v_behavior.len());
        assert_eq!(targets.len(), output_index.len());
        Self {
            targets,
            v_behavior,
            output_index,
            loss,
            lambda_tf,
            td_sum: Cell::new(0.0),
            suft_sum: Cell::new(0.0),
        }
    }

    pub fn suft_active(&self) -> bool {
        self.lambda_tf != 0.0
    }

    /// Clears the running sums and returns `(td_sum, suft_sum)` since the last take.
    pub fn take_sums(&self) -> (f64, f64) {
        (self.td_sum.replace(0.0), self.suft_sum.replace(0.0))
    }
}

impl BatchLoss for SuftObjective {
    fn sample_loss(&self, index: usize, output: &[f64], grad: &mut [f64]) -> f64 {
        let k = self.output_index[index];
        let pred = output[k];
        let y = self.targets[index];
        let td = self.loss.eval(y, pred);
        grad[k] += self.loss.grad_pred(y, pred);
        self.td_sum.set(self.td_sum.get() + td);
        if !self.suft_active() {
            return td;
        }
        let v = self.v_behavior[index];
        let suft = self.loss.eval(v, pred);
        grad[k] += self.lambda_tf * self.loss.grad_pred(v, pred);
        self.suft_sum.set(self.suft_sum.get() + suft);
        td + self.lambda_tf * suft
    }

    fn is_smooth_at(&self, index: usize, output: &[f64], h: f64) -> bool {
        match self.loss {
            LossFn::L2 => true,
            LossFn::L1 => {
                let pred = output[self.output_index[index]];
                let far = |c: f64| (pred - c).abs() >= 10.0 * h;
                far(self.targets[index]) && (!self.suft_active() || far(self.v_behavior[index]))
            }
        }
    }
}

/// `-A_i * log softmax(logits)[a_i]` with a constant advantage `A_i`.
#[derive(Debug)]
pub struct PolicyGradientLoss {
    pub actions: Vec<usize>,
    pub advantages: Vec<f64>,
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl BatchLoss for PolicyGradientLoss {
    fn sample_loss(&self, index: usize, output: &[f64], grad: &mut [f64]) -> f64 {
        let p = softmax(output);
        let a = self.actions[index];
        let adv = self.advantages[index];
        for (k, (g, pk)) in grad.iter_mut().zip(&p).enumerate() {
            let onehot = if k == a { 1.0 } else { 0.0 };
            *g += -adv * (onehot - pk);
        }
        -adv * p[a].max(f64::MIN_POSITIVE).ln()
    }
}
