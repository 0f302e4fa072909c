//! Pointwise losses shared by the causal checks and the training objective.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossFn {
    /// `|a - b|`
    L1,
    /// `(a - b)^2`
    L2,
}

impl LossFn {
    #[inline]
    pub fn eval(self, a: f64, b: f64) -> f64 {
        match self {
            LossFn::L1 => (a - b).abs(),
            LossFn::L2 => {
                let d = a - b;
                d * d
            }
        }
    }

    /// Derivative of `eval(target, pred)` with respect to `pred`.
    ///
    /// L1 uses the sign subgradient, which is 0 at `pred == target`.
    #[inline]
    pub fn grad_pred(self, target: f64, pred: f64) -> f64 {
        match self {
            LossFn::L1 => {
                let d = pred - target;
                if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            LossFn::L2 => 2.0 * (pred - target),
        }
    }

    /// Whether `L(x,y) - L(x',y') <= L(x,x') + L(y,y')` holds for every real
    /// quadruple. True for L1 only; L2 has concrete counterexamples.
    pub fn satisfies_loss_inequality(self) -> bool {
        matches!(self, LossFn::L1)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LossFn::L1 => "l1",
            LossFn::L2 => "l2",
        }
    }
}

impl fmt::Display for LossFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown loss {0:?}, expected \"l1\" or \"l2\"")]
pub struct ParseLossError(String);

impl FromStr for LossFn {
    type Err = ParseLossError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(LossFn::L1),
            "l2" => Ok(LossFn::L2),
            _ => Err(ParseLossError(s.to_string())),
        }
    }
}
