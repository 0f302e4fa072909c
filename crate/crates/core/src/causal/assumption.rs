use serde::{Deserialize, Serialize};

use super::LossFn;

/// Slack allowed before a quadruple counts as violating the inequality.
pub const INEQUALITY_TOL: f64 = 1e-12;

/// `(x, y, x', y')` for the inequality `L(x,y) - L(x',y') <= L(x,x') + L(y,y')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadruple {
    pub x: f64,
    pub y: f64,
    pub x_prime: f64,
    pub y_prime: f64,
}

impl Quadruple {
    pub fn new(x: f64, y: f64, x_prime: f64, y_prime: f64) -> Self {
        Self { x, y, x_prime, y_prime }
    }

    /// `lhs - rhs`; positive means the inequality fails.
    pub fn excess(&self, loss: LossFn) -> f64 {
        let lhs = loss.eval(self.x, self.y) - loss.eval(self.x_prime, self.y_prime);
        let rhs = loss.eval(self.x, self.x_prime) + loss.eval(self.y, self.y_prime);
        lhs - rhs
    }
}

/// Returns every quadruple whose excess exceeds [`INEQUALITY_TOL`].
pub fn check_loss_inequality(loss: LossFn, quadruples: &[Quadruple]) -> Vec<Quadruple> {
    quadruples
        .iter()
        .filter(|q| q.excess(loss) > INEQUALITY_TOL)
        .copied()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn l1_example_holds() {
        let q = Quadruple::new(0.0, 2.0, 1.0, 0.0);
        assert!(check_loss_inequality(LossFn::L1, &[q]).is_empty());
        assert_eq!(q.excess(LossFn::L1), 1.0 - 3.0);
    }

    #[test]
    fn l2_counterexample() {
        let q = Quadruple::new(0.0, 10.0, 5.0, 5.0);
        let lhs = LossFn::L2.eval(0.0, 10.0) - LossFn::L2.eval(5.0, 5.0);
        let rhs = LossFn::L2.eval(0.0, 5.0) + LossFn::L2.eval(10.0, 5.0);
        assert_eq!((lhs, rhs), (100.0, 50.0));
        assert_eq!(check_loss_inequality(LossFn::L2, &[q]), vec![q]);
        assert!(check_loss_inequality(LossFn::L1, &[q]).is_empty());
    }

    proptest! {
        #[test]
        fn l1_never_violates(x in -10f64..10.0, y in -10f64..10.0, xp in -10f64..10.0, yp in -10f64..10.0) {
            let q = Quadruple::new(x, y, xp, yp);
            prop_assert!(check_loss_inequality(LossFn::L1, &[q]).is_empty());
        }
    }
}
