use serde::{Deserialize, Serialize};

use super::joint::TARGET;
use super::{CausalError, FiniteJoint, HypothesisTable, LossFn};

/// Relative tolerance on the bound's slack.
pub const BOUND_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub factual: f64,
    pub counterfactual: f64,
    pub psi: f64,
    pub delta: f64,
    /// `counterfactual + psi + delta - factual`
    pub slack: f64,
    pub holds: bool,
}

impl BoundReport {
    pub fn from_parts(factual: f64, counterfactual: f64, psi: f64, delta: f64) -> Self {
        let slack = counterfactual + psi + delta - factual;
        let tol = BOUND_REL_TOL * factual.max(1.0);
        Self {
            factual,
            counterfactual,
            psi,
            delta,
            slack,
            holds: slack >= -tol,
        }
    }
}

/// `E_{y ~ P(Y_t | x)} L(y, phi(x; t))`.
pub fn expected_outcome_loss(
    joint: &FiniteJoint,
    phi: &HypothesisTable,
    x: usize,
    t: usize,
    loss: LossFn,
) -> Result<f64, CausalError> {
    joint.check_x(x)?;
    joint.check_t(t)?;
    phi.check_domain(joint)?;
    Ok(ell(joint, phi, x, t, loss))
}

#[inline]
fn ell(joint: &FiniteJoint, phi: &HypothesisTable, x: usize, t: usize, loss: LossFn) -> f64 {
    let pred = phi.at(x, t);
    joint.y(x, t).iter().map(|(y, p)| p * loss.eval(y, pred)).sum()
}

/// `E_{x ~ P(X | T = arm)} f(x)`
#[inline]
fn expect_x(joint: &FiniteJoint, arm: usize, mut f: impl FnMut(usize) -> f64) -> f64 {
    joint
        .px(arm)
        .iter()
        .enumerate()
        .map(|(x, &p)| p * f(x))
        .sum()
}

/// `E_{y_a ~ P(Y_a|x)} E_{y_b ~ P(Y_b|x)} L(y_a, y_b)`
#[inline]
fn outcome_gap(joint: &FiniteJoint, x: usize, a: usize, b: usize, loss: LossFn) -> f64 {
    let yb = joint.y(x, b);
    joint
        .y(x, a)
        .iter()
        .map(|(ya, pa)| pa * yb.iter().map(|(y, p)| p * loss.eval(ya, y)).sum::<f64>())
        .sum()
}

/// Treatment-probability weighted combined factual loss.
pub fn factual_loss(
    joint: &FiniteJoint,
    phi: &HypothesisTable,
    loss: LossFn,
) -> Result<f64, CausalError> {
    phi.check_domain(joint)?;
    Ok(joint
        .q()
        .iter()
        .enumerate()
        .map(|(t, &qt)| qt * expect_x(joint, t, |x| ell(joint, phi, x, t, loss)))
        .sum())
}

/// Combined counterfactual loss: the target hypothesis under each control's
/// covariate distribution, and each control hypothesis under the target's
/// covariate distribution with weight `q_0 / N`.
pub fn counterfactual_loss(
    joint: &FiniteJoint,
    phi: &HypothesisTable,
    loss: LossFn,
) -> Result<f64, CausalError> {
    phi.check_domain(joint)?;
    Ok(sum_over_controls(joint, |j| {
        (
            expect_x(joint, j, |x| ell(joint, phi, x, TARGET, loss)),
            expect_x(joint, TARGET, |x| ell(joint, phi, x, j, loss)),
        )
    }))
}

/// Combined treatment-effect loss `psi` between the target and control
/// hypotheses.
pub fn treatment_effect_loss(
    joint: &FiniteJoint,
    phi: &HypothesisTable,
    loss: LossFn,
) -> Result<f64, CausalError> {
    phi.check_domain(joint)?;
    Ok(sum_over_controls(joint, |j| {
        (
            expect_x(joint, j, |x| loss.eval(phi.at(x, j), phi.at(x, TARGET))),
            expect_x(joint, TARGET, |x| loss.eval(phi.at(x, TARGET), phi.at(x, j))),
        )
    }))
}

/// The hypothesis-free constant `delta`.
pub fn delta_term(joint: &FiniteJoint, loss: LossFn) -> f64 {
    sum_over_controls(joint, |j| {
        (
            expect_x(joint, j, |x| outcome_gap(joint, x, j, TARGET, loss)),
            expect_x(joint, TARGET, |x| outcome_gap(joint, x, TARGET, j, loss)),
        )
    })
}

/// `sum_j (q_j * a_j + q_0 / N * b_j)` where `(a_j, b_j) = per_control(j)`.
fn sum_over_controls(joint: &FiniteJoint, mut per_control: impl FnMut(usize) -> (f64, f64)) -> f64 {
    let q = joint.q();
    let target_weight = q[TARGET] / joint.n_controls() as f64;
    (1..joint.n_treatments())
        .map(|j| {
            let (under_control, under_target) = per_control(j);
            q[j] * under_control + target_weight * under_target
        })
        .sum()
}

/// Evaluates all four terms and the bound's slack. Violations are reported,
/// never raised; callers decide whether `holds` is required (it is for L1).
pub fn verify_bound(
    joint: &FiniteJoint,
    phi: &HypothesisTable,
    loss: LossFn,
) -> Result<BoundReport, CausalError> {
    let factual = factual_loss(joint, phi, loss)?;
    let counterfactual = counterfactual_loss(joint, phi, loss)?;
    let psi = treatment_effect_loss(joint, phi, loss)?;
    let delta = delta_term(joint, loss);
    Ok(BoundReport::from_parts(factual, counterfactual, psi, delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::random::{random_hypothesis, random_joint, RandomJointParams};
    use crate::causal::OutcomeDist;
    use crate::rng_from_seed;
    use proptest::prelude::*;

    fn two_point(a: f64, pa: f64, b: f64) -> OutcomeDist {
        OutcomeDist::new(vec![a, b], vec![pa, 1.0 - pa]).unwrap()
    }

    /// Single observation, binary treatments, same outcome distribution for
    /// both arms.
    fn single_x(y: OutcomeDist) -> FiniteJoint {
        FiniteJoint::new(
            vec![0.5, 0.5],
            vec![vec![1.0], vec![1.0]],
            vec![vec![y.clone(), y]],
        )
        .unwrap()
    }

    // Direct nested-loop enumeration over (t, x, y) written independently of
    // the implementation's helpers. Indices follow the same target = 0 layout.
    struct Oracle<'a> {
        j: &'a FiniteJoint,
        phi: &'a HypothesisTable,
        loss: LossFn,
    }

    impl Oracle<'_> {
        fn ell_under(&self, arm_x: usize, hyp_t: usize) -> f64 {
            let mut total = 0.0;
            for x in 0..self.j.n_obs() {
                let px = self.j.px_given_t(arm_x).unwrap()[x];
                let dist = self.j.outcome(x, hyp_t).unwrap();
                for k in 0..dist.values().len() {
                    total += px
                        * dist.probs()[k]
                        * self.loss.eval(dist.values()[k], self.phi.get(x, hyp_t).unwrap());
                }
            }
            total
        }

        fn psi_under(&self, arm_x: usize, first: usize, second: usize) -> f64 {
            let mut total = 0.0;
            for x in 0..self.j.n_obs() {
                let px = self.j.px_given_t(arm_x).unwrap()[x];
                total += px
                    * self
                        .loss
                        .eval(self.phi.get(x, first).unwrap(), self.phi.get(x, second).unwrap());
            }
            total
        }

        fn delta_under(&self, arm_x: usize, first: usize, second: usize) -> f64 {
            let mut total = 0.0;
            for x in 0..self.j.n_obs() {
                let px = self.j.px_given_t(arm_x).unwrap()[x];
                let a = self.j.outcome(x, first).unwrap();
                let b = self.j.outcome(x, second).unwrap();
                for ia in 0..a.values().len() {
                    for ib in 0..b.values().len() {
                        total += px
                            * a.probs()[ia]
                            * b.probs()[ib]
                            * self.loss.eval(a.values()[ia], b.values()[ib]);
                    }
                }
            }
            total
        }

        fn all(&self) -> [f64; 4] {
            let q = self.j.q();
            let n = self.j.n_controls() as f64;
            let mut f = q[0] * self.ell_under(0, 0);
            let (mut cf, mut psi, mut delta) = (0.0, 0.0, 0.0);
            for jj in 1..=self.j.n_controls() {
                f += q[jj] * self.ell_under(jj, jj);
                cf += q[jj] * self.ell_under(jj, 0) + q[0] / n * self.ell_under(0, jj);
                psi += q[jj] * self.psi_under(jj, jj, 0) + q[0] / n * self.psi_under(0, 0, jj);
                delta +=
                    q[jj] * self.delta_under(jj, jj, 0) + q[0] / n * self.delta_under(0, 0, jj);
            }
            [f, cf, psi, delta]
        }
    }

    fn assert_matches_oracle(joint: &FiniteJoint, phi: &HypothesisTable, loss: LossFn) {
        let r = verify_bound(joint, phi, loss).unwrap();
        let o = Oracle { j: joint, phi, loss }.all();
        for (got, want) in [r.factual, r.counterfactual, r.psi, r.delta].iter().zip(o) {
            assert!(
                (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                "{got} vs oracle {want}"
            );
        }
    }

    #[test]
    fn exact_predictor_has_zero_outcome_loss() {
        let j = single_x(OutcomeDist::point(3.0));
        let phi = HypothesisTable::new(vec![vec![3.0, 3.0]]).unwrap();
        assert_eq!(expected_outcome_loss(&j, &phi, 0, 0, LossFn::L1).unwrap(), 0.0);
    }

    #[test]
    fn expected_outcome_loss_two_point() {
        let j = single_x(two_point(0.0, 0.5, 2.0));
        let phi = HypothesisTable::new(vec![vec![1.0, 1.0]]).unwrap();
        assert_eq!(expected_outcome_loss(&j, &phi, 0, 0, LossFn::L1).unwrap(), 1.0);
        assert_eq!(expected_outcome_loss(&j, &phi, 0, 0, LossFn::L2).unwrap(), 1.0);
    }

    #[test]
    fn expected_outcome_loss_rejects_unknown_indices() {
        let j = single_x(OutcomeDist::point(0.0));
        let phi = HypothesisTable::new(vec![vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            expected_outcome_loss(&j, &phi, 1, 0, LossFn::L1),
            Err(CausalError::UnknownObservation { x: 1, n: 1 })
        ));
        assert!(matches!(
            expected_outcome_loss(&j, &phi, 0, 2, LossFn::L1),
            Err(CausalError::UnknownTreatment { t: 2, n: 2 })
        ));
    }

    /// One observation per arm: x=0 only under the target, x=1 only under
    /// the control.
    fn split_arms(y_target: [f64; 2], y_control: [f64; 2]) -> FiniteJoint {
        FiniteJoint::new(
            vec![0.5, 0.5],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![
                vec![OutcomeDist::point(y_target[0]), OutcomeDist::point(y_control[0])],
                vec![OutcomeDist::point(y_target[1]), OutcomeDist::point(y_control[1])],
            ],
        )
        .unwrap()
    }

    #[test]
    fn factual_loss_binary_weighting() {
        // target arm error 1 at x=0, control arm error 3 at x=1
        let j = split_arms([1.0, 0.0], [0.0, 3.0]);
        let phi = HypothesisTable::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(factual_loss(&j, &phi, LossFn::L1).unwrap(), 2.0);
    }

    #[test]
    fn factual_loss_with_equal_errors_is_that_error() {
        let y = OutcomeDist::point(1.0);
        let j = FiniteJoint::new(
            vec![0.2, 0.3, 0.5],
            vec![vec![1.0]; 3],
            vec![vec![y.clone(), y.clone(), y]],
        )
        .unwrap();
        let phi = HypothesisTable::new(vec![vec![0.0, 2.0, 0.0]]).unwrap();
        let f = factual_loss(&j, &phi, LossFn::L1).unwrap();
        assert!((f - 1.0).abs() < 1e-15);
    }

    #[test]
    fn treatment_effect_loss_binary_gap() {
        let j = split_arms([0.0, 0.0], [0.0, 0.0]);
        let phi = HypothesisTable::new(vec![vec![2.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(treatment_effect_loss(&j, &phi, LossFn::L1).unwrap(), 2.0);
        let same = HypothesisTable::new(vec![vec![1.5, 1.5], vec![-2.0, -2.0]]).unwrap();
        assert_eq!(treatment_effect_loss(&j, &same, LossFn::L1).unwrap(), 0.0);
    }

    #[test]
    fn treatment_effect_loss_n2_against_oracle() {
        // uniform q over target + 2 controls; gap 1 to control 1, gap 3 to control 2
        let y = OutcomeDist::point(0.0);
        let j = FiniteJoint::new(
            vec![1.0 / 3.0; 3],
            vec![vec![1.0]; 3],
            vec![vec![y.clone(), y.clone(), y]],
        )
        .unwrap();
        let phi = HypothesisTable::new(vec![vec![0.0, 1.0, 3.0]]).unwrap();
        let psi = treatment_effect_loss(&j, &phi, LossFn::L1).unwrap();
        // q_1*1 + q_0/2*1 + q_2*3 + q_0/2*3 = 1/3 + 1/6 + 1 + 1/2 = 2
        assert!((psi - 2.0).abs() < 1e-15);
        assert_matches_oracle(&j, &phi, LossFn::L1);
    }

    #[test]
    fn delta_deterministic_outcomes() {
        let j = split_arms([5.0, 5.0], [2.0, 2.0]);
        assert_eq!(delta_term(&j, LossFn::L1), 3.0);
        let same = split_arms([5.0, 1.0], [5.0, 1.0]);
        assert_eq!(delta_term(&same, LossFn::L1), 0.0);
    }

    #[test]
    fn delta_stochastic_outcomes_against_oracle() {
        let j = FiniteJoint::new(
            vec![0.3, 0.7],
            vec![vec![0.25, 0.75], vec![0.6, 0.4]],
            vec![
                vec![two_point(0.0, 0.5, 4.0), two_point(1.0, 0.2, -1.0)],
                vec![two_point(2.0, 0.9, 3.0), OutcomeDist::point(2.5)],
            ],
        )
        .unwrap();
        let phi = HypothesisTable::new(vec![vec![0.3, -0.2], vec![1.1, 2.0]]).unwrap();
        assert_matches_oracle(&j, &phi, LossFn::L1);
        assert_matches_oracle(&j, &phi, LossFn::L2);
        // hand value: q_1 weights P(X|T=1) = (.6, .4), q_0 weights P(X|T=0) = (.25, .75)
        // x0: Y0 in {0,4} w.p. .5/.5, Y1 in {1,-1} w.p. .2/.8 -> E|Y0-Y1| = 2.8
        // x1: Y0 in {2,3} w.p. .9/.1, Y1 = 2.5 -> 0.5
        let want = 0.7 * (0.6 * 2.8 + 0.4 * 0.5) + 0.3 * (0.25 * 2.8 + 0.75 * 0.5);
        assert!((delta_term(&j, LossFn::L1) - want).abs() < 1e-14);
    }

    #[test]
    fn counterfactual_against_oracle_binary_and_n3() {
        let j = FiniteJoint::new(
            vec![0.4, 0.6],
            vec![vec![0.1, 0.9], vec![0.7, 0.3]],
            vec![
                vec![two_point(0.0, 0.3, 1.0), two_point(5.0, 0.5, -2.0)],
                vec![OutcomeDist::point(1.0), two_point(0.5, 0.5, 1.5)],
            ],
        )
        .unwrap();
        let phi = HypothesisTable::new(vec![vec![0.2, 1.0], vec![-0.4, 0.9]]).unwrap();
        assert_matches_oracle(&j, &phi, LossFn::L1);

        let mut rng = rng_from_seed(11);
        let j3 = random_joint(&mut rng, 3, &RandomJointParams::default()).unwrap();
        let phi3 = random_hypothesis(&mut rng, &j3, 5.0);
        assert_matches_oracle(&j3, &phi3, LossFn::L1);
        assert_matches_oracle(&j3, &phi3, LossFn::L2);
    }

    #[test]
    fn symmetric_arms_collapse() {
        let y = [two_point(-1.0, 0.25, 3.0), OutcomeDist::point(0.5)];
        let px = vec![0.35, 0.65];
        for n in [1usize, 2, 3] {
            let j = FiniteJoint::new(
                vec![1.0 / (n as f64 + 1.0); n + 1],
                vec![px.clone(); n + 1],
                y.iter().map(|d| vec![d.clone(); n + 1]).collect(),
            )
            .unwrap();
            // identical deterministic outcomes so delta must vanish
            let det = FiniteJoint::new(
                j.q().to_vec(),
                vec![px.clone(); n + 1],
                vec![vec![OutcomeDist::point(2.0); n + 1]; 2],
            )
            .unwrap();
            let phi = HypothesisTable::new(vec![vec![0.7; n + 1], vec![-0.3; n + 1]]).unwrap();
            let r = verify_bound(&j, &phi, LossFn::L1).unwrap();
            assert!((r.factual - r.counterfactual).abs() < 1e-14);
            assert_eq!(r.psi, 0.0);
            assert!(r.holds);
            let rd = verify_bound(&det, &phi, LossFn::L1).unwrap();
            assert_eq!(rd.delta, 0.0);
            assert!((rd.factual - rd.counterfactual).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_predictor_on_symmetric_arms_is_all_zero() {
        let j = split_arms([1.0, 2.0], [1.0, 2.0]);
        let phi = HypothesisTable::new(vec![vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        let r = verify_bound(&j, &phi, LossFn::L1).unwrap();
        assert_eq!((r.factual, r.counterfactual, r.psi, r.delta), (0.0, 0.0, 0.0, 0.0));
        assert!(r.holds);
    }

    #[test]
    fn mismatched_table_is_a_domain_error() {
        let j = split_arms([1.0, 2.0], [1.0, 2.0]);
        let phi = HypothesisTable::new(vec![vec![1.0, 1.0]]).unwrap();
        assert!(matches!(
            factual_loss(&j, &phi, LossFn::L1),
            Err(CausalError::DomainMismatch { .. })
        ));
        assert!(verify_bound(&j, &phi, LossFn::L1).is_err());
    }

    #[test]
    fn outcome_loss_is_unchanged_by_marginalizing_the_other_arm() {
        // Dyadic probabilities and values keep every product exact, so the
        // augmented enumeration must agree bit for bit.
        let j = FiniteJoint::new(
            vec![0.5, 0.5],
            vec![vec![1.0], vec![1.0]],
            vec![vec![
                OutcomeDist::new(vec![0.5, 2.0, -1.0], vec![0.25, 0.5, 0.25]).unwrap(),
                OutcomeDist::new(vec![3.0, 1.0], vec![0.125, 0.875]).unwrap(),
            ]],
        )
        .unwrap();
        let phi = HypothesisTable::new(vec![vec![0.25, -0.5]]).unwrap();
        for (t, other) in [(0usize, 1usize), (1, 0)] {
            for loss in [LossFn::L1, LossFn::L2] {
                let direct = expected_outcome_loss(&j, &phi, 0, t, loss).unwrap();
                let mut augmented = 0.0;
                for (y, p) in j.outcome(0, t).unwrap().iter() {
                    let inner: f64 = j
                        .outcome(0, other)
                        .unwrap()
                        .iter()
                        .map(|(_, po)| po * loss.eval(y, phi.get(0, t).unwrap()))
                        .sum();
                    augmented += p * inner;
                }
                assert_eq!(direct.to_bits(), augmented.to_bits());
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn bound_holds_for_l1(seed in any::<u64>(), n in 1usize..=5) {
            let mut rng = rng_from_seed(seed);
            let j = random_joint(&mut rng, n, &RandomJointParams::default()).unwrap();
            let phi = random_hypothesis(&mut rng, &j, 5.0);
            let r = verify_bound(&j, &phi, LossFn::L1).unwrap();
            prop_assert!(r.holds, "{:?}", r);
        }

        #[test]
        fn delta_ignores_the_hypothesis(seed in any::<u64>(), n in 1usize..=3) {
            let mut rng = rng_from_seed(seed);
            let j = random_joint(&mut rng, n, &RandomJointParams::default()).unwrap();
            let a = random_hypothesis(&mut rng, &j, 5.0);
            let b = random_hypothesis(&mut rng, &j, 50.0);
            let ra = verify_bound(&j, &a, LossFn::L1).unwrap();
            let rb = verify_bound(&j, &b, LossFn::L1).unwrap();
            prop_assert_eq!(ra.delta.to_bits(), rb.delta.to_bits());
        }

        #[test]
        fn enumerators_match_oracle(seed in any::<u64>(), n in 1usize..=3) {
            let mut rng = rng_from_seed(seed);
            let j = random_joint(&mut rng, n, &RandomJointParams::default()).unwrap();
            let phi = random_hypothesis(&mut rng, &j, 5.0);
            assert_matches_oracle(&j, &phi, LossFn::L1);
            assert_matches_oracle(&j, &phi, LossFn::L2);
        }
    }
}
