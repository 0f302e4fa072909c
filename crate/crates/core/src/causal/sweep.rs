//! Batch verification of the bound on randomly generated joints.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::assumption::{check_loss_inequality, Quadruple};
use super::joint::TARGET;
use super::random::{random_hypothesis, random_joint, RandomJointParams};
use super::{verify_bound, BoundReport, CausalError, FiniteJoint, HypothesisTable, LossFn};
use crate::rng_from_seed;

/// At most this many violating trials / quadruples are listed verbatim.
pub const MAX_LISTED: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialViolation {
    pub trial: usize,
    pub n_controls: usize,
    pub report: BoundReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub trials: usize,
    pub loss: LossFn,
    pub max_controls: usize,
    pub seed: u64,
    pub holds_all: bool,
    pub violation_count: usize,
    pub violations: Vec<TrialViolation>,
    pub min_slack: f64,
    /// Pointwise loss-inequality failures among the quadruples the bound's
    /// argument applies to in each trial.
    pub assumption_violation_count: usize,
    pub assumption_violations: Vec<Quadruple>,
}

/// The quadruples `(phi(x,0), y_0, phi(x,j), y_j)` over every observation,
/// control and pair of outcome support points.
pub fn trial_quadruples(joint: &FiniteJoint, phi: &HypothesisTable) -> Vec<Quadruple> {
    let mut out = Vec::new();
    for x in 0..joint.n_obs() {
        for j in 1..joint.n_treatments() {
            for &y0 in joint.y(x, TARGET).values() {
                for &yj in joint.y(x, j).values() {
                    out.push(Quadruple::new(phi.at(x, TARGET), y0, phi.at(x, j), yj));
                }
            }
        }
    }
    out
}

/// Runs `trials` verifications. Trial `i` uses its own generator seeded from
/// `seed` and `i`, draws the number of controls uniformly from
/// `1..=max_controls`, then a joint and a hypothesis.
pub fn verify_random_trials(
    trials: usize,
    max_controls: usize,
    loss: LossFn,
    seed: u64,
) -> Result<SweepSummary, CausalError> {
    if max_controls == 0 {
        return Err(CausalError::InvalidJoint("max_controls must be at least 1".into()));
    }
    let params = RandomJointParams::default();
    let mut summary = SweepSummary {
        trials,
        loss,
        max_controls,
        seed,
        holds_all: true,
        violation_count: 0,
        violations: vec![],
        min_slack: f64::INFINITY,
        assumption_violation_count: 0,
        assumption_violations: vec![],
    };
    for trial in 0..trials {
        let mut rng = rng_from_seed(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(trial as u64));
        let n_controls = rng.gen_range(1..=max_controls);
        let joint = random_joint(&mut rng, n_controls, &params)?;
        let phi = random_hypothesis(&mut rng, &joint, params.value_range);
        let report = verify_bound(&joint, &phi, loss)?;
        summary.min_slack = summary.min_slack.min(report.slack);
        if !report.holds {
            summary.holds_all = false;
            summary.violation_count += 1;
            if summary.violations.len() < MAX_LISTED {
                summary.violations.push(TrialViolation { trial, n_controls, report });
            }
        }
        let bad = check_loss_inequality(loss, &trial_quadruples(&joint, &phi));
        summary.assumption_violation_count += bad.len();
        let room = MAX_LISTED - summary.assumption_violations.len();
        summary.assumption_violations.extend(bad.into_iter().take(room));
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_sweep_holds() {
        let s = verify_random_trials(300, 3, LossFn::L1, 1).unwrap();
        assert!(s.holds_all, "{s:?}");
        assert_eq!(s.assumption_violation_count, 0);
        assert!(s.min_slack >= -1e-9);
    }

    #[test]
    fn l2_sweep_reports_assumption_failures() {
        let s = verify_random_trials(50, 1, LossFn::L2, 1).unwrap();
        assert!(s.assumption_violation_count > 0);
        assert!(s.assumption_violations.len() <= MAX_LISTED);
    }

    #[test]
    fn sweep_is_deterministic() {
        let a = verify_random_trials(40, 2, LossFn::L1, 7).unwrap();
        let b = verify_random_trials(40, 2, LossFn::L1, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(verify_random_trials(0, 2, LossFn::L1, 7).unwrap().violation_count, 0);
        assert!(verify_random_trials(1, 0, LossFn::L1, 7).is_err());
    }
}
