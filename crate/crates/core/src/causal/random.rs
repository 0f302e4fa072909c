//! Random finite joints for sweeping the bound.
//!
//! Sizes are uniform (`|X|` in `1..=max_obs`, support size per `(x, t)` in
//! `1..=max_outcomes`), outcome values uniform in `[-value_range, value_range]`,
//! and every probability vector is drawn from a flat Dirichlet.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::{CausalError, FiniteJoint, HypothesisTable, OutcomeDist};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomJointParams {
    pub max_obs: usize,
    pub max_outcomes: usize,
    pub value_range: f64,
}

impl Default for RandomJointParams {
    fn default() -> Self {
        Self {
            max_obs: 5,
            max_outcomes: 4,
            value_range: 5.0,
        }
    }
}

/// Symmetric Dirichlet(1) sample of length `n`, renormalized so the sum is
/// within rounding of one.
pub fn flat_dirichlet<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    loop {
        let draws: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        let p: Vec<f64> = draws.iter().map(|d| d / total).collect();
        // Exp1 can return exactly 0 in principle; overlap needs every entry > 0.
        if p.iter().all(|&v| v > 0.0) {
            return p;
        }
    }
}

pub fn random_joint<R: Rng + ?Sized>(
    rng: &mut R,
    n_controls: usize,
    params: &RandomJointParams,
) -> Result<FiniteJoint, CausalError> {
    let n_t = n_controls + 1;
    let n_obs = rng.gen_range(1..=params.max_obs.max(1));
    let q = flat_dirichlet(rng, n_t);
    let px: Vec<Vec<f64>> = (0..n_t).map(|_| flat_dirichlet(rng, n_obs)).collect();
    let mut outcomes = Vec::with_capacity(n_obs);
    for _ in 0..n_obs {
        let mut row = Vec::with_capacity(n_t);
        for _ in 0..n_t {
            let k = rng.gen_range(1..=params.max_outcomes.max(1));
            let values = (0..k)
                .map(|_| rng.gen_range(-params.value_range..=params.value_range))
                .collect();
            row.push(OutcomeDist::new(values, flat_dirichlet(rng, k))?);
        }
        outcomes.push(row);
    }
    FiniteJoint::new(q, px, outcomes)
}

/// Uniform hypothesis values in `[-range, range]` for every `(x, t)` of `joint`.
pub fn random_hypothesis<R: Rng + ?Sized>(
    rng: &mut R,
    joint: &FiniteJoint,
    range: f64,
) -> HypothesisTable {
    let values = (0..joint.n_obs())
        .map(|_| {
            (0..joint.n_treatments())
                .map(|_| rng.gen_range(-range..=range))
                .collect()
        })
        .collect();
    HypothesisTable::new(values).expect("finite uniform draws")
}
