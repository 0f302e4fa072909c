//! Sampling estimates of the bound's terms, used to cross-check the exact
//! enumerators.
//!
//! Each draw samples `t ~ q`, `x ~ P(X|T=t)` and one outcome per treatment
//! from `P(Y_s|x)` independently. A draw from a control arm `j` contributes
//! the terms weighted by `q_j`; a draw from the target arm contributes the
//! average over controls of the terms weighted by `q_0 / N`. Each per-draw
//! value is therefore an unbiased estimate of the corresponding term.

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use super::joint::TARGET;
use super::{BoundReport, CausalError, FiniteJoint, HypothesisTable, LossFn};
use crate::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub n_samples: usize,
    pub factual: Estimate,
    pub counterfactual: Estimate,
    pub psi: Estimate,
    pub delta: Estimate,
}

impl McEstimate {
    pub fn report(&self) -> BoundReport {
        BoundReport::from_parts(
            self.factual.mean,
            self.counterfactual.mean,
            self.psi.mean,
            self.delta.mean,
        )
    }
}

#[derive(Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    fn finish(&self) -> Estimate {
        let std_err = if self.n > 1 {
            (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
        } else {
            0.0
        };
        Estimate {
            mean: self.mean,
            std_err,
        }
    }
}

pub fn mc_estimate_losses(
    joint: &FiniteJoint,
    phi: &HypothesisTable,
    loss: LossFn,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate, CausalError> {
    if n_samples == 0 {
        return Err(CausalError::NoSamples);
    }
    phi.check_domain(joint)?;
    if let Some(t) = joint.q().iter().position(|&p| p <= 0.0) {
        return Err(CausalError::ZeroProbabilityArm(t));
    }

    let n_t = joint.n_treatments();
    let n_controls = joint.n_controls() as f64;
    let arm = WeightedIndex::new(joint.q()).map_err(|_| CausalError::ZeroProbabilityArm(0))?;
    let obs: Vec<WeightedIndex<f64>> = (0..n_t)
        .map(|t| WeightedIndex::new(joint.px(t)).map_err(|_| CausalError::ZeroProbabilityArm(t)))
        .collect::<Result<_, _>>()?;
    let outcome_samplers: Vec<Vec<WeightedIndex<f64>>> = (0..joint.n_obs())
        .map(|x| {
            (0..n_t)
                .map(|t| WeightedIndex::new(joint.y(x, t).probs()).expect("validated outcome"))
                .collect()
        })
        .collect();

    let mut rng = rng_from_seed(seed);
    let mut acc: [Welford; 4] = Default::default();
    let mut y = vec![0.0; n_t];
    for _ in 0..n_samples {
        let t = arm.sample(&mut rng);
        let x = obs[t].sample(&mut rng);
        for (s, ys) in y.iter_mut().enumerate() {
            *ys = joint.y(x, s).values()[outcome_samplers[x][s].sample(&mut rng)];
        }
        let phi_at = |s: usize| phi.at(x, s);

        let factual = loss.eval(y[t], phi_at(t));
        let (cf, psi, delta) = if t == TARGET {
            let mut acc = (0.0, 0.0, 0.0);
            for j in 1..n_t {
                acc.0 += loss.eval(y[j], phi_at(j));
                acc.1 += loss.eval(phi_at(TARGET), phi_at(j));
                acc.2 += loss.eval(y[TARGET], y[j]);
            }
            (acc.0 / n_controls, acc.1 / n_controls, acc.2 / n_controls)
        } else {
            (
                loss.eval(y[TARGET], phi_at(TARGET)),
                loss.eval(phi_at(t), phi_at(TARGET)),
                loss.eval(y[t], y[TARGET]),
            )
        };
        acc[0].push(factual);
        acc[1].push(cf);
        acc[2].push(psi);
        acc[3].push(delta);
    }

    Ok(McEstimate {
        n_samples,
        factual: acc[0].finish(),
        counterfactual: acc[1].finish(),
        psi: acc[2].finish(),
        delta: acc[3].finish(),
    })
}
