use serde::{Deserialize, Serialize};

use super::CausalError;

/// Tolerance on probability vectors summing to one.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Index of the target treatment. Controls are `1..=n_controls`.
pub const TARGET: usize = 0;

/// Finite discrete outcome distribution `P(Y_t | X = x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDist {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl OutcomeDist {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self, CausalError> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(CausalError::InvalidJoint(format!(
                "outcome support has {} values and {} probabilities",
                values.len(),
                probs.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CausalError::InvalidJoint("non-finite outcome value".into()));
        }
        check_probability_vector(&probs, "outcome distribution")?;
        Ok(Self { values, probs })
    }

    /// Degenerate distribution at `value`.
    pub fn point(value: f64) -> Self {
        Self {
            values: vec![value],
            probs: vec![1.0],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.probs.iter().copied())
    }
}

/// Exact joint `P(X, T, Y_1, ..., Y_{N+1})` over finitely many observations.
///
/// Observations are the indices `0..n_obs()`. Treatment `0` is the target,
/// `1..=n_controls()` are the controls. Potential outcomes exist for every
/// `(x, t)`, and their distributions do not depend on how `t` was assigned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteJoint {
    q: Vec<f64>,
    px_given_t: Vec<Vec<f64>>,
    // outcomes[x][t]
    outcomes: Vec<Vec<OutcomeDist>>,
}

impl FiniteJoint {
    /// `q[t]` treatment probabilities, `px_given_t[t][x]`, `outcomes[x][t]`.
    pub fn new(
        q: Vec<f64>,
        px_given_t: Vec<Vec<f64>>,
        outcomes: Vec<Vec<OutcomeDist>>,
    ) -> Result<Self, CausalError> {
        if q.len() < 2 {
            return Err(CausalError::InvalidJoint(format!(
                "need a target and at least one control, got {} treatments",
                q.len()
            )));
        }
        if let Some(t) = q.iter().position(|&p| !(p > 0.0)) {
            return Err(CausalError::InvalidJoint(format!(
                "treatment {t} has non-positive probability {}",
                q[t]
            )));
        }
        check_probability_vector(&q, "treatment probabilities")?;
        if px_given_t.len() != q.len() {
            return Err(CausalError::InvalidJoint(format!(
                "{} observation distributions for {} treatments",
                px_given_t.len(),
                q.len()
            )));
        }
        let n_obs = outcomes.len();
        if n_obs == 0 {
            return Err(CausalError::InvalidJoint("no observations".into()));
        }
        for (t, px) in px_given_t.iter().enumerate() {
            if px.len() != n_obs {
                return Err(CausalError::InvalidJoint(format!(
                    "P(X|T={t}) has {} entries, expected {n_obs}",
                    px.len()
                )));
            }
            check_probability_vector(px, "observation distribution")?;
        }
        for (x, row) in outcomes.iter().enumerate() {
            if row.len() != q.len() {
                return Err(CausalError::InvalidJoint(format!(
                    "observation {x} has {} potential outcomes, expected {}",
                    row.len(),
                    q.len()
                )));
            }
        }
        Ok(Self {
            q,
            px_given_t,
            outcomes,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.outcomes.len()
    }

    pub fn n_controls(&self) -> usize {
        self.q.len() - 1
    }

    pub fn n_treatments(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn px_given_t(&self, t: usize) -> Result<&[f64], CausalError> {
        self.check_t(t)?;
        Ok(&self.px_given_t[t])
    }

    pub fn outcome(&self, x: usize, t: usize) -> Result<&OutcomeDist, CausalError> {
        self.check_x(x)?;
        self.check_t(t)?;
        Ok(&self.outcomes[x][t])
    }

    pub(crate) fn check_x(&self, x: usize) -> Result<(), CausalError> {
        if x < self.n_obs() {
            Ok(())
        } else {
            Err(CausalError::UnknownObservation { x, n: self.n_obs() })
        }
    }

    pub(crate) fn check_t(&self, t: usize) -> Result<(), CausalError> {
        if t < self.n_treatments() {
            Ok(())
        } else {
            Err(CausalError::UnknownTreatment {
                t,
                n: self.n_treatments(),
            })
        }
    }

    // Unchecked accessors for the enumerators, valid after construction.
    #[inline]
    pub(crate) fn px(&self, t: usize) -> &[f64] {
        &self.px_given_t[t]
    }

    #[inline]
    pub(crate) fn y(&self, x: usize, t: usize) -> &OutcomeDist {
        &self.outcomes[x][t]
    }
}

/// Tabulated hypothesis values `phi(x; theta_t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisTable {
    // values[x][t]
    values: Vec<Vec<f64>>,
}

impl HypothesisTable {
    /// `values[x][t]`; every row must have the same number of treatments.
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self, CausalError> {
        let width = values.first().map(Vec::len).unwrap_or(0);
        if values.iter().any(|r| r.len() != width) {
            return Err(CausalError::InvalidHypothesis(
                "ragged hypothesis table".into(),
            ));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CausalError::InvalidHypothesis(
                "non-finite hypothesis value".into(),
            ));
        }
        Ok(Self { values })
    }

    /// Table whose value for every `(x, t)` is the mean outcome, i.e. the
    /// L2-optimal predictor of the joint.
    pub fn mean_predictor(joint: &FiniteJoint) -> Self {
        let values = (0..joint.n_obs())
            .map(|x| {
                (0..joint.n_treatments())
                    .map(|t| joint.y(x, t).iter().map(|(y, p)| y * p).sum())
                    .collect()
            })
            .collect();
        Self { values }
    }

    pub fn get(&self, x: usize, t: usize) -> Option<f64> {
        self.values.get(x).and_then(|r| r.get(t)).copied()
    }

    pub fn n_obs(&self) -> usize {
        self.values.len()
    }

    pub fn n_treatments(&self) -> usize {
        self.values.first().map(Vec::len).unwrap_or(0)
    }

    /// Errors unless the table covers exactly the joint's `(x, t)` grid.
    pub fn check_domain(&self, joint: &FiniteJoint) -> Result<(), CausalError> {
        if self.n_obs() != joint.n_obs() || self.n_treatments() != joint.n_treatments() {
            return Err(CausalError::DomainMismatch {
                joint: (joint.n_obs(), joint.n_treatments()),
                table: (self.n_obs(), self.n_treatments()),
            });
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn at(&self, x: usize, t: usize) -> f64 {
        self.values[x][t]
    }
}

fn check_probability_vector(p: &[f64], what: &str) -> Result<(), CausalError> {
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(CausalError::InvalidJoint(format!(
            "{what} has a negative or non-finite entry"
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > PROB_SUM_TOL {
        return Err(CausalError::InvalidJoint(format!(
            "{what} sums to {s}, not 1"
        )));
    }
    Ok(())
}
