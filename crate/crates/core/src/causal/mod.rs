//! Exact losses of a finite potential-outcomes joint and the factual-loss
//! upper bound.
//!
//! With a target treatment `0` and controls `j = 1..=N`, the quantities are
//!
//! ```text
//! eps_F  = q_0 E_{P^0_X}[l(x,0)] + sum_j q_j E_{P^j_X}[l(x,j)]
//! eps_CF = sum_j ( q_j E_{P^j_X}[l(x,0)] + q_0/N E_{P^0_X}[l(x,j)] )
//! psi    = sum_j ( q_j E_{P^j_X}[L(phi_j, phi_0)] + q_0/N E_{P^0_X}[L(phi_0, phi_j)] )
//! delta  = sum_j ( q_j E_{P^j_X}E[L(y_j, y_0)] + q_0/N E_{P^0_X}E[L(y_0, y_j)] )
//! ```
//!
//! where `l(x,t) = E_{y ~ P(Y_t|x)} L(y, phi(x;t))` and the outcome pair in
//! `delta` is drawn from the product of the two marginals. For `N = 1` these
//! reduce to the binary-treatment definitions. Whenever `L` satisfies
//! `L(x,y) - L(x',y') <= L(x,x') + L(y,y')` (true for L1),
//! `eps_F <= eps_CF + psi + delta`.
//!
//! Everything is a finite sum; no sampling is involved except in
//! [`montecarlo`], which exists to cross-check the enumerators.

mod assumption;
mod bound;
mod joint;
pub mod montecarlo;
pub mod random;
pub mod sweep;

pub use assumption::{check_loss_inequality, Quadruple};
pub use bound::{
    counterfactual_loss, delta_term, expected_outcome_loss, factual_loss,
    treatment_effect_loss, verify_bound, BoundReport,
};
pub use joint::{FiniteJoint, HypothesisTable, OutcomeDist, PROB_SUM_TOL, TARGET};
pub use montecarlo::{mc_estimate_losses, Estimate, McEstimate};
pub use sweep::{verify_random_trials, SweepSummary, TrialViolation};

pub use crate::loss::LossFn;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CausalError {
    #[error("invalid joint distribution: {0}")]
    InvalidJoint(String),
    #[error("invalid hypothesis table: {0}")]
    InvalidHypothesis(String),
    #[error("unknown observation {x} (joint has {n})")]
    UnknownObservation { x: usize, n: usize },
    #[error("unknown treatment {t} (joint has {n})")]
    UnknownTreatment { t: usize, n: usize },
    #[error(
        "hypothesis table covers {table:?} (observations, treatments) but joint has {joint:?}"
    )]
    DomainMismatch {
        joint: (usize, usize),
        table: (usize, usize),
    },
    #[error("treatment arm {0} has zero probability and cannot be sampled")]
    ZeroProbabilityArm(usize),
    #[error("n_samples must be at least 1")]
    NoSamples,
}
