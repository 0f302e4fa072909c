//! Desk-scale toolkit for the SUFT causal bound.
//!
//! Two halves share one crate:
//!
//! - [`causal`] computes the factual, counterfactual, treatment-effect and
//!   `delta` losses of a finite potential-outcomes joint exactly, and checks
//!   the factual-loss upper bound `eps_F <= eps_CF + psi + delta` on it.
//! - [`nn`], [`envs`], [`replay`], [`agents`] and [`harness`] train DQN-family
//!   and actor-critic agents whose loss adds `lambda_tf * psi_SUFT`, where
//!   `psi_SUFT` compares value outputs recorded at action-selection time
//!   (stored in the replay buffer) with the current network.
//!
//! The training path never touches [`causal`]; the `delta` term has no
//! implementation outside of it.

pub mod agents;
pub mod causal;
pub mod config;
pub mod envs;
pub mod harness;
pub mod loss;
pub mod nn;
pub mod replay;

pub use loss::LossFn;

/// Seedable generator used everywhere randomness is consumed.
///
/// ChaCha8 keeps streams stable across platforms and `rand` releases.
pub type SuftRng = rand_chacha::ChaCha8Rng;

/// Builds the crate's RNG from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> SuftRng {
    use rand::SeedableRng;
    SuftRng::seed_from_u64(seed)
}
