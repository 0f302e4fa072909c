//! Seeded discrete-action environments.

mod cartpole;
mod gridworld;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use cartpole::CartPole;
pub use gridworld::GridWorld;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub obs_dim: usize,
    pub n_actions: usize,
    pub max_episode_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnvError {
    #[error("action {action} out of range for {n_actions} actions")]
    InvalidAction { action: usize, n_actions: usize },
    #[error("step called on a finished episode; call reset first")]
    EpisodeOver,
    #[error("step called before reset")]
    NotReset,
    #[error("unknown environment {0:?} (known: gridworld, cartpole)")]
    UnknownEnv(String),
}

pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    /// Starts a new episode whose initial state depends only on `seed`.
    fn reset(&mut self, seed: u64) -> Vec<f64>;

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    #[serde(alias = "gridworld-5x5")]
    GridWorld,
    CartPole,
}

impl EnvKind {
    pub fn make(self) -> Box<dyn Environment> {
        match self {
            EnvKind::GridWorld => Box::new(GridWorld::new()),
            EnvKind::CartPole => Box::new(CartPole::new()),
        }
    }

    pub fn spec(self) -> EnvSpec {
        self.make().spec().clone()
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::GridWorld => "gridworld",
            EnvKind::CartPole => "cartpole",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gridworld" | "gridworld-5x5" => Ok(EnvKind::GridWorld),
            "cartpole" => Ok(EnvKind::CartPole),
            _ => Err(EnvError::UnknownEnv(s.to_string())),
        }
    }
}

/// Shared episode bookkeeping: step counter, done flag, truncation.
#[derive(Debug, Clone, Default)]
pub(crate) struct EpisodeClock {
    steps: usize,
    active: bool,
}

impl EpisodeClock {
    pub(crate) fn start(&mut self) {
        self.steps = 0;
        self.active = true;
    }

    pub(crate) fn begin_step(&mut self, action: usize, spec: &EnvSpec) -> Result<(), EnvError> {
        if action >= spec.n_actions {
            return Err(EnvError::InvalidAction {
                action,
                n_actions: spec.n_actions,
            });
        }
        if !self.active {
            return Err(if self.steps == 0 {
                EnvError::NotReset
            } else {
                EnvError::EpisodeOver
            });
        }
        self.steps += 1;
        Ok(())
    }

    /// Returns `truncated` and closes the episode when it ended.
    pub(crate) fn finish_step(&mut self, terminated: bool, spec: &EnvSpec) -> bool {
        let truncated = !terminated && self.steps >= spec.max_episode_steps;
        if terminated || truncated {
            self.active = false;
        }
        truncated
    }
}
