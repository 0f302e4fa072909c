//! Run configuration files.
//!
//! A run is described by one JSON document:
//!
//! ```json
//! {
//!   "env": "gridworld",
//!   "agent": {
//!     "variant": "dqn", "gamma": 0.99, "lambda_tf": 1.0, "loss": "l2",
//!     "lr": 0.001, "batch_size": 32, "buffer_capacity": 500,
//!     "target_sync_interval": 250,
//!     "epsilon": {"start": 1.0, "end": 0.05, "decay_steps": 4000}
//!   },
//!   "steps": 20000,
//!   "seeds": [0, 1, 2],
//!   "output_dir": "runs/gridworld"
//! }
//! ```
//!
//! Optional keys: `agent.hidden_layers` (default `[64, 64]`),
//! `agent.activation` (`relu`), `train_freq` (4), `learning_starts`
//! (`agent.batch_size`), `smoothing_window` (50). Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::AgentConfig;
use crate::envs::EnvKind;

/// A configuration problem tied to a dotted field path such as `agent.gamma`.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn field(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

fn default_train_freq() -> usize {
    4
}

fn default_smoothing_window() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub env: EnvKind,
    pub agent: AgentConfig,
    pub steps: u64,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Environment steps between gradient updates.
    #[serde(default = "default_train_freq")]
    pub train_freq: usize,
    /// Buffer fill level before the first update; defaults to the batch size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_starts: Option<usize>,
    /// Trailing window, in episodes, for reward smoothing.
    #[serde(default = "default_smoothing_window")]
    pub smoothing_window: usize,
}

impl RunConfigFile {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { "<root>".to_string() } else { path };
            ConfigError::field(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError::field("<file>", format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.agent.validate("agent.")?;
        if self.seeds.is_empty() {
            return Err(ConfigError::field("seeds", "must list at least one seed"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(ConfigError::field("seeds", "seeds must be distinct"));
        }
        if self.train_freq == 0 {
            return Err(ConfigError::field("train_freq", "must be positive"));
        }
        if self.learning_starts == Some(0) {
            return Err(ConfigError::field("learning_starts", "must be positive"));
        }
        if self.smoothing_window == 0 {
            return Err(ConfigError::field("smoothing_window", "must be positive"));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(ConfigError::field("output_dir", "must not be empty"));
        }
        Ok(())
    }

    pub fn learning_starts(&self) -> usize {
        self.learning_starts.unwrap_or(self.agent.batch_size)
    }

    /// Hex SHA-256 of the config's canonical JSON (keys sorted), so it does
    /// not depend on the key order of the source file.
    pub fn config_hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// First field (other than `agent.lambda_tf`) in which the two configs
    /// differ, if any.
    pub fn drift_from(&self, other: &RunConfigFile) -> Option<&'static str> {
        if self.env != other.env {
            return Some("env");
        }
        if let Some(field) = self.agent.drift_from(&other.agent) {
            return Some(field);
        }
        if self.steps != other.steps {
            return Some("steps");
        }
        if self.seeds != other.seeds {
            return Some("seeds");
        }
        if self.output_dir != other.output_dir {
            return Some("output_dir");
        }
        if self.train_freq != other.train_freq {
            return Some("train_freq");
        }
        if self.learning_starts() != other.learning_starts() {
            return Some("learning_starts");
        }
        if self.smoothing_window != other.smoothing_window {
            return Some("smoothing_window");
        }
        None
    }
}
