use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::ConfigError;
use crate::nn::Activation;
use crate::LossFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Bootstraps from the online network.
    VanillaDqn,
    /// Bootstraps from a periodically synced target network.
    Dqn,
    /// Online network picks the next action, target network scores it.
    DoubleDqn,
    /// Softmax actor with a state-value critic; SUFT regularizes the critic.
    ActorCritic,
}

impl Variant {
    pub fn uses_target_net(self) -> bool {
        matches!(self, Variant::Dqn | Variant::DoubleDqn)
    }

    pub fn is_q_agent(self) -> bool {
        !matches!(self, Variant::ActorCritic)
    }

    /// Default SUFT coefficient: 1.0 for the DQN family, 0.6 for the critic.
    pub fn default_lambda_tf(self) -> f64 {
        match self {
            Variant::ActorCritic => 0.6,
            _ => 1.0,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variant::VanillaDqn => "vanilla_dqn",
            Variant::Dqn => "dqn",
            Variant::DoubleDqn => "double_dqn",
            Variant::ActorCritic => "actor_critic",
        };
        f.write_str(s)
    }
}

/// Linear decay from `start` to `end` over the first `decay_steps` actions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl EpsilonSchedule {
    pub fn value(&self, step: u64) -> f64 {
        if self.decay_steps == 0 || step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }

    /// 1.0 -> 0.05 over the first 20% of `total_steps`.
    pub fn default_for(total_steps: u64) -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            decay_steps: total_steps / 5,
        }
    }
}

fn default_hidden_layers() -> Vec<usize> {
    vec![64, 64]
}

fn default_activation() -> Activation {
    Activation::Relu
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub variant: Variant,
    pub gamma: f64,
    pub lambda_tf: f64,
    #[serde(rename = "loss")]
    pub loss_kind: LossFn,
    pub lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub target_sync_interval: usize,
    pub epsilon: EpsilonSchedule,
    #[serde(default = "default_hidden_layers")]
    pub hidden_layers: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
}

impl AgentConfig {
    /// Desk-scale defaults for `variant` with `total_steps` of interaction.
    pub fn desk_default(variant: Variant, total_steps: u64) -> Self {
        Self {
            variant,
            gamma: 0.99,
            lambda_tf: variant.default_lambda_tf(),
            loss_kind: LossFn::L2,
            lr: 1e-3,
            batch_size: 32,
            buffer_capacity: 500,
            target_sync_interval: 250,
            epsilon: EpsilonSchedule::default_for(total_steps),
            hidden_layers: default_hidden_layers(),
            activation: default_activation(),
        }
    }

    /// Checks every field; `prefix` is prepended to the reported field path.
    pub fn validate(&self, prefix: &str) -> Result<(), ConfigError> {
        let err = |field: &str, msg: String| Err(ConfigError::field(format!("{prefix}{field}"), msg));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return err("gamma", format!("must be in (0, 1], got {}", self.gamma));
        }
        if !(self.lambda_tf >= 0.0 && self.lambda_tf.is_finite()) {
            return err("lambda_tf", format!("must be finite and >= 0, got {}", self.lambda_tf));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return err("lr", format!("must be positive, got {}", self.lr));
        }
        if self.batch_size == 0 {
            return err("batch_size", "must be positive".into());
        }
        if self.buffer_capacity == 0 {
            return err("buffer_capacity", "must be positive".into());
        }
        if self.target_sync_interval == 0 {
            return err("target_sync_interval", "must be positive".into());
        }
        let e = &self.epsilon;
        for (name, v) in [("start", e.start), ("end", e.end)] {
            if !(0.0..=1.0).contains(&v) {
                return err(&format!("epsilon.{name}"), format!("must be in [0, 1], got {v}"));
            }
        }
        if self.hidden_layers.contains(&0) {
            return err("hidden_layers", "sizes must be positive".into());
        }
        Ok(())
    }

    /// Equal in every field except `lambda_tf`.
    pub fn same_except_lambda(&self, other: &AgentConfig) -> bool {
        self.drift_from(other).is_none()
    }

    /// Config path of the first field other than `lambda_tf` that differs.
    pub fn drift_from(&self, other: &AgentConfig) -> Option<&'static str> {
        let checks = [
            ("agent.variant", self.variant == other.variant),
            ("agent.gamma", self.gamma == other.gamma),
            ("agent.loss", self.loss_kind == other.loss_kind),
            ("agent.lr", self.lr == other.lr),
            ("agent.batch_size", self.batch_size == other.batch_size),
            ("agent.buffer_capacity", self.buffer_capacity == other.buffer_capacity),
            ("agent.target_sync_interval", self.target_sync_interval == other.target_sync_interval),
            ("agent.epsilon", self.epsilon == other.epsilon),
            ("agent.hidden_layers", self.hidden_layers == other.hidden_layers),
            ("agent.activation", self.activation == other.activation),
        ];
        checks.into_iter().find(|(_, same)| !same).map(|(field, _)| field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_is_linear_then_flat() {
        let e = EpsilonSchedule { start: 1.0, end: 0.05, decay_steps: 100 };
        assert_eq!(e.value(0), 1.0);
        assert!((e.value(50) - 0.525).abs() < 1e-15);
        assert_eq!(e.value(100), 0.05);
        assert_eq!(e.value(10_000), 0.05);
        assert_eq!(EpsilonSchedule::default_for(20_000).decay_steps, 4_000);
    }

    #[test]
    fn defaults_follow_variant() {
        assert_eq!(AgentConfig::desk_default(Variant::Dqn, 1000).lambda_tf, 1.0);
        assert_eq!(AgentConfig::desk_default(Variant::ActorCritic, 1000).lambda_tf, 0.6);
        assert!(AgentConfig::desk_default(Variant::DoubleDqn, 1000).validate("agent.").is_ok());
    }

    #[test]
    fn validation_names_the_field() {
        let mut c = AgentConfig::desk_default(Variant::Dqn, 1000);
        c.gamma = 1.5;
        assert_eq!(c.validate("agent.").unwrap_err().path, "agent.gamma");
        let mut c = AgentConfig::desk_default(Variant::Dqn, 1000);
        c.epsilon.end = -0.1;
        assert_eq!(c.validate("agent.").unwrap_err().path, "agent.epsilon.end");
        let mut c = AgentConfig::desk_default(Variant::Dqn, 1000);
        c.lambda_tf = -1.0;
        assert_eq!(c.validate("").unwrap_err().path, "lambda_tf");
    }

    #[test]
    fn unknown_keys_rejected() {
        let c = AgentConfig::desk_default(Variant::Dqn, 1000);
        let mut v = serde_json::to_value(&c).unwrap();
        assert_eq!(serde_json::from_value::<AgentConfig>(v.clone()).unwrap(), c);
        v["huber_delta"] = serde_json::json!(1.0);
        assert!(serde_json::from_value::<AgentConfig>(v).is_err());
    }

    #[test]
    fn lambda_only_difference() {
        let a = AgentConfig::desk_default(Variant::Dqn, 1000);
        let mut b = a.clone();
        b.lambda_tf = 0.0;
        assert!(a.same_except_lambda(&b));
        b.gamma = 0.9;
        assert!(!a.same_except_lambda(&b));
        assert_eq!(a.drift_from(&b), Some("agent.gamma"));
    }
}
