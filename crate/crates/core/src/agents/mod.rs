//! DQN-family and actor-critic learners trained on
//! `TD loss + lambda_tf * psi_SUFT`.
//!
//! `psi_SUFT` is the batch mean of `L(v_behavior, f(s))`, where `v_behavior`
//! was recorded in the replay buffer when the action was selected and
//! `f(s)` is the current value network's output for the same state (and, for
//! Q-agents, the same stored action). The hypothesis-free constant of the
//! underlying bound plays no part in training and is not computed here.

mod config;
mod objective;

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use config::{AgentConfig, EpsilonSchedule, Variant};
pub use objective::{PolicyGradientLoss, SuftObjective};

use crate::config::ConfigError;
use crate::nn::{adam_step, save_weights, AdamState, CheckpointError, Mlp, NnError};
use crate::replay::{ReplayBuffer, ReplayError, Transition};
use objective::softmax;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateMetrics {
    pub td_loss: f64,
    pub suft_term: f64,
    /// `td_loss + lambda_tf * suft_term`
    pub total_loss: f64,
    pub grad_norm: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("empty batch")]
    EmptyBatch,
}

/// Sidecar written next to an agent's network checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSidecar {
    pub config: AgentConfig,
    pub obs_dim: usize,
    pub n_actions: usize,
    pub updates: u64,
    pub policy_id: u64,
}

#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    obs_dim: usize,
    n_actions: usize,
    /// Q-network (`n_actions` outputs) or critic (1 output).
    value_net: Mlp,
    target_net: Option<Mlp>,
    actor: Option<Mlp>,
    value_opt: AdamState,
    actor_opt: Option<AdamState>,
    updates: u64,
    policy_id: u64,
    act_steps: u64,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(
        config: AgentConfig,
        obs_dim: usize,
        n_actions: usize,
        rng: &mut R,
    ) -> Result<Self, AgentError> {
        config.validate("agent.")?;
        let sizes = |out: usize| {
            let mut s = vec![obs_dim];
            s.extend_from_slice(&config.hidden_layers);
            s.push(out);
            s
        };
        let q_agent = config.variant.is_q_agent();
        let value_net = Mlp::init(
            &sizes(if q_agent { n_actions } else { 1 }),
            config.activation,
            rng,
        )?;
        let actor = if q_agent {
            None
        } else {
            Some(Mlp::init(&sizes(n_actions), config.activation, rng)?)
        };
        let target_net = config.variant.uses_target_net().then(|| value_net.clone());
        Ok(Self {
            value_opt: AdamState::for_net(&value_net),
            actor_opt: actor.as_ref().map(AdamState::for_net),
            config,
            obs_dim,
            n_actions,
            value_net,
            target_net,
            actor,
            updates: 0,
            policy_id: 0,
            act_steps: 0,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn value_net(&self) -> &Mlp {
        &self.value_net
    }

    pub fn value_net_mut(&mut self) -> &mut Mlp {
        &mut self.value_net
    }

    pub fn target_net(&self) -> Option<&Mlp> {
        self.target_net.as_ref()
    }

    pub fn target_net_mut(&mut self) -> Option<&mut Mlp> {
        self.target_net.as_mut()
    }

    pub fn actor(&self) -> Option<&Mlp> {
        self.actor.as_ref()
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Current policy epoch; stamped on every transition pushed.
    pub fn policy_id(&self) -> u64 {
        self.policy_id
    }

    pub fn current_epsilon(&self) -> f64 {
        self.config.epsilon.value(self.act_steps)
    }

    /// Selects an action and returns it with the value output used to select
    /// it, advancing the exploration schedule.
    pub fn act<R: Rng + ?Sized>(&mut self, obs: &[f64], rng: &mut R) -> Result<(usize, f64), AgentError> {
        let eps = self.current_epsilon();
        self.act_steps += 1;
        self.act_with_epsilon(obs, eps, rng)
    }

    /// Q-agents: epsilon-greedy over `Q(obs, .)`; the returned value is
    /// `Q(obs, action)` for whichever action was taken, exploratory or not.
    /// Actor-critic: samples the softmax policy (ignores `epsilon`) and returns
    /// `V(obs)`.
    pub fn act_with_epsilon<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        epsilon: f64,
        rng: &mut R,
    ) -> Result<(usize, f64), AgentError> {
        match &self.actor {
            None => {
                let q = self.value_net.forward(obs)?;
                let explore: f64 = rng.gen();
                let action = if explore < epsilon {
                    rng.gen_range(0..self.n_actions)
                } else {
                    argmax(&q)
                };
                Ok((action, q[action]))
            }
            Some(actor) => {
                let probs = softmax(&actor.forward(obs)?);
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut action = probs.len() - 1;
                for (k, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        action = k;
                        break;
                    }
                }
                let v = self.value_net.forward(obs)?[0];
                Ok((action, v))
            }
        }
    }

    /// Frozen bootstrap targets `y = r + gamma * next_value * (1 - terminated)`.
    pub fn td_targets(&self, batch: &[&Transition]) -> Result<Vec<f64>, AgentError> {
        let gamma = self.config.gamma;
        batch
            .iter()
            .map(|t| {
                if t.terminated {
                    return Ok(t.reward);
                }
                let next = match self.config.variant {
                    Variant::VanillaDqn => max(&self.value_net.forward(&t.next_obs)?),
                    Variant::Dqn => max(&self.target().forward(&t.next_obs)?),
                    Variant::DoubleDqn => {
                        let pick = argmax(&self.value_net.forward(&t.next_obs)?);
                        self.target().forward(&t.next_obs)?[pick]
                    }
                    Variant::ActorCritic => self.value_net.forward(&t.next_obs)?[0],
                };
                Ok(t.reward + gamma * next)
            })
            .collect()
    }

    fn target(&self) -> &Mlp {
        self.target_net.as_ref().expect("variant has a target network")
    }

    fn value_index(&self, t: &Transition) -> usize {
        if self.config.variant.is_q_agent() {
            t.action
        } else {
            0
        }
    }

    /// Batch mean of `L(v_behavior, Q(s, a))` (Q-agents) or
    /// `L(v_behavior, V(s))` (actor-critic) under the current network.
    pub fn suft_term(&self, batch: &[&Transition]) -> Result<f64, AgentError> {
        if batch.is_empty() {
            return Err(AgentError::EmptyBatch);
        }
        let mut total = 0.0;
        for t in batch {
            let pred = self.value_net.forward(&t.obs)?[self.value_index(t)];
            total += self.config.loss_kind.eval(t.v_behavior, pred);
        }
        Ok(total / batch.len() as f64)
    }

    /// The value network's training objective on `batch`, with TD targets
    /// computed now and then held fixed.
    pub fn critic_objective(&self, batch: &[&Transition]) -> Result<SuftObjective, AgentError> {
        if batch.is_empty() {
            return Err(AgentError::EmptyBatch);
        }
        Ok(SuftObjective::new(
            self.td_targets(batch)?,
            batch.iter().map(|t| t.v_behavior).collect(),
            batch.iter().map(|t| self.value_index(t)).collect(),
            self.config.loss_kind,
            self.config.lambda_tf,
        ))
    }

    /// Samples a batch and takes one optimization step.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        buffer: &ReplayBuffer,
        rng: &mut R,
    ) -> Result<UpdateMetrics, AgentError> {
        if buffer.len() < self.config.batch_size {
            return Err(ReplayError::NotReady {
                len: buffer.len(),
                needed: self.config.batch_size,
            }
            .into());
        }
        let batch = buffer.sample(self.config.batch_size, rng)?;
        self.update_on_batch(&batch)
    }

    /// One optimization step on a given batch.
    pub fn update_on_batch(&mut self, batch: &[&Transition]) -> Result<UpdateMetrics, AgentError> {
        let objective = self.critic_objective(batch)?;
        let inputs: Vec<&[f64]> = batch.iter().map(|t| t.obs.as_slice()).collect();

        // Advantages use the critic before its step.
        let advantages = match &self.actor {
            Some(_) => Some(
                batch
                    .iter()
                    .zip(&objective.targets)
                    .map(|(t, y)| Ok(y - self.value_net.forward(&t.obs)?[0]))
                    .collect::<Result<Vec<f64>, AgentError>>()?,
            ),
            None => None,
        };

        let (_, grad) = self.value_net.loss_and_grad(&inputs, &objective)?;
        let (td_sum, suft_sum) = objective.take_sums();
        let n = batch.len() as f64;
        let td_loss = td_sum / n;
        let suft_term = suft_sum / n;
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        adam_step(&mut self.value_net, &grad, &mut self.value_opt, self.config.lr)?;

        if let (Some(actor), Some(opt), Some(advantages)) =
            (self.actor.as_mut(), self.actor_opt.as_mut(), advantages)
        {
            let pg = PolicyGradientLoss {
                actions: batch.iter().map(|t| t.action).collect(),
                advantages,
            };
            let (_, actor_grad) = actor.loss_and_grad(&inputs, &pg)?;
            adam_step(actor, &actor_grad, opt, self.config.lr)?;
        }

        self.updates += 1;
        if self.updates % self.config.target_sync_interval as u64 == 0 {
            if let Some(target) = self.target_net.as_mut() {
                self.value_net.copy_into(target)?;
            }
            self.policy_id += 1;
        }

        Ok(UpdateMetrics {
            td_loss,
            suft_term,
            total_loss: td_loss + self.config.lambda_tf * suft_term,
            grad_norm,
        })
    }

    /// Writes `<stem>.value.suftnn`, optional `.target`/`.actor` checkpoints and
    /// a `<stem>.agent.json` sidecar into `dir`.
    pub fn save_checkpoint(&self, dir: &Path, stem: &str) -> Result<(), AgentError> {
        fs::create_dir_all(dir)?;
        save_weights(&self.value_net, dir.join(format!("{stem}.value.suftnn")))?;
        if let Some(t) = &self.target_net {
            save_weights(t, dir.join(format!("{stem}.target.suftnn")))?;
        }
        if let Some(a) = &self.actor {
            save_weights(a, dir.join(format!("{stem}.actor.suftnn")))?;
        }
        let sidecar = AgentSidecar {
            config: self.config.clone(),
            obs_dim: self.obs_dim,
            n_actions: self.n_actions,
            updates: self.updates,
            policy_id: self.policy_id,
        };
        fs::write(
            dir.join(format!("{stem}.agent.json")),
            serde_json::to_string_pretty(&sidecar)?,
        )?;
        Ok(())
    }
}

/// Index of the largest value; ties go to the lowest index.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn max(v: &[f64]) -> f64 {
    v[argmax(v)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, Activation};
    use crate::{rng_from_seed, LossFn};

    fn small_config(variant: Variant) -> AgentConfig {
        AgentConfig {
            hidden_layers: vec![8],
            batch_size: 4,
            target_sync_interval: 3,
            ..AgentConfig::desk_default(variant, 1000)
        }
    }

    fn agent(variant: Variant, seed: u64) -> Agent {
        Agent::new(small_config(variant), 3, 2, &mut rng_from_seed(seed)).unwrap()
    }

    /// Zero weights with output biases `q`, so `Q(s, .) = q` everywhere.
    fn constant_q(net: &mut Mlp, q: &[f64]) {
        net.weights_mut().iter_mut().for_each(|w| *w = 0.0);
        let n = net.weights().len();
        net.weights_mut()[n - q.len()..].copy_from_slice(q);
    }

    fn tr(obs: [f64; 3], action: usize, reward: f64, terminated: bool, v: f64) -> Transition {
        Transition {
            obs: obs.to_vec(),
            action,
            reward,
            next_obs: vec![obs[0] + 0.1, obs[1], -obs[2]],
            terminated,
            v_behavior: v,
            policy_id: 0,
        }
    }

    #[test]
    fn greedy_action_and_value() {
        let mut a = agent(Variant::Dqn, 0);
        constant_q(a.value_net_mut(), &[0.1, 0.9]);
        let (act, v) = a.act_with_epsilon(&[0.0, 0.0, 0.0], 0.0, &mut rng_from_seed(1)).unwrap();
        assert_eq!((act, v), (1, 0.9));
    }

    #[test]
    fn exploratory_action_records_its_own_value() {
        let mut a = agent(Variant::Dqn, 0);
        constant_q(a.value_net_mut(), &[0.1, 0.9]);
        let mut rng = rng_from_seed(2);
        let mut seen = [0usize; 2];
        for _ in 0..2000 {
            let (act, v) = a.act_with_epsilon(&[0.0, 1.0, 0.0], 1.0, &mut rng).unwrap();
            assert_eq!(v, [0.1, 0.9][act]);
            seen[act] += 1;
        }
        assert!(seen[0] > 900 && seen[1] > 900, "{seen:?}");
    }

    #[test]
    fn act_is_deterministic_and_advances_epsilon() {
        let mut a = agent(Variant::ActorCritic, 4);
        let mut b = a.clone();
        let obs = [0.3, -0.1, 0.8];
        for _ in 0..10 {
            assert_eq!(
                a.act(&obs, &mut rng_from_seed(9)).unwrap(),
                b.act(&obs, &mut rng_from_seed(9)).unwrap()
            );
        }
        let v = a.value_net().forward(&obs).unwrap()[0];
        assert_eq!(a.act(&obs, &mut rng_from_seed(0)).unwrap().1, v);
        assert!(a.current_epsilon() < 1.0);
    }

    #[test]
    fn terminal_and_zero_discount_targets() {
        for variant in [Variant::VanillaDqn, Variant::Dqn, Variant::DoubleDqn, Variant::ActorCritic] {
            let a = agent(variant, 3);
            let t = tr([0.1, 0.2, 0.3], 0, 1.0, true, 0.0);
            assert_eq!(a.td_targets(&[&t]).unwrap(), vec![1.0]);

            let mut cfg = small_config(variant);
            cfg.gamma = 1e-300;
            let mut z = Agent::new(cfg, 3, 2, &mut rng_from_seed(3)).unwrap();
            let outs = z.value_net().output_dim();
            constant_q(z.value_net_mut(), &[0.5, 0.5][..outs]);
            let live = tr([0.1, 0.2, 0.3], 1, 0.25, false, 0.0);
            assert_eq!(z.td_targets(&[&live]).unwrap(), vec![0.25]);
        }
    }

    #[test]
    fn dqn_versus_double_dqn_targets() {
        let mut cfg = small_config(Variant::Dqn);
        cfg.gamma = 0.5;
        let t = tr([0.0; 3], 0, 1.0, false, 0.0);
        let mut ys = vec![];
        for variant in [Variant::Dqn, Variant::DoubleDqn] {
            cfg.variant = variant;
            let mut a = Agent::new(cfg.clone(), 3, 2, &mut rng_from_seed(0)).unwrap();
            constant_q(a.value_net_mut(), &[1.0, 0.0]); // online argmax = 0
            constant_q(a.target_net_mut().unwrap(), &[2.0, 5.0]);
            ys.push(a.td_targets(&[&t]).unwrap()[0]);
        }
        assert_eq!(ys, vec![3.5, 2.0]);
    }

    #[test]
    fn equal_nets_make_dqn_and_double_dqn_agree() {
        let a = agent(Variant::Dqn, 5);
        let mut b = agent(Variant::DoubleDqn, 5);
        *b.value_net_mut() = a.value_net().clone();
        *b.target_net_mut().unwrap() = a.value_net().clone();
        let batch: Vec<Transition> =
            (0..6).map(|i| tr([i as f64 * 0.3, -0.2, 0.4], i % 2, 0.5, false, 0.0)).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        assert_eq!(a.td_targets(&refs).unwrap(), b.td_targets(&refs).unwrap());
    }

    #[test]
    fn suft_term_is_zero_on_fresh_values_and_matches_hand_values() {
        let mut a = agent(Variant::Dqn, 6);
        let mut rng = rng_from_seed(1);
        let obs = [0.2, 0.4, -0.6];
        let (act, v) = a.act(&obs, &mut rng).unwrap();
        let t = tr(obs, act, 0.0, false, v);
        assert_eq!(a.suft_term(&[&t]).unwrap(), 0.0);

        constant_q(a.value_net_mut(), &[5.0, 5.0]);
        let t = tr(obs, 1, 0.0, false, 2.0);
        assert_eq!(a.suft_term(&[&t]).unwrap(), 9.0);
        let mut cfg = small_config(Variant::Dqn);
        cfg.loss_kind = LossFn::L1;
        let mut l1 = Agent::new(cfg, 3, 2, &mut rng_from_seed(0)).unwrap();
        constant_q(l1.value_net_mut(), &[5.0, 5.0]);
        assert_eq!(l1.suft_term(&[&t]).unwrap(), 3.0);
        assert!(matches!(a.suft_term(&[]), Err(AgentError::EmptyBatch)));
    }

    #[test]
    fn update_metrics_decompose() {
        for variant in [Variant::VanillaDqn, Variant::Dqn, Variant::DoubleDqn, Variant::ActorCritic] {
            let mut a = agent(variant, 7);
            let mut buf = ReplayBuffer::new(16).unwrap();
            let mut rng = rng_from_seed(8);
            for i in 0..16 {
                let obs = [i as f64 * 0.1, 0.5, -0.2];
                let (act, v) = a.act(&obs, &mut rng).unwrap();
                buf.push(tr(obs, act, 1.0, i % 7 == 0, v + 0.3)).unwrap();
            }
            for _ in 0..7 {
                let m = a.update(&buf, &mut rng).unwrap();
                assert!((m.total_loss - (m.td_loss + a.config().lambda_tf * m.suft_term)).abs() <= 1e-12);
                assert!(m.suft_term > 0.0);
                assert!(m.grad_norm.is_finite());
            }
            // sync every 3 updates
            assert_eq!(a.policy_id(), 2);
            if let Some(target) = a.target_net() {
                assert_ne!(target, a.value_net());
            }
        }
    }

    #[test]
    fn target_sync_copies_online() {
        let mut a = agent(Variant::Dqn, 9);
        let mut buf = ReplayBuffer::new(8).unwrap();
        let mut rng = rng_from_seed(1);
        for i in 0..8 {
            buf.push(tr([i as f64, 0.0, 1.0], i % 2, 0.0, false, 0.0)).unwrap();
        }
        for k in 1..=9 {
            a.update(&buf, &mut rng).unwrap();
            let synced = a.target_net().unwrap() == a.value_net();
            assert_eq!(synced, k % 3 == 0, "after update {k}");
        }
    }

    #[test]
    fn underfull_buffer_is_not_ready() {
        let mut a = agent(Variant::Dqn, 0);
        let mut buf = ReplayBuffer::new(8).unwrap();
        buf.push(tr([0.0; 3], 0, 0.0, false, 0.0)).unwrap();
        assert!(matches!(
            a.update(&buf, &mut rng_from_seed(0)),
            Err(AgentError::Replay(ReplayError::NotReady { len: 1, needed: 4 }))
        ));
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        for variant in [Variant::DoubleDqn, Variant::ActorCritic] {
            let mut cfg = small_config(variant);
            cfg.activation = Activation::Tanh;
            let a = Agent::new(cfg, 3, 2, &mut rng_from_seed(12)).unwrap();
            let batch: Vec<Transition> = (0..5)
                .map(|i| tr([0.3 * i as f64, -0.5, 0.2 * i as f64], i % 2, 0.1 * i as f64, i == 4, 1.5 - 0.4 * i as f64))
                .collect();
            let refs: Vec<&Transition> = batch.iter().collect();
            let obj = a.critic_objective(&refs).unwrap();
            let inputs: Vec<&[f64]> = refs.iter().map(|t| t.obs.as_slice()).collect();
            let r = grad_check(a.value_net(), &inputs, &obj, 1e-6).unwrap();
            assert!(r.passed, "{variant}: {r:?}");
        }
    }

    #[test]
    fn stored_values_only_enter_through_psi() {
        let a = agent(Variant::Dqn, 13);
        let batch: Vec<Transition> =
            (0..4).map(|i| tr([0.1 * i as f64, 0.2, 0.3], i % 2, 1.0, false, 0.7)).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let inputs: Vec<&[f64]> = refs.iter().map(|t| t.obs.as_slice()).collect();
        let obj = a.critic_objective(&refs).unwrap();
        let (_, g) = a.value_net().loss_and_grad(&inputs, &obj).unwrap();
        let (td, suft) = obj.take_sums();

        let mut shifted = a.critic_objective(&refs).unwrap();
        shifted.v_behavior.iter_mut().for_each(|v| *v += 3.0);
        let (_, g2) = a.value_net().loss_and_grad(&inputs, &shifted).unwrap();
        let (td2, suft2) = shifted.take_sums();
        assert_eq!(td, td2);
        assert_ne!(suft, suft2);
        assert_ne!(g, g2);

        let mut retargeted = a.critic_objective(&refs).unwrap();
        retargeted.targets.iter_mut().for_each(|y| *y += 3.0);
        let _ = a.value_net().loss_and_grad(&inputs, &retargeted).unwrap();
        let (td3, suft3) = retargeted.take_sums();
        assert_ne!(td, td3);
        assert_eq!(suft, suft3);
    }

    #[test]
    fn checkpoint_writes_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let a = agent(Variant::ActorCritic, 1);
        a.save_checkpoint(dir.path(), "seed0").unwrap();
        let side: AgentSidecar =
            serde_json::from_str(&fs::read_to_string(dir.path().join("seed0.agent.json")).unwrap()).unwrap();
        assert_eq!(side.config, *a.config());
        let v = crate::nn::load_weights(dir.path().join("seed0.value.suftnn")).unwrap();
        assert_eq!(&v, a.value_net());
        assert!(dir.path().join("seed0.actor.suftnn").exists());
    }
}
