use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agents::{Agent, UpdateMetrics};
use crate::config::RunConfigFile;
use crate::envs::{EnvKind, Environment};
use crate::replay::{ReplayBuffer, Transition};
use crate::rng_from_seed;

/// One line of a run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: u64,
    pub episode: u64,
    pub reward: f64,
    pub td_loss: Option<f64>,
    pub suft_term: Option<f64>,
    pub total_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    /// Environment step after which the update ran.
    pub step: u64,
    pub policy_id: u64,
    #[serde(flatten)]
    pub metrics: UpdateMetrics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    pub steps: u64,
    /// Returns of completed episodes, in order.
    pub episode_rewards: Vec<f64>,
    /// Step at which each completed episode ended.
    pub episode_end_steps: Vec<u64>,
    pub updates: Vec<UpdateRecord>,
    pub wall_time: f64,
    #[serde(skip)]
    pub log: Vec<StepLog>,
}

impl RunRecord {
    /// Equality on everything except wall-clock time.
    pub fn same_trajectory(&self, other: &RunRecord) -> bool {
        self.config_hash == other.config_hash
            && self.seed == other.seed
            && self.steps == other.steps
            && self.episode_rewards == other.episode_rewards
            && self.episode_end_steps == other.episode_end_steps
            && self.updates == other.updates
            && self.log == other.log
    }

    /// The run log as JSONL, one [`StepLog`] per line.
    pub fn jsonl(&self) -> String {
        let mut out = String::with_capacity(self.log.len() * 96);
        for line in &self.log {
            out.push_str(&serde_json::to_string(line).expect("log line serializes"));
            out.push('\n');
        }
        out
    }
}

/// Independent random streams for one run, all derived from the run seed.
struct Streams {
    init: crate::SuftRng,
    act: crate::SuftRng,
    sample: crate::SuftRng,
    env: crate::SuftRng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let mut root = rng_from_seed(seed);
        let mut next = || rng_from_seed(root.gen());
        Self {
            init: next(),
            act: next(),
            sample: next(),
            env: next(),
        }
    }
}

/// Trains one agent for `config.steps` environment steps.
///
/// Loop: act, step the environment, push the transition with the value used
/// to act, and every `train_freq` steps (once the buffer holds
/// `learning_starts` transitions) run one update. Episodes reset with seeds
/// drawn from the run's environment stream.
pub fn train_run(config: &RunConfigFile, seed: u64) -> Result<(RunRecord, Agent), HarnessError> {
    config.validate()?;
    let start = Instant::now();
    let mut env = config.env.make();
    let spec = env.spec().clone();
    let mut streams = Streams::new(seed);
    let mut agent = Agent::new(config.agent.clone(), spec.obs_dim, spec.n_actions, &mut streams.init)?;
    check_shapes(&agent, env.as_ref())?;
    let mut buffer = ReplayBuffer::with_obs_dim(config.agent.buffer_capacity, spec.obs_dim)?;

    let mut log = Vec::with_capacity(config.steps.min(1 << 20) as usize);
    let mut updates = Vec::new();
    let mut episode_rewards = Vec::new();
    let mut episode_end_steps = Vec::new();
    let mut episode = 0u64;
    let mut episode_return = 0.0;
    let mut obs = if config.steps > 0 { env.reset(streams.env.gen()) } else { Vec::new() };

    for step in 1..=config.steps {
        let (action, v_behavior) = agent.act(&obs, &mut streams.act)?;
        let res = env.step(action)?;
        episode_return += res.reward;
        buffer.push(Transition {
            obs: std::mem::take(&mut obs),
            action,
            reward: res.reward,
            next_obs: res.obs.clone(),
            terminated: res.terminated,
            v_behavior,
            policy_id: agent.policy_id(),
        })?;

        let mut metrics = None;
        if step % config.train_freq as u64 == 0
            && buffer.len() >= config.learning_starts().max(config.agent.batch_size)
        {
            let m = agent.update(&buffer, &mut streams.sample)?;
            updates.push(UpdateRecord { step, policy_id: agent.policy_id(), metrics: m });
            metrics = Some(m);
        }
        log.push(StepLog {
            step,
            episode,
            reward: res.reward,
            td_loss: metrics.map(|m| m.td_loss),
            suft_term: metrics.map(|m| m.suft_term),
            total_loss: metrics.map(|m| m.total_loss),
        });

        if res.done() {
            episode_rewards.push(episode_return);
            episode_end_steps.push(step);
            episode_return = 0.0;
            episode += 1;
            obs = env.reset(streams.env.gen());
        } else {
            obs = res.obs;
        }
    }

    let record = RunRecord {
        config_hash: config.config_hash(),
        seed,
        steps: config.steps,
        episode_rewards,
        episode_end_steps,
        updates,
        wall_time: start.elapsed().as_secs_f64(),
        log,
    };
    Ok((record, agent))
}

fn check_shapes(agent: &Agent, env: &dyn Environment) -> Result<(), HarnessError> {
    let spec = env.spec();
    if agent.obs_dim() != spec.obs_dim || agent.n_actions() != spec.n_actions {
        return Err(HarnessError::ShapeMismatch {
            env: spec.name.clone(),
            env_obs: spec.obs_dim,
            env_actions: spec.n_actions,
            agent_obs: agent.obs_dim(),
            agent_actions: agent.n_actions(),
        });
    }
    Ok(())
}

/// Mean episode return of the uniform random policy over `episodes`
/// episodes reset with seeds `0..episodes`.
pub fn random_policy_reward(env: EnvKind, episodes: u64) -> Result<f64, HarnessError> {
    let mut e = env.make();
    let n_actions = e.spec().n_actions;
    let mut rng = rng_from_seed(0x5eed_0000 ^ episodes);
    let mut total = 0.0;
    for ep in 0..episodes {
        e.reset(ep);
        loop {
            let r = e.step(rng.gen_range(0..n_actions))?;
            total += r.reward;
            if r.done() {
                break;
            }
        }
    }
    Ok(total / episodes.max(1) as f64)
}
