//! Multi-seed training runs, the comparison protocol and report output.
//!
//! Per seed, episode returns are smoothed with a trailing moving average and
//! the last smoothed value is that seed's score. An arm's score is the upper
//! median of its seed scores; arms are compared with the improvement
//! percentage, its `log10(pct + 1)` variant, the reward ratio and a two-sided
//! Welch t-test on the seed scores.
//!
//! Output layout of `train` (one directory per arm):
//!
//! ```text
//! manifest.json          config, config hash, seeds, random-policy reward
//! run_seed{S}.jsonl      one line per environment step
//! run_seed{S}.json       RunRecord (episode returns, update metrics, wall time)
//! seed{S}.*.suftnn       final network weights, plus seed{S}.agent.json
//! ```
//!
//! `compare` writes two such directories, `baseline/` and `suft/`, next to
//! `comparison.json` and `comparison_seeds.csv`.

mod compare;
mod report;
mod run;
pub mod stats;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use compare::{compare, seed_score, ComparisonReport};
pub use report::{report, ReportOutput};
pub use run::{random_policy_reward, train_run, RunRecord, StepLog, UpdateRecord};
pub use stats::StatsError;

use crate::agents::AgentError;
use crate::config::{ConfigError, RunConfigFile};
use crate::envs::EnvError;
use crate::replay::ReplayError;

/// Episodes used to estimate an environment's random-policy reward.
pub const RANDOM_REWARD_EPISODES: u64 = 100;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error(
        "{env} has obs_dim {env_obs} and {env_actions} actions, agent expects {agent_obs} and {agent_actions}"
    )]
    ShapeMismatch {
        env: String,
        env_obs: usize,
        env_actions: usize,
        agent_obs: usize,
        agent_actions: usize,
    },
    #[error("seed {seed} finished no episodes in {steps} steps")]
    NoEpisodes { seed: u64, steps: u64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("report: {0}")]
    Report(String),
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

pub(crate) fn create_dir(path: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, HarnessError> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Json { path: path.to_path_buf(), source })
}

pub(crate) fn to_json_pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

/// Contents of an arm directory's `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmManifest {
    pub config: RunConfigFile,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub random_reward: f64,
}

/// Worker count for seed sweeps: `SUFT_THREADS` if set to a positive
/// integer, otherwise rayon's default.
pub fn worker_threads() -> usize {
    std::env::var("SUFT_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

/// Runs every `(config, seed)` job, in parallel up to [`worker_threads`];
/// results come back in job order.
pub(crate) fn run_jobs(jobs: &[(&RunConfigFile, u64)]) -> Result<Vec<RunRecord>, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_threads())
        .build()
        .map_err(|e| HarnessError::Report(format!("thread pool: {e}")))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|(cfg, seed)| train_run(cfg, *seed).map(|(record, _)| record))
            .collect()
    })
}

/// Writes one arm's runs under `dir` (see the module docs for the layout).
pub(crate) fn write_arm(
    dir: &Path,
    config: &RunConfigFile,
    records: &[RunRecord],
    random_reward: f64,
) -> Result<(), HarnessError> {
    create_dir(dir)?;
    for r in records {
        write_file(&dir.join(format!("run_seed{}.jsonl", r.seed)), r.jsonl())?;
        write_file(&dir.join(format!("run_seed{}.json", r.seed)), to_json_pretty(r))?;
    }
    let manifest = ArmManifest {
        config: config.clone(),
        config_hash: config.config_hash(),
        seeds: records.iter().map(|r| r.seed).collect(),
        random_reward,
    };
    write_file(&dir.join("manifest.json"), to_json_pretty(&manifest))
}

/// Trains every seed of `config` and writes logs, records, final checkpoints
/// and a manifest under `config.output_dir`.
pub fn train_to_dir(config: &RunConfigFile) -> Result<Vec<RunRecord>, HarnessError> {
    config.validate()?;
    let dir = &config.output_dir;
    create_dir(dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_threads())
        .build()
        .map_err(|e| HarnessError::Report(format!("thread pool: {e}")))?;
    let results: Vec<(RunRecord, crate::agents::Agent)> = pool.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&s| train_run(config, s))
            .collect::<Result<_, _>>()
    })?;
    let mut records = Vec::with_capacity(results.len());
    for (record, agent) in results {
        agent.save_checkpoint(dir, &format!("seed{}", record.seed))?;
        records.push(record);
    }
    let random = random_policy_reward(config.env, RANDOM_REWARD_EPISODES)?;
    write_arm(dir, config, &records, random)?;
    Ok(records)
}
