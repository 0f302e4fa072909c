use serde::{Deserialize, Serialize};

use super::stats::{self, StatsError};
use super::{
    random_policy_reward, run_jobs, to_json_pretty, write_arm, write_file, HarnessError, RunRecord,
    RANDOM_REWARD_EPISODES,
};
use crate::config::{ConfigError, RunConfigFile};
use crate::envs::EnvKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub env: EnvKind,
    pub seeds: Vec<u64>,
    pub baseline_lambda_tf: f64,
    pub suft_lambda_tf: f64,
    pub baseline_median: f64,
    pub suft_median: f64,
    pub random_reward: f64,
    /// `None` when either arm fails to beat the random policy.
    pub improvement_pct: Option<f64>,
    pub log_improvement: Option<f64>,
    pub reward_ratio_pct: Option<f64>,
    pub p_value: f64,
    /// `None` when both arms have zero variance.
    pub t_statistic: Option<f64>,
    pub baseline_scores: Vec<f64>,
    pub suft_scores: Vec<f64>,
}

impl ComparisonReport {
    /// Builds the report from per-seed scores of each arm.
    pub fn from_scores(
        env: EnvKind,
        seeds: Vec<u64>,
        lambdas: (f64, f64),
        baseline_scores: Vec<f64>,
        suft_scores: Vec<f64>,
        random_reward: f64,
    ) -> Result<Self, HarnessError> {
        let baseline_median = stats::upper_median(&baseline_scores)?;
        let suft_median = stats::upper_median(&suft_scores)?;
        let improvement_pct = stats::improvement_pct(suft_median, baseline_median, random_reward);
        let (p_value, t_statistic) = match stats::welch_t_test(&suft_scores, &baseline_scores) {
            Ok(r) => (r.p_value, Some(r.t)),
            // Both arms constant: identical arms cannot be told apart,
            // distinct constants are perfectly separated.
            Err(StatsError::ZeroVariance) => {
                let same = stats::upper_median(&suft_scores)? == stats::upper_median(&baseline_scores)?;
                (if same { 1.0 } else { 0.0 }, None)
            }
            Err(e) => return Err(e.into()),
        };
        Ok(Self {
            env,
            seeds,
            baseline_lambda_tf: lambdas.0,
            suft_lambda_tf: lambdas.1,
            baseline_median,
            suft_median,
            random_reward,
            improvement_pct,
            log_improvement: improvement_pct.and_then(stats::log_improvement),
            reward_ratio_pct: stats::reward_ratio_pct(suft_median, baseline_median, random_reward),
            p_value,
            t_statistic,
            baseline_scores,
            suft_scores,
        })
    }

    pub fn seeds_csv(&self) -> String {
        let mut out = String::from("seed,baseline_score,suft_score\n");
        for ((seed, b), s) in self.seeds.iter().zip(&self.baseline_scores).zip(&self.suft_scores) {
            out.push_str(&format!("{seed},{b},{s}\n"));
        }
        out
    }
}

/// Last value of the seed's smoothed episode-return series.
pub fn seed_score(record: &RunRecord, window: usize) -> Result<f64, HarnessError> {
    let smoothed = stats::smooth(&record.episode_rewards, window)?;
    smoothed.last().copied().ok_or(HarnessError::NoEpisodes {
        seed: record.seed,
        steps: record.steps,
    })
}

/// Trains both arms on the shared seed list and writes `baseline/`, `suft/`,
/// `comparison.json` and `comparison_seeds.csv` under the shared output
/// directory. The configs must agree in everything but `agent.lambda_tf`.
pub fn compare(
    baseline: &RunConfigFile,
    suft: &RunConfigFile,
) -> Result<ComparisonReport, HarnessError> {
    baseline.validate()?;
    suft.validate()?;
    if let Some(field) = baseline.drift_from(suft) {
        return Err(HarnessError::Protocol(format!(
            "arms differ in `{field}`; only agent.lambda_tf may differ"
        )));
    }
    if baseline.seeds.len() < 2 {
        return Err(ConfigError::field("seeds", "a comparison needs at least 2 seeds").into());
    }

    let jobs: Vec<(&RunConfigFile, u64)> = [baseline, suft]
        .iter()
        .flat_map(|cfg| cfg.seeds.iter().map(move |&s| (*cfg, s)))
        .collect();
    let mut records = run_jobs(&jobs)?;
    let suft_records = records.split_off(baseline.seeds.len());
    let baseline_records = records;

    let random = random_policy_reward(baseline.env, RANDOM_REWARD_EPISODES)?;
    let scores = |rs: &[RunRecord]| {
        rs.iter()
            .map(|r| seed_score(r, baseline.smoothing_window))
            .collect::<Result<Vec<_>, _>>()
    };
    let report = ComparisonReport::from_scores(
        baseline.env,
        baseline.seeds.clone(),
        (baseline.agent.lambda_tf, suft.agent.lambda_tf),
        scores(&baseline_records)?,
        scores(&suft_records)?,
        random,
    )?;

    let dir = &baseline.output_dir;
    write_arm(&dir.join("baseline"), baseline, &baseline_records, random)?;
    write_arm(&dir.join("suft"), suft, &suft_records, random)?;
    write_file(&dir.join("comparison.json"), to_json_pretty(&report))?;
    write_file(&dir.join("comparison_seeds.csv"), report.seeds_csv())?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_arms_give_zero_improvement_and_unit_p() {
        let s = vec![0.5, 0.7, 0.6];
        let r = ComparisonReport::from_scores(EnvKind::GridWorld, vec![0, 1, 2], (1.0, 1.0), s.clone(), s, 0.0)
            .unwrap();
        assert_eq!(r.improvement_pct, Some(0.0));
        assert_eq!(r.log_improvement, Some(0.0));
        assert_eq!(r.reward_ratio_pct, Some(100.0));
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn constant_arms() {
        let r = ComparisonReport::from_scores(EnvKind::GridWorld, vec![0, 1], (0.0, 1.0), vec![1.0, 1.0], vec![2.0, 2.0], 0.0)
            .unwrap();
        assert_eq!(r.p_value, 0.0);
        assert_eq!(r.t_statistic, None);
        assert_eq!(r.improvement_pct, Some(100.0));
    }

    #[test]
    fn invalid_arms_are_marked() {
        let r = ComparisonReport::from_scores(EnvKind::CartPole, vec![0, 1], (0.0, 1.0), vec![1.0, 2.0], vec![5.0, 6.0], 3.0)
            .unwrap();
        assert_eq!(r.improvement_pct, None);
        assert_eq!(r.log_improvement, None);
        assert_eq!(r.reward_ratio_pct, None);
        assert!(r.p_value < 1.0);
    }

    #[test]
    fn drift_is_a_protocol_error() {
        let text = include_str!("../../tests/data/gridworld_tiny.json");
        let a = RunConfigFile::from_json_str(text).unwrap();
        let mut b = a.clone();
        b.agent.gamma = 0.5;
        assert!(matches!(compare(&a, &b), Err(HarnessError::Protocol(_))));
    }
}
