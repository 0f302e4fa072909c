use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::compare::{seed_score, ComparisonReport};
use super::stats;
use super::{read_json, write_file, ArmManifest, HarnessError, RunRecord};

/// Plot rows are emitted every this many environment steps.
pub const PLOT_STRIDE: u64 = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutput {
    pub metrics_csv: PathBuf,
    pub plot_csvs: Vec<PathBuf>,
    /// Mean reward ratio over valid comparisons, if any.
    pub mean_reward_ratio_pct: Option<f64>,
}

struct Arm {
    name: String,
    manifest: ArmManifest,
    records: Vec<RunRecord>,
}

struct Experiment {
    name: String,
    arms: Vec<Arm>,
}

fn load_arm(name: &str, dir: &Path) -> Result<Arm, HarnessError> {
    let manifest: ArmManifest = read_json(&dir.join("manifest.json"))?;
    let records = manifest
        .seeds
        .iter()
        .map(|s| read_json(&dir.join(format!("run_seed{s}.json"))))
        .collect::<Result<Vec<RunRecord>, _>>()?;
    Ok(Arm { name: name.to_string(), manifest, records })
}

fn load_experiment(name: String, dir: &Path) -> Result<Option<Experiment>, HarnessError> {
    if dir.join("comparison.json").is_file() {
        let arms = vec![load_arm("baseline", &dir.join("baseline"))?, load_arm("suft", &dir.join("suft"))?];
        return Ok(Some(Experiment { name, arms }));
    }
    if dir.join("manifest.json").is_file() {
        return Ok(Some(Experiment { name, arms: vec![load_arm("run", dir)?] }));
    }
    Ok(None)
}

fn discover(dir: &Path) -> Result<Vec<Experiment>, HarnessError> {
    let root_name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    if let Some(e) = load_experiment(root_name, dir)? {
        return Ok(vec![e]);
    }
    let entries = fs::read_dir(dir).map_err(|source| HarnessError::Io { path: dir.to_path_buf(), source })?;
    let mut subdirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    let mut out = Vec::new();
    for sub in subdirs {
        let name = sub.file_name().unwrap().to_string_lossy().into_owned();
        if let Some(e) = load_experiment(name, &sub)? {
            out.push(e);
        }
    }
    if out.is_empty() {
        return Err(HarnessError::Report(format!(
            "{} holds no run or comparison output",
            dir.display()
        )));
    }
    Ok(out)
}

fn arm_scores(arm: &Arm) -> Result<Vec<f64>, HarnessError> {
    arm.records
        .iter()
        .map(|r| seed_score(r, arm.manifest.config.smoothing_window))
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Smoothed return of the latest episode finished by `step`, per record.
fn smoothed_at(record: &RunRecord, smoothed: &[f64], step: u64) -> Option<f64> {
    let finished = record.episode_end_steps.partition_point(|&s| s <= step);
    finished.checked_sub(1).map(|k| smoothed[k])
}

fn plot_csv(exp: &Experiment) -> Result<String, HarnessError> {
    let mut out = String::from("step");
    for arm in &exp.arms {
        write!(out, ",{}", arm.name).unwrap();
    }
    out.push('\n');
    let smoothed: Vec<Vec<Vec<f64>>> = exp
        .arms
        .iter()
        .map(|arm| {
            arm.records
                .iter()
                .map(|r| stats::smooth(&r.episode_rewards, arm.manifest.config.smoothing_window))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let total = exp.arms.iter().map(|a| a.manifest.config.steps).max().unwrap_or(0);
    let mut steps: Vec<u64> = (1..=total / PLOT_STRIDE).map(|k| k * PLOT_STRIDE).collect();
    if total % PLOT_STRIDE != 0 {
        steps.push(total);
    }
    for step in steps {
        write!(out, "{step}").unwrap();
        for (arm, series) in exp.arms.iter().zip(&smoothed) {
            let values: Vec<f64> = arm
                .records
                .iter()
                .zip(series)
                .filter_map(|(r, s)| smoothed_at(r, s, step))
                .collect();
            let cell = stats::upper_median(&values).ok();
            write!(out, ",{}", opt(cell)).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

/// Writes `metrics.csv` and plot CSVs for the run or comparison output
/// found at `dir` (or in its immediate subdirectories, one experiment each).
///
/// `metrics.csv` has one row per experiment; comparison rows carry the
/// improvement, log-improvement, reward-ratio and p-value columns. When at
/// least one comparison is valid, a final `mean` row holds the mean reward
/// ratio. Plot files have a `step` column (every [`PLOT_STRIDE`] steps and
/// the last step) and one upper-median smoothed-return column per arm.
pub fn report(dir: &Path) -> Result<ReportOutput, HarnessError> {
    let experiments = discover(dir)?;
    let mut metrics = String::from(
        "experiment,env,kind,median_score,baseline_median,suft_median,random_reward,\
         improvement_pct,log_improvement,reward_ratio_pct,p_value\n",
    );
    let mut ratios = Vec::new();
    for exp in &experiments {
        let env = exp.arms[0].manifest.config.env;
        let random = exp.arms[0].manifest.random_reward;
        match exp.arms.as_slice() {
            [run] => {
                let median = stats::upper_median(&arm_scores(run)?)?;
                writeln!(metrics, "{},{env},run,{median},,,{random},,,,", exp.name).unwrap();
            }
            [base, suft] => {
                let r = ComparisonReport::from_scores(
                    env,
                    base.manifest.seeds.clone(),
                    (base.manifest.config.agent.lambda_tf, suft.manifest.config.agent.lambda_tf),
                    arm_scores(base)?,
                    arm_scores(suft)?,
                    random,
                )?;
                if r.reward_ratio_pct.is_some() {
                    ratios.push((r.suft_median, r.baseline_median, random));
                }
                writeln!(
                    metrics,
                    "{},{env},comparison,,{},{},{random},{},{},{},{}",
                    exp.name,
                    r.baseline_median,
                    r.suft_median,
                    opt(r.improvement_pct),
                    opt(r.log_improvement),
                    opt(r.reward_ratio_pct),
                    r.p_value
                )
                .unwrap();
            }
            _ => unreachable!("experiments have one or two arms"),
        }
    }
    let mean_ratio = stats::mean_reward_ratio_pct(&ratios).ok();
    if let Some(m) = mean_ratio {
        writeln!(metrics, "all,,mean,,,,,,,{m},").unwrap();
    }
    let metrics_csv = dir.join("metrics.csv");
    write_file(&metrics_csv, metrics)?;

    let mut plot_csvs = Vec::new();
    for exp in &experiments {
        let path = if experiments.len() == 1 {
            dir.join("plot.csv")
        } else {
            dir.join(format!("plot_{}.csv", exp.name))
        };
        write_file(&path, plot_csv(exp)?)?;
        plot_csvs.push(path);
    }
    Ok(ReportOutput { metrics_csv, plot_csvs, mean_reward_ratio_pct: mean_ratio })
}
