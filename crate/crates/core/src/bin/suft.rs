//! `suft` command-line entry point.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 verification
//! failure, 3 protocol error.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::Rng;

use suft_core::agents::SuftObjective;
use suft_core::causal::verify_random_trials;
use suft_core::config::RunConfigFile;
use suft_core::harness::{self, HarnessError};
use suft_core::nn::{grad_check, Activation, Mlp, GRAD_CHECK_TOL};
use suft_core::{rng_from_seed, LossFn};

const EXIT_CONFIG: u8 = 1;
const EXIT_VERIFY: u8 = 2;
const EXIT_PROTOCOL: u8 = 3;

#[derive(Parser)]
#[command(name = "suft", version, about = "Causal factual-loss bound checks and SUFT-regularized RL runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the factual-loss bound on random finite joints.
    VerifyBound {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        /// Controls per trial are drawn uniformly from 1..=K.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        max_controls: u64,
        #[arg(long, default_value = "l1")]
        loss: LossFn,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Finite-difference check of the SUFT critic objective's gradient.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train every seed of a run config.
    Train { config: PathBuf },
    /// Train a baseline and a SUFT arm that differ only in lambda_tf.
    Compare { baseline: PathBuf, suft: PathBuf },
    /// Write metrics.csv and plot CSVs for a train or compare output directory.
    Report { run_dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::VerifyBound { trials, max_controls, loss, seed } => {
            verify_bound(trials as usize, max_controls as usize, loss, seed)
        }
        Command::Gradcheck { seed } => gradcheck(seed),
        Command::Train { config } => with_config(&config, |cfg| {
            let records = harness::train_to_dir(&cfg)?;
            let scores: Vec<serde_json::Value> = records
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "seed": r.seed,
                        "episodes": r.episode_rewards.len(),
                        "updates": r.updates.len(),
                        "score": harness::seed_score(r, cfg.smoothing_window).ok(),
                        "wall_time": r.wall_time,
                    })
                })
                .collect();
            print_json(&serde_json::json!({ "output_dir": cfg.output_dir, "runs": scores }));
            Ok(())
        }),
        Command::Compare { baseline, suft } => with_config(&baseline, |b| {
            let s = load_config(&suft)?;
            let report = harness::compare(&b, &s)?;
            print_json(&report);
            Ok(())
        }),
        Command::Report { run_dir } => finish(harness::report(&run_dir).map(|out| {
            print_json(&serde_json::json!({
                "metrics_csv": out.metrics_csv,
                "plot_csvs": out.plot_csvs,
                "mean_reward_ratio_pct": out.mean_reward_ratio_pct,
            }));
        })),
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    // A closed pipe (e.g. `| head`) is not an error worth a panic.
    let _ = writeln!(io::stdout().lock(), "{text}");
}

fn load_config(path: &PathBuf) -> Result<RunConfigFile, HarnessError> {
    RunConfigFile::load(path).map_err(|mut e| {
        e.message = format!("{} ({})", e.message, path.display());
        e.into()
    })
}

fn with_config(path: &PathBuf, f: impl FnOnce(RunConfigFile) -> Result<(), HarnessError>) -> ExitCode {
    finish(load_config(path).and_then(f))
}

fn finish(result: Result<(), HarnessError>) -> ExitCode {
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                HarnessError::Protocol(_) => ExitCode::from(EXIT_PROTOCOL),
                _ => ExitCode::from(EXIT_CONFIG),
            }
        }
    }
}

fn verify_bound(trials: usize, max_controls: usize, loss: LossFn, seed: u64) -> ExitCode {
    let summary = match verify_random_trials(trials, max_controls, loss, seed) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    print_json(&summary);
    if loss == LossFn::L1 && !summary.holds_all {
        eprintln!("bound violated in {} of {} L1 trials", summary.violation_count, trials);
        return ExitCode::from(EXIT_VERIFY);
    }
    ExitCode::SUCCESS
}

/// Random tanh network and transition batch; checks the gradient of
/// `L2(y, Q) + lambda * L2(v, Q)` with respect to every weight.
fn gradcheck(seed: u64) -> ExitCode {
    let mut rng = rng_from_seed(seed);
    let (obs_dim, n_actions, batch) = (4, 3, 8);
    let net = Mlp::init(&[obs_dim, 16, 16, n_actions], Activation::Tanh, &mut rng).expect("valid shape");
    let inputs: Vec<Vec<f64>> = (0..batch)
        .map(|_| (0..obs_dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let objective = SuftObjective::new(
        (0..batch).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        (0..batch).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        (0..batch).map(|_| rng.gen_range(0..n_actions)).collect(),
        LossFn::L2,
        1.0,
    );
    let report = grad_check(&net, &inputs, &objective, 1e-6).expect("shapes agree");
    print_json(&report);
    if report.passed {
        println!("passed, max_rel_err < {GRAD_CHECK_TOL:e} ({:.3e})", report.max_rel_err);
        ExitCode::SUCCESS
    } else {
        println!("FAILED, max_rel_err {:.3e} >= {GRAD_CHECK_TOL:e}", report.max_rel_err);
        ExitCode::from(EXIT_VERIFY)
    }
}
