//! Experiment driver behind the `vvclab` binary: configuration, training of
//! the delay bank, closed-loop evaluation with delay-adaptive composition,
//! the grid-search oracle and reporting.
//!
//! A run directory looks like
//!
//! ```text
//! config.toml                 resolved configuration
//! train/bank.json             one entry per trained delay
//! train/delay_NN/             checkpoint.json, curve.csv, entry.json
//! eval/                       metrics.csv, episode_rewards.csv, voltages.csv, timing.json
//! bruteforce/optimum.csv
//! report/                     summary.txt and plot-ready CSVs
//! profiles/                   train.csv, test.csv (gen-profiles)
//! ```

mod config;
mod eval;
mod oracle;
mod report;
mod train;

pub use config::{
    frozen_profiles, DelaySection, EnvSection, EvalSection, ExperimentConfig, ObjectiveSection,
    PredictorSection, ProfileSection,
};
pub use eval::{
    cmd_eval, episode_rewards, evaluate, metrics, read_metrics, true_delays, write_voltages,
    EpisodeReward, MetricsReport, MetricsRow, PolicyBank, StepRecord, BAND,
};
pub use oracle::{
    bruteforce, cmd_bruteforce, grid_points, GridOptimum, OracleRow, MAX_INVERTERS, MAX_RESOLUTION,
};
pub use report::{cmd_report, metrics_table, Report};
pub use train::{cmd_train, delay_dir, job_seed, make_env, read_bank, train_delay, BankEntry};

use std::path::PathBuf;

use crate::env::VvcEnv;
use crate::{Error, Result};

/// Writes the training and test profiles to `profiles/{train,test}.csv`.
pub fn cmd_gen_profiles(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let net = cfg.network()?;
    let dir = cfg.out_dir.join("profiles");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    cfg.save_into(&dir)?;
    let mut out = Vec::new();
    for (name, p) in [
        ("train.csv", cfg.train_profiles(&net)?),
        ("test.csv", cfg.test_profiles(&net)?),
    ] {
        let path = dir.join(name);
        p.write_csv(&path).map_err(|e| Error::io(&path, e))?;
        out.push(path);
    }
    Ok(out)
}

/// Mean robust objective per episode under zero reactive dispatch, for the
/// given episode starts.
pub fn no_control_curve(env: &mut VvcEnv, starts: &[usize]) -> Result<Vec<f64>> {
    let zero: Vec<[Vec<f64>; 3]> = env
        .layouts()
        .iter()
        .map(|l| std::array::from_fn(|_| vec![0.0; l.action_dim()]))
        .collect();
    let mut out = Vec::with_capacity(starts.len());
    for &s in starts {
        env.reset(s)?;
        let (mut total, mut n) = (0.0, 0usize);
        loop {
            let o = env.robust_step(&zero)?;
            if !o.done {
                return Err(Error::Numerical(format!(
                    "power flow diverged without control at t={}",
                    o.t
                )));
            }
            total -= o.reward;
            n += 1;
            if o.episode_end {
                break;
            }
        }
        out.push(total / n as f64);
    }
    Ok(out)
}
