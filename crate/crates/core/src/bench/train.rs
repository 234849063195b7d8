//! Training orchestration over the delay bank.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::env::VvcEnv;
use crate::forecast::{GaussianPersistence, Profiles};
use crate::grid::NetworkModel;
use crate::marl::{self, write_curve, TrainOutcome};
use crate::{Error, Result};

/// One trained member of the bank. Written last for each delay, so its
/// presence marks the job complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankEntry {
    pub index: usize,
    pub delay_s: f64,
    pub seed: u64,
    /// Relative to the run directory.
    pub checkpoint: PathBuf,
    pub curve: PathBuf,
    pub updates: usize,
    pub aborted_steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainTiming {
    pub index: usize,
    pub wall_s: f64,
}

pub fn delay_dir(index: usize) -> PathBuf {
    PathBuf::from("train").join(format!("delay_{index:02}"))
}

/// Seed of the job training candidate `index`.
pub fn job_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(index as u64)
}

/// Environment on `profiles` with prediction horizon `horizon_s`.
pub fn make_env(
    cfg: &ExperimentConfig,
    net: &Arc<NetworkModel>,
    profiles: Arc<Profiles>,
    horizon_s: f64,
) -> Result<VvcEnv> {
    let pred = Arc::new(GaussianPersistence::new(net));
    Ok(VvcEnv::new(
        net.clone(),
        profiles,
        pred,
        cfg.env_config(horizon_s),
    )?)
}

/// Trains one ensemble for a single delay horizon on the training profile.
pub fn train_delay(
    cfg: &ExperimentConfig,
    net: &Arc<NetworkModel>,
    profiles: Arc<Profiles>,
    horizon_s: f64,
    seed: u64,
) -> Result<TrainOutcome> {
    let mut env = make_env(cfg, net, profiles, horizon_s)?;
    let lo = env.earliest_start();
    let hi = env.latest_start().filter(|&hi| hi >= lo).ok_or_else(|| {
        Error::Config("training profile too short for one episode after the history window".into())
    })?;
    let mut tc = cfg.train.clone();
    tc.seed = seed;
    Ok(marl::train(&tc, &mut env, (lo, hi))?)
}

/// Trains every configured delay candidate, skipping candidates whose
/// bank entry already exists so an interrupted run resumes. Jobs run in
/// parallel; each is deterministic on its own.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<Vec<BankEntry>> {
    cfg.validate()?;
    let run = cfg.out_dir.as_path();
    cfg.save_into(run)?;
    let net = Arc::new(cfg.network()?);
    let profiles = Arc::new(cfg.train_profiles(&net)?);
    let model = cfg.delay_model()?;

    let mut done = Vec::new();
    let mut pending = Vec::new();
    for k in cfg.delay_indices() {
        match read_entry(run, k)? {
            Some(e) if e.delay_s == model.candidates[k] => {
                log::info!("delay {k}: already trained, skipping");
                done.push(e);
            }
            _ => pending.push(k),
        }
    }

    let results: Vec<Result<(BankEntry, TrainTiming)>> = pending
        .par_iter()
        .map(|&k| {
            let started = Instant::now();
            let delay_s = model.candidates[k];
            let seed = job_seed(cfg.seed, k);
            log::info!("delay {k}: training for horizon {delay_s} s");
            let job = || -> Result<BankEntry> {
                let out = train_delay(cfg, &net, profiles.clone(), delay_s, seed)?;
                let dir = delay_dir(k);
                let abs = run.join(&dir);
                std::fs::create_dir_all(&abs).map_err(|e| Error::io(&abs, e))?;
                out.ensemble.save(&abs.join("checkpoint.json"))?;
                write_curve(&abs.join("curve.csv"), &out.curve)
                    .map_err(|e| Error::io(abs.join("curve.csv"), e))?;
                let entry = BankEntry {
                    index: k,
                    delay_s,
                    seed,
                    checkpoint: dir.join("checkpoint.json"),
                    curve: dir.join("curve.csv"),
                    updates: out.updates,
                    aborted_steps: out.aborted_steps,
                };
                write_json(&abs.join("entry.json"), &entry)?;
                Ok(entry)
            };
            job()
                .map(|e| {
                    (
                        e,
                        TrainTiming {
                            index: k,
                            wall_s: started.elapsed().as_secs_f64(),
                        },
                    )
                })
                .map_err(|source| Error::DelayJob {
                    index: k,
                    source: Box::new(source),
                })
        })
        .collect();

    let mut timings = Vec::new();
    for r in results {
        let (entry, timing) = r?;
        done.push(entry);
        timings.push(timing);
    }
    done.sort_by_key(|e| e.index);
    write_json(&run.join("train").join("bank.json"), &done)?;
    if !timings.is_empty() {
        timings.sort_by_key(|t| t.index);
        write_json(&run.join("train").join("timing.json"), &timings)?;
    }
    Ok(done)
}

fn read_entry(run: &Path, index: usize) -> Result<Option<BankEntry>> {
    let path = run.join(delay_dir(index)).join("entry.json");
    if !path.exists() || !run.join(delay_dir(index)).join("checkpoint.json").exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Bank entries recorded in a run directory, in index order.
pub fn read_bank(run: &Path) -> Result<Vec<BankEntry>> {
    let path = run.join("train").join("bank.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value).expect("serialisable");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
