//! Closed-loop evaluation on the test segment.
//!
//! At each decision instant t every per-delay policy sees the interval
//! predicted for its own horizon and proposes a dispatch (that of its worst
//! sample, as in training). The dispatches are blended with the delay
//! weights and applied to the realized state at t + d, where d is the true
//! delay of that step drawn from the fitted delay distribution.

use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::train::{make_env, read_bank, write_json};
use crate::delay::{compose_command, delay_weights, DelayModel};
use crate::env::{worst_index, VvcEnv};
use crate::forecast::Profiles;
use crate::grid::NetworkModel;
use crate::marl::AgentEnsemble;
use crate::powerflow::ObjectiveValue;
use crate::{Error, Result};

/// Aggregates over the test segment for one controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub steps: usize,
    /// Mean over steps of Σ_i |v_i − v_ref|, p.u.
    pub aver_vol_devia: f64,
    pub aver_pow_loss: f64,
    pub aver_obj_value: f64,
    /// Largest single-bus deviation over the segment, p.u.
    pub max_vol_devia: f64,
    /// Share of steps with every bus inside [0.95, 1.05] p.u.
    pub in_band_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReward {
    pub method: String,
    pub episode: usize,
    pub mean_reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Decision instant (profile index).
    pub t: usize,
    /// Profile index of the state the command met.
    pub realized: usize,
    pub objective: ObjectiveValue,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
    pub episode_rewards: Vec<EpisodeReward>,
    pub wall_clock_s: f64,
}

pub const BAND: (f64, f64) = (0.95, 1.05);

pub fn metrics(method: &str, steps: &[StepRecord]) -> MetricsRow {
    let n = steps.len().max(1) as f64;
    MetricsRow {
        method: method.to_string(),
        steps: steps.len(),
        aver_vol_devia: steps
            .iter()
            .map(|s| s.objective.voltage_deviation_sum)
            .sum::<f64>()
            / n,
        aver_pow_loss: steps.iter().map(|s| s.objective.network_loss).sum::<f64>() / n,
        aver_obj_value: steps.iter().map(|s| s.objective.weighted).sum::<f64>() / n,
        max_vol_devia: steps
            .iter()
            .map(|s| s.objective.max_bus_deviation)
            .fold(0.0, f64::max),
        in_band_fraction: steps
            .iter()
            .filter(|s| s.v.iter().all(|v| (BAND.0..=BAND.1).contains(v)))
            .count() as f64
            / n,
    }
}

/// Mean reward (−f) per consecutive block of `episode_len` steps.
pub fn episode_rewards(
    method: &str,
    steps: &[StepRecord],
    episode_len: usize,
) -> Vec<EpisodeReward> {
    steps
        .chunks(episode_len.max(1))
        .enumerate()
        .map(|(episode, c)| EpisodeReward {
            method: method.to_string(),
            episode,
            mean_reward: -c.iter().map(|s| s.objective.weighted).sum::<f64>() / c.len() as f64,
        })
        .collect()
}

/// A bank of per-delay ensembles keyed by their horizon.
#[derive(Debug, Clone)]
pub struct PolicyBank {
    /// Sorted by delay so composition order never depends on load order.
    members: Vec<(f64, AgentEnsemble)>,
}

impl PolicyBank {
    pub fn new(mut members: Vec<(f64, AgentEnsemble)>) -> Self {
        members.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { members }
    }

    pub fn delays(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.0).collect()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Loads the checkpoints matching every candidate of `model`.
    pub fn load(run: &Path, model: &DelayModel) -> Result<Self> {
        let bank = read_bank(run)?;
        let mut members = Vec::with_capacity(model.candidates.len());
        for &d in &model.candidates {
            let entry = bank.iter().find(|e| e.delay_s == d).ok_or_else(|| {
                Error::Config(format!(
                    "missing checkpoint for delay {d} s in {}",
                    run.display()
                ))
            })?;
            members.push((d, AgentEnsemble::load(&run.join(&entry.checkpoint))?));
        }
        Ok(Self::new(members))
    }
}

/// Integer step lag of each test step, drawn from N(μ, σ²) clipped to the
/// configured range and rounded to the profile period.
pub fn true_delays(model: &DelayModel, steps: usize, period_s: f64, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3);
    let normal = (model.sigma > 0.0 && model.sigma.is_finite())
        .then(|| Normal::new(model.mu, model.sigma).expect("valid"));
    (0..steps)
        .map(|_| {
            let d = normal.as_ref().map_or(model.mu, |n| n.sample(&mut rng));
            (d.clamp(model.range.0, model.range.1) / period_s).round() as usize
        })
        .collect()
}

/// Closed-loop test of a bank (or of no control when `bank` is `None`).
pub fn evaluate(
    cfg: &ExperimentConfig,
    net: &Arc<NetworkModel>,
    profiles: &Arc<Profiles>,
    bank: Option<&PolicyBank>,
    model: &DelayModel,
) -> Result<Vec<StepRecord>> {
    let mut eval_cfg = cfg.clone();
    eval_cfg.env.episode_len = 1;
    let probe = make_env(&eval_cfg, net, profiles.clone(), model.candidates[0])?;
    let first = probe.earliest_start();
    let steps = cfg.eval.test_steps;
    let lags = true_delays(model, steps, profiles.period_s, cfg.seed);
    let last_realized = first + steps - 1 + lags.iter().copied().max().unwrap_or(0);
    if last_realized >= profiles.len() || probe.latest_start().is_none_or(|l| l < first + steps - 1)
    {
        return Err(Error::Config(format!(
            "test profile of {} samples too short for {steps} steps after {first} history samples",
            profiles.len()
        )));
    }
    let weights: Vec<f64> = match bank {
        Some(b) => {
            let w = delay_weights(model);
            b.delays()
                .iter()
                .map(|d| {
                    model
                        .candidates
                        .iter()
                        .position(|c| c == d)
                        .map(|k| w[k])
                        .ok_or_else(|| {
                            Error::Config(format!(
                                "bank holds delay {d} s, not a candidate of the delay model"
                            ))
                        })
                })
                .collect::<Result<_>>()?
        }
        None => Vec::new(),
    };
    let evaluator = probe.evaluator().clone();

    let make_envs = || -> Result<Vec<VvcEnv>> {
        match bank {
            Some(b) => b
                .delays()
                .iter()
                .map(|&d| make_env(&eval_cfg, net, profiles.clone(), d))
                .collect(),
            None => Ok(Vec::new()),
        }
    };
    make_envs()?;
    (0..steps)
        .into_par_iter()
        .map_init(
            || make_envs().expect("environments validated above"),
            |envs, k| -> Result<StepRecord> {
                let t = first + k;
                let realized = t + lags[k];
                let state = &profiles.states[realized];
                let q = match bank {
                    None => vec![0.0; evaluator.joint_dim()],
                    Some(b) => {
                        let mut per_delay = Vec::with_capacity(b.len());
                        for (env, (_, ens)) in envs.iter_mut().zip(&b.members) {
                            let obs = env.reset(t)?;
                            let joint = env.join_actions(&ens.act_greedy(&obs)?)?;
                            let samples = env.samples().expect("reset predicts");
                            let robust = env.evaluator().robust(samples, &joint);
                            let j = robust.j_star.unwrap_or_else(|| {
                                worst_index(&std::array::from_fn(|j| {
                                    robust.objectives()[j].unwrap_or(f64::INFINITY)
                                }))
                            });
                            per_delay.push(robust.evaluations[j].q_mvar.clone());
                        }
                        compose_command(&per_delay, &weights, &evaluator.q_limits(state))?
                    }
                };
                let e = evaluator.evaluate_q(state, &q);
                let objective = e.objective.ok_or_else(|| {
                    Error::Numerical(format!(
                        "power flow diverged on the realized state at t={realized}"
                    ))
                })?;
                Ok(StepRecord {
                    t,
                    realized,
                    objective,
                    v: e.solution.v,
                })
            },
        )
        .collect()
}

/// Evaluates the trained bank and the no-control baseline on the test
/// segment and writes `eval/metrics.csv`, `eval/episode_rewards.csv`,
/// `eval/voltages.csv` and `eval/timing.json` under the run directory.
pub fn cmd_eval(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    let started = Instant::now();
    let run = cfg.out_dir.as_path();
    let net = Arc::new(cfg.network()?);
    let profiles = Arc::new(cfg.test_profiles(&net)?);
    let model = cfg.delay_model()?;
    let bank = PolicyBank::load(run, &model)?;
    let dir = run.join("eval");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    cfg.save_into(&dir)?;

    let policy = evaluate(cfg, &net, &profiles, Some(&bank), &model)?;
    let method = format!("{}+da", cfg.train.learner.algorithm);
    let mut rows = vec![metrics(&method, &policy)];
    let mut rewards = episode_rewards(&method, &policy, cfg.env.episode_len);
    if cfg.eval.no_control {
        let nc = evaluate(cfg, &net, &profiles, None, &model)?;
        rows.push(metrics("no-control", &nc));
        rewards.extend(episode_rewards("no-control", &nc, cfg.env.episode_len));
    }
    write_csv(&dir.join("metrics.csv"), &rows)?;
    write_csv(&dir.join("episode_rewards.csv"), &rewards)?;
    if cfg.eval.write_voltages {
        write_voltages(&dir.join("voltages.csv"), &policy, cfg.env.episode_len)?;
    }
    let wall_clock_s = started.elapsed().as_secs_f64();
    write_json(
        &dir.join("timing.json"),
        &serde_json::json!({ "eval_wall_s": wall_clock_s }),
    )?;
    Ok(MetricsReport {
        rows,
        episode_rewards: rewards,
        wall_clock_s,
    })
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// `episode,step,bus,v_pu`, one row per bus per test step.
pub fn write_voltages(path: &Path, steps: &[StepRecord], episode_len: usize) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "episode,step,bus,v_pu").map_err(io)?;
    let len = episode_len.max(1);
    for (k, s) in steps.iter().enumerate() {
        for (i, v) in s.v.iter().enumerate() {
            writeln!(out, "{},{},{},{}", k / len, k % len, i + 1, v).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}
