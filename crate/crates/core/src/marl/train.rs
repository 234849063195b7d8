//! Episode loop: predict → select samples → act per sample → robust step →
//! store → centralised update.

use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::{AgentEnsemble, LearnerConfig};
use super::optim::NoiseSchedule;
use super::replay::{ReplayBuffer, Transition};
use super::MarlError;
use crate::env::VvcEnv;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(flatten)]
    pub learner: LearnerConfig,
    pub episodes: usize,
    pub buffer_capacity: usize,
    /// Store a converged transition every `store_every` steps.
    pub store_every: usize,
    /// Centralised updates per environment step.
    pub updates_per_step: usize,
    /// Total update budget for the run.
    pub max_updates: usize,
    pub noise_initial: f64,
    pub noise_floor: f64,
    /// Episodes over which exploration noise decays to its floor.
    pub noise_decay_steps: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learner: LearnerConfig::default(),
            episodes: 300,
            buffer_capacity: 10_000,
            store_every: 1,
            updates_per_step: 1,
            max_updates: 4000,
            noise_initial: 0.1,
            noise_floor: 0.02,
            noise_decay_steps: 200,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MarlError> {
        self.learner.validate()?;
        if self.buffer_capacity == 0 || self.store_every == 0 {
            return Err(MarlError::Config(
                "buffer capacity and store interval must be positive".into(),
            ));
        }
        if !(self.noise_initial >= 0.0 && self.noise_floor >= 0.0) {
            return Err(MarlError::Config(
                "noise levels must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn noise(&self) -> NoiseSchedule {
        NoiseSchedule {
            initial: self.noise_initial,
            floor: self.noise_floor,
            decay_steps: self.noise_decay_steps,
            taken: 0,
        }
    }
}

/// One learning-curve row; reward components are per-step means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub episode: usize,
    pub mean_reward: f64,
    pub r_ll: f64,
    pub r_vd: f64,
    pub phi: f64,
}

pub fn write_curve(path: &Path, rows: &[CurveRow]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "episode,mean_reward,r_ll,r_vd,phi")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.episode, r.mean_reward, r.r_ll, r.r_vd, r.phi
        )?;
    }
    out.flush()
}

pub fn read_curve(path: &Path) -> Result<Vec<CurveRow>, csv::Error> {
    csv::Reader::from_path(path)?.deserialize().collect()
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub ensemble: AgentEnsemble,
    pub curve: Vec<CurveRow>,
    pub updates: usize,
    /// Profile index each episode started at.
    pub episode_starts: Vec<usize>,
    /// Steps whose power flow failed to converge.
    pub aborted_steps: usize,
}

/// Trains a fresh ensemble on `env`. Episode starts are drawn uniformly from
/// `starts` (inclusive), which must lie within the environment's valid range.
/// The environment's shaping history is cleared first.
pub fn train(
    cfg: &TrainConfig,
    env: &mut VvcEnv,
    starts: (usize, usize),
) -> Result<TrainOutcome, MarlError> {
    cfg.validate()?;
    let (lo, hi) = starts;
    let latest = env.latest_start().unwrap_or(0);
    if lo > hi || lo < env.earliest_start() || hi > latest {
        return Err(MarlError::Config(format!(
            "episode starts {lo}..={hi} outside the usable range {}..={latest}",
            env.earliest_start()
        )));
    }
    // independent streams: episode starts are identical across algorithms
    // sharing a seed, whatever the network sizes
    let stream = |k: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
        r.set_stream(k);
        r
    };
    let mut start_rng = stream(0);
    let mut init_rng = stream(1);
    let mut rng = stream(2);
    // the environment is authoritative for the discount and the ratio bound
    let mut learner = cfg.learner.clone();
    learner.gamma = env.config().gamma;
    learner.eta = env.config().eta;
    env.reset_shaping();
    let mut ensemble = AgentEnsemble::new(
        learner,
        env.layouts(),
        env.evaluator().state_dim(),
        &mut init_rng,
    )?;
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut noise = cfg.noise();
    let mut curve = Vec::with_capacity(cfg.episodes);
    let mut episode_starts = Vec::with_capacity(cfg.episodes);
    let mut aborted_steps = 0;
    let mut steps_total = 0usize;

    for episode in 0..cfg.episodes {
        let start = start_rng.random_range(lo..=hi);
        episode_starts.push(start);
        let mut obs = env.reset(start)?;
        let (mut r_sum, mut ll_sum, mut vd_sum, mut n, mut phi) = (0.0, 0.0, 0.0, 0usize, 0.0);
        loop {
            let actions = ensemble.act(&obs, noise.tau(), &mut rng)?;
            let out = env.robust_step(&actions)?;
            steps_total += 1;
            if !out.done {
                aborted_steps += 1;
                log::warn!(
                    "episode {episode}: power flow diverged at t={}, episode aborted",
                    out.t
                );
                break;
            }
            r_sum += out.reward;
            ll_sum += out.r_ll;
            vd_sum += out.r_vd;
            phi = out.phi;
            n += 1;
            let next_obs = out
                .next_observations
                .clone()
                .expect("converged step has observations");
            if steps_total % cfg.store_every == 0 {
                buffer.push(
                    Transition {
                        state: out.state,
                        next_state: out.next_state,
                        action: out.executed_action,
                        reward: out.reward,
                        shaping: out.shaping,
                        obs,
                        next_obs: next_obs.clone(),
                    },
                    true,
                );
            }
            if buffer.len() >= ensemble.cfg.batch_size {
                for _ in 0..cfg.updates_per_step {
                    if ensemble.updates() >= cfg.max_updates {
                        break;
                    }
                    let batch = buffer.sample(ensemble.cfg.batch_size, &mut rng);
                    ensemble.update(&batch, &mut rng)?;
                }
            }
            if out.episode_end {
                break;
            }
            obs = next_obs;
        }
        noise.decay();
        let denom = n.max(1) as f64;
        curve.push(CurveRow {
            episode,
            mean_reward: if n == 0 { f64::NAN } else { r_sum / denom },
            r_ll: ll_sum / denom,
            r_vd: vd_sum / denom,
            phi,
        });
    }
    let updates = ensemble.updates();
    Ok(TrainOutcome {
        ensemble,
        curve,
        updates,
        episode_starts,
        aborted_steps,
    })
}
