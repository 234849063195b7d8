//! Per-region learners and the centralised-critic update.

use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::mlp::{soft_update, Mlp, OutputHead};
use super::optim::Adam;
use super::replay::Transition;
use super::MarlError;
use crate::env::{AgentLayout, PerSample};
use crate::forecast::SampleSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Three policy heads (one per sample), twin critics, reward shaping.
    MpnrsMatd3,
    /// One head fed the median sample, twin critics, no shaping.
    Matd3,
    /// One head fed the median sample, single critic, no shaping.
    Maddpg,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::MpnrsMatd3, Algorithm::Matd3, Algorithm::Maddpg];

    pub fn heads(self) -> usize {
        match self {
            Algorithm::MpnrsMatd3 => 3,
            _ => 1,
        }
    }

    pub fn twin_critics(self) -> bool {
        !matches!(self, Algorithm::Maddpg)
    }

    pub fn shaped(self) -> bool {
        matches!(self, Algorithm::MpnrsMatd3)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::MpnrsMatd3 => "mpnrs-matd3",
            Algorithm::Matd3 => "matd3",
            Algorithm::Maddpg => "maddpg",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = MarlError;

    fn from_str(s: &str) -> Result<Self, MarlError> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                MarlError::Config(format!(
                    "unknown algorithm {s:?} (mpnrs-matd3, matd3, maddpg)"
                ))
            })
    }
}

/// Network shapes and update hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    pub gamma: f64,
    /// Weight λ of the shaping term; ignored by the unshaped baselines.
    pub shaping_lambda: f64,
    pub learning_rate: f64,
    pub xi: f64,
    pub batch_size: usize,
    pub eta: f64,
    pub policy_hidden: Vec<usize>,
    /// Defaults to (2d, d) with d the width of the agent's full observation
    /// (all three samples).
    pub critic_hidden: Option<Vec<usize>>,
    /// Actor and target updates every `policy_delay` critic updates.
    pub policy_delay: usize,
    /// Std of the smoothing noise added to bootstrap actions; 0 disables.
    pub target_noise: f64,
    pub target_noise_clip: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::MpnrsMatd3,
            gamma: 0.9,
            shaping_lambda: 1.0,
            learning_rate: 5e-4,
            xi: 0.01,
            batch_size: 32,
            eta: 0.8,
            policy_hidden: vec![256, 256],
            critic_hidden: None,
            policy_delay: 1,
            target_noise: 0.0,
            target_noise_clip: 0.5,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), MarlError> {
        let bad = |m: &str| Err(MarlError::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.xi) {
            return bad("soft update factor must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.policy_delay == 0 {
            return bad("batch size and policy delay must be positive");
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad("eta must lie in (0, 1]");
        }
        if self.policy_hidden.contains(&0)
            || self.critic_hidden.as_ref().is_some_and(|h| h.contains(&0))
        {
            return bad("hidden layer widths must be positive");
        }
        if !(self.target_noise >= 0.0 && self.target_noise_clip >= 0.0) {
            return bad("target noise parameters must be non-negative");
        }
        Ok(())
    }

    /// λ actually applied in the TD target.
    pub fn effective_lambda(&self) -> f64 {
        if self.algorithm.shaped() {
            self.shaping_lambda
        } else {
            0.0
        }
    }
}

/// y = r + λF + γ·min(Q1', Q2'), or r + λF + γ·Q' with a single critic.
pub fn td_target(r: f64, shaping: f64, lambda: f64, gamma: f64, q1: f64, q2: Option<f64>) -> f64 {
    let q = q2.map_or(q1, |q2| q1.min(q2));
    r + lambda * shaping + gamma * q
}

/// Rows `[S | A]` for the critic.
pub fn critic_input(states: &[f64], actions: &[f64], batch: usize) -> Vec<f64> {
    let sd = states.len() / batch.max(1);
    let ad = actions.len() / batch.max(1);
    let mut x = Vec::with_capacity(batch * (sd + ad));
    for s in 0..batch {
        x.extend_from_slice(&states[s * sd..(s + 1) * sd]);
        x.extend_from_slice(&actions[s * ad..(s + 1) * ad]);
    }
    x
}

/// Mean squared TD error over the batch and its parameter gradient.
pub fn critic_loss_grad(critic: &Mlp, x: &[f64], y: &[f64]) -> Result<(f64, Vec<f64>), MarlError> {
    let b = y.len();
    let (q, tape) = critic.forward_tape(x, b)?;
    let resid: Vec<f64> = q.iter().zip(y).map(|(q, y)| q - y).collect();
    let loss = resid.iter().map(|r| r * r).sum::<f64>() / b as f64;
    let d: Vec<f64> = resid.iter().map(|r| 2.0 * r / b as f64).collect();
    Ok((loss, critic.backward(&tape, &d).params))
}

/// ∂Q/∂a for the action columns `[offset, offset + width)` of the joint
/// action, one row per batch entry. `x` holds `[S | A]` rows.
pub fn action_gradient(
    critic: &Mlp,
    x: &[f64],
    batch: usize,
    state_dim: usize,
    offset: usize,
    width: usize,
) -> Result<Vec<f64>, MarlError> {
    let (_, tape) = critic.forward_tape(x, batch)?;
    let g = critic.backward(&tape, &vec![1.0; batch]).input;
    let cols = critic.input_dim();
    let mut out = Vec::with_capacity(batch * width);
    for s in 0..batch {
        let start = s * cols + state_dim + offset;
        out.extend_from_slice(&g[start..start + width]);
    }
    Ok(out)
}

/// Batch-mean critic value with agent `offset..offset+width` of the stored
/// joint action replaced by the policy's output, and its gradient with
/// respect to the policy parameters (ascent direction).
pub fn actor_objective_grad(
    policy: &Mlp,
    critic: &Mlp,
    obs: &[f64],
    states: &[f64],
    joint: &[f64],
    batch: usize,
    offset: usize,
) -> Result<(f64, Vec<f64>), MarlError> {
    let width = policy.output_dim();
    let (a, p_tape) = policy.forward_tape(obs, batch)?;
    let jd = joint.len() / batch;
    let mut replaced = joint.to_vec();
    for s in 0..batch {
        replaced[s * jd + offset..s * jd + offset + width]
            .copy_from_slice(&a[s * width..(s + 1) * width]);
    }
    let state_dim = states.len() / batch;
    let x = critic_input(states, &replaced, batch);
    let (q, c_tape) = critic.forward_tape(&x, batch)?;
    let objective = q.iter().sum::<f64>() / batch as f64;
    let g_in = critic
        .backward(&c_tape, &vec![1.0 / batch as f64; batch])
        .input;
    let cols = critic.input_dim();
    let mut d_a = Vec::with_capacity(batch * width);
    for s in 0..batch {
        let start = s * cols + state_dim + offset;
        d_a.extend_from_slice(&g_in[start..start + width]);
    }
    Ok((objective, policy.backward(&p_tape, &d_a).params))
}

/// Networks and optimiser state of one region's agent.
#[derive(Debug, Clone)]
pub struct Agent {
    pub policies: Vec<Mlp>,
    pub target_policies: Vec<Mlp>,
    pub critics: Vec<Mlp>,
    pub target_critics: Vec<Mlp>,
    policy_opt: Vec<Adam>,
    critic_opt: Vec<Adam>,
    pub obs_dim: usize,
    pub act_dim: usize,
    /// First column of this agent's ratios in the joint action.
    pub act_offset: usize,
}

impl Agent {
    fn build(
        cfg: &LearnerConfig,
        obs_dim: usize,
        act_dim: usize,
        act_offset: usize,
        critic_in: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let mut pdims = vec![obs_dim];
        pdims.extend(&cfg.policy_hidden);
        pdims.push(act_dim);
        let d = 3 * obs_dim;
        let mut cdims = vec![critic_in];
        cdims.extend(cfg.critic_hidden.clone().unwrap_or_else(|| vec![2 * d, d]));
        cdims.push(1);
        let head = OutputHead::Tanh { scale: cfg.eta };
        let policies: Vec<Mlp> = (0..cfg.algorithm.heads())
            .map(|_| Mlp::orthogonal(&pdims, head, 0.01, rng))
            .collect();
        let n_critics = if cfg.algorithm.twin_critics() { 2 } else { 1 };
        let critics: Vec<Mlp> = (0..n_critics)
            .map(|_| Mlp::orthogonal(&cdims, OutputHead::Linear, 1.0, rng))
            .collect();
        Self::from_networks(
            cfg,
            policies.clone(),
            policies,
            critics.clone(),
            critics,
            obs_dim,
            act_dim,
            act_offset,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn from_networks(
        cfg: &LearnerConfig,
        policies: Vec<Mlp>,
        target_policies: Vec<Mlp>,
        critics: Vec<Mlp>,
        target_critics: Vec<Mlp>,
        obs_dim: usize,
        act_dim: usize,
        act_offset: usize,
    ) -> Self {
        let policy_opt = policies
            .iter()
            .map(|p| Adam::new(p.n_params(), cfg.learning_rate))
            .collect();
        let critic_opt = critics
            .iter()
            .map(|c| Adam::new(c.n_params(), cfg.learning_rate))
            .collect();
        Self {
            policies,
            target_policies,
            critics,
            target_critics,
            policy_opt,
            critic_opt,
            obs_dim,
            act_dim,
            act_offset,
        }
    }
}

/// Losses from one pass of the centralised update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateStats {
    /// Mean over agents of each critic's loss before its step.
    pub critic_loss: Vec<f64>,
    /// Mean over agents and heads of the actor objective before its step.
    pub actor_objective: f64,
}

#[derive(Debug, Clone)]
pub struct AgentEnsemble {
    pub cfg: LearnerConfig,
    pub agents: Vec<Agent>,
    pub state_dim: usize,
    pub joint_dim: usize,
    updates: usize,
}

/// Sample fed to policy head `h` when the ensemble has `heads` heads.
fn head_sample(heads: usize, h: usize) -> usize {
    if heads == 3 {
        h
    } else {
        SampleSet::MEDIAN
    }
}

impl AgentEnsemble {
    pub fn new(
        cfg: LearnerConfig,
        layouts: &[AgentLayout],
        state_dim: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, MarlError> {
        cfg.validate()?;
        if layouts.is_empty() {
            return Err(MarlError::Config("no agents".into()));
        }
        let joint_dim = layouts.iter().map(AgentLayout::action_dim).sum();
        let mut offset = 0;
        let mut agents = Vec::with_capacity(layouts.len());
        for l in layouts {
            agents.push(Agent::build(
                &cfg,
                l.obs_dim(),
                l.action_dim(),
                offset,
                state_dim + joint_dim,
                rng,
            ));
            offset += l.action_dim();
        }
        Ok(Self {
            cfg,
            agents,
            state_dim,
            joint_dim,
            updates: 0,
        })
    }

    pub fn heads(&self) -> usize {
        self.cfg.algorithm.heads()
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    fn check_obs(&self, obs: &[PerSample<Vec<f64>>]) -> Result<(), MarlError> {
        if obs.len() != self.agents.len() {
            return Err(MarlError::Dimension {
                expected: self.agents.len(),
                found: obs.len(),
            });
        }
        for (agent, o) in self.agents.iter().zip(obs) {
            for x in o {
                if x.len() != agent.obs_dim {
                    return Err(MarlError::Dimension {
                        expected: agent.obs_dim,
                        found: x.len(),
                    });
                }
            }
        }
        Ok(())
    }

    /// a^j = clip(μ^j(O^j) + ε, −η, η) for every agent and sample, with one
    /// ε ~ N(0, τ²) per agent shared across the samples.
    /// Single-head ensembles act on the median sample and replicate.
    pub fn act(
        &self,
        obs: &[PerSample<Vec<f64>>],
        tau: f64,
        rng: &mut impl Rng,
    ) -> Result<Vec<PerSample<Vec<f64>>>, MarlError> {
        self.act_impl(obs, tau, Some(rng))
    }

    /// Noise-free actions.
    pub fn act_greedy(
        &self,
        obs: &[PerSample<Vec<f64>>],
    ) -> Result<Vec<PerSample<Vec<f64>>>, MarlError> {
        self.act_impl::<rand_chacha::ChaCha8Rng>(obs, 0.0, None)
    }

    fn act_impl<R: Rng>(
        &self,
        obs: &[PerSample<Vec<f64>>],
        tau: f64,
        mut rng: Option<&mut R>,
    ) -> Result<Vec<PerSample<Vec<f64>>>, MarlError> {
        self.check_obs(obs)?;
        let eta = self.cfg.eta;
        let noise = (tau > 0.0).then(|| Normal::new(0.0, tau).expect("positive std"));
        let heads = self.heads();
        let mut out = Vec::with_capacity(self.agents.len());
        for (agent, o) in self.agents.iter().zip(obs) {
            // one exploration draw per agent, shared by every head
            let eps: Vec<f64> = match (&noise, rng.as_deref_mut()) {
                (Some(n), Some(r)) => (0..agent.act_dim).map(|_| n.sample(r)).collect(),
                _ => vec![0.0; agent.act_dim],
            };
            let mut per: Vec<Vec<f64>> = Vec::with_capacity(heads);
            for h in 0..heads {
                let mut a = agent.policies[h].forward(&o[head_sample(heads, h)], 1)?;
                for (x, e) in a.iter_mut().zip(&eps) {
                    *x = (*x + e).clamp(-eta, eta);
                }
                per.push(a);
            }
            out.push(if heads == 3 {
                [per[0].clone(), per[1].clone(), per[2].clone()]
            } else {
                [per[0].clone(), per[0].clone(), per[0].clone()]
            });
        }
        Ok(out)
    }

    fn gather(&self, batch: &[&Transition]) -> Result<Gathered, MarlError> {
        let b = batch.len();
        let mut g = Gathered {
            b,
            states: Vec::with_capacity(b * self.state_dim),
            next_states: Vec::with_capacity(b * self.state_dim),
            actions: Vec::with_capacity(b * self.joint_dim),
            rewards: Vec::with_capacity(b),
            shaping: Vec::with_capacity(b),
        };
        for t in batch {
            if t.state.len() != self.state_dim || t.next_state.len() != self.state_dim {
                return Err(MarlError::Dimension {
                    expected: self.state_dim,
                    found: t.state.len(),
                });
            }
            if t.action.len() != self.joint_dim {
                return Err(MarlError::Dimension {
                    expected: self.joint_dim,
                    found: t.action.len(),
                });
            }
            self.check_obs(&t.obs)?;
            self.check_obs(&t.next_obs)?;
            g.states.extend_from_slice(&t.state);
            g.next_states.extend_from_slice(&t.next_state);
            g.actions.extend_from_slice(&t.action);
            g.rewards.push(t.reward);
            g.shaping.push(t.shaping);
        }
        Ok(g)
    }

    fn obs_batch(batch: &[&Transition], m: usize, j: usize, next: bool) -> Vec<f64> {
        batch
            .iter()
            .flat_map(|t| {
                if next {
                    &t.next_obs[m][j]
                } else {
                    &t.obs[m][j]
                }
            })
            .copied()
            .collect()
    }

    /// Bootstrap joint action A' from the median-sample target heads.
    fn target_actions(
        &self,
        batch: &[&Transition],
        rng: &mut impl Rng,
    ) -> Result<Vec<f64>, MarlError> {
        let b = batch.len();
        let boot = self.heads() - 1;
        let mut joint = vec![0.0; b * self.joint_dim];
        let smooth = (self.cfg.target_noise > 0.0)
            .then(|| Normal::new(0.0, self.cfg.target_noise).expect("positive std"));
        for (m, agent) in self.agents.iter().enumerate() {
            let o = Self::obs_batch(batch, m, SampleSet::MEDIAN, true);
            let a = agent.target_policies[boot].forward(&o, b)?;
            for s in 0..b {
                for k in 0..agent.act_dim {
                    let mut v = a[s * agent.act_dim + k];
                    if let Some(n) = &smooth {
                        let c = self.cfg.target_noise_clip;
                        v += n.sample(rng).clamp(-c, c);
                    }
                    joint[s * self.joint_dim + agent.act_offset + k] =
                        v.clamp(-self.cfg.eta, self.cfg.eta);
                }
            }
        }
        Ok(joint)
    }

    /// TD targets for agent `m` on a batch.
    pub fn td_targets(
        &self,
        m: usize,
        batch: &[&Transition],
        next_actions: &[f64],
    ) -> Result<Vec<f64>, MarlError> {
        let g = self.gather(batch)?;
        self.targets_from(m, &g, next_actions)
    }

    fn targets_from(
        &self,
        m: usize,
        g: &Gathered,
        next_actions: &[f64],
    ) -> Result<Vec<f64>, MarlError> {
        let agent = &self.agents[m];
        let x = critic_input(&g.next_states, next_actions, g.b);
        let q1 = agent.target_critics[0].forward(&x, g.b)?;
        let q2 = match agent.target_critics.get(1) {
            Some(c) => Some(c.forward(&x, g.b)?),
            None => None,
        };
        let lambda = self.cfg.effective_lambda();
        Ok((0..g.b)
            .map(|s| {
                td_target(
                    g.rewards[s],
                    g.shaping[s],
                    lambda,
                    self.cfg.gamma,
                    q1[s],
                    q2.as_ref().map(|q| q[s]),
                )
            })
            .collect())
    }

    /// One pass of the centralised update over every agent: critic step(s),
    /// one actor step per policy head, then soft target updates.
    pub fn update(
        &mut self,
        batch: &[&Transition],
        rng: &mut impl Rng,
    ) -> Result<UpdateStats, MarlError> {
        if batch.is_empty() {
            return Ok(UpdateStats::default());
        }
        let g = self.gather(batch)?;
        let next_actions = self.target_actions(batch, rng)?;
        let heads = self.heads();
        let actor_turn = self.updates % self.cfg.policy_delay == 0;
        let n_critics = self.agents[0].critics.len();
        let mut stats = UpdateStats {
            critic_loss: vec![0.0; n_critics],
            actor_objective: 0.0,
        };
        let x = critic_input(&g.states, &g.actions, g.b);
        let n_agents = self.agents.len() as f64;

        for m in 0..self.agents.len() {
            let y = self.targets_from(m, &g, &next_actions)?;
            let obs: Vec<Vec<f64>> = (0..heads)
                .map(|h| Self::obs_batch(batch, m, head_sample(heads, h), false))
                .collect();
            let agent = &mut self.agents[m];
            for c in 0..agent.critics.len() {
                let (loss, grad) = critic_loss_grad(&agent.critics[c], &x, &y)?;
                agent.critic_opt[c].step(agent.critics[c].params_mut(), &grad);
                stats.critic_loss[c] += loss / n_agents;
            }
            if actor_turn {
                for (h, o) in obs.iter().enumerate() {
                    let (j, mut grad) = actor_objective_grad(
                        &agent.policies[h],
                        &agent.critics[0],
                        o,
                        &g.states,
                        &g.actions,
                        g.b,
                        agent.act_offset,
                    )?;
                    grad.iter_mut().for_each(|v| *v = -*v);
                    agent.policy_opt[h].step(agent.policies[h].params_mut(), &grad);
                    stats.actor_objective += j / (heads as f64 * n_agents);
                }
                let xi = self.cfg.xi;
                for (online, target) in agent.policies.iter().zip(agent.target_policies.iter_mut())
                {
                    soft_update(online, target, xi)?;
                }
                for (online, target) in agent.critics.iter().zip(agent.target_critics.iter_mut()) {
                    soft_update(online, target, xi)?;
                }
            }
        }
        self.updates += 1;
        Ok(stats)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: self.cfg.clone(),
            state_dim: self.state_dim,
            joint_dim: self.joint_dim,
            updates: self.updates,
            agents: self
                .agents
                .iter()
                .map(|a| AgentRecord {
                    obs_dim: a.obs_dim,
                    act_dim: a.act_dim,
                    act_offset: a.act_offset,
                    policies: a.policies.clone(),
                    target_policies: a.target_policies.clone(),
                    critics: a.critics.clone(),
                    target_critics: a.target_critics.clone(),
                })
                .collect(),
        }
    }

    /// Rebuilds an ensemble; optimiser moments restart from zero.
    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self, MarlError> {
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(MarlError::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        ck.config.validate()?;
        let heads = ck.config.algorithm.heads();
        let n_critics = if ck.config.algorithm.twin_critics() {
            2
        } else {
            1
        };
        let mut agents = Vec::with_capacity(ck.agents.len());
        for a in ck.agents {
            let shapes_ok = a.policies.len() == heads
                && a.target_policies.len() == heads
                && a.critics.len() == n_critics
                && a.target_critics.len() == n_critics
                && a.policies
                    .iter()
                    .chain(&a.target_policies)
                    .all(|p| p.input_dim() == a.obs_dim && p.output_dim() == a.act_dim)
                && a.critics
                    .iter()
                    .chain(&a.target_critics)
                    .all(|c| c.input_dim() == ck.state_dim + ck.joint_dim && c.output_dim() == 1)
                && a.policies
                    .iter()
                    .zip(&a.target_policies)
                    .all(|(p, t)| p.dims() == t.dims())
                && a.critics
                    .iter()
                    .zip(&a.target_critics)
                    .all(|(p, t)| p.dims() == t.dims());
            if !shapes_ok {
                return Err(MarlError::Checkpoint(
                    "network shapes disagree with the recorded layout".into(),
                ));
            }
            agents.push(Agent::from_networks(
                &ck.config,
                a.policies,
                a.target_policies,
                a.critics,
                a.target_critics,
                a.obs_dim,
                a.act_dim,
                a.act_offset,
            ));
        }
        Ok(Self {
            cfg: ck.config,
            agents,
            state_dim: ck.state_dim,
            joint_dim: ck.joint_dim,
            updates: ck.updates,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), MarlError> {
        let json = serde_json::to_string(&self.to_checkpoint())
            .map_err(|e| MarlError::Checkpoint(e.to_string()))?;
        std::fs::write(path, json)
            .map_err(|e| MarlError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, MarlError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MarlError::Checkpoint(format!("{}: {e}", path.display())))?;
        let ck: Checkpoint =
            serde_json::from_str(&text).map_err(|e| MarlError::Checkpoint(e.to_string()))?;
        Self::from_checkpoint(ck)
    }
}

struct Gathered {
    b: usize,
    states: Vec<f64>,
    next_states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    shaping: Vec<f64>,
}

pub const CHECKPOINT_FORMAT: &str = "vvclab-ensemble";
pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON checkpoint. Each network is stored as its layer widths plus
/// row-major weight and bias arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: LearnerConfig,
    pub state_dim: usize,
    pub joint_dim: usize,
    pub updates: usize,
    pub agents: Vec<AgentRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentRecord {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub act_offset: usize,
    pub policies: Vec<Mlp>,
    pub target_policies: Vec<Mlp>,
    pub critics: Vec<Mlp>,
    pub target_critics: Vec<Mlp>,
}
