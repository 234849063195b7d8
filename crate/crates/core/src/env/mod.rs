//! Robust Volt/Var control as a Dec-POMDP.
//!
//! One agent per region. At every decision step each agent emits one
//! inverter ratio vector per representative sample (upper, lower, median).
//! The environment runs a power flow for each sample, the sample with the
//! largest weighted objective is the worst case, and the reward is its
//! negated objective. The global state seen by the critics is built from that
//! worst-case solution.

mod shaping;

pub use shaping::{shaping_term, ShapingTracker};

use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::forecast::{
    sample_select, HistoryBuffer, IntervalPredictor, Profiles, SampleSet, SystemOperationState,
};
use crate::grid::{validate_partition, InverterConfig, NetworkModel};
use crate::powerflow::{
    injections_from, objective_components, solve_power_flow, weighted_objective, ObjectiveValue,
    PowerFlowSolution, SolverOptions,
};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("{0}")]
    Config(String),
    #[error("insufficient profile data: {0}")]
    Profile(String),
    #[error("step called before reset or after episode end")]
    NotRunning,
    #[error("action shape: {0}")]
    Action(String),
    #[error(transparent)]
    Forecast(#[from] crate::forecast::ForecastError),
}

/// Per-agent values for the three samples, indexed upper/lower/median.
pub type PerSample<T> = [T; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub horizon_s: f64,
    pub confidence: f64,
    pub history_window_s: f64,
    pub eta: f64,
    pub beta_override: Option<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub v_ref: f64,
    pub episode_len: usize,
    pub sigma_obs: f64,
    pub gamma: f64,
    pub noise_seed: u64,
    pub solver: SolverOptions,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            horizon_s: 1.0,
            confidence: 0.95,
            history_window_s: 300.0,
            eta: 0.8,
            beta_override: None,
            lambda1: 0.5,
            lambda2: 0.5,
            v_ref: 1.0,
            episode_len: 1000,
            sigma_obs: 0.0,
            gamma: 0.9,
            noise_seed: 0,
            solver: SolverOptions::default(),
        }
    }
}

/// Buses and inverters controlled by one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentLayout {
    pub region: usize,
    /// Zero-based bus indices, ascending.
    pub buses: Vec<usize>,
    /// Indices into `NetworkModel::inverters`, ascending by bus.
    pub inverters: Vec<usize>,
}

impl AgentLayout {
    pub fn obs_dim(&self) -> usize {
        3 * self.buses.len()
    }

    pub fn action_dim(&self) -> usize {
        self.inverters.len()
    }
}

pub fn agent_layouts(network: &NetworkModel) -> Vec<AgentLayout> {
    network
        .regions
        .iter()
        .map(|r| {
            let mut buses: Vec<usize> = r.buses.iter().map(|b| b - 1).collect();
            buses.sort_unstable();
            AgentLayout {
                region: r.id,
                buses,
                inverters: network.region_inverters(r),
            }
        })
        .collect()
}

/// q = a·√(s² − p²), clamped to ±β·s. Returns the dispatched reactive power
/// and whether `p` had to be curtailed to the apparent-power rating.
pub fn action_to_q(a: f64, p_pv: f64, inverter: &InverterConfig, beta: f64) -> (f64, bool) {
    let s = inverter.s_mva;
    let curtailed = p_pv > s;
    if curtailed {
        log::debug!(
            "inverter at bus {}: p {} exceeds s {}, curtailing",
            inverter.bus,
            p_pv,
            s
        );
    }
    let p = p_pv.clamp(0.0, s);
    let a = a.clamp(-1.0, 1.0);
    let q = a * (s * s - p * p).max(0.0).sqrt();
    let cap = beta * s;
    (q.clamp(-cap, cap), curtailed)
}

/// Evaluates inverter commands against operating states. Shared by the
/// environment, the grid-search oracle and closed-loop evaluation.
#[derive(Debug, Clone)]
pub struct RobustEvaluator {
    pub network: Arc<NetworkModel>,
    pub layouts: Vec<AgentLayout>,
    /// Joint-action position → inverter index.
    pub joint_order: Vec<usize>,
    pub eta: f64,
    pub beta_override: Option<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub v_ref: f64,
    pub solver: SolverOptions,
}

#[derive(Debug, Clone)]
pub struct SampleEvaluation {
    pub q_mvar: Vec<f64>,
    pub solution: PowerFlowSolution,
    pub objective: Option<ObjectiveValue>,
}

impl RobustEvaluator {
    pub fn new(network: Arc<NetworkModel>, cfg: &EnvConfig) -> Self {
        let layouts = agent_layouts(&network);
        let joint_order = layouts
            .iter()
            .flat_map(|l| l.inverters.iter().copied())
            .collect();
        Self {
            network,
            layouts,
            joint_order,
            eta: cfg.eta,
            beta_override: cfg.beta_override,
            lambda1: cfg.lambda1,
            lambda2: cfg.lambda2,
            v_ref: cfg.v_ref,
            solver: cfg.solver,
        }
    }

    pub fn joint_dim(&self) -> usize {
        self.joint_order.len()
    }

    pub fn beta(&self, inverter: &InverterConfig) -> f64 {
        self.beta_override.unwrap_or(inverter.beta)
    }

    /// Largest |q| each inverter may dispatch at PV output `sos.pv_p`, in
    /// joint order.
    pub fn q_limits(&self, sos: &SystemOperationState) -> Vec<f64> {
        self.joint_order
            .iter()
            .map(|&k| {
                let inv = &self.network.inverters[k];
                let p = sos.pv_p[inv.bus - 1];
                let s = inv.s_mva;
                let p = p.clamp(0.0, s);
                (s * s - p * p).max(0.0).sqrt().min(self.beta(inv) * s)
            })
            .collect()
    }

    /// Ratio vector (joint order) → reactive dispatch (joint order, MVAr).
    pub fn ratios_to_q(&self, ratios: &[f64], sos: &SystemOperationState) -> Vec<f64> {
        self.joint_order
            .iter()
            .zip(ratios)
            .map(|(&k, &a)| {
                let inv = &self.network.inverters[k];
                action_to_q(
                    a.clamp(-self.eta, self.eta),
                    sos.pv_p[inv.bus - 1],
                    inv,
                    self.beta(inv),
                )
                .0
            })
            .collect()
    }

    /// Power flow and objective for one state under a reactive dispatch given
    /// in joint order. The dispatch is clipped to the feasible set at the
    /// state's PV output.
    pub fn evaluate_q(&self, sos: &SystemOperationState, q_mvar: &[f64]) -> SampleEvaluation {
        let net = &*self.network;
        let n = net.n_buses();
        let limits = self.q_limits(sos);
        let q_mvar: Vec<f64> = q_mvar
            .iter()
            .zip(&limits)
            .map(|(&q, &l)| q.clamp(-l, l))
            .collect();
        let mut pv_q = vec![0.0; n];
        let mut pv_p = sos.pv_p.clone();
        for (&k, &q) in self.joint_order.iter().zip(&q_mvar) {
            let inv = &net.inverters[k];
            pv_q[inv.bus - 1] += q;
            pv_p[inv.bus - 1] = pv_p[inv.bus - 1].min(inv.s_mva);
        }
        let inj = injections_from(net, &pv_p, &sos.load_p, &sos.load_q, &pv_q);
        let solution = solve_power_flow(net, &inj, None, &self.solver)
            .expect("injection vectors sized from network");
        let objective = objective_components(&solution, net, self.v_ref)
            .ok()
            .map(|c| weighted_objective(&c, self.lambda1, self.lambda2));
        SampleEvaluation {
            q_mvar,
            solution,
            objective,
        }
    }

    pub fn evaluate_ratios(&self, sos: &SystemOperationState, ratios: &[f64]) -> SampleEvaluation {
        self.evaluate_q(sos, &self.ratios_to_q(ratios, sos))
    }

    /// Evaluates one ratio vector per sample and picks the worst case.
    pub fn robust(&self, samples: &SampleSet, ratios: &PerSample<Vec<f64>>) -> RobustEvaluation {
        let evals: [SampleEvaluation; 3] =
            std::array::from_fn(|j| self.evaluate_ratios(&samples.samples[j], &ratios[j]));
        RobustEvaluation::from_evaluations(evals)
    }

    /// max_j f_j for a single ratio vector shared by all samples, or `None`
    /// when a power flow fails.
    pub fn robust_objective(&self, samples: &SampleSet, ratios: &[f64]) -> Option<f64> {
        let mut worst = f64::NEG_INFINITY;
        for sos in &samples.samples {
            worst = worst.max(self.evaluate_ratios(sos, ratios).objective?.weighted);
        }
        Some(worst)
    }

    /// Flattened observation for one agent and one state, per unit.
    pub fn observation(&self, layout: &AgentLayout, sos: &SystemOperationState) -> Vec<f64> {
        let base = self.network.base_mva;
        let mut out = Vec::with_capacity(layout.obs_dim());
        for &i in &layout.buses {
            out.extend([
                sos.pv_p[i] / base,
                sos.load_p[i] / base,
                sos.load_q[i] / base,
            ]);
        }
        out
    }

    pub fn observations(&self, samples: &SampleSet) -> Vec<PerSample<Vec<f64>>> {
        self.layouts
            .iter()
            .map(|l| std::array::from_fn(|j| self.observation(l, &samples.samples[j])))
            .collect()
    }

    pub fn state_dim(&self) -> usize {
        5 * self.network.n_buses() + self.joint_dim()
    }

    /// Global state: worst-case sample state, executed reactive dispatch and
    /// the resulting voltage magnitudes (as deviation from v_ref) and angles.
    pub fn global_state(
        &self,
        sos: &SystemOperationState,
        q_mvar: &[f64],
        solution: &PowerFlowSolution,
    ) -> Vec<f64> {
        let base = self.network.base_mva;
        let n = self.network.n_buses();
        let mut s = Vec::with_capacity(self.state_dim());
        for i in 0..n {
            s.extend([
                sos.pv_p[i] / base,
                sos.load_p[i] / base,
                sos.load_q[i] / base,
            ]);
        }
        s.extend(q_mvar.iter().map(|q| q / base));
        s.extend(solution.v.iter().map(|v| v - self.v_ref));
        s.extend(solution.theta.iter().copied());
        s
    }
}

#[derive(Debug, Clone)]
pub struct RobustEvaluation {
    pub evaluations: [SampleEvaluation; 3],
    /// Argmax of the objectives, lowest index on ties. `None` if any sample
    /// failed to converge.
    pub j_star: Option<usize>,
}

impl RobustEvaluation {
    fn from_evaluations(evaluations: [SampleEvaluation; 3]) -> Self {
        let f: Option<Vec<f64>> = evaluations
            .iter()
            .map(|e| e.objective.map(|o| o.weighted))
            .collect();
        let j_star = f.map(|f| worst_index(&[f[0], f[1], f[2]]));
        Self {
            evaluations,
            j_star,
        }
    }

    pub fn objectives(&self) -> [Option<f64>; 3] {
        std::array::from_fn(|j| self.evaluations[j].objective.map(|o| o.weighted))
    }
}

/// Index of the largest value, the smallest index winning ties.
pub fn worst_index(f: &[f64; 3]) -> usize {
    let mut best = 0;
    for j in 1..3 {
        if f[j] > f[best] {
            best = j;
        }
    }
    best
}

/// Isotropic Gaussian perturbation with standard deviation `sigma`.
pub fn add_observation_noise(obs: &mut [f64], sigma: f64, rng: &mut impl rand::Rng) {
    if sigma == 0.0 {
        return;
    }
    for x in obs.iter_mut() {
        let e: f64 = StandardNormal.sample(rng);
        *x += sigma * e;
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub reward: f64,
    pub j_star: usize,
    pub psi: [u8; 3],
    pub objectives: [Option<ObjectiveValue>; 3],
    /// All three power flows converged; only such steps may be stored.
    pub done: bool,
    pub state: Vec<f64>,
    pub next_state: Vec<f64>,
    /// Ratios actually executed (those of sample j*), joint order.
    pub executed_action: Vec<f64>,
    pub executed_q: Vec<f64>,
    pub next_observations: Option<Vec<PerSample<Vec<f64>>>>,
    pub r_ll: f64,
    pub r_vd: f64,
    pub shaping: f64,
    pub phi: f64,
    pub episode_end: bool,
    pub t: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub j_star: usize,
    pub f: [f64; 3],
    pub reward: f64,
    pub loss_mw: f64,
    pub dev_sum: f64,
    pub max_dev: f64,
    pub done: bool,
}

impl From<&StepOutcome> for TraceRow {
    fn from(o: &StepOutcome) -> Self {
        let sel = o.objectives[o.j_star];
        Self {
            t: o.t,
            j_star: o.j_star + 1,
            f: std::array::from_fn(|j| o.objectives[j].map_or(f64::NAN, |v| v.weighted)),
            reward: o.reward,
            loss_mw: sel.map_or(f64::NAN, |v| v.network_loss),
            dev_sum: sel.map_or(f64::NAN, |v| v.voltage_deviation_sum),
            max_dev: sel.map_or(f64::NAN, |v| v.max_bus_deviation),
            done: o.done,
        }
    }
}

/// CSV `t,j_star,f1,f2,f3,reward,loss_mw,dev_sum,max_dev,done`.
pub fn write_trace(path: &Path, rows: &[TraceRow]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "t,j_star,f1,f2,f3,reward,loss_mw,dev_sum,max_dev,done")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.j_star,
            r.f[0],
            r.f[1],
            r.f[2],
            r.reward,
            r.loss_mw,
            r.dev_sum,
            r.max_dev,
            u8::from(r.done)
        )?;
    }
    out.flush()
}

pub struct VvcEnv {
    evaluator: RobustEvaluator,
    profiles: Arc<Profiles>,
    predictor: Arc<dyn IntervalPredictor>,
    cfg: EnvConfig,
    history: HistoryBuffer,
    t: usize,
    step: usize,
    running: bool,
    samples: Option<SampleSet>,
    state: Vec<f64>,
    tracker: ShapingTracker,
}

impl VvcEnv {
    pub fn new(
        network: Arc<NetworkModel>,
        profiles: Arc<Profiles>,
        predictor: Arc<dyn IntervalPredictor>,
        cfg: EnvConfig,
    ) -> Result<Self, EnvError> {
        validate_partition(&network).map_err(|e| EnvError::Config(e.to_string()))?;
        if !(cfg.eta > 0.0 && cfg.eta <= 1.0) {
            return Err(EnvError::Config(format!("eta {} outside (0, 1]", cfg.eta)));
        }
        if cfg.episode_len == 0 {
            return Err(EnvError::Config("episode length must be positive".into()));
        }
        if !(cfg.sigma_obs >= 0.0) {
            return Err(EnvError::Config("sigma_obs must be non-negative".into()));
        }
        if profiles
            .states
            .first()
            .is_some_and(|s| s.n_buses() != network.n_buses())
        {
            return Err(EnvError::Profile(
                "profile bus count differs from network".into(),
            ));
        }
        let history = HistoryBuffer::new(cfg.history_window_s, profiles.period_s);
        Ok(Self {
            evaluator: RobustEvaluator::new(network, &cfg),
            profiles,
            predictor,
            cfg,
            history,
            t: 0,
            step: 0,
            running: false,
            samples: None,
            state: Vec::new(),
            tracker: ShapingTracker::new(),
        })
    }

    pub fn evaluator(&self) -> &RobustEvaluator {
        &self.evaluator
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn layouts(&self) -> &[AgentLayout] {
        &self.evaluator.layouts
    }

    pub fn tracker(&self) -> &ShapingTracker {
        &self.tracker
    }

    /// Forgets the episode-total history behind the shaping potential.
    pub fn reset_shaping(&mut self) {
        self.tracker = ShapingTracker::new();
    }

    pub fn samples(&self) -> Option<&SampleSet> {
        self.samples.as_ref()
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn history_len(&self) -> usize {
        self.history.capacity()
    }

    /// First profile index at which an episode may start.
    pub fn earliest_start(&self) -> usize {
        self.history.capacity() - 1
    }

    /// Last profile index at which a full episode still fits.
    pub fn latest_start(&self) -> Option<usize> {
        self.profiles.len().checked_sub(self.cfg.episode_len + 1)
    }

    /// Measured state at profile index `k`, with sensor noise drawn from a
    /// stream keyed on `k` so re-measuring the same instant is reproducible.
    pub fn measured(&self, k: usize) -> SystemOperationState {
        let s = &self.profiles.states[k];
        if self.cfg.sigma_obs == 0.0 {
            return s.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.noise_seed);
        rng.set_stream(k as u64);
        let mut out = s.clone();
        for field in [&mut out.pv_p, &mut out.load_p, &mut out.load_q] {
            add_observation_noise(field, self.cfg.sigma_obs, &mut rng);
        }
        out
    }

    fn refresh_samples(&mut self) -> Result<(), EnvError> {
        let interval =
            self.predictor
                .predict(&self.history, self.cfg.horizon_s, self.cfg.confidence)?;
        self.samples = Some(sample_select(&interval));
        Ok(())
    }

    /// Positions the clock at `start`, rebuilds the history window and the
    /// initial observations. Reactive dispatch starts at zero.
    pub fn reset(&mut self, start: usize) -> Result<Vec<PerSample<Vec<f64>>>, EnvError> {
        let cap = self.history.capacity();
        if start + 1 < cap {
            return Err(EnvError::Profile(format!(
                "start {start} leaves less than {cap} samples of history"
            )));
        }
        if self.latest_start().is_none_or(|last| start > last) {
            return Err(EnvError::Profile(format!(
                "start {start} + episode {} exceeds {} profile samples",
                self.cfg.episode_len,
                self.profiles.len()
            )));
        }
        self.history.clear();
        for k in start + 1 - cap..=start {
            self.history.push(self.measured(k));
        }
        self.t = start;
        self.step = 0;
        self.refresh_samples()?;
        let samples = self.samples.as_ref().expect("refreshed");

        let zero = vec![0.0; self.evaluator.joint_dim()];
        let eval = self
            .evaluator
            .robust(samples, &[zero.clone(), zero.clone(), zero]);
        let j = eval.j_star.unwrap_or(SampleSet::MEDIAN);
        let e = &eval.evaluations[j];
        self.state = self
            .evaluator
            .global_state(&samples.samples[j], &e.q_mvar, &e.solution);
        self.tracker.begin_episode();
        self.running = true;
        Ok(self.evaluator.observations(samples))
    }

    pub fn observations(&self) -> Option<Vec<PerSample<Vec<f64>>>> {
        self.samples
            .as_ref()
            .map(|s| self.evaluator.observations(s))
    }

    /// Joins per-agent ratio vectors into one joint vector per sample.
    pub fn join_actions(
        &self,
        actions: &[PerSample<Vec<f64>>],
    ) -> Result<PerSample<Vec<f64>>, EnvError> {
        if actions.len() != self.evaluator.layouts.len() {
            return Err(EnvError::Action(format!(
                "{} agents expected, got {}",
                self.evaluator.layouts.len(),
                actions.len()
            )));
        }
        let mut joint: PerSample<Vec<f64>> = Default::default();
        for (layout, per) in self.evaluator.layouts.iter().zip(actions) {
            for (j, a) in per.iter().enumerate() {
                if a.len() != layout.action_dim() {
                    return Err(EnvError::Action(format!(
                        "region {} expects {} ratios, got {}",
                        layout.region,
                        layout.action_dim(),
                        a.len()
                    )));
                }
                joint[j].extend(a.iter().map(|x| x.clamp(-self.cfg.eta, self.cfg.eta)));
            }
        }
        Ok(joint)
    }

    /// Applies one ratio vector per agent per sample and advances the clock
    /// by one decision period.
    pub fn robust_step(
        &mut self,
        actions: &[PerSample<Vec<f64>>],
    ) -> Result<StepOutcome, EnvError> {
        if !self.running {
            return Err(EnvError::NotRunning);
        }
        let joint = self.join_actions(actions)?;
        let samples = self.samples.as_ref().ok_or(EnvError::NotRunning)?;
        let eval = self.evaluator.robust(samples, &joint);
        let objectives: [Option<ObjectiveValue>; 3] =
            std::array::from_fn(|j| eval.evaluations[j].objective);
        let t = self.t;
        let first = self.step == 0;

        let Some(j_star) = eval.j_star else {
            // non-convergent step: terminate without a storable transition
            self.running = false;
            let fallback = worst_index(&std::array::from_fn(|j| {
                objectives[j].map_or(f64::INFINITY, |o| o.weighted)
            }));
            let reward = objectives
                .iter()
                .flatten()
                .map(|o| -o.weighted)
                .fold(f64::INFINITY, f64::min);
            let mut psi = [0u8; 3];
            psi[fallback] = 1;
            return Ok(StepOutcome {
                reward,
                j_star: fallback,
                psi,
                objectives,
                done: false,
                state: self.state.clone(),
                next_state: self.state.clone(),
                executed_action: joint[fallback].clone(),
                executed_q: eval.evaluations[fallback].q_mvar.clone(),
                next_observations: None,
                r_ll: 0.0,
                r_vd: 0.0,
                shaping: 0.0,
                phi: self.tracker.potential(),
                episode_end: true,
                t,
            });
        };

        let worst = objectives[j_star].expect("converged");
        let reward = -worst.weighted;
        let mut psi = [0u8; 3];
        psi[j_star] = 1;
        let r_ll = -self.cfg.lambda2 * worst.network_loss;
        let r_vd = -self.cfg.lambda1 * worst.voltage_deviation_sum;

        let phi_prev = self.tracker.potential();
        self.tracker.accumulate(r_ll, r_vd);
        let phi = self.tracker.potential();
        let shaping = shaping_term(phi_prev, phi, self.cfg.gamma, first);

        let e = &eval.evaluations[j_star];
        let next_state =
            self.evaluator
                .global_state(&samples.samples[j_star], &e.q_mvar, &e.solution);
        let state = std::mem::replace(&mut self.state, next_state.clone());

        self.step += 1;
        self.t += 1;
        self.history.push(self.measured(self.t));
        self.refresh_samples()?;
        let episode_end = self.step >= self.cfg.episode_len;
        if episode_end {
            self.tracker.end_episode();
            self.running = false;
        }

        Ok(StepOutcome {
            reward,
            j_star,
            psi,
            objectives,
            done: true,
            state,
            next_state,
            executed_action: joint[j_star].clone(),
            executed_q: e.q_mvar.clone(),
            next_observations: self.observations(),
            r_ll,
            r_vd,
            shaping,
            phi,
            episode_end,
            t,
        })
    }
}
