//! Experiment configuration: one TOML document mirroring every knob of the
//! pipeline, with the reference hyperparameters pre-filled.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::delay::{fit_delay_model, parse_delay_history, DelayModel};
use crate::env::EnvConfig;
use crate::forecast::{generate_profiles, ProfileParams, Profiles, SystemOperationState};
use crate::grid::NetworkModel;
use crate::marl::TrainConfig;
use crate::powerflow::SolverOptions;
use crate::{cases, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Case file path, or `builtin:ieee33` / `builtin:toy6` / `builtin:two_bus`.
    pub case: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub profiles: ProfileSection,
    pub predictor: PredictorSection,
    pub delay: DelaySection,
    pub objective: ObjectiveSection,
    pub env: EnvSection,
    /// Learner and schedule. Its `seed` is ignored: job seeds derive from
    /// the top-level `seed`.
    pub train: TrainConfig,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSection {
    /// Seed of the training profile.
    pub seed: u64,
    /// Seed of the test profile; must differ from `seed`.
    pub test_seed: u64,
    pub duration_s: usize,
    /// Hold every state at nominal load with PV at this fraction of p_max
    /// instead of generating time-varying traces.
    pub frozen_pv_fraction: Option<f64>,
    /// Read profiles from CSV instead of generating them.
    pub train_csv: Option<PathBuf>,
    pub test_csv: Option<PathBuf>,
    pub params: ProfileParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorSection {
    /// Confidence level δ of the prediction interval.
    pub confidence: f64,
    /// History window t0, seconds.
    pub history_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelaySection {
    pub range: (f64, f64),
    /// Number of candidate delays N.
    pub n: usize,
    pub mu: f64,
    pub sigma: f64,
    /// One-column delay history; when set, μ and σ are fitted from it.
    pub history: Option<PathBuf>,
    /// Train only these candidate indices (all when absent).
    pub subset: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveSection {
    pub lambda1: f64,
    pub lambda2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub eta: f64,
    pub beta_override: Option<f64>,
    pub v_ref: f64,
    pub episode_len: usize,
    pub sigma_obs: f64,
    pub gamma: f64,
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Length of the test segment in decision steps.
    pub test_steps: usize,
    pub no_control: bool,
    pub write_voltages: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            case: "builtin:ieee33".into(),
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            profiles: ProfileSection::default(),
            predictor: PredictorSection::default(),
            delay: DelaySection::default(),
            objective: ObjectiveSection::default(),
            env: EnvSection::default(),
            train: TrainConfig::default(),
            eval: EvalSection::default(),
        }
    }
}

impl Default for ProfileSection {
    fn default() -> Self {
        Self {
            seed: 7,
            test_seed: 8,
            duration_s: 3600,
            frozen_pv_fraction: None,
            train_csv: None,
            test_csv: None,
            params: ProfileParams::default(),
        }
    }
}

impl Default for PredictorSection {
    fn default() -> Self {
        Self {
            confidence: 0.95,
            history_s: 300.0,
        }
    }
}

impl Default for DelaySection {
    fn default() -> Self {
        Self {
            range: (1.0, 10.0),
            n: 15,
            mu: 5.5,
            sigma: 2.0,
            history: None,
            subset: None,
        }
    }
}

impl Default for ObjectiveSection {
    fn default() -> Self {
        Self {
            lambda1: 0.5,
            lambda2: 0.5,
        }
    }
}

impl Default for EnvSection {
    fn default() -> Self {
        let e = EnvConfig::default();
        Self {
            eta: e.eta,
            beta_override: e.beta_override,
            v_ref: e.v_ref,
            episode_len: e.episode_len,
            sigma_obs: e.sigma_obs,
            gamma: e.gamma,
            solver: e.solver,
        }
    }
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            test_steps: 1800,
            no_control: true,
            write_voltages: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Writes the resolved configuration into `dir/config.toml`.
    pub fn save_into(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("config.toml");
        std::fs::write(&path, self.to_toml()).map_err(|e| Error::io(&path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let d = &self.delay;
        if !(d.range.0 > 0.0 && d.range.0 <= d.range.1 && d.range.1.is_finite()) {
            return bad(format!(
                "delay range [{}, {}] must be positive and ordered",
                d.range.0, d.range.1
            ));
        }
        if d.n == 0 {
            return bad("delay candidate count must be at least 1".into());
        }
        if d.n > 1 && d.history.is_none() && !(d.sigma > 0.0) {
            return bad("delay sigma must be positive with several candidates".into());
        }
        if let Some(sub) = &d.subset {
            if sub.is_empty() || sub.iter().any(|&k| k >= d.n) {
                return bad(format!(
                    "delay subset {sub:?} must name indices below {}",
                    d.n
                ));
            }
        }
        let p = &self.predictor;
        if !(p.confidence > 0.0 && p.confidence < 1.0) {
            return bad(format!("confidence {} outside (0, 1)", p.confidence));
        }
        if !(p.history_s >= 2.0) {
            return bad("history window must cover at least two samples".into());
        }
        let o = &self.objective;
        if !(o.lambda1 >= 0.0 && o.lambda2 >= 0.0) {
            return bad("objective weights must be non-negative".into());
        }
        if self.profiles.train_csv.is_none() && self.profiles.frozen_pv_fraction.is_none() {
            if self.profiles.seed == self.profiles.test_seed {
                return bad("training and test profiles must use different seeds".into());
            }
        }
        if let Some(f) = self.profiles.frozen_pv_fraction {
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("frozen PV fraction {f} outside [0, 1]"));
            }
        }
        if self.eval.test_steps == 0 {
            return bad("test segment must contain at least one step".into());
        }
        self.train
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn network(&self) -> Result<NetworkModel> {
        cases::load(&self.case)
    }

    /// Delay model from the configured parameters or the fitted history.
    pub fn delay_model(&self) -> Result<DelayModel> {
        let d = &self.delay;
        match &d.history {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                Ok(fit_delay_model(&parse_delay_history(&text)?, d.n, d.range)?)
            }
            None => Ok(DelayModel::new(d.range, d.n, d.mu, d.sigma)?),
        }
    }

    /// Candidate indices to train.
    pub fn delay_indices(&self) -> Vec<usize> {
        self.delay
            .subset
            .clone()
            .unwrap_or_else(|| (0..self.delay.n).collect())
    }

    pub fn env_config(&self, horizon_s: f64) -> EnvConfig {
        let e = &self.env;
        EnvConfig {
            horizon_s,
            confidence: self.predictor.confidence,
            history_window_s: self.predictor.history_s,
            eta: e.eta,
            beta_override: e.beta_override,
            lambda1: self.objective.lambda1,
            lambda2: self.objective.lambda2,
            v_ref: e.v_ref,
            episode_len: e.episode_len,
            sigma_obs: e.sigma_obs,
            gamma: e.gamma,
            noise_seed: self.seed,
            solver: e.solver,
        }
    }

    /// History samples needed before the first decision.
    pub fn history_len(&self) -> usize {
        (self.predictor.history_s / 1.0).round().max(1.0) as usize
    }

    /// Test profile length: history, the segment itself and the largest
    /// delay lookahead.
    pub fn test_duration(&self) -> usize {
        self.history_len() + self.eval.test_steps + self.delay.range.1.ceil() as usize + 2
    }

    pub fn train_profiles(&self, net: &NetworkModel) -> Result<Profiles> {
        self.profiles_for(
            net,
            self.profiles.train_csv.as_deref(),
            self.profiles.seed,
            self.profiles.duration_s,
        )
    }

    pub fn test_profiles(&self, net: &NetworkModel) -> Result<Profiles> {
        let p = self.profiles_for(
            net,
            self.profiles.test_csv.as_deref(),
            self.profiles.test_seed,
            self.test_duration(),
        )?;
        if p.len() < self.test_duration() {
            return Err(Error::Config(format!(
                "test profile holds {} samples, the test segment needs {}",
                p.len(),
                self.test_duration()
            )));
        }
        Ok(p)
    }

    fn profiles_for(
        &self,
        net: &NetworkModel,
        csv: Option<&Path>,
        seed: u64,
        duration: usize,
    ) -> Result<Profiles> {
        if let Some(path) = csv {
            return Ok(Profiles::read_csv(path, net.n_buses())?);
        }
        if let Some(frac) = self.profiles.frozen_pv_fraction {
            return Ok(frozen_profiles(net, frac, duration));
        }
        Ok(generate_profiles(
            seed,
            duration,
            net,
            &self.profiles.params,
        ))
    }
}

/// `len` copies of one state: nominal load everywhere, every inverter at
/// `pv_fraction` of its rating. The interval predictor sees no variation,
/// so all three samples coincide.
pub fn frozen_profiles(net: &NetworkModel, pv_fraction: f64, len: usize) -> Profiles {
    let n = net.n_buses();
    let mut s = SystemOperationState::zeros(n);
    for inv in &net.inverters {
        s.pv_p[inv.bus - 1] += inv.p_max_mw * pv_fraction;
    }
    for (i, b) in net.buses.iter().enumerate() {
        s.load_p[i] = b.pd_mw;
        s.load_q[i] = b.qd_mvar;
    }
    Profiles {
        period_s: 1.0,
        states: vec![s; len],
    }
}
