//! Operating-state history, interval prediction at a delay horizon and
//! sample selection.
//!
//! The shipped predictor is a persistence-mean Gaussian model: the interval
//! is centred on the last observed value and its half-width grows with the
//! square root of the horizon. Anything implementing [`IntervalPredictor`]
//! can stand in for it; downstream code only consumes the bounds and the
//! midpoint.

mod profiles;

pub use profiles::{generate_profiles, innovation_path, ProfileParams, Profiles};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::grid::NetworkModel;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ForecastError {
    #[error("history is cold: {have} of {need} samples")]
    ColdHistory { have: usize, need: usize },
    #[error("horizon must be positive, got {0}")]
    Horizon(f64),
    #[error("confidence must lie in (0, 1), got {0}")]
    Confidence(f64),
    #[error("profile data: {0}")]
    Profile(String),
}

/// PV active power, load active and reactive power at every bus (MW, MVAr).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemOperationState {
    pub pv_p: Vec<f64>,
    pub load_p: Vec<f64>,
    pub load_q: Vec<f64>,
}

impl SystemOperationState {
    pub fn zeros(n: usize) -> Self {
        Self {
            pv_p: vec![0.0; n],
            load_p: vec![0.0; n],
            load_q: vec![0.0; n],
        }
    }

    pub fn n_buses(&self) -> usize {
        self.pv_p.len()
    }

    fn fields(&self) -> [&Vec<f64>; 3] {
        [&self.pv_p, &self.load_p, &self.load_q]
    }

    fn fields_mut(&mut self) -> [&mut Vec<f64>; 3] {
        [&mut self.pv_p, &mut self.load_p, &mut self.load_q]
    }

    /// Applies `f` to every element of every field.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        let m = |v: &Vec<f64>, f: &mut dyn FnMut(f64) -> f64| v.iter().map(|&x| f(x)).collect();
        Self {
            pv_p: m(&self.pv_p, &mut f),
            load_p: m(&self.load_p, &mut f),
            load_q: m(&self.load_q, &mut f),
        }
    }
}

/// Trailing window of measured states at a fixed sampling period.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    period_s: f64,
    capacity: usize,
    states: VecDeque<SystemOperationState>,
}

impl HistoryBuffer {
    /// A buffer covering `window_s` seconds sampled every `period_s`.
    pub fn new(window_s: f64, period_s: f64) -> Self {
        let capacity = ((window_s / period_s).round() as usize).max(2);
        Self {
            period_s,
            capacity,
            states: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, state: SystemOperationState) {
        if self.states.len() == self.capacity {
            self.states.pop_front();
        }
        self.states.push_back(state);
    }

    pub fn clear(&mut self) {
        self.states.clear();
    }

    pub fn is_warm(&self) -> bool {
        self.states.len() == self.capacity
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn period_s(&self) -> f64 {
        self.period_s
    }

    pub fn last(&self) -> Option<&SystemOperationState> {
        self.states.back()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SystemOperationState> {
        self.states.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub lower: SystemOperationState,
    pub upper: SystemOperationState,
    pub horizon_s: f64,
    pub confidence: f64,
}

/// The three representative states drawn from an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub samples: [SystemOperationState; 3],
}

impl SampleSet {
    pub const UPPER: usize = 0;
    pub const LOWER: usize = 1;
    pub const MEDIAN: usize = 2;

    pub fn median(&self) -> &SystemOperationState {
        &self.samples[Self::MEDIAN]
    }
}

/// Upper bound, lower bound and midpoint, in that order.
pub fn sample_select(interval: &PredictionInterval) -> SampleSet {
    let mid = SystemOperationState {
        pv_p: midpoints(&interval.lower.pv_p, &interval.upper.pv_p),
        load_p: midpoints(&interval.lower.load_p, &interval.upper.load_p),
        load_q: midpoints(&interval.lower.load_q, &interval.upper.load_q),
    };
    SampleSet {
        samples: [interval.upper.clone(), interval.lower.clone(), mid],
    }
}

fn midpoints(lo: &[f64], hi: &[f64]) -> Vec<f64> {
    // clamp guards against the rounding of (l + u) / 2 escaping [l, u]
    lo.iter()
        .zip(hi)
        .map(|(&l, &u)| (0.5 * (l + u)).clamp(l, u))
        .collect()
}

pub trait IntervalPredictor: Send + Sync {
    fn predict(
        &self,
        history: &HistoryBuffer,
        horizon_s: f64,
        confidence: f64,
    ) -> Result<PredictionInterval, ForecastError>;
}

/// Two-sided Gaussian quantile z with P(|Z| ≤ z) = δ.
pub fn gaussian_quantile(confidence: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 * (1.0 + confidence))
}

/// z(δ)·σ̂·√(horizon / period).
pub fn half_width(sigma: f64, horizon_s: f64, period_s: f64, confidence: f64) -> f64 {
    gaussian_quantile(confidence) * sigma * (horizon_s / period_s).sqrt()
}

/// Sample standard deviation of one-step differences.
pub fn innovation_std(series: &[f64]) -> f64 {
    if series.len() < 3 {
        return 0.0;
    }
    let diffs: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
    var.sqrt()
}

/// Persistence-mean Gaussian interval predictor with physical clipping:
/// PV output to [0, p_max], loads to ≥ 0.
#[derive(Debug, Clone)]
pub struct GaussianPersistence {
    pv_cap: Vec<f64>,
}

impl GaussianPersistence {
    pub fn new(network: &NetworkModel) -> Self {
        let mut pv_cap = vec![0.0; network.n_buses()];
        for inv in &network.inverters {
            pv_cap[inv.bus - 1] += inv.p_max_mw;
        }
        Self { pv_cap }
    }
}

impl IntervalPredictor for GaussianPersistence {
    fn predict(
        &self,
        history: &HistoryBuffer,
        horizon_s: f64,
        confidence: f64,
    ) -> Result<PredictionInterval, ForecastError> {
        if !history.is_warm() {
            return Err(ForecastError::ColdHistory {
                have: history.len(),
                need: history.capacity(),
            });
        }
        if !(horizon_s > 0.0) {
            return Err(ForecastError::Horizon(horizon_s));
        }
        if !(confidence > 0.0 && confidence < 1.0) {
            return Err(ForecastError::Confidence(confidence));
        }
        let last = history.last().expect("warm history is non-empty");
        let n = last.n_buses();
        let mut lower = SystemOperationState::zeros(n);
        let mut upper = SystemOperationState::zeros(n);
        let mut series = Vec::with_capacity(history.len());
        for field in 0..3 {
            for i in 0..n {
                series.clear();
                series.extend(history.iter().map(|s| s.fields()[field][i]));
                let w = half_width(
                    innovation_std(&series),
                    horizon_s,
                    history.period_s(),
                    confidence,
                );
                let centre = last.fields()[field][i];
                let (lo, hi) = match field {
                    0 => (0.0, self.pv_cap.get(i).copied().unwrap_or(0.0)),
                    _ => (0.0, f64::INFINITY),
                };
                lower.fields_mut()[field][i] = (centre - w).clamp(lo, hi);
                upper.fields_mut()[field][i] = (centre + w).clamp(lo, hi);
            }
        }
        Ok(PredictionInterval {
            lower,
            upper,
            horizon_s,
            confidence,
        })
    }
}
