//! Potential-based reward shaping driven by episode reward totals.
//!
//! The potential compares the running sum of each reward component in the
//! current episode with the best and worst episode totals seen so far:
//!
//! φ = ½·(1 + frac_ll) + ½·(1 + frac_vd),  frac = (R_sum − R_max) / (R_max − R_min)
//!
//! with each fraction clamped to [−1, 0] and taken as 0 when R_max == R_min.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
struct Component {
    sum: f64,
    max: Option<f64>,
    min: Option<f64>,
}

impl Component {
    fn fraction(&self) -> f64 {
        match (self.max, self.min) {
            (Some(max), Some(min)) if max > min => {
                ((self.sum - max) / (max - min)).clamp(-1.0, 0.0)
            }
            _ => 0.0,
        }
    }

    fn close(&mut self) {
        self.max = Some(self.max.map_or(self.sum, |m| m.max(self.sum)));
        self.min = Some(self.min.map_or(self.sum, |m| m.min(self.sum)));
        self.sum = 0.0;
    }
}

/// Running sums for the loss (`ll`) and voltage-deviation (`vd`) reward
/// components, plus historical extremes of their episode totals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ShapingTracker {
    ll: Component,
    vd: Component,
    episodes: usize,
}

impl ShapingTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Zeroes the running sums without touching the history.
    pub fn begin_episode(&mut self) {
        self.ll.sum = 0.0;
        self.vd.sum = 0.0;
    }

    pub fn accumulate(&mut self, r_ll: f64, r_vd: f64) {
        self.ll.sum += r_ll;
        self.vd.sum += r_vd;
    }

    /// Folds the current episode totals into the historical extremes.
    pub fn end_episode(&mut self) {
        self.ll.close();
        self.vd.close();
        self.episodes += 1;
    }

    pub fn completed_episodes(&self) -> usize {
        self.episodes
    }

    pub fn sums(&self) -> (f64, f64) {
        (self.ll.sum, self.vd.sum)
    }

    pub fn ll_extremes(&self) -> (Option<f64>, Option<f64>) {
        (self.ll.max, self.ll.min)
    }

    pub fn vd_extremes(&self) -> (Option<f64>, Option<f64>) {
        (self.vd.max, self.vd.min)
    }

    /// φ ∈ [0, 1]; zero until an episode has been completed.
    pub fn potential(&self) -> f64 {
        if self.episodes == 0 {
            return 0.0;
        }
        0.5 * (1.0 + self.ll.fraction()) + 0.5 * (1.0 + self.vd.fraction())
    }
}

/// F = γ·φ_next − φ_prev, zero for the transition leaving the initial state.
pub fn shaping_term(phi_prev: f64, phi_next: f64, gamma: f64, from_initial_state: bool) -> f64 {
    if from_initial_state {
        0.0
    } else {
        gamma * phi_next - phi_prev
    }
}
