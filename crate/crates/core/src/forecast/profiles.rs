//! Seeded synthetic PV and load traces at 1 s resolution.
//!
//! PV output follows a bell-shaped daily envelope scaled to each inverter's
//! rating, with a multiplicative mean-reverting noise factor. Loads follow the
//! case's nominal demand with a diurnal ripple and their own noise factor;
//! reactive demand keeps the nominal power factor.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ForecastError, SystemOperationState};
use crate::grid::NetworkModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileParams {
    /// Time of day of the first sample.
    pub start_time_of_day_s: f64,
    pub day_length_s: f64,
    pub pv_peak_time_s: f64,
    /// Standard deviation of the Gaussian PV envelope.
    pub pv_width_s: f64,
    /// Envelope height as a fraction of p_max.
    pub pv_peak_fraction: f64,
    /// Per-step innovation std of the PV noise factor.
    pub pv_noise: f64,
    pub load_noise: f64,
    /// Per-step pull of the noise factors back to zero.
    pub reversion: f64,
    /// Amplitude of the diurnal load ripple.
    pub load_ripple: f64,
    pub load_scale: f64,
}

impl Default for ProfileParams {
    fn default() -> Self {
        Self {
            start_time_of_day_s: 11.0 * 3600.0,
            day_length_s: 86_400.0,
            pv_peak_time_s: 12.5 * 3600.0,
            pv_width_s: 3.0 * 3600.0,
            pv_peak_fraction: 0.9,
            pv_noise: 0.01,
            load_noise: 0.005,
            reversion: 0.002,
            load_ripple: 0.1,
            load_scale: 1.0,
        }
    }
}

impl ProfileParams {
    pub fn pv_envelope(&self, time_of_day_s: f64) -> f64 {
        let z = (time_of_day_s - self.pv_peak_time_s) / self.pv_width_s;
        self.pv_peak_fraction * (-0.5 * z * z).exp()
    }

    pub fn load_envelope(&self, time_of_day_s: f64) -> f64 {
        let phase = 2.0 * std::f64::consts::PI * (time_of_day_s - 0.25 * self.day_length_s)
            / self.day_length_s;
        self.load_scale * (1.0 + self.load_ripple * phase.sin())
    }
}

/// Time-indexed operating states, `states[k]` at `k · period_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profiles {
    pub period_s: f64,
    pub states: Vec<SystemOperationState>,
}

impl Profiles {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn get(&self, k: usize) -> Option<&SystemOperationState> {
        self.states.get(k)
    }

    /// CSV with columns `t_s,bus,pv_p_mw,load_p_mw,load_q_mvar`.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "t_s,bus,pv_p_mw,load_p_mw,load_q_mvar")?;
        for (k, s) in self.states.iter().enumerate() {
            let t = k as f64 * self.period_s;
            for i in 0..s.n_buses() {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    t,
                    i + 1,
                    s.pv_p[i],
                    s.load_p[i],
                    s.load_q[i]
                )?;
            }
        }
        out.flush()
    }

    /// Reads the CSV layout written by [`Profiles::write_csv`]. Rows may come
    /// in any order; every (t, bus) pair must be present exactly once.
    pub fn read_csv(path: &Path, n_buses: usize) -> Result<Self, ForecastError> {
        let err = |m: String| ForecastError::Profile(m);
        let mut reader = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
        let mut rows: Vec<(f64, usize, [f64; 3])> = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| err(e.to_string()))?;
            if rec.len() != 5 {
                return Err(err(format!("expected 5 columns, found {}", rec.len())));
            }
            let f = |i: usize| {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| err(format!("non-numeric cell '{}'", &rec[i])))
            };
            let bus = rec[1]
                .trim()
                .parse::<usize>()
                .map_err(|_| err(format!("bad bus '{}'", &rec[1])))?;
            if bus == 0 || bus > n_buses {
                return Err(err(format!("bus {bus} outside 1..{n_buses}")));
            }
            rows.push((f(0)?, bus, [f(2)?, f(3)?, f(4)?]));
        }
        if rows.is_empty() {
            return Err(err("no rows".into()));
        }
        let mut times: Vec<f64> = rows.iter().map(|r| r.0).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let period_s = if times.len() > 1 {
            times[1] - times[0]
        } else {
            1.0
        };
        let mut states = vec![SystemOperationState::zeros(n_buses); times.len()];
        let mut seen = vec![false; times.len() * n_buses];
        for (t, bus, [pv, lp, lq]) in rows {
            let k = ((t - times[0]) / period_s).round() as usize;
            if k >= times.len() || (times[k] - t).abs() > 1e-9 * period_s.max(1.0) {
                return Err(err(format!("irregular time stamp {t}")));
            }
            if std::mem::replace(&mut seen[k * n_buses + bus - 1], true) {
                return Err(err(format!("duplicate row t={t} bus={bus}")));
            }
            states[k].pv_p[bus - 1] = pv;
            states[k].load_p[bus - 1] = lp;
            states[k].load_q[bus - 1] = lq;
        }
        if seen.iter().any(|s| !s) {
            return Err(err("missing (t, bus) rows".into()));
        }
        Ok(Self { period_s, states })
    }
}

/// Mean-reverting Gaussian noise path x_{k+1} = (1 − κ)·x_k + σ·ε_k, started
/// from its stationary distribution.
pub fn innovation_path(rng: &mut impl Rng, len: usize, sigma: f64, reversion: f64) -> Vec<f64> {
    let keep = 1.0 - reversion;
    let stationary = if reversion > 0.0 {
        sigma / (1.0 - keep * keep).sqrt()
    } else {
        0.0
    };
    let mut x = stationary * rng.sample::<f64, _>(StandardNormal);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(x);
        x = keep * x + sigma * rng.sample::<f64, _>(StandardNormal);
    }
    out
}

/// Deterministic given `seed`. One state per second for `duration_s` seconds.
pub fn generate_profiles(
    seed: u64,
    duration_s: usize,
    network: &NetworkModel,
    params: &ProfileParams,
) -> Profiles {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = network.n_buses();
    let pv_noise: Vec<Vec<f64>> = network
        .inverters
        .iter()
        .map(|_| innovation_path(&mut rng, duration_s, params.pv_noise, params.reversion))
        .collect();
    let load_noise: Vec<Vec<f64>> = (0..n)
        .map(|_| innovation_path(&mut rng, duration_s, params.load_noise, params.reversion))
        .collect();

    let states = (0..duration_s)
        .map(|k| {
            let tod = params.start_time_of_day_s + k as f64;
            let pv_env = params.pv_envelope(tod);
            let load_env = params.load_envelope(tod);
            let mut s = SystemOperationState::zeros(n);
            for (inv, noise) in network.inverters.iter().zip(&pv_noise) {
                let p = inv.p_max_mw * pv_env * (1.0 + noise[k]);
                s.pv_p[inv.bus - 1] += p.clamp(inv.p_min_mw.max(0.0), inv.p_max_mw);
            }
            for (i, bus) in network.buses.iter().enumerate() {
                let factor = (load_env * (1.0 + load_noise[i][k])).max(0.0);
                s.load_p[i] = bus.pd_mw * factor;
                s.load_q[i] = (bus.qd_mvar * factor).max(0.0);
            }
            s
        })
        .collect();
    Profiles {
        period_s: 1.0,
        states,
    }
}
