//! Exhaustive grid search of the robust problem min_a max_j f_j(a) on small
//! feeders: the reference against which trained policies are judged.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::eval::write_csv;
use super::train::make_env;
use crate::env::RobustEvaluator;
use crate::forecast::SampleSet;
use crate::{Error, Result};

pub const MAX_INVERTERS: usize = 3;
pub const MAX_RESOLUTION: usize = 21;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOptimum {
    /// Minimising ratio vector, joint order.
    pub ratios: Vec<f64>,
    /// Robust objective max_j f_j at `ratios`.
    pub value: f64,
    /// Grid points whose three power flows all converged.
    pub evaluated: usize,
    pub resolution: usize,
}

/// `resolution` evenly spaced ratios over [−η, η]; a single point sits at 0.
pub fn grid_points(eta: f64, resolution: usize) -> Vec<f64> {
    if resolution == 1 {
        return vec![0.0];
    }
    let last = (resolution - 1) as f64;
    (0..resolution)
        .map(|k| -eta + 2.0 * eta * (k as f64 / last))
        .collect()
}

/// Ratio vector at flat grid index `idx` (first inverter varies slowest).
fn decode(points: &[f64], dim: usize, mut idx: usize) -> Vec<f64> {
    let r = points.len();
    let mut out = vec![0.0; dim];
    for d in (0..dim).rev() {
        out[d] = points[idx % r];
        idx /= r;
    }
    out
}

/// Minimises the robust objective over the full grid. Ties go to the
/// lowest grid index, so the result does not depend on thread scheduling.
pub fn bruteforce(
    evaluator: &RobustEvaluator,
    samples: &SampleSet,
    resolution: usize,
) -> Result<GridOptimum> {
    let dim = evaluator.joint_dim();
    if dim == 0 || dim > MAX_INVERTERS || resolution == 0 || resolution > MAX_RESOLUTION {
        return Err(Error::Config(format!(
            "combinatorial budget exceeded: {dim} inverters at {resolution} points (limits 1..={MAX_INVERTERS} inverters, 1..={MAX_RESOLUTION} points)"
        )));
    }
    let points = grid_points(evaluator.eta, resolution);
    let total = resolution.pow(dim as u32);
    let values: Vec<Option<f64>> = (0..total)
        .into_par_iter()
        .map(|idx| evaluator.robust_objective(samples, &decode(&points, dim, idx)))
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (idx, v) in values.iter().enumerate() {
        if let Some(v) = *v {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((idx, v));
            }
        }
    }
    let (idx, value) = best.ok_or_else(|| Error::Numerical("no grid point converged".into()))?;
    Ok(GridOptimum {
        ratios: decode(&points, dim, idx),
        value,
        evaluated: values.iter().flatten().count(),
        resolution,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub t: usize,
    pub value: f64,
    pub no_control: f64,
    pub ratios: String,
    pub evaluated: usize,
}

/// Grid optimum at `steps` consecutive test-segment instants, the samples
/// predicted for the candidate delay nearest μ. Writes
/// `bruteforce/optimum.csv` under the run directory.
pub fn cmd_bruteforce(
    cfg: &ExperimentConfig,
    resolution: usize,
    offset: usize,
    steps: usize,
) -> Result<Vec<OracleRow>> {
    cfg.validate()?;
    let net = Arc::new(cfg.network()?);
    let profiles = Arc::new(cfg.test_profiles(&net)?);
    let model = cfg.delay_model()?;
    let mut c = cfg.clone();
    c.env.episode_len = 1;
    let mut env = make_env(
        &c,
        &net,
        profiles,
        model.candidates[model.nearest_candidate()],
    )?;
    let first = env.earliest_start() + offset;
    let last = env.latest_start().unwrap_or(0);
    if steps == 0 || first + steps - 1 > last {
        return Err(Error::Config(format!(
            "steps {first}..{} outside the test profile (last {last})",
            first + steps
        )));
    }
    let mut rows = Vec::with_capacity(steps);
    for t in first..first + steps {
        env.reset(t)?;
        let samples = env.samples().expect("reset predicts").clone();
        let opt = bruteforce(env.evaluator(), &samples, resolution)?;
        let nc = env
            .evaluator()
            .robust_objective(&samples, &vec![0.0; env.evaluator().joint_dim()])
            .unwrap_or(f64::NAN);
        rows.push(OracleRow {
            t,
            value: opt.value,
            no_control: nc,
            ratios: opt
                .ratios
                .iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join(" "),
            evaluated: opt.evaluated,
        });
    }
    let dir = cfg.out_dir.join("bruteforce");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    cfg.save_into(&dir)?;
    write_csv(&dir.join("optimum.csv"), &rows)?;
    Ok(rows)
}
