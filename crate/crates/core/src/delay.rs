//! Imprecisely known system delay: a Gaussian fitted to delay history,
//! a discrete bank of candidate delays and the probability-weighted blend of
//! the per-delay inverter commands.

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DelayError {
    #[error("delay history is empty")]
    EmptyHistory,
    #[error("need at least one candidate delay")]
    NoCandidates,
    #[error("invalid delay range [{0}, {1}]")]
    Range(f64, f64),
    #[error("command length mismatch: expected {expected}, found {found}")]
    Length { expected: usize, found: usize },
    #[error("{0} weights for {1} command vectors")]
    WeightCount(usize, usize),
    #[error("delay history: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayModel {
    pub range: (f64, f64),
    pub candidates: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
}

/// N evenly spaced values spanning `range`; a single candidate sits at `mu`
/// clamped into the range.
pub fn candidate_grid(range: (f64, f64), n: usize, mu: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![mu.clamp(range.0, range.1)],
        _ => {
            let step = (range.1 - range.0) / (n - 1) as f64;
            (0..n)
                .map(|k| {
                    if k == n - 1 {
                        range.1
                    } else {
                        range.0 + step * k as f64
                    }
                })
                .collect()
        }
    }
}

impl DelayModel {
    pub fn new(range: (f64, f64), n: usize, mu: f64, sigma: f64) -> Result<Self, DelayError> {
        if !(range.0 <= range.1) || !range.0.is_finite() || !range.1.is_finite() {
            return Err(DelayError::Range(range.0, range.1));
        }
        if n == 0 {
            return Err(DelayError::NoCandidates);
        }
        Ok(Self {
            range,
            candidates: candidate_grid(range, n, mu),
            mu,
            sigma,
        })
    }

    /// Candidate index closest to `mu` (lowest index on ties).
    pub fn nearest_candidate(&self) -> usize {
        let mut best = 0;
        for (k, &c) in self.candidates.iter().enumerate() {
            if (c - self.mu).abs() < (self.candidates[best] - self.mu).abs() {
                best = k;
            }
        }
        best
    }
}

/// Sample mean and standard deviation of the delay history, with `n`
/// candidates spread over the configured range.
pub fn fit_delay_model(
    samples: &[f64],
    n: usize,
    range: (f64, f64),
) -> Result<DelayModel, DelayError> {
    if samples.is_empty() {
        return Err(DelayError::EmptyHistory);
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let sigma = if samples.len() > 1 {
        (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64)
            .sqrt()
    } else {
        0.0
    };
    DelayModel::new(range, n, mean, sigma)
}

/// ρ_n ∝ N(T_n; μ, σ), normalised to sum to one.
///
/// Densities are combined in log space so a narrow Gaussian puts its whole
/// mass on the nearest candidate instead of underflowing. A non-positive or
/// non-finite σ with several candidates falls back to uniform weights.
pub fn delay_weights(model: &DelayModel) -> Vec<f64> {
    let n = model.candidates.len();
    if n == 1 {
        return vec![1.0];
    }
    if !(model.sigma > 0.0 && model.sigma.is_finite()) {
        log::warn!(
            "delay sigma {} is degenerate; using uniform weights",
            model.sigma
        );
        return vec![1.0 / n as f64; n];
    }
    let log_density: Vec<f64> = model
        .candidates
        .iter()
        .map(|&t| {
            let z = (t - model.mu) / model.sigma;
            -0.5 * z * z
        })
        .collect();
    let peak = log_density
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = log_density.iter().map(|l| (l - peak).exp()).collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        log::warn!("delay densities underflowed; using uniform weights");
        return vec![1.0 / n as f64; n];
    }
    raw.iter().map(|r| r / total).collect()
}

/// Elementwise Σ_n ρ_n·q_n, then clamped to ±`limits` per inverter.
pub fn compose_command(
    per_delay: &[Vec<f64>],
    weights: &[f64],
    limits: &[f64],
) -> Result<Vec<f64>, DelayError> {
    if per_delay.len() != weights.len() {
        return Err(DelayError::WeightCount(weights.len(), per_delay.len()));
    }
    let len = limits.len();
    let mut out = vec![0.0; len];
    for (cmd, &w) in per_delay.iter().zip(weights) {
        if cmd.len() != len {
            return Err(DelayError::Length {
                expected: len,
                found: cmd.len(),
            });
        }
        for (o, &q) in out.iter_mut().zip(cmd) {
            *o += w * q;
        }
    }
    for (o, &lim) in out.iter_mut().zip(limits) {
        *o = o.clamp(-lim, lim);
    }
    Ok(out)
}

/// One delay value in seconds per line; blank lines, `#` comments and a
/// non-numeric header line are skipped.
pub fn parse_delay_history(text: &str) -> Result<Vec<f64>, DelayError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let cell = line.split(',').next().unwrap_or("").trim();
        if cell.is_empty() || cell.starts_with('#') {
            continue;
        }
        match cell.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => return Err(DelayError::Parse(format!("line {}: '{cell}'", i + 1))),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DelaySummary {
    pub mu: f64,
    pub sigma: f64,
    pub candidates: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn summary(model: &DelayModel) -> DelaySummary {
    DelaySummary {
        mu: model.mu,
        sigma: model.sigma,
        candidates: model.candidates.clone(),
        weights: delay_weights(model),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn oracle_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
        (-(x - mu).powi(2) / (2.0 * sigma * sigma)).exp()
            / (sigma * (2.0 * std::f64::consts::PI).sqrt())
    }

    #[test]
    fn constant_history_single_candidate() {
        let m = fit_delay_model(&[5.0, 5.0, 5.0], 1, (1.0, 10.0)).unwrap();
        assert_eq!(m.mu, 5.0);
        assert_eq!(m.candidates, vec![5.0]);
        assert_eq!(delay_weights(&m), vec![1.0]);
    }

    #[test]
    fn fifteen_candidates_spacing() {
        let m = fit_delay_model(&[2.0, 9.0], 15, (1.0, 10.0)).unwrap();
        assert_eq!(m.candidates.len(), 15);
        assert_eq!(m.candidates[0], 1.0);
        assert_eq!(m.candidates[14], 10.0);
        for w in m.candidates.windows(2) {
            assert!((w[1] - w[0] - 9.0 / 14.0).abs() < 1e-12);
        }
    }

    #[test]
    fn monte_carlo_fit_recovers_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let dist = Normal::new(5.5, 2.0).unwrap();
        let mut samples = Vec::with_capacity(10_000);
        while samples.len() < 10_000 {
            let d: f64 = dist.sample(&mut rng);
            if (1.0..=10.0).contains(&d) {
                samples.push(d);
            }
        }
        let m = fit_delay_model(&samples, 3, (1.0, 10.0)).unwrap();
        assert!((m.mu - 5.5).abs() < 0.2, "mu {}", m.mu);
    }

    #[test]
    fn empty_history_is_an_error() {
        assert_eq!(
            fit_delay_model(&[], 3, (1.0, 10.0)).unwrap_err(),
            DelayError::EmptyHistory
        );
    }

    #[test]
    fn symmetric_pair_splits_evenly() {
        let m = DelayModel {
            range: (1.0, 10.0),
            candidates: vec![3.0, 7.0],
            mu: 5.0,
            sigma: 1.3,
        };
        assert_eq!(delay_weights(&m), vec![0.5, 0.5]);
    }

    #[test]
    fn weights_match_density_oracle() {
        let m = DelayModel {
            range: (1.0, 10.0),
            candidates: (1..=10).map(f64::from).collect(),
            mu: 5.5,
            sigma: 2.0,
        };
        let w = delay_weights(&m);
        let dens: Vec<f64> = m
            .candidates
            .iter()
            .map(|&t| oracle_pdf(t, 5.5, 2.0))
            .collect();
        let total: f64 = dens.iter().sum();
        for (a, d) in w.iter().zip(&dens) {
            assert!((a - d / total).abs() < 1e-12);
        }
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn narrow_gaussian_concentrates_on_nearest() {
        let m = DelayModel::new((1.0, 10.0), 3, 5.4, 1e-6).unwrap();
        assert_eq!(delay_weights(&m), vec![0.0, 1.0, 0.0]);
        assert_eq!(m.nearest_candidate(), 1);
    }

    #[test]
    fn degenerate_sigma_is_uniform() {
        let m = DelayModel::new((1.0, 10.0), 4, 5.0, 0.0).unwrap();
        assert_eq!(delay_weights(&m), vec![0.25; 4]);
    }

    #[test]
    fn compose_examples() {
        let q = compose_command(&[vec![0.1], vec![0.3]], &[0.5, 0.5], &[1.0]).unwrap();
        assert!((q[0] - 0.2).abs() < 1e-15);
        let same =
            compose_command(&vec![vec![0.1, -0.2]; 3], &[0.2, 0.3, 0.5], &[1.0, 1.0]).unwrap();
        assert!((same[0] - 0.1).abs() < 1e-15 && (same[1] + 0.2).abs() < 1e-15);
        assert!(matches!(
            compose_command(&[vec![0.1], vec![0.1, 0.2]], &[0.5, 0.5], &[1.0]),
            Err(DelayError::Length { .. })
        ));
        assert!(compose_command(&[vec![0.1]], &[0.5, 0.5], &[1.0]).is_err());
    }

    #[test]
    fn composition_stays_in_box_and_hull() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let n = rng.random_range(1..6);
            let d = rng.random_range(1..4);
            let limits: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..1.0)).collect();
            let cmds: Vec<Vec<f64>> = (0..n)
                .map(|_| limits.iter().map(|&l| rng.random_range(-l..=l)).collect())
                .collect();
            let m = DelayModel::new(
                (1.0, 10.0),
                n,
                rng.random_range(1.0..10.0),
                rng.random_range(0.1..4.0),
            )
            .unwrap();
            let w = delay_weights(&m);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let q = compose_command(&cmds, &w, &limits).unwrap();
            for i in 0..d {
                assert!(q[i].abs() <= limits[i]);
                let lo = cmds.iter().map(|c| c[i]).fold(f64::INFINITY, f64::min);
                let hi = cmds.iter().map(|c| c[i]).fold(f64::NEG_INFINITY, f64::max);
                assert!(q[i] >= lo - 1e-12 && q[i] <= hi + 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn composition_is_linear(
            a in -2.0f64..2.0,
            q in proptest::collection::vec(-0.2f64..0.2, 3),
            r in proptest::collection::vec(-0.2f64..0.2, 3),
        ) {
            let w = [0.2, 0.5, 0.3];
            let lim = [10.0];
            let cq: Vec<Vec<f64>> = q.iter().map(|&x| vec![x]).collect();
            let cr: Vec<Vec<f64>> = r.iter().map(|&x| vec![x]).collect();
            let mix: Vec<Vec<f64>> = q.iter().zip(&r).map(|(&x, &y)| vec![a * x + y]).collect();
            let lhs = compose_command(&mix, &w, &lim).unwrap()[0];
            let rhs = a * compose_command(&cq, &w, &lim).unwrap()[0] + compose_command(&cr, &w, &lim).unwrap()[0];
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn history_parsing() {
        assert_eq!(
            parse_delay_history("delay_s\n1.5\n\n# x\n3\n").unwrap(),
            vec![1.5, 3.0]
        );
        assert!(parse_delay_history("1\nfoo\n").is_err());
    }
}
