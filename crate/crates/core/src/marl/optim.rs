use serde::{Deserialize, Serialize};

/// Adam with bias correction. Descends along the supplied gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(
            params.len(),
            self.m.len(),
            "optimizer sized for a different network"
        );
        assert_eq!(grad.len(), self.m.len(), "gradient length");
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for k in 0..params.len() {
            let g = grad[k];
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[k] / c1;
            let v_hat = self.v[k] / c2;
            params[k] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Exploration standard deviation, decaying linearly from `initial` to
/// `floor` over `decay_steps` calls to [`NoiseSchedule::decay`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub initial: f64,
    pub floor: f64,
    pub decay_steps: usize,
    #[serde(default)]
    pub taken: usize,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self {
            initial: 0.1,
            floor: 0.02,
            decay_steps: 200,
            taken: 0,
        }
    }
}

impl NoiseSchedule {
    pub fn tau(&self) -> f64 {
        if self.decay_steps == 0 || self.taken >= self.decay_steps {
            return self.floor.min(self.initial);
        }
        let frac = self.taken as f64 / self.decay_steps as f64;
        (self.initial + (self.floor - self.initial) * frac).max(self.floor.min(self.initial))
    }

    pub fn decay(&mut self) {
        self.taken = self.taken.saturating_add(1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_adam_step_moves_by_lr() {
        // bias correction makes the first step ±lr regardless of scale
        for g in [1e-3, 1.0, 250.0] {
            let mut opt = Adam::new(1, 5e-4);
            let mut p = [1.0];
            opt.step(&mut p, &[g]);
            assert!((p[0] - (1.0 - 5e-4)).abs() < 1e-8, "{g}");
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut opt = Adam::new(2, 5e-4);
        let mut p = [0.3, -0.2];
        opt.step(&mut p, &[0.0, 0.0]);
        assert_eq!(p, [0.3, -0.2]);
    }

    #[test]
    fn minimises_a_quadratic() {
        let mut opt = Adam::new(1, 0.05);
        let mut p = [3.0];
        for _ in 0..2000 {
            let g = 2.0 * (p[0] - 1.0);
            opt.step(&mut p, &[g]);
        }
        assert!((p[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn noise_schedule() {
        let mut n = NoiseSchedule::default();
        assert_eq!(n.tau(), 0.1);
        let mut prev = n.tau();
        for _ in 0..300 {
            n.decay();
            assert!(n.tau() <= prev);
            prev = n.tau();
        }
        assert_eq!(n.tau(), 0.02);
        let mut half = NoiseSchedule::default();
        for _ in 0..100 {
            half.decay();
        }
        assert!((half.tau() - 0.06).abs() < 1e-15);
    }
}
