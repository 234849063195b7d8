use rand::Rng;

use crate::env::PerSample;

/// One stored step. `obs[m][j]` is agent m's observation of sample j.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub next_state: Vec<f64>,
    /// Executed joint action (ratios of the worst-case sample).
    pub action: Vec<f64>,
    pub reward: f64,
    /// Shaping term F(S, S').
    pub shaping: f64,
    pub obs: Vec<PerSample<Vec<f64>>>,
    pub next_obs: Vec<PerSample<Vec<f64>>>,
}

/// Fixed-capacity ring buffer with uniform sampling (with replacement).
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
    rejected: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(4096)),
            next: 0,
            rejected: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Transitions refused because the step did not converge.
    pub fn rejected(&self) -> usize {
        self.rejected
    }

    /// Stores `t` if `done`; returns whether it was stored.
    pub fn push(&mut self, t: Transition, done: bool) -> bool {
        if !done {
            self.rejected += 1;
            return false;
        }
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        true
    }

    pub fn sample<'a>(&'a self, n: usize, rng: &mut impl Rng) -> Vec<&'a Transition> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(r: f64) -> Transition {
        Transition {
            state: vec![r],
            next_state: vec![r],
            action: vec![],
            reward: r,
            shaping: 0.0,
            obs: vec![],
            next_obs: vec![],
        }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(3);
        for k in 0..5 {
            assert!(b.push(tr(k as f64), true));
        }
        let mut r: Vec<f64> = b.iter().map(|t| t.reward).collect();
        r.sort_by(f64::total_cmp);
        assert_eq!(r, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn refuses_unconverged() {
        let mut b = ReplayBuffer::new(3);
        assert!(!b.push(tr(1.0), false));
        assert!(b.is_empty());
        assert_eq!(b.rejected(), 1);
    }

    #[test]
    fn sampling_is_seeded() {
        let mut b = ReplayBuffer::new(100);
        for k in 0..50 {
            b.push(tr(k as f64), true);
        }
        let a: Vec<f64> = b
            .sample(32, &mut ChaCha8Rng::seed_from_u64(1))
            .iter()
            .map(|t| t.reward)
            .collect();
        let c: Vec<f64> = b
            .sample(32, &mut ChaCha8Rng::seed_from_u64(1))
            .iter()
            .map(|t| t.reward)
            .collect();
        assert_eq!(a, c);
        assert_eq!(a.len(), 32);
    }
}
