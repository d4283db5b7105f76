//! Fixed-capacity experience replay.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// One joint transition. Observations and actions are per agent, UAVs
/// first and the BS last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    /// Each agent's own reward.
    pub rewards: Vec<f64>,
    /// Reward of the global critics.
    pub global_reward: f64,
    pub next_obs: Vec<Vec<f64>>,
}

/// Ring buffer that overwrites its oldest entry once full.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: Vec::new(), next: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// `n` distinct transitions drawn uniformly (all of them if fewer are stored).
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<&Transition> {
        let n = n.min(self.items.len());
        sample(rng, self.items.len(), n).into_iter().map(|i| &self.items[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(i: usize) -> Transition {
        Transition {
            obs: vec![vec![i as f64]],
            actions: vec![],
            rewards: vec![],
            global_reward: i as f64,
            next_obs: vec![],
        }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(tr(i));
        }
        assert_eq!(b.len(), 3);
        let mut held: Vec<f64> = b.items.iter().map(|t| t.global_reward).collect();
        held.sort_by(f64::total_cmp);
        assert_eq!(held, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn sampling_is_distinct_and_seeded() {
        let mut b = ReplayBuffer::new(100);
        for i in 0..50 {
            b.push(tr(i));
        }
        let pick = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            b.sample(20, &mut rng).iter().map(|t| t.global_reward as usize).collect::<Vec<_>>()
        };
        let a = pick(7);
        assert_eq!(a, pick(7));
        let mut u = a.clone();
        u.sort();
        u.dedup();
        assert_eq!(u.len(), 20);
        assert_eq!(b.sample(80, &mut ChaCha8Rng::seed_from_u64(0)).len(), 50);
    }
}
