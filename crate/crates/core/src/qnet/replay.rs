use rand::Rng;
use thiserror::Error;

use crate::env::{Action, Observation};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Observation,
    pub action: Action,
    pub reward: f64,
    pub next_state: Observation,
    pub done: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("cannot sample from an empty replay buffer")]
    Empty,
}

/// Binary tree of partial sums over `capacity` non-negative leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        let leaves = capacity.max(1).next_power_of_two();
        Self { leaves, nodes: vec![0.0; 2 * leaves] }
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.leaves + i]
    }

    pub fn set(&mut self, i: usize, value: f64) {
        debug_assert!(value >= 0.0);
        let mut k = self.leaves + i;
        self.nodes[k] = value;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    /// Leaf whose cumulative range contains `mass` (`0 ≤ mass < total`).
    pub fn find(&self, mut mass: f64) -> usize {
        let mut k = 1;
        while k < self.leaves {
            let left = self.nodes[2 * k];
            if mass < left || self.nodes[2 * k + 1] <= 0.0 {
                k *= 2;
            } else {
                mass -= left;
                k = 2 * k + 1;
            }
        }
        k - self.leaves
    }
}

/// A sampled minibatch: buffer indices and max-normalised importance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Proportional prioritised replay over a ring buffer.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    data: Vec<Transition>,
    next: usize,
    tree: SumTree,
    alpha: f64,
    epsilon_priority: f64,
    max_priority: f64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, alpha: f64, epsilon_priority: f64) -> Self {
        assert!(capacity >= 1, "replay capacity must be positive");
        assert!(epsilon_priority > 0.0, "priority epsilon must be positive");
        Self {
            capacity,
            data: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
            tree: SumTree::new(capacity),
            alpha,
            epsilon_priority,
            max_priority: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.data[i]
    }

    /// Raw priority `p_i` (before the `α` exponent).
    pub fn priority(&self, i: usize) -> f64 {
        self.tree.get(i).powf(1.0 / self.alpha.max(f64::MIN_POSITIVE))
    }

    /// Sampling probability `p_i^α / Σ p^α`.
    pub fn probability(&self, i: usize) -> f64 {
        self.tree.get(i) / self.tree.total()
    }

    /// Stores `t` with the current maximum priority, overwriting the oldest
    /// entry once full. Returns the slot index.
    pub fn push(&mut self, t: Transition) -> usize {
        let slot = self.next;
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[slot] = t;
        }
        self.tree.set(slot, self.max_priority.powf(self.alpha));
        self.next = (self.next + 1) % self.capacity;
        slot
    }

    pub fn sample<R: Rng>(&self, batch_size: usize, beta: f64, rng: &mut R) -> Result<Sample, ReplayError> {
        if self.data.is_empty() {
            return Err(ReplayError::Empty);
        }
        let total = self.tree.total();
        let n = self.data.len() as f64;
        let mut indices = Vec::with_capacity(batch_size);
        let mut weights = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            let mass = rng.random::<f64>() * total;
            let i = self.tree.find(mass).min(self.data.len() - 1);
            indices.push(i);
            weights.push((n * self.tree.get(i) / total).powf(-beta));
        }
        let max = weights.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
        weights.iter_mut().for_each(|w| *w /= max);
        Ok(Sample { indices, weights })
    }

    /// Sets `p_i = |δ_i| + ε` for each sampled index.
    pub fn update_priorities(&mut self, indices: &[usize], td_errors: &[f64]) {
        for (&i, &d) in indices.iter().zip(td_errors) {
            let p = d.abs() + self.epsilon_priority;
            self.max_priority = self.max_priority.max(p);
            self.tree.set(i, p.powf(self.alpha));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(reward: f64) -> Transition {
        Transition {
            state: Observation::zeros(1),
            action: Action::Idle,
            reward,
            next_state: Observation::zeros(1),
            done: false,
        }
    }

    #[test]
    fn sum_tree_find() {
        let mut tree = SumTree::new(3);
        tree.set(0, 1.0);
        tree.set(1, 2.0);
        tree.set(2, 3.0);
        assert_eq!(tree.total(), 6.0);
        assert_eq!(tree.find(0.5), 0);
        assert_eq!(tree.find(1.0), 1);
        assert_eq!(tree.find(2.9), 1);
        assert_eq!(tree.find(3.0), 2);
        assert_eq!(tree.find(5.999), 2);
    }

    #[test]
    fn empty_buffer_errors() {
        let b = ReplayBuffer::new(4, 0.6, 1e-3);
        assert_eq!(b.sample(1, 0.4, &mut ChaCha8Rng::seed_from_u64(0)), Err(ReplayError::Empty));
    }

    #[test]
    fn capacity_one_returns_sole_element() {
        let mut b = ReplayBuffer::new(1, 0.6, 1e-3);
        b.push(t(1.0));
        b.push(t(2.0));
        assert_eq!(b.len(), 1);
        let s = b.sample(5, 0.4, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(s.indices.iter().all(|&i| b.get(i).reward == 2.0));
        assert!(s.weights.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn new_entries_get_max_priority() {
        let mut b = ReplayBuffer::new(4, 1.0, 1e-3);
        b.push(t(0.0));
        b.update_priorities(&[0], &[4.0]);
        b.push(t(1.0));
        assert!((b.priority(1) - 4.001).abs() < 1e-12);
    }
}
