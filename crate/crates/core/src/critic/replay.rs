use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// One stored experience: encoded state, encoded action and the observed reward (ms).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    /// Delay threshold the reward is judged against when computing the training target.
    pub threshold: f64,
}

/// Bounded FIFO of transitions; the oldest entry is evicted once full.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    buffer: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayMemory {
            buffer: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.buffer.iter()
    }

    /// Uniform sample of `n` distinct transitions, or `None` while fewer than `n` are stored.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Option<Vec<&Transition>> {
        if self.buffer.len() < n {
            return None;
        }
        let idx = rand::seq::index::sample(rng, self.buffer.len(), n);
        Some(idx.iter().map(|i| &self.buffer[i]).collect())
    }
}
