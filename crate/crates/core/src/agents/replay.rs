use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::action::DiscreteAction;

/// One team step: global and local views before and after, every agent's
/// action (exact zeros for agents without work), and the shared reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub critic_state: Vec<f64>,
    pub actor_states: Vec<Vec<f64>>,
    pub active: Vec<bool>,
    pub discrete: Vec<DiscreteAction>,
    pub continuous: Vec<Vec<f64>>,
    pub reward: f64,
    pub next_critic_state: Vec<f64>,
    pub next_actor_states: Vec<Vec<f64>>,
    pub next_active: Vec<bool>,
}

impl Transition {
    pub fn num_agents(&self) -> usize {
        self.active.len()
    }

    /// Every per-agent field has one entry per agent, inactive agents carry
    /// zero actions and the reward is finite.
    pub fn is_complete(&self) -> bool {
        let m = self.active.len();
        let inactive_zero = (0..m).all(|j| {
            self.active[j] || (self.discrete[j] == DiscreteAction::LOCAL_ONLY && self.continuous[j].iter().all(|x| *x == 0.0))
        });
        m > 0
            && self.actor_states.len() == m
            && self.discrete.len() == m
            && self.continuous.len() == m
            && self.next_actor_states.len() == m
            && self.next_active.len() == m
            && self.reward.is_finite()
            && inactive_zero
    }

    /// Critic-side encoding of agent `j`'s action: one-hot target set (all
    /// zeros when inactive) followed by the continuous ratios.
    pub fn encode_action(active: bool, discrete: DiscreteAction, continuous: &[f64], space: usize) -> Vec<f64> {
        let mut v = alloc::vec![0.0; space];
        if active {
            v[discrete.0] = 1.0;
        }
        v.extend_from_slice(continuous);
        v
    }

    pub fn joint_action(&self, space: usize) -> Vec<f64> {
        (0..self.num_agents())
            .flat_map(|j| Self::encode_action(self.active[j], self.discrete[j], &self.continuous[j], space))
            .collect()
    }
}

/// Bounded FIFO ring with uniform sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: VecDeque<T>,
}

impl<T: Clone> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: VecDeque::new() }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
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

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    /// `n` draws with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<T> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| self.items[rng.random_range(0..self.items.len())].clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn ring_semantics() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..4 {
            b.push(i);
        }
        assert_eq!(b.iter().copied().collect::<Vec<_>>(), alloc::vec![1, 2, 3]);
        let mut one = ReplayBuffer::new(1);
        one.push(7);
        let mut r = rng::seeded(0, 0);
        assert_eq!(one.sample(5, &mut r), alloc::vec![7; 5]);
        assert!(ReplayBuffer::<u8>::new(2).sample(3, &mut r).is_empty());
    }
}
