use alloc::collections::VecDeque;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::env::ObjectiveWeights;

/// Sliding windows of recent slot totals; the reference values are the
/// mean of the `k` smallest entries in each window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBaseline {
    window: usize,
    k: usize,
    latencies: VecDeque<f64>,
    energies: VecDeque<f64>,
    latency_ref: f64,
    energy_ref: f64,
}

fn mean_of_smallest(xs: &VecDeque<f64>, k: usize) -> f64 {
    let mut v: Vec<f64> = xs.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    let take = k.min(v.len()).max(1);
    v[..take].iter().sum::<f64>() / take as f64
}

impl RewardBaseline {
    pub fn new(window: usize, k: usize) -> Self {
        assert!(window >= 1 && k >= 1);
        Self {
            window,
            k,
            latencies: VecDeque::new(),
            energies: VecDeque::new(),
            latency_ref: 0.0,
            energy_ref: 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.latencies.is_empty()
    }

    /// `L*`.
    pub fn latency_ref(&self) -> f64 {
        self.latency_ref
    }

    /// `E*`.
    pub fn energy_ref(&self) -> f64 {
        self.energy_ref
    }

    pub fn latencies(&self) -> impl Iterator<Item = &f64> {
        self.latencies.iter()
    }

    pub fn energies(&self) -> impl Iterator<Item = &f64> {
        self.energies.iter()
    }

    /// Record a non-skipped slot and refresh the references.
    pub fn update(&mut self, total_latency: f64, total_energy: f64) {
        if self.latencies.len() == self.window {
            self.latencies.pop_front();
            self.energies.pop_front();
        }
        self.latencies.push_back(total_latency);
        self.energies.push_back(total_energy);
        self.latency_ref = mean_of_smallest(&self.latencies, self.k);
        self.energy_ref = mean_of_smallest(&self.energies, self.k);
    }
}

/// Team reward `λ·L*/L + ρ·E*/E`. A zero total, or an empty baseline, scores
/// its term as one.
pub fn compute_reward(total_latency: f64, total_energy: f64, baseline: &RewardBaseline, weights: &ObjectiveWeights) -> f64 {
    let term = |star: f64, total: f64| {
        if baseline.is_empty() || !(total > 0.0) || !(star > 0.0) {
            1.0
        } else {
            star / total
        }
    };
    weights.lambda_latency * term(baseline.latency_ref(), total_latency)
        + weights.rho_energy * term(baseline.energy_ref(), total_energy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_is_mean_of_minima() {
        let mut b = RewardBaseline::new(100, 2);
        for x in [3.0, 1.0, 5.0, 2.0, 4.0] {
            b.update(x, 10.0 * x);
        }
        assert_eq!(b.latency_ref(), 1.5);
        assert_eq!(b.energy_ref(), 15.0);

        let mut c = RewardBaseline::new(10, 5);
        (0..10).for_each(|_| c.update(2.5, 7.0));
        assert_eq!(c.latency_ref(), 2.5);

        let mut first = RewardBaseline::new(100, 5);
        first.update(0.8, 300.0);
        assert_eq!((first.latency_ref(), first.energy_ref()), (0.8, 300.0));
    }

    #[test]
    fn window_evicts_oldest() {
        let mut b = RewardBaseline::new(3, 1);
        for x in [0.1, 5.0, 6.0, 7.0] {
            b.update(x, x);
        }
        assert_eq!(b.latency_ref(), 5.0);
    }

    #[test]
    fn reward_examples() {
        let w = ObjectiveWeights::default();
        let mut b = RewardBaseline::new(100, 5);
        b.update(2.0, 400.0);
        assert_eq!(compute_reward(2.0, 400.0, &b, &w), 1.0);
        assert_eq!(compute_reward(4.0, 800.0, &b, &w), 0.5);
        assert!(compute_reward(3.0, 800.0, &b, &w) > compute_reward(4.0, 800.0, &b, &w));
        assert_eq!(compute_reward(0.0, 0.0, &b, &w), 1.0);
        assert_eq!(compute_reward(5.0, 5.0, &RewardBaseline::new(3, 1), &w), 1.0);
    }
}
