//! Shared target-set selector trained with Q-learning.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::action::DiscreteAction;
use crate::nn::{clip_grad_norm, soft_update, Activation, Adam, Mat, Mlp};

/// One agent's view of a team step, as the selector learns from it.
#[derive(Debug, Clone, PartialEq)]
pub struct DqnSample<'a> {
    pub state: &'a [f64],
    pub action: DiscreteAction,
    pub reward: f64,
    pub next_state: &'a [f64],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    pub net: Mlp,
    pub target: Mlp,
    pub opt: Adam,
}

/// First index of the largest value.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

impl QNetwork {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, hidden: &[usize], actions: usize, lr: f64, rng: &mut R) -> Self {
        let mut sizes = alloc::vec![state_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(actions);
        let net = Mlp::new(&sizes, Activation::Identity, 1e-3, rng);
        let opt = Adam::new(net.num_params(), lr);
        Self { target: net.clone(), net, opt }
    }

    pub fn num_actions(&self) -> usize {
        self.net.output_dim()
    }

    pub fn q_values(&self, state: &[f64]) -> Vec<f64> {
        self.net.forward(&Mat::from_vec(1, state.len(), state.to_vec())).data
    }

    pub fn greedy(&self, state: &[f64]) -> DiscreteAction {
        DiscreteAction(argmax(&self.q_values(state)))
    }

    /// Epsilon-greedy: a uniform index with probability `exploration_rate`,
    /// otherwise the first maximizer of the Q-values.
    pub fn select<R: Rng + ?Sized>(&self, state: &[f64], exploration_rate: f64, rng: &mut R) -> DiscreteAction {
        if exploration_rate > 0.0 && rng.random::<f64>() < exploration_rate {
            DiscreteAction(rng.random_range(0..self.num_actions()))
        } else {
            self.greedy(state)
        }
    }

    /// One gradient step on the mean squared Bellman error against
    /// `r + γ · max Q_target(s')`, then a soft target update. Returns the
    /// loss; an empty batch is a no-op returning zero.
    pub fn train(&mut self, batch: &[DqnSample<'_>], gamma: f64, tau: f64, max_grad_norm: f64) -> f64 {
        if batch.is_empty() {
            return 0.0;
        }
        let n = batch.len();
        let s = Mat::from_rows(&batch.iter().map(|b| b.state).collect::<Vec<_>>());
        let next = Mat::from_rows(&batch.iter().map(|b| b.next_state).collect::<Vec<_>>());
        let next_q = self.target.forward(&next);
        let cache = self.net.forward_cached(&s);
        let q = cache.output();
        let mut grad = Mat::zeros(n, q.cols);
        let mut loss = 0.0;
        for (i, b) in batch.iter().enumerate() {
            let best = next_q.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let y = b.reward + gamma * best;
            let err = q.at(i, b.action.0) - y;
            loss += 0.5 * err * err;
            grad.row_mut(i)[b.action.0] = err / n as f64;
        }
        let mut grads = self.net.zero_grads();
        self.net.backward(&cache, &grad, &mut grads);
        clip_grad_norm(&mut grads, max_grad_norm);
        self.opt.step(&mut self.net.params, &grads);
        soft_update(&mut self.target.params, &self.net.params, tau);
        loss / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn greedy_picks_first_maximum() {
        assert_eq!(argmax(&[0.1, 0.9, 0.2, 0.3]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        let scaled: Vec<f64> = [0.1, 0.9, 0.2, 0.3].iter().map(|q| q * 7.5).collect();
        assert_eq!(argmax(&scaled), 1);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut r = rng::seeded(3, 0);
        let q = QNetwork::new(5, &[8], 4, 1e-3, &mut r);
        let mut counts = [0usize; 4];
        let n = 10_000;
        for _ in 0..n {
            counts[q.select(&[0.0; 5], 1.0, &mut r).0] += 1;
        }
        let expected = n as f64 / 4.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 99.9th percentile of chi-square with 3 degrees of freedom
        assert!(chi2 < 16.27, "{chi2} {counts:?}");
    }

    #[test]
    fn fixed_point_with_zero_discount() {
        let mut r = rng::seeded(4, 0);
        let mut q = QNetwork::new(2, &[16, 16], 3, 1e-2, &mut r);
        let states = [[0.2, 0.7], [0.9, 0.1]];
        let data = [(0usize, 0usize, 0.3), (0, 2, 0.8), (1, 1, -0.4)];
        for _ in 0..3000 {
            let batch: Vec<DqnSample> = data
                .iter()
                .map(|&(s, a, rw)| DqnSample { state: &states[s], action: DiscreteAction(a), reward: rw, next_state: &states[s] })
                .collect();
            q.train(&batch, 0.0, 0.005, 10.0);
        }
        for &(s, a, rw) in &data {
            let v = q.q_values(&states[s])[a];
            assert!((v - rw).abs() < 1e-2, "{v} vs {rw}");
        }
    }

    #[test]
    fn hard_copy_limit() {
        let mut r = rng::seeded(5, 0);
        let mut q = QNetwork::new(2, &[4], 2, 1e-2, &mut r);
        let s = [0.5, 0.5];
        q.train(&[DqnSample { state: &s, action: DiscreteAction(1), reward: 1.0, next_state: &s }], 0.9, 1.0, 10.0);
        assert_eq!(q.target.params, q.net.params);
    }
}
