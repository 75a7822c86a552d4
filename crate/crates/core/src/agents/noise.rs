use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    /// Long-term mean.
    pub mu: f64,
    pub sigma: f64,
    /// Mean-reversion rate.
    pub beta: f64,
    /// Initial noise scale.
    pub scale: f64,
}

impl Default for OuParams {
    fn default() -> Self {
        Self { mu: 0.0, sigma: 0.3, beta: 1.0, scale: 1.0 }
    }
}

/// Ornstein-Uhlenbeck exploration noise, discretized with a unit step:
/// `x ← x + β(μ − x) + σ·N(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuNoise {
    pub params: OuParams,
    pub scale: f64,
    state: Vec<f64>,
}

impl OuNoise {
    pub fn new(dim: usize, params: OuParams) -> Self {
        Self { params, scale: params.scale, state: vec![params.mu; dim] }
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|x| *x = self.params.mu);
    }

    /// Advance the process one step and return `scale · x`.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<f64> {
        let p = self.params;
        for x in &mut self.state {
            let n: f64 = StandardNormal.sample(rng);
            *x += p.beta * (p.mu - *x) + p.sigma * n;
        }
        self.state.iter().map(|x| self.scale * x).collect()
    }

    pub fn decay(&mut self, factor: f64, floor: f64) {
        self.scale = (self.scale * factor).max(floor);
    }
}

/// Add exploration noise to raw actor outputs and clip into `[0, 1]`.
pub fn perturb(raw: &[f64], noise: &[f64]) -> Vec<f64> {
    raw.iter().zip(noise).map(|(a, n)| (a + n).clamp(0.0, 1.0)).collect()
}
