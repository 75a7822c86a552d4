//! Per-server actors with centralized critics.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::action::DiscreteAction;
use super::dqn::{argmax, QNetwork};
use super::noise::{OuNoise, OuParams};
use super::replay::Transition;
use crate::nn::{clip_grad_norm, soft_update, Activation, Adam, Mat, Mlp};

/// Sizes shared by every agent of one network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub num_servers: usize,
    pub actor_state: usize,
    pub critic_state: usize,
    /// Number of target subsets.
    pub discrete: usize,
    /// Width of one continuous action.
    pub continuous: usize,
}

impl Dims {
    pub fn actor_input(&self) -> usize {
        self.actor_state + self.discrete
    }

    /// One agent's slice of the joint action: one-hot subset then ratios.
    pub fn agent_action(&self) -> usize {
        self.discrete + self.continuous
    }

    pub fn critic_input(&self) -> usize {
        self.critic_state + self.num_servers * self.agent_action()
    }

    /// Offset of agent `j`'s continuous ratios inside the critic input.
    pub fn continuous_offset(&self, j: usize) -> usize {
        self.critic_state + j * self.agent_action() + self.discrete
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdpgAgent {
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub critic: Mlp,
    pub critic_target: Mlp,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
    pub noise: OuNoise,
}

/// Losses reported by one DDPG update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DdpgLoss {
    pub critic: f64,
    /// Mean critic value of the current policy's actions over the rows where
    /// the agent was active.
    pub actor_objective: f64,
}

/// Hyperparameters of one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdpgStep {
    pub gamma: f64,
    pub tau: f64,
    pub max_grad_norm: f64,
}

fn actor_input(state: &[f64], discrete: DiscreteAction, dims: &Dims) -> Vec<f64> {
    let mut v = Vec::with_capacity(dims.actor_input());
    v.extend_from_slice(state);
    v.extend(discrete.one_hot(dims.discrete));
    v
}

impl DdpgAgent {
    pub fn new<R: Rng + ?Sized>(dims: &Dims, hidden: &[usize], lr: f64, ou: OuParams, rng: &mut R) -> Self {
        let sizes = |input: usize, output: usize| {
            let mut s = vec![input];
            s.extend_from_slice(hidden);
            s.push(output);
            s
        };
        let actor = Mlp::new(&sizes(dims.actor_input(), dims.continuous), Activation::Sigmoid, 3e-3, rng);
        let critic = Mlp::new(&sizes(dims.critic_input(), 1), Activation::Identity, 3e-3, rng);
        Self {
            actor_opt: Adam::new(actor.num_params(), lr),
            critic_opt: Adam::new(critic.num_params(), lr),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            noise: OuNoise::new(dims.continuous, ou),
        }
    }

    /// Noise-free ratios for a local state and chosen target set.
    pub fn raw_action(&self, state: &[f64], discrete: DiscreteAction, dims: &Dims) -> Vec<f64> {
        let x = actor_input(state, discrete, dims);
        self.actor.forward(&Mat::from_vec(1, x.len(), x)).data
    }
}

/// Critic input for one transition row with the given per-agent actions.
fn critic_row(state: &[f64], active: &[bool], discrete: &[DiscreteAction], continuous: &[Vec<f64>], dims: &Dims) -> Vec<f64> {
    let mut v = Vec::with_capacity(dims.critic_input());
    v.extend_from_slice(state);
    for j in 0..dims.num_servers {
        v.extend(Transition::encode_action(active[j], discrete[j], &continuous[j], dims.discrete));
    }
    v
}

/// Gradient of the critic's value with respect to its whole input
/// (state then joint action) at one point.
pub fn critic_input_gradient(critic: &Mlp, input: &[f64]) -> Vec<f64> {
    let cache = critic.forward_cached(&Mat::from_vec(1, input.len(), input.to_vec()));
    let mut scratch = critic.zero_grads();
    critic.backward(&cache, &Mat::from_vec(1, 1, vec![1.0]), &mut scratch).data
}

/// Centralized update of agent `i`: critic regression toward
/// `r + γ · Q_target(s', a')` with `a'` from the greedy selector and every
/// agent's target actor, then a policy-gradient step for the actor on the
/// rows where agent `i` acted, then soft target updates.
pub fn train_agent(
    agents: &mut [DdpgAgent],
    i: usize,
    selector: &QNetwork,
    batch: &[&Transition],
    dims: &Dims,
    step: DdpgStep,
) -> DdpgLoss {
    if batch.is_empty() {
        return DdpgLoss::default();
    }
    let n = batch.len();
    let m = dims.num_servers;

    // target joint actions at s', batched per agent
    let mut next_discrete = vec![vec![DiscreteAction::LOCAL_ONLY; m]; n];
    let mut next_continuous = vec![vec![vec![0.0; dims.continuous]; m]; n];
    for j in 0..m {
        let rows: Vec<usize> = (0..n).filter(|&r| batch[r].next_active[j]).collect();
        if rows.is_empty() {
            continue;
        }
        let states = Mat::from_rows(&rows.iter().map(|&r| batch[r].next_actor_states[j].as_slice()).collect::<Vec<_>>());
        let q = selector.net.forward(&states);
        let inputs: Vec<Vec<f64>> = rows
            .iter()
            .enumerate()
            .map(|(k, &r)| {
                let d = DiscreteAction(argmax(q.row(k)));
                next_discrete[r][j] = d;
                actor_input(&batch[r].next_actor_states[j], d, dims)
            })
            .collect();
        let out = agents[j].actor_target.forward(&Mat::from_rows(&inputs));
        for (k, &r) in rows.iter().enumerate() {
            next_continuous[r][j] = out.row(k).to_vec();
        }
    }
    let next_rows: Vec<Vec<f64>> = batch
        .iter()
        .enumerate()
        .map(|(r, t)| critic_row(&t.next_critic_state, &t.next_active, &next_discrete[r], &next_continuous[r], dims))
        .collect();
    let agent = &mut agents[i];
    let next_q = agent.critic_target.forward(&Mat::from_rows(&next_rows));

    // critic
    let rows: Vec<Vec<f64>> = batch
        .iter()
        .map(|t| critic_row(&t.critic_state, &t.active, &t.discrete, &t.continuous, dims))
        .collect();
    let cache = agent.critic.forward_cached(&Mat::from_rows(&rows));
    let q = cache.output();
    let mut grad = Mat::zeros(n, 1);
    let mut critic_loss = 0.0;
    for (r, t) in batch.iter().enumerate() {
        let err = q.data[r] - (t.reward + step.gamma * next_q.data[r]);
        critic_loss += 0.5 * err * err;
        grad.data[r] = err / n as f64;
    }
    let mut grads = agent.critic.zero_grads();
    agent.critic.backward(&cache, &grad, &mut grads);
    clip_grad_norm(&mut grads, step.max_grad_norm);
    agent.critic_opt.step(&mut agent.critic.params, &grads);

    // actor, on rows where this agent acted
    let acted: Vec<&Transition> = batch.iter().copied().filter(|t| t.active[i]).collect();
    let mut objective = 0.0;
    if !acted.is_empty() {
        let k = acted.len();
        let inputs: Vec<Vec<f64>> = acted.iter().map(|t| actor_input(&t.actor_states[i], t.discrete[i], dims)).collect();
        let actor_cache = agent.actor.forward_cached(&Mat::from_rows(&inputs));
        let policy = actor_cache.output();
        let mut rows: Vec<Vec<f64>> = acted
            .iter()
            .map(|t| critic_row(&t.critic_state, &t.active, &t.discrete, &t.continuous, dims))
            .collect();
        let off = dims.continuous_offset(i);
        for (r, row) in rows.iter_mut().enumerate() {
            row[off..off + dims.continuous].copy_from_slice(policy.row(r));
        }
        let critic_cache = agent.critic.forward_cached(&Mat::from_rows(&rows));
        objective = critic_cache.output().data.iter().sum::<f64>() / k as f64;
        let ascend = Mat::from_vec(k, 1, vec![-1.0 / k as f64; k]);
        let mut scratch = agent.critic.zero_grads();
        let d_input = agent.critic.backward(&critic_cache, &ascend, &mut scratch);
        let mut d_action = Mat::zeros(k, dims.continuous);
        for r in 0..k {
            d_action.row_mut(r).copy_from_slice(&d_input.row(r)[off..off + dims.continuous]);
        }
        let mut actor_grads = agent.actor.zero_grads();
        agent.actor.backward(&actor_cache, &d_action, &mut actor_grads);
        clip_grad_norm(&mut actor_grads, step.max_grad_norm);
        agent.actor_opt.step(&mut agent.actor.params, &actor_grads);
    }

    soft_update(&mut agent.actor_target.params, &agent.actor.params, step.tau);
    soft_update(&mut agent.critic_target.params, &agent.critic.params, step.tau);
    DdpgLoss { critic: critic_loss / n as f64, actor_objective: objective }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn dims() -> Dims {
        Dims { num_servers: 3, actor_state: 5, critic_state: 15, discrete: 4, continuous: 7 }
    }

    fn transition(r: &mut rng::Rng, d: &Dims, reward: f64) -> Transition {
        let v = |r: &mut rng::Rng, n: usize| (0..n).map(|_| r.random::<f64>()).collect::<Vec<_>>();
        Transition {
            critic_state: v(r, d.critic_state),
            actor_states: (0..3).map(|_| v(r, d.actor_state)).collect(),
            active: vec![true, false, true],
            discrete: vec![DiscreteAction(3), DiscreteAction::LOCAL_ONLY, DiscreteAction(1)],
            continuous: vec![v(r, 7), vec![0.0; 7], v(r, 7)],
            reward,
            next_critic_state: v(r, d.critic_state),
            next_actor_states: (0..3).map(|_| v(r, d.actor_state)).collect(),
            next_active: vec![false, true, true],
        }
    }

    fn setup(seed: u64, hidden: &[usize], lr: f64) -> (Vec<DdpgAgent>, QNetwork, Dims) {
        let d = dims();
        let mut r = rng::seeded(seed, 0);
        let agents = (0..3).map(|_| DdpgAgent::new(&d, hidden, lr, OuParams::default(), &mut r)).collect();
        let q = QNetwork::new(d.actor_state, hidden, d.discrete, lr, &mut r);
        (agents, q, d)
    }

    #[test]
    fn layout_offsets() {
        let d = dims();
        assert_eq!(d.critic_input(), 15 + 3 * 11);
        assert_eq!(d.continuous_offset(0), 19);
        assert_eq!(d.continuous_offset(2), 15 + 22 + 4);
    }

    #[test]
    fn critic_fits_single_transition_without_discount() {
        let (mut agents, q, d) = setup(1, &[32, 32], 1e-3);
        let mut r = rng::seeded(2, 0);
        let t = transition(&mut r, &d, 0.7);
        let step = DdpgStep { gamma: 0.0, tau: 0.005, max_grad_norm: 10.0 };
        for _ in 0..2000 {
            train_agent(&mut agents, 0, &q, &[&t], &d, step);
        }
        let row = critic_row(&t.critic_state, &t.active, &t.discrete, &t.continuous, &d);
        let v = agents[0].critic.forward(&Mat::from_vec(1, row.len(), row)).data[0];
        assert!((v - 0.7).abs() < 1e-2, "{v}");
    }

    #[test]
    fn unit_tau_copies_targets() {
        let (mut agents, q, d) = setup(3, &[8], 1e-2);
        let mut r = rng::seeded(4, 0);
        let t = transition(&mut r, &d, 0.3);
        train_agent(&mut agents, 2, &q, &[&t], &d, DdpgStep { gamma: 0.99, tau: 1.0, max_grad_norm: 10.0 });
        assert_eq!(agents[2].actor_target.params, agents[2].actor.params);
        assert_eq!(agents[2].critic_target.params, agents[2].critic.params);
        // agent 1 was untouched
        assert_eq!(agents[1].actor_target.params, agents[1].actor.params);
    }

    #[test]
    fn inactive_rows_leave_actor_unchanged() {
        let (mut agents, q, d) = setup(5, &[8], 1e-2);
        let mut r = rng::seeded(6, 0);
        let t = transition(&mut r, &d, 0.3);
        let before = agents[1].actor.params.clone();
        train_agent(&mut agents, 1, &q, &[&t], &d, DdpgStep { gamma: 0.99, tau: 0.005, max_grad_norm: 10.0 });
        assert_eq!(agents[1].actor.params, before);
    }

    #[test]
    fn action_gradient_matches_central_differences() {
        let (agents, _, d) = setup(7, &[32, 32], 1e-3);
        let mut r = rng::seeded(8, 0);
        for _ in 0..10 {
            let x: Vec<f64> = (0..d.critic_input()).map(|_| r.random::<f64>()).collect();
            let g = critic_input_gradient(&agents[0].critic, &x);
            let h = 1e-6;
            for j in d.critic_state..d.critic_input() {
                let eval = |delta: f64| {
                    let mut y = x.clone();
                    y[j] += delta;
                    agents[0].critic.forward(&Mat::from_vec(1, y.len(), y)).data[0]
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let scale = fd.abs().max(g[j].abs()).max(1e-8);
                assert!((fd - g[j]).abs() / scale < 1e-3 || (fd - g[j]).abs() < 1e-9, "{j}: {fd} vs {}", g[j]);
            }
        }
    }
}
