//! The asynchronous hybrid learner: a shared Q-network picks target sets,
//! per-server actor-critics pick ratios, and only servers with work act.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::action::{ContinuousAction, DiscreteAction, HybridAction};
use super::ddpg::{train_agent, DdpgAgent, DdpgStep, Dims};
use super::dqn::{DqnSample, QNetwork};
use super::noise::{perturb, OuParams};
use super::replay::{ReplayBuffer, Transition};
use super::state::{actor_state_dim, critic_state_dim, Observation};
use crate::env::Topology;
use crate::error::{Error, Result};
use crate::rng::{self, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    /// Hidden layer widths of the Q-network, actors and critics.
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Q-network target mixing rate.
    pub tau_q: f64,
    /// Actor and critic target mixing rate.
    pub tau_ddpg: f64,
    pub gamma: f64,
    /// Largest share of any capacity one decision may claim.
    pub kappa: f64,
    pub ou: OuParams,
    pub epsilon_start: f64,
    pub epsilon_min: f64,
    /// Per-training-step factor applied to epsilon and the noise scale.
    pub exploration_decay: f64,
    pub noise_floor: f64,
    /// Every this many training iterations an agent replays from the global
    /// buffer instead of its own.
    pub sync_period: usize,
    pub independent_capacity: usize,
    pub global_capacity: usize,
    /// Slots of act-and-store before any gradient update.
    pub observation_steps: u64,
    pub max_grad_norm: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            learning_rate: 5e-4,
            batch_size: 300,
            tau_q: 0.005,
            tau_ddpg: 0.005,
            gamma: 0.99,
            kappa: 0.4,
            ou: OuParams::default(),
            epsilon_start: 1.0,
            epsilon_min: 0.01,
            exploration_decay: 0.9995,
            noise_floor: 0.01,
            sync_period: 10,
            independent_capacity: 50_000,
            global_capacity: 150_000,
            observation_steps: 5000,
            max_grad_norm: 10.0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(alloc::format!("agent config: {what}")));
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.sync_period == 0 {
            return bad("batch_size and sync_period must be positive");
        }
        if self.independent_capacity == 0 || self.global_capacity == 0 {
            return bad("buffer capacities must be positive");
        }
        for (name, tau) in [("tau_q", self.tau_q), ("tau_ddpg", self.tau_ddpg)] {
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(Error::Config(alloc::format!("agent config: {name} must lie in (0, 1]")));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return bad("gamma must lie in [0, 1] and kappa in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_min) {
            return bad("epsilon bounds must lie in [0, 1]");
        }
        if !(self.exploration_decay > 0.0 && self.exploration_decay <= 1.0) {
            return bad("exploration_decay must lie in (0, 1]");
        }
        Ok(())
    }
}

/// What one call to [`HybridLearner::learn`] did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LearnReport {
    pub dqn_updates: usize,
    pub ddpg_updates: usize,
}

/// Network parameters and exploration state, without replay contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerCheckpoint {
    pub config: AgentConfig,
    pub dims: Dims,
    pub selector: QNetwork,
    pub agents: Vec<DdpgAgent>,
    pub epsilon: f64,
    pub training_iterations: Vec<u64>,
}

pub struct HybridLearner {
    config: AgentConfig,
    dims: Dims,
    selector: QNetwork,
    agents: Vec<DdpgAgent>,
    independent: Vec<ReplayBuffer<Arc<Transition>>>,
    global: ReplayBuffer<(Arc<Transition>, usize)>,
    epsilon: f64,
    training_iterations: Vec<u64>,
    policy_rng: rng::Rng,
    noise_rng: rng::Rng,
    replay_rng: rng::Rng,
}

impl HybridLearner {
    pub fn new(topology: &Topology, config: AgentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let m = topology.num_servers();
        if m < 2 {
            return Err(Error::Topology("the learner needs at least two servers".into()));
        }
        let dims = Dims {
            num_servers: m,
            actor_state: actor_state_dim(m),
            critic_state: critic_state_dim(m, topology.num_links()),
            discrete: DiscreteAction::space_size(m),
            continuous: ContinuousAction::dim(m),
        };
        let mut init = rng::seeded(seed, stream::INIT);
        let selector = QNetwork::new(dims.actor_state, &config.hidden, dims.discrete, config.learning_rate, &mut init);
        let agents = (0..m)
            .map(|_| DdpgAgent::new(&dims, &config.hidden, config.learning_rate, config.ou, &mut init))
            .collect();
        Ok(Self {
            dims,
            selector,
            agents,
            independent: (0..m).map(|_| ReplayBuffer::new(config.independent_capacity)).collect(),
            global: ReplayBuffer::new(config.global_capacity),
            epsilon: config.epsilon_start,
            training_iterations: vec![0; m],
            policy_rng: rng::seeded(seed, stream::POLICY),
            noise_rng: rng::seeded(seed, stream::NOISE),
            replay_rng: rng::seeded(seed, stream::REPLAY),
            config,
        })
    }

    /// Rebuild from saved parameters with empty replay buffers.
    pub fn from_checkpoint(cp: LearnerCheckpoint, seed: u64) -> Result<Self> {
        cp.config.validate()?;
        let m = cp.dims.num_servers;
        Ok(Self {
            independent: (0..m).map(|_| ReplayBuffer::new(cp.config.independent_capacity)).collect(),
            global: ReplayBuffer::new(cp.config.global_capacity),
            dims: cp.dims,
            selector: cp.selector,
            agents: cp.agents,
            epsilon: cp.epsilon,
            training_iterations: cp.training_iterations,
            policy_rng: rng::seeded(seed, stream::POLICY),
            noise_rng: rng::seeded(seed, stream::NOISE),
            replay_rng: rng::seeded(seed, stream::REPLAY),
            config: cp.config,
        })
    }

    pub fn checkpoint(&self) -> LearnerCheckpoint {
        LearnerCheckpoint {
            config: self.config.clone(),
            dims: self.dims,
            selector: self.selector.clone(),
            agents: self.agents.clone(),
            epsilon: self.epsilon,
            training_iterations: self.training_iterations.clone(),
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn selector(&self) -> &QNetwork {
        &self.selector
    }

    pub fn agents(&self) -> &[DdpgAgent] {
        &self.agents
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Current OU noise scale (identical across agents).
    pub fn noise_scale(&self) -> f64 {
        self.agents[0].noise.scale
    }

    pub fn independent_buffer(&self, agent: usize) -> &ReplayBuffer<Arc<Transition>> {
        &self.independent[agent]
    }

    pub fn global_buffer(&self) -> &ReplayBuffer<(Arc<Transition>, usize)> {
        &self.global
    }

    /// Actions for every server: servers with work explore around their
    /// current policy, idle servers contribute the zero action.
    pub fn act(&mut self, obs: &Observation) -> Vec<HybridAction> {
        let m = self.dims.num_servers;
        (0..m)
            .map(|j| {
                if !obs.active[j] {
                    return HybridAction::zero(m);
                }
                let s = &obs.actor_states[j];
                let discrete = self.selector.select(s, self.epsilon, &mut self.policy_rng);
                let agent = &mut self.agents[j];
                let raw = agent.raw_action(s, discrete, &self.dims);
                let noise = agent.noise.sample(&mut self.noise_rng);
                HybridAction { discrete, continuous: ContinuousAction::from_slice(&perturb(&raw, &noise), m) }
            })
            .collect()
    }

    /// Store a completed team step and, once past the observation phase,
    /// train: the selector from the global buffer, and every agent that acted
    /// from its own buffer (or the global one on synchronization turns).
    pub fn learn(&mut self, transition: Transition, step: u64) -> LearnReport {
        let t = Arc::new(transition);
        let acted: Vec<usize> = (0..self.dims.num_servers).filter(|&j| t.active[j]).collect();
        for &j in &acted {
            self.independent[j].push(t.clone());
            self.global.push((t.clone(), j));
        }
        let mut report = LearnReport::default();
        if step < self.config.observation_steps || acted.is_empty() {
            return report;
        }
        let batch = self.config.batch_size;

        if self.global.len() >= batch {
            let drawn = self.global.sample(batch, &mut self.replay_rng);
            let samples: Vec<DqnSample> = drawn
                .iter()
                .map(|(t, j)| DqnSample {
                    state: &t.actor_states[*j],
                    action: t.discrete[*j],
                    reward: t.reward,
                    next_state: &t.next_actor_states[*j],
                })
                .collect();
            self.selector.train(&samples, self.config.gamma, self.config.tau_q, self.config.max_grad_norm);
            report.dqn_updates += 1;
        }

        let ddpg = DdpgStep { gamma: self.config.gamma, tau: self.config.tau_ddpg, max_grad_norm: self.config.max_grad_norm };
        for &j in &acted {
            self.training_iterations[j] += 1;
            let sync = self.training_iterations[j] % self.config.sync_period as u64 == 0;
            let drawn: Vec<Arc<Transition>> = if sync {
                if self.global.len() < batch {
                    continue;
                }
                self.global.sample(batch, &mut self.replay_rng).into_iter().map(|(t, _)| t).collect()
            } else {
                if self.independent[j].len() < batch {
                    continue;
                }
                self.independent[j].sample(batch, &mut self.replay_rng)
            };
            let refs: Vec<&Transition> = drawn.iter().map(|t| t.as_ref()).collect();
            train_agent(&mut self.agents, j, &self.selector, &refs, &self.dims, ddpg);
            report.ddpg_updates += 1;
        }

        let c = &self.config;
        self.epsilon = (self.epsilon * c.exploration_decay).max(c.epsilon_min);
        for a in &mut self.agents {
            a.noise.decay(c.exploration_decay, c.noise_floor);
        }
        report
    }
}
