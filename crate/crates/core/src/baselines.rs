//! Policies behind one interface: the learner with and without forecasts,
//! and the full-allocation and random heuristics.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::{AgentConfig, ContinuousAction, DiscreteAction, HybridAction, HybridLearner, LearnReport, LearnerCheckpoint, Observation, Transition};
use crate::env::Topology;
use crate::error::{Error, Result};
use crate::rng::{self, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// Learner whose critics see arrival forecasts.
    CtoTp,
    /// Learner with the forecast slots zero-filled.
    Cto,
    /// Full local allocation, no offloading.
    Fa,
    /// Uniformly random target sets and ratios.
    Ra,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [PolicyKind::CtoTp, PolicyKind::Cto, PolicyKind::Fa, PolicyKind::Ra];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::CtoTp => "cto-tp",
            PolicyKind::Cto => "cto",
            PolicyKind::Fa => "fa",
            PolicyKind::Ra => "ra",
        }
    }

    pub fn is_learner(self) -> bool {
        matches!(self, PolicyKind::CtoTp | PolicyKind::Cto)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "cto-tp" | "ctotp" => Ok(PolicyKind::CtoTp),
            "cto" => Ok(PolicyKind::Cto),
            "fa" => Ok(PolicyKind::Fa),
            "ra" => Ok(PolicyKind::Ra),
            other => Err(Error::Config(alloc::format!("unknown policy `{other}` (expected cto-tp, cto, fa or ra)"))),
        }
    }
}

pub trait Policy {
    fn kind(&self) -> PolicyKind;

    /// One action per server; idle servers get [`HybridAction::zero`].
    fn act(&mut self, obs: &Observation) -> Vec<HybridAction>;

    /// Offer a completed team step taken at slot `step`.
    fn learn(&mut self, _transition: Transition, _step: u64) -> LearnReport {
        LearnReport::default()
    }

    /// Current `(epsilon, noise scale)`.
    fn exploration(&self) -> (f64, f64) {
        (0.0, 0.0)
    }

    /// Whether the critic state should carry real forecasts.
    fn uses_forecast(&self) -> bool {
        false
    }

    fn checkpoint(&self) -> Option<LearnerCheckpoint> {
        None
    }
}

/// Full allocation: keep everything local and request the largest share the
/// limit factor allows.
pub fn fa_action(num_servers: usize) -> HybridAction {
    let mut a = HybridAction::zero(num_servers);
    a.continuous.cpu[0] = 1.0;
    a
}

/// A uniformly random target set (empty set included) and uniform ratios.
pub fn ra_action<R: rand::Rng + ?Sized>(num_servers: usize, rng: &mut R) -> HybridAction {
    let discrete = DiscreteAction(rng.random_range(0..DiscreteAction::space_size(num_servers)));
    let v: Vec<f64> = (0..ContinuousAction::dim(num_servers)).map(|_| rng.random::<f64>()).collect();
    HybridAction { discrete, continuous: ContinuousAction::from_slice(&v, num_servers) }
}

fn per_server(obs: &Observation, mut f: impl FnMut() -> HybridAction) -> Vec<HybridAction> {
    let m = obs.active.len();
    obs.active.iter().map(|&a| if a { f() } else { HybridAction::zero(m) }).collect()
}

pub struct FullAllocation;

impl Policy for FullAllocation {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Fa
    }

    fn act(&mut self, obs: &Observation) -> Vec<HybridAction> {
        let m = obs.active.len();
        per_server(obs, || fa_action(m))
    }
}

pub struct RandomAllocation {
    rng: rng::Rng,
}

impl RandomAllocation {
    pub fn new(seed: u64) -> Self {
        Self { rng: rng::seeded(seed, stream::POLICY) }
    }
}

impl Policy for RandomAllocation {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Ra
    }

    fn act(&mut self, obs: &Observation) -> Vec<HybridAction> {
        let m = obs.active.len();
        let rng = &mut self.rng;
        per_server(obs, || ra_action(m, rng))
    }
}

pub struct LearnedPolicy {
    kind: PolicyKind,
    pub learner: HybridLearner,
}

impl LearnedPolicy {
    pub fn new(kind: PolicyKind, learner: HybridLearner) -> Self {
        assert!(kind.is_learner(), "{kind} is not a learned policy");
        Self { kind, learner }
    }
}

impl Policy for LearnedPolicy {
    fn kind(&self) -> PolicyKind {
        self.kind
    }

    fn act(&mut self, obs: &Observation) -> Vec<HybridAction> {
        self.learner.act(obs)
    }

    fn learn(&mut self, transition: Transition, step: u64) -> LearnReport {
        self.learner.learn(transition, step)
    }

    fn exploration(&self) -> (f64, f64) {
        (self.learner.epsilon(), self.learner.noise_scale())
    }

    fn uses_forecast(&self) -> bool {
        self.kind == PolicyKind::CtoTp
    }

    fn checkpoint(&self) -> Option<LearnerCheckpoint> {
        Some(self.learner.checkpoint())
    }
}

pub fn make_policy(kind: PolicyKind, topology: &Topology, config: &AgentConfig, seed: u64) -> Result<Box<dyn Policy>> {
    Ok(match kind {
        PolicyKind::CtoTp | PolicyKind::Cto => Box::new(LearnedPolicy::new(kind, HybridLearner::new(topology, config.clone(), seed)?)),
        PolicyKind::Fa => Box::new(FullAllocation),
        PolicyKind::Ra => Box::new(RandomAllocation::new(seed)),
    })
}
