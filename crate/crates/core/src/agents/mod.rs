//! Hybrid discrete/continuous multi-agent learner.

pub mod action;
pub mod ddpg;
pub mod dqn;
pub mod learner;
pub mod noise;
pub mod replay;
pub mod reward;
pub mod state;

pub use action::{decode_action, ContinuousAction, DiscreteAction, HybridAction};
pub use learner::{AgentConfig, HybridLearner, LearnReport, LearnerCheckpoint};
pub use replay::Transition;
pub use reward::{compute_reward, RewardBaseline};
pub use state::{Observation, StateScales};
