//! Cooperative mobile-edge task offloading.
//!
//! This crate is `no_std` (with `alloc`) and holds every algorithmic piece:
//! the edge network resource model ([`env`]), synthetic workload generation
//! ([`traces`]), the arrival forecaster ([`predictor`]), the hybrid
//! discrete/continuous multi-agent learner ([`agents`]), heuristic
//! comparison policies ([`baselines`]) and the slot-driven simulation loop
//! ([`harness`]). File formats, the CLI and plotting live in the `edgecoop`
//! companion crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod agents;
pub mod baselines;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod predictor;
pub mod rng;
pub mod stats;
pub mod traces;

pub use error::{Error, Result};
