//! Observation vectors for actors (local view) and critics (global view).

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::env::{ResourceLedger, Topology};
use crate::predictor::Prediction;

/// Reference magnitudes that map raw quantities into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateScales {
    /// Gigacycles.
    pub demand: f64,
    /// Megabytes.
    pub payload: f64,
    /// Seconds.
    pub interarrival: f64,
}

impl Default for StateScales {
    fn default() -> Self {
        Self { demand: 200.0, payload: 100.0, interarrival: 10.0 }
    }
}

/// What the policies see at one decision slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub critic_state: Vec<f64>,
    /// One local view per server; idle servers see zero pending work.
    pub actor_states: Vec<Vec<f64>>,
    /// Servers with at least one arrival this slot.
    pub active: Vec<bool>,
}

fn unit(x: f64, scale: f64) -> f64 {
    (x / scale).clamp(0.0, 1.0)
}

pub fn actor_state_dim(num_servers: usize) -> usize {
    num_servers + 2
}

pub fn critic_state_dim(num_servers: usize, num_links: usize) -> usize {
    4 * num_servers + num_links
}

/// `[own free cpu, free bandwidth on links to each peer (ascending peer id),
/// pending demand, pending payload]`, each scaled into `[0, 1]`. A peer
/// without a direct link reads as zero bandwidth.
pub fn actor_state(
    topology: &Topology,
    ledger: &ResourceLedger,
    server: usize,
    demand: f64,
    payload_mb: f64,
    scales: &StateScales,
) -> Vec<f64> {
    let mut s = Vec::with_capacity(actor_state_dim(topology.num_servers()));
    s.push(ledger.remaining_cpu()[server] / ledger.cpu_capacity()[server]);
    for peer in topology.peers(server) {
        s.push(match topology.link_between(server, peer) {
            Some(k) => ledger.remaining_bw()[k] / ledger.bw_capacity()[k],
            None => 0.0,
        });
    }
    s.push(unit(demand, scales.demand));
    s.push(unit(payload_mb, scales.payload));
    s
}

/// `[free cpu of every server, free bandwidth of every link, pending demand
/// of every server, forecast gap and demand of every server]`.
pub fn critic_state(
    topology: &Topology,
    ledger: &ResourceLedger,
    demands: &[f64],
    forecast: &Prediction,
    scales: &StateScales,
) -> Vec<f64> {
    let m = topology.num_servers();
    assert_eq!(demands.len(), m);
    assert_eq!(forecast.len(), m);
    let mut s = Vec::with_capacity(critic_state_dim(m, topology.num_links()));
    s.extend(ledger.remaining_cpu().iter().zip(ledger.cpu_capacity()).map(|(r, c)| r / c));
    s.extend(ledger.remaining_bw().iter().zip(ledger.bw_capacity()).map(|(r, c)| r / c));
    s.extend(demands.iter().map(|&d| unit(d, scales.demand)));
    s.extend(forecast.next_interarrival.iter().map(|&g| unit(g, scales.interarrival)));
    s.extend(forecast.next_demand.iter().map(|&d| unit(d, scales.demand)));
    s
}
