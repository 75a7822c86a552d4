//! Resource model of the cooperative edge network.
//!
//! Units: compute demand in gigacycles, compute capacity and allocations in
//! gigacycles/second, payloads in megabytes (8e6 bits each), bandwidth in
//! bits/second, time in seconds, energy in joules.

mod ledger;
mod model;
mod topology;

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use ledger::{Reservation, Resource, ResourceLedger};
pub use model::{
    compute_latency, data_rate, linear_snr, server_energy, slot_latency, transmission_latency, ServerLatency,
    BITS_PER_MEGABYTE,
};
pub use topology::{LinkSpec, ServerSpec, Topology};

use crate::error::{Error, Result};

/// Smallest share of capacity any grant receives, so latency stays finite.
/// When even this much is not free, the work runs on an unreserved fallback
/// grant of the same size that the ledger tracks but does not hold.
pub const FALLBACK_FRACTION: f64 = 0.01;

/// Default slot length in seconds.
pub const SLOT_SECONDS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub origin_server: usize,
    pub arrival_time: f64,
    /// Gigacycles.
    pub compute_demand: f64,
    /// Megabytes.
    pub payload_size: f64,
}

/// Latency/energy trade-off weights; they sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub lambda_latency: f64,
    pub rho_energy: f64,
}

impl ObjectiveWeights {
    pub fn new(lambda_latency: f64, rho_energy: f64) -> Result<Self> {
        let open = |x: f64| x > 0.0 && x < 1.0;
        if !open(lambda_latency) || !open(rho_energy) || (lambda_latency + rho_energy - 1.0).abs() > 1e-12 {
            return Err(Error::Config("objective weights must lie in (0, 1) and sum to 1".into()));
        }
        Ok(Self { lambda_latency, rho_energy })
    }
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self { lambda_latency: 0.5, rho_energy: 0.5 }
    }
}

/// Work kept at the origin server.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LocalWork {
    pub demand: f64,
    pub cpu_request: f64,
}

/// Work shipped to a cooperating server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffloadWork {
    pub target: usize,
    pub demand: f64,
    pub payload_bits: f64,
    pub cpu_request: f64,
    pub bw_request: f64,
}

/// A decoded action: how one origin server's slot demand is placed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkPlan {
    pub origin: usize,
    pub local: LocalWork,
    pub offloads: Vec<OffloadWork>,
}

/// What the ledger actually granted for one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grant {
    pub origin: usize,
    pub resource: Resource,
    pub requested: f64,
    pub granted: f64,
    /// Remaining capacity just before this grant.
    pub available: f64,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotOutcome {
    pub per_server_latency: Vec<f64>,
    pub per_server_energy: Vec<f64>,
    pub total_latency: f64,
    pub total_energy: f64,
    pub utilisation: Vec<f64>,
    pub busy_time: Vec<f64>,
    pub skipped: bool,
    pub grants: Vec<Grant>,
}

impl SlotOutcome {
    fn empty(num_servers: usize) -> Self {
        Self {
            per_server_latency: vec![0.0; num_servers],
            per_server_energy: vec![0.0; num_servers],
            total_latency: 0.0,
            total_energy: 0.0,
            utilisation: vec![0.0; num_servers],
            busy_time: vec![0.0; num_servers],
            skipped: true,
            grants: Vec::new(),
        }
    }
}

/// Clamp a request against the ledger, raising it to the minimum grant.
fn grant(
    ledger: &mut ResourceLedger,
    origin: usize,
    resource: Resource,
    requested: f64,
    start: f64,
    duration: impl Fn(f64) -> Result<f64>,
    grants: &mut Vec<Grant>,
) -> Result<(f64, f64)> {
    let available = ledger.remaining(resource);
    let clamped = requested.max(0.0).min(available);
    let floor = FALLBACK_FRACTION * ledger.capacity(resource);
    let (amount, fallback) = if clamped >= floor {
        (clamped, false)
    } else if available >= floor {
        (floor, false)
    } else {
        (floor, true)
    };
    let held = duration(amount)?;
    if fallback {
        ledger.track_unreserved(resource, amount, start, start + held);
    } else {
        ledger.reserve(resource, amount, start, start + held)?;
    }
    grants.push(Grant { origin, resource, requested, granted: amount, available, fallback });
    Ok((amount, held))
}

/// Run one slot: release finished work, place every plan in ascending origin
/// order, and account latency and energy over `[now, now + slot_len)`.
///
/// An empty `plans` slice is a skipped slot: only releases are processed.
pub fn step(
    topology: &Topology,
    ledger: &ResourceLedger,
    plans: &[WorkPlan],
    now: f64,
    slot_len: f64,
) -> Result<(SlotOutcome, ResourceLedger)> {
    let m = topology.num_servers();
    let mut ledger = ledger.clone();
    ledger.advance(now);
    let mut outcome = SlotOutcome::empty(m);
    if plans.is_empty() {
        return Ok((outcome, ledger));
    }
    outcome.skipped = false;

    let mut order: Vec<&WorkPlan> = plans.iter().collect();
    order.sort_by_key(|p| p.origin);
    let mut latencies = vec![ServerLatency::default(); m];
    for plan in order {
        let origin = plan.origin;
        if origin >= m {
            return Err(Error::Config(alloc::format!("plan for unknown server {origin}")));
        }
        let mut lat = ServerLatency::default();
        if plan.local.demand > 0.0 {
            let demand = plan.local.demand;
            let (_, t) = grant(
                &mut ledger,
                origin,
                Resource::Cpu(origin),
                plan.local.cpu_request,
                now,
                |d| compute_latency(demand, d),
                &mut outcome.grants,
            )?;
            lat.local = t;
        }
        for off in plan.offloads.iter().filter(|o| o.demand > 0.0) {
            let k = topology
                .link_between(origin, off.target)
                .ok_or_else(|| Error::Topology(alloc::format!("no link between {origin} and {}", off.target)))?;
            let snr = linear_snr(topology.links()[k].snr_db);
            let bits = off.payload_bits;
            let (_, trans) = grant(
                &mut ledger,
                origin,
                Resource::Link(k),
                off.bw_request,
                now,
                |b| transmission_latency(bits, data_rate(b, snr)),
                &mut outcome.grants,
            )?;
            let demand = off.demand;
            let (_, coop) = grant(
                &mut ledger,
                origin,
                Resource::Cpu(off.target),
                off.cpu_request,
                now,
                |d| Ok(trans + compute_latency(demand, d)?),
                &mut outcome.grants,
            )?;
            lat.paths.push((trans, coop - trans));
        }
        latencies[origin] = lat;
    }

    for (s, l) in latencies.iter().enumerate() {
        outcome.per_server_latency[s] = l.completion();
    }
    outcome.total_latency = slot_latency(&latencies);

    let horizon = now + slot_len;
    for server in topology.servers() {
        let s = server.server_id;
        let mut busy: f64 = 0.0;
        let mut work = 0.0;
        for r in ledger.releases().iter().filter(|r| r.resource == Resource::Cpu(s) && r.release_time > now) {
            busy = busy.max(r.release_time.min(horizon) - now);
            work += r.amount * (r.release_time.min(horizon) - now);
        }
        let util = if busy > 0.0 { (work / (server.cpu_capacity * busy)).clamp(0.0, 1.0) } else { 0.0 };
        outcome.busy_time[s] = busy;
        outcome.utilisation[s] = util;
        outcome.per_server_energy[s] = server_energy(server.power_min, server.power_max, util, busy)?;
    }
    outcome.total_energy = outcome.per_server_energy.iter().sum();
    Ok((outcome, ledger))
}

/// A topology, its ledger and a slot length, stepped in place.
#[derive(Debug, Clone)]
pub struct Environment {
    pub topology: Topology,
    pub ledger: ResourceLedger,
    pub slot_len: f64,
}

impl Environment {
    pub fn new(topology: Topology) -> Self {
        let ledger = ResourceLedger::new(&topology);
        Self { topology, ledger, slot_len: SLOT_SECONDS }
    }

    pub fn step(&mut self, plans: &[WorkPlan], now: f64) -> Result<SlotOutcome> {
        let (outcome, ledger) = step(&self.topology, &self.ledger, plans, now, self.slot_len)?;
        self.ledger = ledger;
        Ok(outcome)
    }
}
