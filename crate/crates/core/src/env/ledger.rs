use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Topology;
use crate::error::{Error, Result};

/// Relative slack allowed when comparing a request against what is left.
const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resource {
    Cpu(usize),
    Link(usize),
}

/// One piece of held capacity and the instant it is handed back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reservation {
    pub resource: Resource,
    pub amount: f64,
    pub start: f64,
    pub release_time: f64,
    /// `false` for fallback work that runs on a minimum grant outside the
    /// ledger's accounting; it never reduces the remaining capacity.
    pub reserved: bool,
}

/// Remaining compute per server and bandwidth per link, plus every
/// outstanding reservation ordered by release time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceLedger {
    cpu_capacity: Vec<f64>,
    bw_capacity: Vec<f64>,
    remaining_cpu: Vec<f64>,
    remaining_bw: Vec<f64>,
    releases: Vec<Reservation>,
}

impl ResourceLedger {
    pub fn new(topology: &Topology) -> Self {
        let cpu_capacity: Vec<f64> = topology.servers().iter().map(|s| s.cpu_capacity).collect();
        let bw_capacity: Vec<f64> = topology.links().iter().map(|l| l.bandwidth_capacity).collect();
        Self {
            remaining_cpu: cpu_capacity.clone(),
            remaining_bw: bw_capacity.clone(),
            cpu_capacity,
            bw_capacity,
            releases: Vec::new(),
        }
    }

    pub fn remaining_cpu(&self) -> &[f64] {
        &self.remaining_cpu
    }

    pub fn remaining_bw(&self) -> &[f64] {
        &self.remaining_bw
    }

    pub fn cpu_capacity(&self) -> &[f64] {
        &self.cpu_capacity
    }

    pub fn bw_capacity(&self) -> &[f64] {
        &self.bw_capacity
    }

    pub fn remaining(&self, resource: Resource) -> f64 {
        match resource {
            Resource::Cpu(m) => self.remaining_cpu[m],
            Resource::Link(k) => self.remaining_bw[k],
        }
    }

    pub fn capacity(&self, resource: Resource) -> f64 {
        match resource {
            Resource::Cpu(m) => self.cpu_capacity[m],
            Resource::Link(k) => self.bw_capacity[k],
        }
    }

    /// Outstanding reservations in release order.
    pub fn releases(&self) -> &[Reservation] {
        &self.releases
    }

    /// Hand back everything due at or before `now`.
    pub fn advance(&mut self, now: f64) {
        let due = self.releases.partition_point(|r| r.release_time <= now);
        if due > 0 {
            self.releases.drain(..due);
            self.recompute();
        }
    }

    /// Hold `amount` of `resource` over `[start, release_time)`.
    ///
    /// Requests may exceed the remainder by floating-point slack only; the
    /// held amount is then trimmed to exactly what is left.
    pub fn reserve(&mut self, resource: Resource, amount: f64, start: f64, release_time: f64) -> Result<f64> {
        let left = self.remaining(resource);
        let cap = self.capacity(resource);
        if !(amount >= 0.0) || amount > left + TOLERANCE * cap {
            return Err(Error::Constraint(format!(
                "{resource:?}: request {amount} exceeds remaining {left}"
            )));
        }
        let amount = amount.min(left);
        if amount > 0.0 {
            self.insert(Reservation { resource, amount, start, release_time, reserved: true });
            self.recompute();
        }
        Ok(amount)
    }

    /// Track fallback work that runs without holding ledger capacity.
    pub fn track_unreserved(&mut self, resource: Resource, amount: f64, start: f64, release_time: f64) {
        self.insert(Reservation { resource, amount, start, release_time, reserved: false });
    }

    fn insert(&mut self, r: Reservation) {
        let at = self.releases.partition_point(|o| o.release_time <= r.release_time);
        self.releases.insert(at, r);
    }

    pub fn outstanding(&self, resource: Resource) -> f64 {
        self.releases
            .iter()
            .filter(|r| r.reserved && r.resource == resource)
            .map(|r| r.amount)
            .sum()
    }

    fn recompute(&mut self) {
        for (m, cap) in self.cpu_capacity.iter().enumerate() {
            self.remaining_cpu[m] = (cap - self.outstanding(Resource::Cpu(m))).clamp(0.0, *cap);
        }
        for (k, cap) in self.bw_capacity.iter().enumerate() {
            self.remaining_bw[k] = (cap - self.outstanding(Resource::Link(k))).clamp(0.0, *cap);
        }
    }

    /// Remaining plus outstanding equals capacity, and nothing is negative.
    pub fn check_conservation(&self) -> Result<()> {
        let check = |resource: Resource| -> Result<()> {
            let cap = self.capacity(resource);
            let left = self.remaining(resource);
            let held = self.outstanding(resource);
            if left < 0.0 || left > cap {
                return Err(Error::Constraint(format!("{resource:?}: remaining {left} outside [0, {cap}]")));
            }
            if (left + held - cap).abs() > TOLERANCE * cap * 10.0 {
                return Err(Error::Constraint(format!(
                    "{resource:?}: remaining {left} + outstanding {held} != capacity {cap}"
                )));
            }
            Ok(())
        };
        (0..self.cpu_capacity.len()).try_for_each(|m| check(Resource::Cpu(m)))?;
        (0..self.bw_capacity.len()).try_for_each(|k| check(Resource::Link(k)))
    }
}
