use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::env::{LocalWork, OffloadWork, ResourceLedger, Resource, Topology, WorkPlan, BITS_PER_MEGABYTE};

/// Index into the powerset of an origin's peers. Bit `i` selects the `i`-th
/// peer in ascending id order, so the index jointly encodes how many targets
/// are chosen and which ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiscreteAction(pub usize);

impl DiscreteAction {
    pub const LOCAL_ONLY: Self = Self(0);

    /// Number of target subsets for a network of `num_servers`.
    pub fn space_size(num_servers: usize) -> usize {
        1 << (num_servers - 1)
    }

    /// Number of selected targets.
    pub fn count(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn selects(self, peer_index: usize) -> bool {
        self.0 >> peer_index & 1 == 1
    }

    /// Selected peer server ids in ascending order.
    pub fn targets(self, topology: &Topology, origin: usize) -> Vec<usize> {
        topology
            .peers(origin)
            .into_iter()
            .enumerate()
            .filter(|(i, _)| self.selects(*i))
            .map(|(_, n)| n)
            .collect()
    }

    pub fn one_hot(self, space: usize) -> Vec<f64> {
        let mut v = vec![0.0; space];
        v[self.0] = 1.0;
        v
    }
}

/// Continuous ratios, all in `[0, 1]` after clipping.
///
/// `offload[i]` and `bandwidth[i]` refer to the `i`-th peer; `cpu[0]` is the
/// origin's own allocation ratio and `cpu[1 + i]` the `i`-th peer's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousAction {
    pub offload: Vec<f64>,
    pub cpu: Vec<f64>,
    pub bandwidth: Vec<f64>,
}

impl ContinuousAction {
    pub fn dim(num_servers: usize) -> usize {
        3 * num_servers - 2
    }

    pub fn zeros(num_servers: usize) -> Self {
        Self::from_slice(&vec![0.0; Self::dim(num_servers)], num_servers)
    }

    pub fn from_slice(v: &[f64], num_servers: usize) -> Self {
        let p = num_servers - 1;
        assert_eq!(v.len(), Self::dim(num_servers), "continuous action width");
        Self { offload: v[..p].to_vec(), cpu: v[p..p + num_servers].to_vec(), bandwidth: v[p + num_servers..].to_vec() }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.offload.clone();
        v.extend_from_slice(&self.cpu);
        v.extend_from_slice(&self.bandwidth);
        v
    }

    pub fn in_unit_box(&self) -> bool {
        self.offload.iter().chain(&self.cpu).chain(&self.bandwidth).all(|r| (0.0..=1.0).contains(r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridAction {
    pub discrete: DiscreteAction,
    pub continuous: ContinuousAction,
}

impl HybridAction {
    pub fn zero(num_servers: usize) -> Self {
        Self { discrete: DiscreteAction::LOCAL_ONLY, continuous: ContinuousAction::zeros(num_servers) }
    }
}

/// Clip into `[0, 1]`.
pub fn clip_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Turn an action pair into absolute work and allocations.
///
/// Offload fractions are masked to the selected targets and divided by the
/// number of targets, so their sum never exceeds one; the remainder stays
/// local. Payload and demand split in the same proportions. Allocations are
/// `kappa · ratio · capacity`, clamped to what the ledger has left.
pub fn decode_action(
    action: &HybridAction,
    origin: usize,
    demand: f64,
    payload_mb: f64,
    topology: &Topology,
    ledger: &ResourceLedger,
    kappa: f64,
) -> WorkPlan {
    let peers = topology.peers(origin);
    let c = &action.continuous;
    let selected: Vec<usize> = (0..peers.len())
        .filter(|&i| action.discrete.selects(i) && topology.link_between(origin, peers[i]).is_some())
        .collect();
    let u = selected.len().max(1) as f64;
    let alloc = |resource: Resource, ratio: f64| (kappa * clip_unit(ratio) * ledger.capacity(resource)).min(ledger.remaining(resource));

    let mut offloads = Vec::new();
    let mut shipped = 0.0;
    for &i in &selected {
        let frac = clip_unit(c.offload[i]) / u;
        if frac <= 0.0 {
            continue;
        }
        shipped += frac;
        let target = peers[i];
        let link = topology.link_between(origin, target).expect("filtered to linked peers");
        offloads.push(OffloadWork {
            target,
            demand: demand * frac,
            payload_bits: payload_mb * frac * BITS_PER_MEGABYTE,
            cpu_request: alloc(Resource::Cpu(target), c.cpu[1 + i]),
            bw_request: alloc(Resource::Link(link), c.bandwidth[i]),
        });
    }
    let local_share = (1.0 - shipped).max(0.0);
    WorkPlan {
        origin,
        local: LocalWork { demand: demand * local_share, cpu_request: alloc(Resource::Cpu(origin), c.cpu[0]) },
        offloads,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn action(discrete: usize, offload: [f64; 2], cpu: [f64; 3], bw: [f64; 2]) -> HybridAction {
        HybridAction {
            discrete: DiscreteAction(discrete),
            continuous: ContinuousAction { offload: offload.to_vec(), cpu: cpu.to_vec(), bandwidth: bw.to_vec() },
        }
    }

    #[test]
    fn powerset_enumeration() {
        let topo = Topology::reference();
        assert_eq!(DiscreteAction::space_size(3), 4);
        let sets: Vec<Vec<usize>> = (0..4).map(|i| DiscreteAction(i).targets(&topo, 0)).collect();
        assert_eq!(sets, vec![vec![], vec![1], vec![2], vec![1, 2]]);
        assert_eq!(DiscreteAction(3).count(), 2);
    }

    #[test]
    fn empty_target_set_is_all_local() {
        let topo = Topology::reference();
        let ledger = ResourceLedger::new(&topo);
        let plan = decode_action(&action(0, [0.9, 0.9], [0.5, 1.0, 1.0], [1.0, 1.0]), 0, 50.0, 10.0, &topo, &ledger, 0.4);
        assert!(plan.offloads.is_empty());
        assert_eq!(plan.local.demand, 50.0);
        assert_eq!(plan.local.cpu_request, 20.0);
    }

    #[test]
    fn fractions_renormalize_across_targets() {
        let topo = Topology::reference();
        let ledger = ResourceLedger::new(&topo);
        let plan = decode_action(&action(3, [0.8, 0.8], [1.0, 1.0, 0.5], [0.5, 0.25]), 1, 100.0, 20.0, &topo, &ledger, 0.4);
        let d: Vec<f64> = plan.offloads.iter().map(|o| o.demand).collect();
        assert!((d[0] - 40.0).abs() < 1e-12 && (d[1] - 40.0).abs() < 1e-12);
        assert!((plan.local.demand - 20.0).abs() < 1e-12);
        assert_eq!(plan.offloads[0].target, 0);
        assert_eq!(plan.offloads[1].target, 2);
        assert!((plan.offloads[0].payload_bits - 8.0 * BITS_PER_MEGABYTE).abs() < 1e-6);
        assert_eq!(plan.local.cpu_request, 40.0);
        assert_eq!(plan.offloads[1].cpu_request, 20.0);
        assert_eq!(plan.offloads[0].bw_request, 2e9);
        assert_eq!(plan.offloads[1].bw_request, 1e9);
    }

    #[test]
    fn allocation_clamps_to_remaining() {
        let topo = Topology::reference();
        let mut ledger = ResourceLedger::new(&topo);
        ledger.reserve(Resource::Cpu(0), 90.0, 0.0, 5.0).unwrap();
        let plan = decode_action(&action(0, [0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0]), 0, 5.0, 5.0, &topo, &ledger, 0.4);
        assert_eq!(plan.local.cpu_request, 10.0);
    }

    #[test]
    fn continuous_layout_round_trips() {
        let c = ContinuousAction { offload: vec![0.1, 0.2], cpu: vec![0.3, 0.4, 0.5], bandwidth: vec![0.6, 0.7] };
        assert_eq!(ContinuousAction::from_slice(&c.to_vec(), 3), c);
        assert_eq!(ContinuousAction::dim(3), 7);
    }
}
