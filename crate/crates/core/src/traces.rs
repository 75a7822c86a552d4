//! Workload streams: trace events, the synthetic generator and chronological
//! splitting.
//!
//! The generator drives each server with its own latent load level, an
//! Ornstein-Uhlenbeck process in continuous time whose correlation across a
//! one-second gap is `autocorrelation`. A high latent level means heavier
//! demands and shorter gaps. Gaps are gamma distributed around the modulated
//! mean (shape 1 gives exponential gaps); demands are log-normal in the
//! latent level.

use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::env::Task;
use crate::error::{Error, Result};
use crate::rng::{self, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub server_id: usize,
    /// Seconds.
    pub arrival_time: f64,
    /// Gigacycles.
    pub compute_demand: f64,
    /// Megabytes; traces often omit it.
    pub payload_size: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub num_servers: usize,
    /// Seconds of workload to generate.
    pub horizon: f64,
    /// Mean gap between arrivals, one entry per server.
    pub mean_interarrival: Vec<f64>,
    /// Correlation of the latent load level across one second, in [0, 1).
    pub autocorrelation: f64,
    /// Mean demand in gigacycles.
    pub demand_mean: f64,
    /// Log-scale spread of demand around its mean.
    pub demand_spread: f64,
    /// Log-scale modulation of the mean gap by the latent level.
    pub arrival_spread: f64,
    /// Gamma shape of the gaps; 1 gives memoryless arrivals.
    pub interarrival_shape: f64,
    /// Payload size range in megabytes.
    pub size_range: (f64, f64),
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_servers: 3,
            horizon: 1000.0,
            mean_interarrival: alloc::vec![2.0, 4.0, 8.0],
            autocorrelation: 0.9,
            demand_mean: 30.0,
            demand_spread: 0.6,
            arrival_spread: 0.5,
            interarrival_shape: 1.0,
            size_range: (5.0, 20.0),
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if self.num_servers == 0 || self.mean_interarrival.len() != self.num_servers {
            return bad("mean_interarrival needs one entry per server");
        }
        if self.mean_interarrival.iter().any(|m| !(*m > 0.0)) {
            return bad("mean_interarrival must be positive");
        }
        if !(0.0..1.0).contains(&self.autocorrelation) {
            return bad("autocorrelation must lie in [0, 1)");
        }
        if !(self.demand_mean > 0.0) || !(self.demand_spread >= 0.0) || !(self.arrival_spread >= 0.0) {
            return bad("demand_mean must be positive and spreads nonnegative");
        }
        if !(self.interarrival_shape > 0.0) {
            return bad("interarrival_shape must be positive");
        }
        let (lo, hi) = self.size_range;
        if !(lo > 0.0 && lo <= hi) {
            return bad("size_range must satisfy 0 < lo <= hi");
        }
        if !(self.horizon >= 0.0) {
            return bad("horizon must be nonnegative");
        }
        Ok(())
    }
}

/// Independent per-server arrival streams merged in time order.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Vec<TraceEvent>> {
    cfg.validate()?;
    let mut events = Vec::new();
    let (lo, hi) = cfg.size_range;
    for server in 0..cfg.num_servers {
        let mut rng = rng::seeded(cfg.seed, stream::TRACE + 64 * (server as u64 + 1));
        let shape = cfg.interarrival_shape;
        let gap_noise = Gamma::new(shape, 1.0 / shape).map_err(|_| Error::Config("bad gamma shape".into()))?;
        let a = cfg.arrival_spread;
        let s = cfg.demand_spread;
        let mut level: f64 = StandardNormal.sample(&mut rng);
        let mut t = 0.0;
        loop {
            let mean_gap = cfg.mean_interarrival[server] * libm::exp(-a * level - 0.5 * a * a);
            let gap = mean_gap * gap_noise.sample(&mut rng);
            t += gap;
            if t >= cfg.horizon {
                break;
            }
            let keep = libm::pow(cfg.autocorrelation, gap);
            let eps: f64 = StandardNormal.sample(&mut rng);
            level = keep * level + libm::sqrt((1.0 - keep * keep).max(0.0)) * eps;
            let demand = cfg.demand_mean * libm::exp(s * level - 0.5 * s * s);
            let size = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            events.push(TraceEvent {
                server_id: server,
                arrival_time: t,
                compute_demand: demand,
                payload_size: Some(size),
            });
        }
    }
    sort_events(&mut events);
    Ok(events)
}

/// Order by arrival time, ties by server id.
pub fn sort_events(events: &mut [TraceEvent]) {
    events.sort_by(|a, b| {
        a.arrival_time
            .total_cmp(&b.arrival_time)
            .then(a.server_id.cmp(&b.server_id))
    });
}

/// Turn events into tasks, drawing missing payload sizes uniformly from
/// `size_range` under `seed`.
pub fn to_tasks(events: &[TraceEvent], size_range: (f64, f64), seed: u64) -> Vec<Task> {
    let mut rng = rng::seeded(seed, stream::SIZES);
    let (lo, hi) = size_range;
    events
        .iter()
        .map(|e| Task {
            origin_server: e.server_id,
            arrival_time: e.arrival_time,
            compute_demand: e.compute_demand,
            payload_size: e.payload_size.unwrap_or_else(|| if hi > lo { rng.random_range(lo..=hi) } else { lo }),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<TraceEvent>,
    pub eval: Vec<TraceEvent>,
    /// Servers whose split left one side empty.
    pub warnings: usize,
}

/// Chronological per-server split: the first `ceil(n · fraction)` events of
/// each server train, the rest evaluate. Input order is preserved within
/// each side.
pub fn split_train_eval(events: &[TraceEvent], fraction: f64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config("split fraction must lie in (0, 1)".into()));
    }
    let servers = events.iter().map(|e| e.server_id + 1).max().unwrap_or(0);
    let mut counts = alloc::vec![0usize; servers];
    for e in events {
        counts[e.server_id] += 1;
    }
    let cut: Vec<usize> = counts.iter().map(|&n| libm::ceil(n as f64 * fraction) as usize).collect();
    let warnings = counts
        .iter()
        .zip(&cut)
        .filter(|(&n, &c)| n > 0 && (c == 0 || c == n))
        .count();
    let mut seen = alloc::vec![0usize; servers];
    let (mut train, mut eval) = (Vec::new(), Vec::new());
    for e in events {
        let s = e.server_id;
        if seen[s] < cut[s] {
            train.push(e.clone());
        } else {
            eval.push(e.clone());
        }
        seen[s] += 1;
    }
    Ok(Split { train, eval, warnings })
}

/// `(inter-arrival, demand)` pairs of one server in time order. The first
/// event has no predecessor and only anchors the first gap.
pub fn server_series(events: &[TraceEvent], server: usize) -> Vec<(f64, f64)> {
    let mut prev: Option<f64> = None;
    let mut out = Vec::new();
    for e in events.iter().filter(|e| e.server_id == server) {
        if let Some(p) = prev {
            out.push((e.arrival_time - p, e.compute_demand));
        }
        prev = Some(e.arrival_time);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    fn cfg(horizon: f64, autocorrelation: f64, seed: u64) -> SyntheticConfig {
        SyntheticConfig { horizon, autocorrelation, seed, ..SyntheticConfig::default() }
    }

    #[test]
    fn zero_horizon_is_empty() {
        assert!(generate_synthetic(&cfg(0.0, 0.9, 1)).unwrap().is_empty());
    }

    #[test]
    fn same_seed_same_stream() {
        let a = generate_synthetic(&cfg(300.0, 0.9, 7)).unwrap();
        let b = generate_synthetic(&cfg(300.0, 0.9, 7)).unwrap();
        let c = generate_synthetic(&cfg(300.0, 0.9, 8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn generated_values_respect_ranges_and_order() {
        let ev = generate_synthetic(&cfg(2000.0, 0.5, 3)).unwrap();
        assert!(ev.windows(2).all(|w| w[0].arrival_time <= w[1].arrival_time));
        for e in &ev {
            assert!(e.compute_demand > 0.0);
            let s = e.payload_size.unwrap();
            assert!((5.0..=20.0).contains(&s));
        }
        // imbalanced load: server 0 is busiest
        let count = |m| ev.iter().filter(|e| e.server_id == m).count();
        assert!(count(0) > count(1) && count(1) > count(2));
    }

    #[test]
    fn uncorrelated_demands_have_negligible_autocorrelation() {
        let ev = generate_synthetic(&cfg(20_000.0, 0.0, 5)).unwrap();
        for m in 0..3 {
            let d: Vec<f64> = ev.iter().filter(|e| e.server_id == m).map(|e| e.compute_demand).collect();
            let se = 1.0 / libm::sqrt(d.len() as f64);
            let r = stats::autocorrelation(&d, 1);
            assert!(r.abs() < 3.0 * se, "server {m}: r1 = {r}, se = {se}");
        }
    }

    #[test]
    fn correlated_demands_are_autocorrelated() {
        let ev = generate_synthetic(&cfg(5000.0, 0.9, 5)).unwrap();
        let d: Vec<f64> = ev.iter().filter(|e| e.server_id == 0).map(|e| e.compute_demand).collect();
        assert!(stats::autocorrelation(&d, 1) > 0.8);
    }

    #[test]
    fn split_examples() {
        let ev: Vec<TraceEvent> = (0..10)
            .map(|i| TraceEvent { server_id: 0, arrival_time: i as f64, compute_demand: 1.0, payload_size: None })
            .collect();
        let s = split_train_eval(&ev, 0.8).unwrap();
        assert_eq!((s.train.len(), s.eval.len(), s.warnings), (8, 2, 0));
        let mut joined = s.train.clone();
        joined.extend(s.eval);
        assert_eq!(joined, ev);

        let one = split_train_eval(&ev[..1], 0.5).unwrap();
        assert_eq!((one.train.len(), one.eval.len(), one.warnings), (1, 0, 1));
        assert!(split_train_eval(&ev, 1.0).is_err());
    }

    #[test]
    fn sizes_drawn_only_when_missing() {
        let ev = [
            TraceEvent { server_id: 0, arrival_time: 0.0, compute_demand: 1.0, payload_size: Some(7.0) },
            TraceEvent { server_id: 1, arrival_time: 0.5, compute_demand: 2.0, payload_size: None },
        ];
        let t = to_tasks(&ev, (5.0, 20.0), 9);
        assert_eq!(t[0].payload_size, 7.0);
        assert!((5.0..=20.0).contains(&t[1].payload_size));
        assert_eq!(t, to_tasks(&ev, (5.0, 20.0), 9));
    }

    #[test]
    fn series_are_gaps_and_demands() {
        let ev = [
            TraceEvent { server_id: 0, arrival_time: 1.0, compute_demand: 3.0, payload_size: None },
            TraceEvent { server_id: 1, arrival_time: 1.5, compute_demand: 9.0, payload_size: None },
            TraceEvent { server_id: 0, arrival_time: 2.5, compute_demand: 4.0, payload_size: None },
        ];
        assert_eq!(server_series(&ev, 0), alloc::vec![(1.5, 4.0)]);
        assert!(server_series(&ev, 1).is_empty());
    }
}
