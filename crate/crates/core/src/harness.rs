//! The slot-driven simulation loop, its metrics and run summaries.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::agents::{
    compute_reward, decode_action, state, AgentConfig, HybridAction, Observation, RewardBaseline, StateScales, Transition,
};
use crate::baselines::{Policy, PolicyKind};
use crate::env::{Environment, ObjectiveWeights, Resource, ResourceLedger, Task, Topology, WorkPlan, SLOT_SECONDS};
use crate::error::{Error, Result};
use crate::predictor::{smooth, ForecastModel, Prediction};

/// Default window of the trailing mean applied to reward curves.
pub const SMOOTHING_WINDOW: usize = 20;

/// Share of the training steps, counted from the end, that defines final
/// performance.
pub const FINAL_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub policy: PolicyKind,
    /// Slots to simulate.
    pub steps: u64,
    pub seed: u64,
    pub slot_len: f64,
    pub weights: ObjectiveWeights,
    pub agent: AgentConfig,
    pub scales: StateScales,
    /// Recent slots kept for the reward reference values.
    pub reward_window: usize,
    /// Smallest entries averaged into each reference value.
    pub reward_minima: usize,
    /// Trailing window smoothing the reward curve before it is summarized.
    pub smoothing_window: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            policy: PolicyKind::CtoTp,
            steps: 20_000,
            seed: 0,
            slot_len: SLOT_SECONDS,
            weights: ObjectiveWeights::default(),
            agent: AgentConfig::default(),
            scales: StateScales::default(),
            reward_window: 100,
            reward_minima: 5,
            smoothing_window: SMOOTHING_WINDOW,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        if self.steps <= self.agent.observation_steps {
            return Err(Error::Config(alloc::format!(
                "steps ({}) must exceed observation_steps ({})",
                self.steps,
                self.agent.observation_steps
            )));
        }
        if !(self.slot_len > 0.0) {
            return Err(Error::Config("slot_len must be positive".into()));
        }
        if self.reward_window == 0 || self.reward_minima == 0 || self.smoothing_window == 0 {
            return Err(Error::Config("reward_window, reward_minima and smoothing_window must be positive".into()));
        }
        ObjectiveWeights::new(self.weights.lambda_latency, self.weights.rho_energy)?;
        Ok(())
    }
}

/// Constraint breaches detected in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Violations {
    /// Compute over-commitment.
    pub cpu: u32,
    /// Bandwidth over-commitment.
    pub bandwidth: u32,
    /// Ratios outside `[0, 1]` or offload shares summing above one.
    pub ratio: u32,
}

impl Violations {
    pub fn total(&self) -> u32 {
        self.cpu + self.bandwidth + self.ratio
    }

    fn add(&mut self, o: Violations) {
        self.cpu += o.cpu;
        self.bandwidth += o.bandwidth;
        self.ratio += o.ratio;
    }
}

/// One line of `metrics.csv`. Skipped slots carry zero totals and reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    /// Simulated seconds at the start of the slot.
    pub time: f64,
    pub skipped: bool,
    pub active_servers: usize,
    pub reward: f64,
    pub total_latency: f64,
    pub total_energy: f64,
    pub utilisation: Vec<f64>,
    pub epsilon: f64,
    pub noise_scale: f64,
    /// Cumulative selector updates so far.
    pub dqn_updates: u64,
    /// Cumulative actor-critic updates so far.
    pub ddpg_updates: u64,
    pub violations: Violations,
}

/// Aggregates over one run's metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: PolicyKind,
    pub seed: u64,
    pub steps: u64,
    pub active_slots: u64,
    /// Mean smoothed reward over the final window.
    pub final_reward: f64,
    /// Mean slot latency over the final window.
    pub avg_latency: f64,
    /// Mean slot energy over the final window.
    pub avg_energy: f64,
    /// `Σ (λ·L + ρ·E)` over every non-skipped slot.
    pub objective: f64,
    pub violations: Violations,
    pub dqn_updates: u64,
    pub ddpg_updates: u64,
}

/// `Σ_t (λ·L_total + ρ·E_total)` over non-skipped slots.
pub fn summarize_objective(rows: &[MetricsRow], weights: &ObjectiveWeights) -> f64 {
    rows.iter()
        .filter(|r| !r.skipped)
        .map(|r| weights.lambda_latency * r.total_latency + weights.rho_energy * r.total_energy)
        .sum()
}

/// First slot of the final evaluation window.
pub fn final_window_start(steps: u64, observation_steps: u64) -> u64 {
    let training = steps.saturating_sub(observation_steps);
    let span = libm::ceil(training as f64 * FINAL_FRACTION) as u64;
    steps - span.max(1).min(steps)
}

/// Summary statistics recomputed from the rows of a run made under `config`.
pub fn summarize(rows: &[MetricsRow], config: &SimulationConfig) -> RunSummary {
    let active: Vec<&MetricsRow> = rows.iter().filter(|r| !r.skipped).collect();
    let rewards: Vec<f64> = active.iter().map(|r| r.reward).collect();
    let smoothed = smooth(&rewards, config.smoothing_window);
    let from = final_window_start(config.steps, config.agent.observation_steps);
    let mut n = 0usize;
    let (mut rw, mut lat, mut en) = (0.0, 0.0, 0.0);
    for (r, s) in active.iter().zip(&smoothed) {
        if r.step >= from {
            n += 1;
            rw += s;
            lat += r.total_latency;
            en += r.total_energy;
        }
    }
    let mean = |x: f64| if n > 0 { x / n as f64 } else { 0.0 };
    let mut violations = Violations::default();
    rows.iter().for_each(|r| violations.add(r.violations));
    let last = rows.last();
    RunSummary {
        policy: config.policy,
        seed: config.seed,
        steps: config.steps,
        active_slots: active.len() as u64,
        final_reward: mean(rw),
        avg_latency: mean(lat),
        avg_energy: mean(en),
        objective: summarize_objective(rows, &config.weights),
        violations,
        dqn_updates: last.map_or(0, |r| r.dqn_updates),
        ddpg_updates: last.map_or(0, |r| r.ddpg_updates),
    }
}

/// Per-server arrival histories feeding the forecaster; forecasts are only
/// recomputed for servers that saw a new arrival.
struct ForecastTracker<'a> {
    model: Option<&'a ForecastModel>,
    last_arrival: Vec<Option<f64>>,
    history: Vec<Vec<(f64, f64)>>,
    current: Prediction,
    stale: Vec<bool>,
}

impl<'a> ForecastTracker<'a> {
    fn new(model: Option<&'a ForecastModel>, num_servers: usize) -> Self {
        Self {
            model,
            last_arrival: vec![None; num_servers],
            history: vec![Vec::new(); num_servers],
            current: Prediction::zeros(num_servers),
            stale: vec![model.is_some(); num_servers],
        }
    }

    fn record(&mut self, task: &Task) {
        let m = task.origin_server;
        if let Some(prev) = self.last_arrival[m] {
            self.history[m].push((task.arrival_time - prev, task.compute_demand));
            self.stale[m] = true;
        }
        self.last_arrival[m] = Some(task.arrival_time);
    }

    fn prediction(&mut self) -> &Prediction {
        if let Some(model) = self.model {
            let w = model.window_length();
            for m in 0..self.history.len() {
                if self.stale[m] {
                    let h = &self.history[m];
                    let (g, d) = model.servers[m].predict(&h[h.len().saturating_sub(w)..]);
                    self.current.next_interarrival[m] = g;
                    self.current.next_demand[m] = d;
                    self.stale[m] = false;
                }
            }
        }
        &self.current
    }
}

/// Observation and actions of a slot whose successor is not yet known.
struct Pending {
    obs: Observation,
    actions: Vec<HybridAction>,
    reward: f64,
}

fn audit_ratios(actions: &[HybridAction], plans: &[WorkPlan], demands: &[f64]) -> u32 {
    let mut bad = actions.iter().filter(|a| !a.continuous.in_unit_box()).count() as u32;
    for p in plans {
        let shipped: f64 = p.offloads.iter().map(|o| o.demand).sum();
        let total = demands[p.origin];
        if p.local.demand < 0.0 || shipped < 0.0 || shipped > total * (1.0 + 1e-9) || (shipped + p.local.demand - total).abs() > 1e-9 * total.max(1.0) {
            bad += 1;
        }
    }
    bad
}

fn audit_ledger(ledger: &ResourceLedger, grants: &[crate::env::Grant]) -> (u32, u32) {
    let mut cpu = 0;
    let mut bw = 0;
    let mut flag = |r: Resource| match r {
        Resource::Cpu(_) => cpu += 1,
        Resource::Link(_) => bw += 1,
    };
    for g in grants.iter().filter(|g| !g.fallback && g.granted > g.available * (1.0 + 1e-9)) {
        flag(g.resource);
    }
    for (m, (left, cap)) in ledger.remaining_cpu().iter().zip(ledger.cpu_capacity()).enumerate() {
        let held = ledger.outstanding(Resource::Cpu(m));
        if *left < 0.0 || *left > *cap || held > cap * (1.0 + 1e-9) {
            flag(Resource::Cpu(m));
        }
    }
    for (k, (left, cap)) in ledger.remaining_bw().iter().zip(ledger.bw_capacity()).enumerate() {
        let held = ledger.outstanding(Resource::Link(k));
        if *left < 0.0 || *left > *cap || held > cap * (1.0 + 1e-9) {
            flag(Resource::Link(k));
        }
    }
    (cpu, bw)
}

/// Tasks bucketed by slot index; tasks past the horizon are dropped.
fn bucket(tasks: &[Task], slot_len: f64, steps: u64, num_servers: usize) -> Result<Vec<Vec<&Task>>> {
    let mut slots: Vec<Vec<&Task>> = vec![Vec::new(); steps as usize];
    for t in tasks {
        if t.origin_server >= num_servers {
            return Err(Error::Config(alloc::format!("task for unknown server {}", t.origin_server)));
        }
        if !(t.arrival_time >= 0.0) || !(t.compute_demand > 0.0) || !(t.payload_size > 0.0) {
            return Err(Error::Domain("tasks need nonnegative arrival times and positive demand and size"));
        }
        let s = libm::floor(t.arrival_time / slot_len) as u64;
        if s < steps {
            slots[s as usize].push(t);
        }
    }
    for slot in &mut slots {
        slot.sort_by(|a, b| a.arrival_time.total_cmp(&b.arrival_time).then(a.origin_server.cmp(&b.origin_server)));
    }
    Ok(slots)
}

/// Drive `policy` over `tasks` for `config.steps` slots.
///
/// Each slot, every server's arrivals are merged into one pending workload.
/// Servers with work act; the environment places the decoded plans; the team
/// reward is scored against the sliding references. The transition of a
/// slot is completed at the next non-skipped slot and offered to the policy
/// together with that slot's index. Every slot, skipped or not, yields one
/// row passed to `sink`.
pub fn run_simulation<P: Policy + ?Sized>(
    config: &SimulationConfig,
    topology: &Topology,
    tasks: &[Task],
    forecaster: Option<&ForecastModel>,
    policy: &mut P,
    mut sink: impl FnMut(&MetricsRow) -> Result<()>,
) -> Result<RunSummary> {
    config.validate()?;
    let m = topology.num_servers();
    if let Some(f) = forecaster {
        if f.num_servers() != m {
            return Err(Error::Config(alloc::format!("forecaster covers {} servers, topology has {m}", f.num_servers())));
        }
    }
    let slots = bucket(tasks, config.slot_len, config.steps, m)?;
    let mut env = Environment::new(topology.clone());
    env.slot_len = config.slot_len;
    let mut tracker = ForecastTracker::new(if policy.uses_forecast() { forecaster } else { None }, m);
    let mut baseline = RewardBaseline::new(config.reward_window, config.reward_minima);
    let mut pending: Option<Pending> = None;
    let (mut dqn_updates, mut ddpg_updates) = (0u64, 0u64);
    let mut rows: Vec<MetricsRow> = Vec::new();
    let kappa = config.agent.kappa;

    for (step, arrivals) in slots.iter().enumerate() {
        let step = step as u64;
        let now = step as f64 * config.slot_len;
        let (eps, noise) = policy.exploration();
        if arrivals.is_empty() {
            env.step(&[], now)?;
            let row = MetricsRow {
                step,
                time: now,
                skipped: true,
                active_servers: 0,
                reward: 0.0,
                total_latency: 0.0,
                total_energy: 0.0,
                utilisation: vec![0.0; m],
                epsilon: eps,
                noise_scale: noise,
                dqn_updates,
                ddpg_updates,
                violations: Violations::default(),
            };
            sink(&row)?;
            rows.push(row);
            continue;
        }

        let mut demands = vec![0.0; m];
        let mut payloads = vec![0.0; m];
        for t in arrivals {
            demands[t.origin_server] += t.compute_demand;
            payloads[t.origin_server] += t.payload_size;
            tracker.record(t);
        }
        let active: Vec<bool> = demands.iter().map(|d| *d > 0.0).collect();
        let mut view = env.ledger.clone();
        view.advance(now);
        let forecast = tracker.prediction().clone();
        let obs = Observation {
            critic_state: state::critic_state(topology, &view, &demands, &forecast, &config.scales),
            actor_states: (0..m)
                .map(|j| state::actor_state(topology, &view, j, demands[j], payloads[j], &config.scales))
                .collect(),
            active,
        };

        if let Some(p) = pending.take() {
            let transition = Transition {
                critic_state: p.obs.critic_state,
                actor_states: p.obs.actor_states,
                active: p.obs.active,
                discrete: p.actions.iter().map(|a| a.discrete).collect(),
                continuous: p.actions.iter().map(|a| a.continuous.to_vec()).collect(),
                reward: p.reward,
                next_critic_state: obs.critic_state.clone(),
                next_actor_states: obs.actor_states.clone(),
                next_active: obs.active.clone(),
            };
            debug_assert!(transition.is_complete());
            let report = policy.learn(transition, step);
            dqn_updates += report.dqn_updates as u64;
            ddpg_updates += report.ddpg_updates as u64;
        }

        let mut actions = policy.act(&obs);
        if actions.len() != m {
            return Err(Error::Config(alloc::format!("policy returned {} actions for {m} servers", actions.len())));
        }
        for (j, a) in actions.iter_mut().enumerate() {
            if !obs.active[j] {
                *a = HybridAction::zero(m);
            }
        }
        let plans: Vec<WorkPlan> = (0..m)
            .filter(|&j| obs.active[j])
            .map(|j| decode_action(&actions[j], j, demands[j], payloads[j], topology, &view, kappa))
            .collect();
        let ratio = audit_ratios(&actions, &plans, &demands);
        let outcome = env.step(&plans, now)?;
        let (cpu, bandwidth) = audit_ledger(&env.ledger, &outcome.grants);
        baseline.update(outcome.total_latency, outcome.total_energy);
        let reward = compute_reward(outcome.total_latency, outcome.total_energy, &baseline, &config.weights);

        let row = MetricsRow {
            step,
            time: now,
            skipped: false,
            active_servers: obs.active.iter().filter(|a| **a).count(),
            reward,
            total_latency: outcome.total_latency,
            total_energy: outcome.total_energy,
            utilisation: outcome.utilisation.clone(),
            epsilon: eps,
            noise_scale: noise,
            dqn_updates,
            ddpg_updates,
            violations: Violations { cpu, bandwidth, ratio },
        };
        sink(&row)?;
        rows.push(row);
        pending = Some(Pending { obs, actions, reward });
    }

    let mut summary = summarize(&rows, config);
    summary.policy = policy.kind();
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{FullAllocation, RandomAllocation};

    fn row(step: u64, skipped: bool, l: f64, e: f64) -> MetricsRow {
        MetricsRow {
            step,
            time: step as f64,
            skipped,
            active_servers: 1,
            reward: 0.0,
            total_latency: l,
            total_energy: e,
            utilisation: Vec::new(),
            epsilon: 0.0,
            noise_scale: 0.0,
            dqn_updates: 0,
            ddpg_updates: 0,
            violations: Violations::default(),
        }
    }

    #[test]
    fn objective_examples() {
        let w = ObjectiveWeights::default();
        assert_eq!(summarize_objective(&[row(0, false, 2.0, 4.0)], &w), 3.0);
        assert_eq!(summarize_objective(&[row(0, true, 0.0, 0.0)], &w), 0.0);
        let a = [row(0, false, 1.5, 3.0), row(1, false, 0.25, 7.0)];
        let b = [row(0, false, 3.0, 6.0), row(1, false, 0.5, 14.0)];
        assert_eq!(summarize_objective(&b, &w), 2.0 * summarize_objective(&a, &w));
    }

    #[test]
    fn final_window_bounds() {
        assert_eq!(final_window_start(20_000, 5000), 18_500);
        assert_eq!(final_window_start(5001, 5000), 5000);
    }

    fn small_config(policy: PolicyKind, steps: u64) -> SimulationConfig {
        SimulationConfig {
            policy,
            steps,
            agent: AgentConfig { hidden: vec![8], batch_size: 4, observation_steps: 5, ..AgentConfig::default() },
            ..SimulationConfig::default()
        }
    }

    fn task(server: usize, at: f64, demand: f64) -> Task {
        Task { origin_server: server, arrival_time: at, compute_demand: demand, payload_size: 10.0 }
    }

    #[test]
    fn skipped_slots_and_row_accounting() {
        let tasks = [task(0, 0.2, 20.0), task(0, 0.7, 10.0), task(1, 3.5, 40.0)];
        let mut rows = Vec::new();
        let s = run_simulation(&small_config(PolicyKind::Fa, 6), &Topology::reference(), &tasks, None, &mut FullAllocation, |r| {
            rows.push(r.clone());
            Ok(())
        })
        .unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows.iter().filter(|r| !r.skipped).count(), 2);
        assert_eq!(s.active_slots, 2);
        // two tasks merged: 30 Gc at 40 GHz
        assert!((rows[0].total_latency - 0.75).abs() < 1e-12);
        assert!(rows[1].skipped && rows[1].total_energy == 0.0);
        let (e0, e3) = (rows[0].total_energy, rows[3].total_energy);
        // both slots sit among the five smallest, so the references are plain means
        let expected = 0.5 * (0.75 + 1.0) / 2.0 / rows[3].total_latency + 0.5 * (e0 + e3) / 2.0 / e3;
        assert!((rows[3].reward - expected).abs() < 1e-12);
    }

    #[test]
    fn random_policy_never_violates_constraints() {
        let tasks: Vec<Task> = (0..300).map(|i| task(i % 3, i as f64 * 0.2, 60.0)).collect();
        let s = run_simulation(&small_config(PolicyKind::Ra, 60), &Topology::reference(), &tasks, None, &mut RandomAllocation::new(3), |_| Ok(())).unwrap();
        assert_eq!(s.violations.total(), 0);
    }
}
