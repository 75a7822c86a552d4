use edgecoop_core::agents::{AgentConfig, DiscreteAction, HybridLearner};
use edgecoop_core::baselines::{make_policy, LearnedPolicy, PolicyKind};
use edgecoop_core::env::{Task, Topology};
use edgecoop_core::harness::{run_simulation, summarize, MetricsRow, SimulationConfig};
use edgecoop_core::predictor::{train, PredictorConfig};
use edgecoop_core::traces::{generate_synthetic, server_series, to_tasks, SyntheticConfig};

fn config(policy: PolicyKind, steps: u64, observation_steps: u64) -> SimulationConfig {
    SimulationConfig {
        policy,
        steps,
        agent: AgentConfig { hidden: vec![16, 16], batch_size: 16, observation_steps, ..AgentConfig::default() },
        ..SimulationConfig::default()
    }
}

fn workload(steps: u64, seed: u64) -> Vec<Task> {
    let syn = SyntheticConfig { horizon: steps as f64, seed, ..SyntheticConfig::default() };
    to_tasks(&generate_synthetic(&syn).unwrap(), (5.0, 20.0), seed)
}

fn collect(cfg: &SimulationConfig, tasks: &[Task], policy: &mut dyn edgecoop_core::baselines::Policy) -> Vec<MetricsRow> {
    let mut rows = Vec::new();
    run_simulation(cfg, &Topology::reference(), tasks, None, policy, |r| {
        rows.push(r.clone());
        Ok(())
    })
    .unwrap();
    rows
}

#[test]
fn single_busy_server_leaves_idle_agents_silent() {
    // server 0 receives a task every other slot, the rest never do
    let tasks: Vec<Task> = (0..200)
        .map(|i| Task { origin_server: 0, arrival_time: 2.0 * i as f64 + 0.5, compute_demand: 30.0, payload_size: 10.0 })
        .collect();
    let cfg = config(PolicyKind::Cto, 400, 100);
    let topo = Topology::reference();
    let mut policy = LearnedPolicy::new(PolicyKind::Cto, HybridLearner::new(&topo, cfg.agent.clone(), 0).unwrap());
    let mut rows = Vec::new();
    run_simulation(&cfg, &topo, &tasks, None, &mut policy, |r| {
        rows.push(r.clone());
        Ok(())
    })
    .unwrap();

    assert_eq!(rows.len(), 400);
    for r in &rows {
        assert_eq!(r.skipped, r.step % 2 == 1, "slot {}", r.step);
        assert!(r.skipped || r.active_servers == 1);
    }
    let stored: Vec<_> = policy.learner.global_buffer().iter().map(|(t, _)| t.clone()).collect();
    // one transition per consecutive pair of non-skipped slots
    assert_eq!(stored.len(), 199);
    for t in &stored {
        assert!(t.is_complete());
        assert_eq!(t.active, vec![true, false, false]);
        for j in 1..3 {
            assert_eq!(t.discrete[j], DiscreteAction::LOCAL_ONLY);
            assert!(t.continuous[j].iter().all(|x| *x == 0.0));
        }
    }
    assert!(policy.learner.independent_buffer(1).is_empty() && policy.learner.independent_buffer(2).is_empty());
    assert_eq!(policy.learner.independent_buffer(0).len(), 199);
}

#[test]
fn no_updates_during_observation() {
    let tasks = workload(600, 2);
    let cfg = config(PolicyKind::Cto, 600, 300);
    let mut policy = make_policy(PolicyKind::Cto, &Topology::reference(), &cfg.agent, 2).unwrap();
    let rows = collect(&cfg, &tasks, policy.as_mut());
    for r in rows.iter().filter(|r| r.step < 300) {
        assert_eq!((r.dqn_updates, r.ddpg_updates), (0, 0), "slot {}", r.step);
    }
    assert!(rows.last().unwrap().dqn_updates > 0 && rows.last().unwrap().ddpg_updates > 0);
}

#[test]
fn every_policy_respects_the_constraints() {
    let tasks = workload(1500, 4);
    for kind in PolicyKind::ALL {
        let cfg = config(kind, 1500, 500);
        let mut policy = make_policy(kind, &Topology::reference(), &cfg.agent, 4).unwrap();
        let rows = collect(&cfg, &tasks, policy.as_mut());
        let s = summarize(&rows, &cfg);
        assert_eq!(s.violations.total(), 0, "{kind}");
        assert!(rows.iter().all(|r| r.reward.is_finite() && r.total_latency.is_finite() && r.total_energy.is_finite()));
    }
}

#[test]
fn forecasts_reach_the_critic_only_for_the_predictive_variant() {
    let steps = 800;
    let syn = SyntheticConfig { horizon: steps as f64, seed: 6, ..SyntheticConfig::default() };
    let events = generate_synthetic(&syn).unwrap();
    let history: Vec<_> = (0..3).map(|m| server_series(&events, m)).collect();
    let pcfg = PredictorConfig { model_dim: 8, attention_heads: 2, feedforward_dim: 16, window_length: 8, epochs: 1, ..PredictorConfig::default() };
    let model = train(&history, &pcfg).unwrap();
    let tasks = to_tasks(&events, (5.0, 20.0), 6);
    let topo = Topology::reference();
    let run = |kind: PolicyKind| {
        let cfg = config(kind, steps, 200);
        let mut policy = LearnedPolicy::new(kind, HybridLearner::new(&topo, cfg.agent.clone(), 6).unwrap());
        run_simulation(&cfg, &topo, &tasks, Some(&model), &mut policy, |_| Ok(())).unwrap();
        policy.learner.global_buffer().iter().map(|(t, _)| t.critic_state.clone()).collect::<Vec<_>>()
    };
    let forecast_slots = |states: &[Vec<f64>]| states.iter().filter(|s| s[s.len() - 6..].iter().any(|x| *x != 0.0)).count();
    assert_eq!(forecast_slots(&run(PolicyKind::Cto)), 0);
    assert!(forecast_slots(&run(PolicyKind::CtoTp)) > 0);
}

#[test]
fn runs_are_reproducible() {
    let tasks = workload(700, 9);
    let cfg = config(PolicyKind::CtoTp, 700, 200);
    let once = || {
        let mut policy = make_policy(PolicyKind::CtoTp, &Topology::reference(), &cfg.agent, 9).unwrap();
        collect(&cfg, &tasks, policy.as_mut())
    };
    let (a, b) = (once(), once());
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.reward.to_bits(), y.reward.to_bits());
        assert_eq!(x, y);
    }
}
