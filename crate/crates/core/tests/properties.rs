use edgecoop_core::agents::{compute_reward, decode_action, ContinuousAction, DiscreteAction, HybridAction, RewardBaseline};
use edgecoop_core::env::{Environment, ObjectiveWeights, Topology};
use edgecoop_core::nn::soft_update;
use proptest::prelude::*;

fn unit_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.5f64..1.5, n)
}

fn hybrid() -> impl Strategy<Value = HybridAction> {
    (0usize..4, unit_vec(7)).prop_map(|(d, v)| HybridAction { discrete: DiscreteAction(d), continuous: ContinuousAction::from_slice(&v, 3) })
}

/// One slot: per server an optional (demand, payload, action).
fn slot() -> impl Strategy<Value = Vec<Option<(f64, f64, HybridAction)>>> {
    prop::collection::vec(prop::option::of((0.1f64..200.0, 5.0f64..20.0, hybrid())), 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn random_slots_never_overcommit(slots in prop::collection::vec(slot(), 1..30), kappa in 0.05f64..1.0) {
        let topo = Topology::reference();
        let mut env = Environment::new(topo.clone());
        for (t, slot) in slots.iter().enumerate() {
            let plans: Vec<_> = slot
                .iter()
                .enumerate()
                .filter_map(|(origin, work)| work.as_ref().map(|(d, p, a)| (origin, *d, *p, a)))
                .map(|(origin, d, p, a)| {
                    let plan = decode_action(a, origin, d, p, &topo, &env.ledger, kappa);
                    let placed = plan.local.demand + plan.offloads.iter().map(|o| o.demand).sum::<f64>();
                    assert!((placed - d).abs() <= 1e-9 * d, "demand not conserved");
                    plan
                })
                .collect();
            let out = env.step(&plans, t as f64).unwrap();
            env.ledger.check_conservation().unwrap();
            prop_assert_eq!(out.skipped, plans.is_empty());
            prop_assert!(out.total_latency.is_finite() && out.total_latency >= 0.0);
            for g in out.grants.iter().filter(|g| !g.fallback) {
                prop_assert!(g.granted <= g.available + 1e-9);
            }
            for (s, server) in topo.servers().iter().enumerate() {
                let e = out.per_server_energy[s];
                let busy = out.busy_time[s];
                prop_assert!(busy <= env.slot_len + 1e-12);
                prop_assert!(e >= server.power_min * busy - 1e-9 && e <= server.power_max * busy + 1e-9);
            }
        }
    }

    #[test]
    fn reward_is_positive_and_bounded_by_references(history in prop::collection::vec((0.01f64..100.0, 1.0f64..1000.0), 1..150)) {
        let mut baseline = RewardBaseline::new(100, 5);
        let w = ObjectiveWeights::default();
        for &(l, e) in &history {
            baseline.update(l, e);
            let r = compute_reward(l, e, &baseline, &w);
            prop_assert!(r > 0.0);
            let lmin = baseline.latencies().cloned().fold(f64::INFINITY, f64::min);
            let emin = baseline.energies().cloned().fold(f64::INFINITY, f64::min);
            prop_assert!(baseline.latency_ref() >= lmin && baseline.energy_ref() >= emin);
            if l >= baseline.latency_ref() && e >= baseline.energy_ref() {
                prop_assert!(r <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn soft_update_mixes_elementwise(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..200), tau in 0.0f64..=1.0) {
        let mut target: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let main: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        soft_update(&mut target, &main, tau);
        for ((t, m), new) in pairs.iter().map(|p| (p.0, p.1)).zip(&target) {
            prop_assert!((new - (tau * m + (1.0 - tau) * t)).abs() <= 1e-12);
        }
    }
}
