use edgecoop::core::baselines::PolicyKind;
use edgecoop::core::traces::TraceEvent;
use edgecoop::experiment::{self, paired_greater, run_dir, METRICS_FILE};
use edgecoop::metrics_io::{metrics_header, metrics_line, read_metrics};
use edgecoop::trace_io::write_trace;
use edgecoop::{Error, ExperimentConfig};

fn tiny(policy: PolicyKind) -> ExperimentConfig {
    ExperimentConfig {
        policy,
        steps: 400,
        observation_steps: 150,
        hidden: vec![8],
        batch_size: 16,
        model_dim: 8,
        attention_heads: 2,
        feedforward_dim: 16,
        predictor_epochs: 1,
        seeds: vec![0, 1],
        ..ExperimentConfig::default()
    }
}

#[test]
fn run_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let s = experiment::run(&tiny(PolicyKind::CtoTp), &out).unwrap();
    for f in ["metrics.csv", "summary.csv", "reward.png", "latency_energy.png", "checkpoint.json", "predictor.json", "predictor_r2.csv", "config.toml", "topology.toml"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let rows = read_metrics(&out.join(METRICS_FILE)).unwrap();
    assert_eq!(rows.len(), 400);
    assert_eq!(s.violations.total(), 0);
    assert!(rows.windows(2).all(|w| w[1].step == w[0].step + 1));
    let saved = ExperimentConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!(saved, tiny(PolicyKind::CtoTp));
}

#[test]
fn metrics_lines_parse_back_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    experiment::run(&tiny(PolicyKind::Ra), &out).unwrap();
    let text = std::fs::read_to_string(out.join(METRICS_FILE)).unwrap();
    let rows = read_metrics(&out.join(METRICS_FILE)).unwrap();
    let mut rebuilt = metrics_header(3);
    rebuilt.push('\n');
    for r in &rows {
        rebuilt.push_str(&metrics_line(r));
        rebuilt.push('\n');
    }
    assert_eq!(text, rebuilt);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(PolicyKind::Cto);
    experiment::run(&cfg, &dir.path().join("a")).unwrap();
    experiment::run(&cfg, &dir.path().join("b")).unwrap();
    for f in ["metrics.csv", "summary.csv", "checkpoint.json"] {
        assert_eq!(std::fs::read(dir.path().join("a").join(f)).unwrap(), std::fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
    let other = ExperimentConfig { seed: 1, ..cfg };
    experiment::run(&other, &dir.path().join("c")).unwrap();
    assert_ne!(std::fs::read(dir.path().join("a/metrics.csv")).unwrap(), std::fs::read(dir.path().join("c/metrics.csv")).unwrap());
}

#[test]
fn compare_summaries_match_the_raw_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp");
    let cfg = tiny(PolicyKind::CtoTp);
    let cmp = experiment::compare(&cfg, &PolicyKind::ALL, &out, 2).unwrap();
    for f in ["summary.csv", "runs.csv", "tests.csv", "reward.png", "latency_energy.png"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let again = experiment::collect(&cfg, &out, &PolicyKind::ALL, &cfg.seeds).unwrap();
    for (a, b) in cmp.policies.iter().zip(&again.policies) {
        assert_eq!(a.runs, b.runs);
    }
    // policies on the same seed see the same arrivals
    let active = |p: PolicyKind| {
        read_metrics(&run_dir(&out, p, 1).join(METRICS_FILE)).unwrap().iter().map(|r| r.skipped).collect::<Vec<_>>()
    };
    assert_eq!(active(PolicyKind::Fa), active(PolicyKind::Ra));
    assert_eq!(active(PolicyKind::Fa), active(PolicyKind::CtoTp));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
}

#[test]
fn identical_policies_compare_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(PolicyKind::Fa);
    let a = experiment::compare(&cfg, &[PolicyKind::Fa], &dir.path().join("a"), 1).unwrap();
    let b = experiment::compare(&cfg, &[PolicyKind::Fa], &dir.path().join("b"), 2).unwrap();
    assert_eq!(a.policies[0].runs, b.policies[0].runs);
    assert_eq!(
        std::fs::read(dir.path().join("a/summary.csv")).unwrap(),
        std::fs::read(dir.path().join("b/summary.csv")).unwrap()
    );
}

#[test]
fn missing_runs_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let err = experiment::collect(&tiny(PolicyKind::Fa), dir.path(), &[PolicyKind::Fa], &[3]).err().unwrap();
    match err {
        Error::MissingRun(p) => assert!(p.ends_with("fa/seed-3/metrics.csv"), "{p:?}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn trace_runs_reject_unknown_servers() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let events = vec![TraceEvent { server_id: 5, arrival_time: 1.0, compute_demand: 2.0, payload_size: None }];
    write_trace(&trace, &events).unwrap();
    let cfg = ExperimentConfig { trace: Some(trace.clone()), ..tiny(PolicyKind::Fa) };
    assert!(matches!(experiment::run(&cfg, &dir.path().join("r")), Err(Error::Config(_))));
    let cfg = ExperimentConfig { schema_map: Some("server_modulo=3".into()), ..cfg };
    let s = experiment::run(&cfg, &dir.path().join("r")).unwrap();
    assert_eq!(s.active_slots, 1);
}

#[test]
fn paired_test_direction_and_edges() {
    let a = [0.70, 0.72, 0.69, 0.71, 0.73];
    let b = [0.66, 0.67, 0.66, 0.65, 0.68];
    let t = paired_greater(&a, &b).unwrap();
    assert!(t.p_value < 0.001 && t.mean_diff > 0.0 && t.df == 4);
    assert!(paired_greater(&b, &a).unwrap().p_value > 0.999);
    assert_eq!(paired_greater(&[1.0, 2.0], &[0.0, 1.0]).unwrap().p_value, 0.0);
    assert_eq!(paired_greater(&[1.0, 2.0], &[1.0, 2.0]).unwrap().p_value, 1.0);
    assert!(paired_greater(&[1.0], &[0.0]).is_none());
    // t = 1 with 1 degree of freedom is the 75th percentile of Cauchy
    let t = paired_greater(&[1.0, 3.0], &[0.0, 0.0]).unwrap();
    assert!((t.t - 2.0).abs() < 1e-12);
    assert!((t.p_value - (0.5 - (2.0f64).atan() / std::f64::consts::PI)).abs() < 1e-9);
}

#[test]
fn forecaster_report_covers_every_server() {
    let dir = tempfile::tempdir().unwrap();
    let rows = experiment::train_predictor(&tiny(PolicyKind::CtoTp), dir.path()).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.train_events > 0 && r.eval_events > 0));
    let model = experiment::load_forecaster(&dir.path().join("predictor.json")).unwrap();
    assert_eq!(model.num_servers(), 3);
    let cfg = ExperimentConfig { predictor: Some(dir.path().join("predictor.json")), ..tiny(PolicyKind::CtoTp) };
    experiment::run(&cfg, &dir.path().join("run")).unwrap();
    assert!(!dir.path().join("run/predictor.json").exists());
}
