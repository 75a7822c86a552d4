use edgecoop::core::baselines::PolicyKind;
use edgecoop::core::env::Topology;
use edgecoop::topology_file::{parse_topology, render_topology};
use edgecoop::{Error, ExperimentConfig};

#[test]
fn defaults_carry_the_reference_parameters() {
    let c = ExperimentConfig::default();
    assert_eq!((c.cpu_capacity_ghz, c.bandwidth_gbps, c.snr_db), (100.0, 10.0, 10.0));
    assert_eq!((c.power_min_w, c.power_max_w), (176.0, 396.0));
    assert_eq!((c.lambda_latency, c.rho_energy), (0.5, 0.5));
    assert_eq!((c.learning_rate, c.batch_size, c.tau, c.gamma, c.kappa), (5e-4, 300, 0.005, 0.99, 0.4));
    assert_eq!((c.ou_mu, c.ou_sigma, c.ou_beta, c.ou_scale), (0.0, 0.3, 1.0, 1.0));
    assert_eq!((c.model_dim, c.attention_heads, c.encoder_layers, c.feedforward_dim), (512, 4, 1, 1024));
    assert_eq!((c.observation_steps, c.slot_seconds, c.smoothing_window, c.window_length), (5000, 1.0, 20, 20));
    assert_eq!((c.size_min_mb, c.size_max_mb), (5.0, 20.0));
    c.validate().unwrap();
    assert_eq!(c.topology().unwrap(), Topology::reference());
}

#[test]
fn every_key_is_named_in_the_rendered_file() {
    let text = ExperimentConfig::default().render();
    for key in [
        "cpu_capacity_ghz",
        "bandwidth_gbps",
        "snr_db",
        "power_min_w",
        "power_max_w",
        "lambda_latency",
        "rho_energy",
        "learning_rate",
        "batch_size",
        "tau",
        "gamma",
        "kappa",
        "ou_mu",
        "ou_sigma",
        "ou_beta",
        "ou_scale",
        "model_dim",
        "attention_heads",
        "encoder_layers",
        "feedforward_dim",
        "observation_steps",
        "slot_seconds",
        "smoothing_window",
    ] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{key} ="))), "{key} missing");
    }
    assert_eq!(ExperimentConfig::parse(&text).unwrap(), ExperimentConfig::default());
}

#[test]
fn partial_files_fill_defaults_and_typos_fail() {
    let c = ExperimentConfig::parse("gamma = 0.9\npolicy = \"fa\"\nhidden = [32, 32]\n").unwrap();
    assert_eq!(c.gamma, 0.9);
    assert_eq!(c.policy, PolicyKind::Fa);
    assert_eq!(c.hidden, vec![32, 32]);
    assert_eq!(c.batch_size, 300);
    assert!(matches!(ExperimentConfig::parse("gama = 0.9"), Err(Error::Config(_))));
    assert!(matches!(ExperimentConfig::parse("policy = \"greedy\""), Err(Error::Config(_))));
}

#[test]
fn validation_rejects_inconsistent_settings() {
    let bad = |c: ExperimentConfig| assert!(c.validate().is_err());
    bad(ExperimentConfig { steps: 5000, ..ExperimentConfig::default() });
    bad(ExperimentConfig { lambda_latency: 0.7, ..ExperimentConfig::default() });
    bad(ExperimentConfig { seeds: vec![], ..ExperimentConfig::default() });
    bad(ExperimentConfig { mean_interarrival: vec![1.0], ..ExperimentConfig::default() });
    bad(ExperimentConfig { model_dim: 30, ..ExperimentConfig::default() });
    bad(ExperimentConfig { train_fraction: 1.0, ..ExperimentConfig::default() });
}

#[test]
fn topology_files_round_trip() {
    let text = render_topology(&Topology::reference());
    assert_eq!(parse_topology(&text).unwrap(), Topology::reference());
    let custom = "[[server]]\ncpu_capacity_ghz = 50.0\npower_min_w = 100.0\npower_max_w = 200.0\n\
                  [[server]]\ncpu_capacity_ghz = 80.0\npower_min_w = 100.0\npower_max_w = 300.0\n\
                  [[link]]\nendpoints = [0, 1]\nbandwidth_bps = 1e9\nsnr_db = 20.0\n";
    let t = parse_topology(custom).unwrap();
    assert_eq!(t.num_servers(), 2);
    assert_eq!(t.servers()[1].cpu_capacity, 80.0);
    assert_eq!(t.links()[0].snr_db, 20.0);
    let looped = "[[server]]\ncpu_capacity_ghz = 50.0\npower_min_w = 100.0\npower_max_w = 200.0\n\
                  [[link]]\nendpoints = [0, 0]\nbandwidth_bps = 1e9\nsnr_db = 20.0\n";
    assert!(parse_topology(looped).is_err());
    assert!(parse_topology("[[server]]\ncpu = 1\n").is_err());
}
