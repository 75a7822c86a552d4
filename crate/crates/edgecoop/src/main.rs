use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use edgecoop::config::ExperimentConfig;
use edgecoop::core::baselines::PolicyKind;
use edgecoop::experiment;
use edgecoop::{Error, Result};

#[derive(Parser)]
#[command(name = "edgecoop", version, about = "Cooperative edge task offloading experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one policy on one seed.
    Run {
        #[command(flatten)]
        common: Common,
        /// cto-tp, cto, fa or ra.
        #[arg(long)]
        policy: Option<PolicyKind>,
    },
    /// Run several policies over the configured seeds on shared workloads.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated policies; all four when omitted.
        #[arg(long, value_delimiter = ',')]
        policies: Vec<PolicyKind>,
        /// Comma-separated seeds, replacing the configured list.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Runs executed concurrently.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Fit the arrival forecaster and report held-out R².
    TrainPredictor {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Flat TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for the workload, network initialization and exploration.
    #[arg(long)]
    seed: Option<u64>,
    /// Slots to simulate.
    #[arg(long)]
    steps: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Workload trace CSV.
    #[arg(long, conflicts_with = "synthetic")]
    trace: Option<PathBuf>,
    /// Use the synthetic generator even if the config names a trace.
    #[arg(long)]
    synthetic: bool,
    /// Column and unit mapping for the trace, as key=value pairs.
    #[arg(long)]
    schema_map: Option<String>,
    /// Override any configuration key, e.g. `--set gamma=0.95`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let base = match &self.config {
            Some(path) => std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.clone(), source })?,
            None => String::new(),
        };
        let mut table: toml::Table = base.parse().map_err(|e| Error::Config(format!("config: {e}")))?;
        for o in &self.overrides {
            let (key, value) = o.split_once('=').ok_or_else(|| Error::Config(format!("override `{o}` is not KEY=VALUE")))?;
            let key = key.trim().replace('-', "_");
            let value = value.trim();
            let parsed = format!("v = {value}")
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(value.to_string()));
            table.insert(key, parsed);
        }
        let mut cfg = ExperimentConfig::parse(&toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(s) = self.steps {
            cfg.steps = s;
        }
        if let Some(t) = &self.trace {
            cfg.trace = Some(t.clone());
        }
        if self.synthetic {
            cfg.trace = None;
        }
        if let Some(m) = &self.schema_map {
            cfg.schema_map = Some(m.clone());
        }
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, policy } => {
            let mut cfg = common.config()?;
            if let Some(p) = policy {
                cfg.policy = p;
            }
            let s = experiment::run(&cfg, &common.out)?;
            println!(
                "{} seed {}: final reward {:.4}, latency {:.4} s, energy {:.2} J, violations {}",
                s.policy,
                s.seed,
                s.final_reward,
                s.avg_latency,
                s.avg_energy,
                s.violations.total()
            );
        }
        Command::Compare { common, policies, seeds, jobs } => {
            let mut cfg = common.config()?;
            if !seeds.is_empty() {
                cfg.seeds = seeds;
            }
            let policies = if policies.is_empty() { PolicyKind::ALL.to_vec() } else { policies };
            let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let cmp = experiment::compare(&cfg, &policies, &common.out, jobs)?;
            println!("{:8} {:>18} {:>22} {:>22}", "policy", "final reward", "latency (s)", "energy (J)");
            for p in &cmp.policies {
                let ms = |xs: Vec<f64>| {
                    let m = edgecoop::core::stats::mean(&xs);
                    let s = if xs.len() > 1 { edgecoop::core::stats::std_dev(&xs) } else { 0.0 };
                    format!("{m:.4} ± {s:.4}")
                };
                println!("{:8} {:>18} {:>22} {:>22}", p.policy.to_string(), ms(p.rewards()), ms(p.latencies()), ms(p.energies()));
            }
        }
        Command::TrainPredictor { common } => {
            let cfg = common.config()?;
            for r in experiment::train_predictor(&cfg, &common.out)? {
                println!("server {}: R² inter-arrival {:.4}, demand {:.4}", r.server, r.r2_interarrival, r.r2_demand);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
