//! Flat experiment configuration.
//!
//! Every key is optional; missing keys take the defaults below, which
//! reproduce the reference setup. Unknown keys are rejected so typos fail
//! loudly.

use std::path::{Path, PathBuf};

use edgecoop_core::agents::{AgentConfig, StateScales};
use edgecoop_core::agents::noise::OuParams;
use edgecoop_core::baselines::PolicyKind;
use edgecoop_core::env::{ObjectiveWeights, Topology};
use edgecoop_core::harness::SimulationConfig;
use edgecoop_core::predictor::PredictorConfig;
use edgecoop_core::traces::SyntheticConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology_file::read_topology;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    // network, used when no topology file is given
    pub num_servers: usize,
    pub cpu_capacity_ghz: f64,
    pub bandwidth_gbps: f64,
    pub snr_db: f64,
    pub power_min_w: f64,
    pub power_max_w: f64,
    pub topology: Option<PathBuf>,

    // objective
    pub lambda_latency: f64,
    pub rho_energy: f64,

    // learner
    pub learning_rate: f64,
    pub batch_size: usize,
    pub tau: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub ou_mu: f64,
    pub ou_sigma: f64,
    pub ou_beta: f64,
    pub ou_scale: f64,
    pub hidden: Vec<usize>,
    pub epsilon_start: f64,
    pub epsilon_min: f64,
    pub exploration_decay: f64,
    pub noise_floor: f64,
    pub sync_period: usize,
    pub independent_buffer: usize,
    pub global_buffer: usize,
    pub observation_steps: u64,
    pub max_grad_norm: f64,

    // forecaster
    pub model_dim: usize,
    pub attention_heads: usize,
    pub encoder_layers: usize,
    pub feedforward_dim: usize,
    pub window_length: usize,
    pub predictor_learning_rate: f64,
    pub predictor_epochs: usize,
    pub predictor_batch_size: usize,
    /// Chronological share of each server's events used to fit the forecaster.
    pub train_fraction: f64,
    /// Pretrained forecaster; trained at run start when absent.
    pub predictor: Option<PathBuf>,

    // run protocol
    pub policy: PolicyKind,
    pub steps: u64,
    pub seed: u64,
    /// Seeds swept by `compare`.
    pub seeds: Vec<u64>,
    pub slot_seconds: f64,
    pub smoothing_window: usize,
    pub reward_window: usize,
    pub reward_minima: usize,

    // workload
    pub trace: Option<PathBuf>,
    pub schema_map: Option<String>,
    pub mean_interarrival: Vec<f64>,
    pub autocorrelation: f64,
    pub demand_mean: f64,
    pub demand_spread: f64,
    pub arrival_spread: f64,
    pub interarrival_shape: f64,
    pub size_min_mb: f64,
    pub size_max_mb: f64,

    // state normalization
    pub demand_scale_gc: f64,
    pub payload_scale_mb: f64,
    pub interarrival_scale_s: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let agent = AgentConfig::default();
        let predictor = PredictorConfig::default();
        let synthetic = SyntheticConfig::default();
        let sim = SimulationConfig::default();
        let scales = StateScales::default();
        Self {
            num_servers: 3,
            cpu_capacity_ghz: 100.0,
            bandwidth_gbps: 10.0,
            snr_db: 10.0,
            power_min_w: 176.0,
            power_max_w: 396.0,
            topology: None,
            lambda_latency: sim.weights.lambda_latency,
            rho_energy: sim.weights.rho_energy,
            learning_rate: agent.learning_rate,
            batch_size: agent.batch_size,
            tau: agent.tau_ddpg,
            gamma: agent.gamma,
            kappa: agent.kappa,
            ou_mu: agent.ou.mu,
            ou_sigma: agent.ou.sigma,
            ou_beta: agent.ou.beta,
            ou_scale: agent.ou.scale,
            hidden: agent.hidden.clone(),
            epsilon_start: agent.epsilon_start,
            epsilon_min: agent.epsilon_min,
            exploration_decay: agent.exploration_decay,
            noise_floor: agent.noise_floor,
            sync_period: agent.sync_period,
            independent_buffer: agent.independent_capacity,
            global_buffer: agent.global_capacity,
            observation_steps: agent.observation_steps,
            max_grad_norm: agent.max_grad_norm,
            model_dim: predictor.model_dim,
            attention_heads: predictor.attention_heads,
            encoder_layers: predictor.encoder_layers,
            feedforward_dim: predictor.feedforward_dim,
            window_length: predictor.window_length,
            predictor_learning_rate: predictor.learning_rate,
            predictor_epochs: predictor.epochs,
            predictor_batch_size: predictor.batch_size,
            train_fraction: 0.8,
            predictor: None,
            policy: PolicyKind::CtoTp,
            steps: sim.steps,
            seed: 0,
            seeds: vec![0, 1, 2, 3, 4],
            slot_seconds: sim.slot_len,
            smoothing_window: sim.smoothing_window,
            reward_window: sim.reward_window,
            reward_minima: sim.reward_minima,
            trace: None,
            schema_map: None,
            mean_interarrival: synthetic.mean_interarrival.clone(),
            autocorrelation: synthetic.autocorrelation,
            demand_mean: synthetic.demand_mean,
            demand_spread: synthetic.demand_spread,
            arrival_spread: synthetic.arrival_spread,
            interarrival_shape: synthetic.interarrival_shape,
            size_min_mb: synthetic.size_range.0,
            size_max_mb: synthetic.size_range.1,
            demand_scale_gc: scales.demand,
            payload_scale_mb: scales.payload,
            interarrival_scale_s: scales.interarrival,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Self::parse(&text).map_err(|e| Error::Parse { path: path.into(), msg: e.to_string() })
    }

    pub fn render(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn topology(&self) -> Result<Topology> {
        let topo = match &self.topology {
            Some(path) => read_topology(path)?,
            None => Topology::full_mesh(
                self.num_servers,
                self.cpu_capacity_ghz,
                self.power_min_w,
                self.power_max_w,
                self.bandwidth_gbps * 1e9,
                self.snr_db,
            )?,
        };
        Ok(topo)
    }

    pub fn agent(&self) -> AgentConfig {
        AgentConfig {
            hidden: self.hidden.clone(),
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            tau_q: self.tau,
            tau_ddpg: self.tau,
            gamma: self.gamma,
            kappa: self.kappa,
            ou: OuParams { mu: self.ou_mu, sigma: self.ou_sigma, beta: self.ou_beta, scale: self.ou_scale },
            epsilon_start: self.epsilon_start,
            epsilon_min: self.epsilon_min,
            exploration_decay: self.exploration_decay,
            noise_floor: self.noise_floor,
            sync_period: self.sync_period,
            independent_capacity: self.independent_buffer,
            global_capacity: self.global_buffer,
            observation_steps: self.observation_steps,
            max_grad_norm: self.max_grad_norm,
        }
    }

    pub fn predictor_config(&self) -> PredictorConfig {
        PredictorConfig {
            model_dim: self.model_dim,
            attention_heads: self.attention_heads,
            encoder_layers: self.encoder_layers,
            feedforward_dim: self.feedforward_dim,
            window_length: self.window_length,
            learning_rate: self.predictor_learning_rate,
            epochs: self.predictor_epochs,
            batch_size: self.predictor_batch_size,
            seed: self.seed,
        }
    }

    pub fn simulation(&self, policy: PolicyKind, seed: u64) -> SimulationConfig {
        SimulationConfig {
            policy,
            steps: self.steps,
            seed,
            slot_len: self.slot_seconds,
            weights: ObjectiveWeights { lambda_latency: self.lambda_latency, rho_energy: self.rho_energy },
            agent: self.agent(),
            scales: StateScales {
                demand: self.demand_scale_gc,
                payload: self.payload_scale_mb,
                interarrival: self.interarrival_scale_s,
            },
            reward_window: self.reward_window,
            reward_minima: self.reward_minima,
            smoothing_window: self.smoothing_window,
        }
    }

    /// Synthetic workload covering the whole run.
    pub fn synthetic(&self, num_servers: usize, seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            num_servers,
            horizon: self.steps as f64 * self.slot_seconds,
            mean_interarrival: self.mean_interarrival.clone(),
            autocorrelation: self.autocorrelation,
            demand_mean: self.demand_mean,
            demand_spread: self.demand_spread,
            arrival_spread: self.arrival_spread,
            interarrival_shape: self.interarrival_shape,
            size_range: (self.size_min_mb, self.size_max_mb),
            seed,
        }
    }

    /// Checks that need no file access.
    pub fn validate(&self) -> Result<()> {
        ObjectiveWeights::new(self.lambda_latency, self.rho_energy)?;
        self.simulation(self.policy, self.seed).validate()?;
        self.predictor_config().validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must list at least one seed".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie in (0, 1)".into()));
        }
        if self.trace.is_none() && self.mean_interarrival.len() != self.topology_servers() {
            return Err(Error::Config(format!(
                "mean_interarrival has {} entries for {} servers",
                self.mean_interarrival.len(),
                self.topology_servers()
            )));
        }
        Ok(())
    }

    fn topology_servers(&self) -> usize {
        match &self.topology {
            Some(path) => read_topology(path).map(|t| t.num_servers()).unwrap_or(self.num_servers),
            None => self.num_servers,
        }
    }
}
