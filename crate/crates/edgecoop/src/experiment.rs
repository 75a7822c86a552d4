//! Runs, multi-policy comparisons and forecaster training, with their
//! on-disk outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use edgecoop_core::baselines::{make_policy, PolicyKind};
use edgecoop_core::env::{Task, Topology};
use edgecoop_core::harness::{run_simulation, summarize, MetricsRow, RunSummary};
use edgecoop_core::predictor::{self, smooth, ForecastModel};
use edgecoop_core::stats::{mean, std_dev};
use edgecoop_core::traces::{generate_synthetic, server_series, split_train_eval, to_tasks, TraceEvent};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::metrics_io::{read_metrics, run_summary_line, write_lines, MetricsWriter, RUN_SUMMARY_HEADER};
use crate::plot::{bar_panels, line_chart, BarPanel, Series};
use crate::topology_file::render_topology;
use crate::trace_io::{read_trace, SchemaMap};

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const REWARD_PLOT: &str = "reward.png";
pub const LATENCY_ENERGY_PLOT: &str = "latency_energy.png";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const PREDICTOR_FILE: &str = "predictor.json";
pub const R2_FILE: &str = "predictor_r2.csv";

/// Points per curve in reward plots.
const CURVE_BINS: usize = 200;

/// The workload of one seed, shared by every policy run on it.
pub struct Workload {
    pub events: Vec<TraceEvent>,
    pub tasks: Vec<Task>,
}

pub fn load_workload(cfg: &ExperimentConfig, topology: &Topology, seed: u64) -> Result<Workload> {
    let m = topology.num_servers();
    let events = match &cfg.trace {
        Some(path) => {
            let schema: SchemaMap = cfg.schema_map.as_deref().unwrap_or("").parse()?;
            let parsed = read_trace(path, &schema)?;
            if let Some(e) = parsed.events.iter().find(|e| e.server_id >= m) {
                return Err(Error::Config(format!(
                    "trace names server {} but the topology has {m} servers (try server_modulo in the schema map)",
                    e.server_id
                )));
            }
            parsed.events
        }
        None => generate_synthetic(&cfg.synthetic(m, seed))?,
    };
    let tasks = to_tasks(&events, (cfg.size_min_mb, cfg.size_max_mb), seed);
    Ok(Workload { events, tasks })
}

/// Held-out forecast quality of one server.
#[derive(Debug, Clone, PartialEq)]
pub struct R2Row {
    pub server: usize,
    pub train_events: usize,
    pub eval_events: usize,
    pub r2_interarrival: f64,
    pub r2_demand: f64,
}

/// Fits one forecaster per server on the chronological training prefix of
/// `events` and scores it on the rest.
pub fn fit_forecaster(cfg: &ExperimentConfig, events: &[TraceEvent], num_servers: usize) -> Result<(ForecastModel, Vec<R2Row>)> {
    let split = split_train_eval(events, cfg.train_fraction)?;
    if split.warnings > 0 {
        log::warn!("{} servers have an empty train or eval split", split.warnings);
    }
    let history: Vec<Vec<(f64, f64)>> = (0..num_servers).map(|m| server_series(&split.train, m)).collect();
    let started = Instant::now();
    let model = predictor::train(&history, &cfg.predictor_config())?;
    log::info!("forecaster trained in {:.1}s", started.elapsed().as_secs_f64());
    let mut rows = Vec::new();
    for (m, h) in history.iter().enumerate() {
        let full = server_series(events, m);
        let (r2_interarrival, r2_demand) = match model.evaluate(m, &full, h.len()) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("server {m}: {e}");
                (f64::NAN, f64::NAN)
            }
        };
        rows.push(R2Row { server: m, train_events: h.len(), eval_events: full.len() - h.len(), r2_interarrival, r2_demand });
    }
    Ok((model, rows))
}

pub fn write_r2(path: &Path, rows: &[R2Row]) -> Result<()> {
    let lines: Vec<String> = rows
        .iter()
        .map(|r| format!("{},{},{},{},{}", r.server, r.train_events, r.eval_events, r.r2_interarrival, r.r2_demand))
        .collect();
    write_lines(path, "server,train_events,eval_events,r2_interarrival,r2_demand", &lines)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = std::fs::File::create(path).map_err(Error::io(path))?;
    serde_json::to_writer(std::io::BufWriter::new(file), value).map_err(|e| Error::Parse { path: path.into(), msg: e.to_string() })
}

pub fn load_forecaster(path: &Path) -> Result<ForecastModel> {
    let file = std::fs::File::open(path).map_err(Error::io(path))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| Error::Parse { path: path.into(), msg: e.to_string() })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(Error::io(dir))
}

/// The forecaster a run should use: loaded from the config, or fitted on
/// the workload and saved next to the run.
fn forecaster_for(cfg: &ExperimentConfig, workload: &Workload, topology: &Topology, save_to: &Path) -> Result<ForecastModel> {
    if let Some(path) = &cfg.predictor {
        return load_forecaster(path);
    }
    let (model, r2) = fit_forecaster(cfg, &workload.events, topology.num_servers())?;
    write_json(&save_to.join(PREDICTOR_FILE), &model)?;
    write_r2(&save_to.join(R2_FILE), &r2)?;
    Ok(model)
}

/// Simulates one policy on a prepared workload, writing `metrics.csv` as it
/// goes and `checkpoint.json` for learners.
pub fn execute(
    cfg: &ExperimentConfig,
    topology: &Topology,
    workload: &Workload,
    forecaster: Option<&ForecastModel>,
    policy: PolicyKind,
    seed: u64,
    dir: &Path,
) -> Result<(RunSummary, Vec<MetricsRow>)> {
    create_dir(dir)?;
    let sim = cfg.simulation(policy, seed);
    let mut pol = make_policy(policy, topology, &sim.agent, seed)?;
    let mut writer = MetricsWriter::create(&dir.join(METRICS_FILE), topology.num_servers())?;
    let mut rows = Vec::with_capacity(sim.steps as usize);
    let mut sink_error = None;
    let started = Instant::now();
    let result = run_simulation(&sim, topology, &workload.tasks, forecaster, pol.as_mut(), |row| {
        if let Err(e) = writer.write(row) {
            sink_error = Some(e);
            return Err(edgecoop_core::Error::Config("metrics sink failed".into()));
        }
        rows.push(row.clone());
        Ok(())
    });
    if let Some(e) = sink_error {
        return Err(e);
    }
    let summary = result?;
    writer.finish()?;
    if let Some(cp) = pol.checkpoint() {
        write_json(&dir.join(CHECKPOINT_FILE), &cp)?;
    }
    log::info!(
        "{policy} seed {seed}: final reward {:.4}, latency {:.4} s, energy {:.1} J, {} violations ({:.1}s)",
        summary.final_reward,
        summary.avg_latency,
        summary.avg_energy,
        summary.violations.total(),
        started.elapsed().as_secs_f64()
    );
    Ok((summary, rows))
}

fn reward_curve(rows: &[MetricsRow], window: usize) -> Vec<(f64, f64)> {
    let active: Vec<&MetricsRow> = rows.iter().filter(|r| !r.skipped).collect();
    let smoothed = smooth(&active.iter().map(|r| r.reward).collect::<Vec<_>>(), window);
    active.iter().zip(smoothed).map(|(r, s)| (r.step as f64, s)).collect()
}

/// Averages curves into equal-width step bins.
fn binned(curves: &[Vec<(f64, f64)>], steps: u64) -> Vec<(f64, f64)> {
    let width = (steps as f64 / CURVE_BINS as f64).max(1.0);
    let mut sums: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for c in curves {
        for &(x, y) in c {
            let e = sums.entry((x / width) as u64).or_insert((0.0, 0));
            e.0 += y;
            e.1 += 1;
        }
    }
    sums.into_iter().map(|(b, (s, n))| ((b as f64 + 0.5) * width, s / n as f64)).collect()
}

/// `run`: one policy, one seed, into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let topology = cfg.topology()?;
    let workload = load_workload(cfg, &topology, cfg.seed)?;
    create_dir(out)?;
    std::fs::write(out.join("config.toml"), cfg.render()).map_err(Error::io(out))?;
    std::fs::write(out.join("topology.toml"), render_topology(&topology)).map_err(Error::io(out))?;
    let forecaster = match cfg.policy {
        PolicyKind::CtoTp => Some(forecaster_for(cfg, &workload, &topology, out)?),
        _ => None,
    };
    let (summary, rows) = execute(cfg, &topology, &workload, forecaster.as_ref(), cfg.policy, cfg.seed, out)?;
    write_lines(&out.join(SUMMARY_FILE), RUN_SUMMARY_HEADER, &[run_summary_line(&summary)])?;
    let curve = reward_curve(&rows, cfg.smoothing_window);
    line_chart(
        &out.join(REWARD_PLOT),
        &format!("{} reward (seed {})", cfg.policy, cfg.seed),
        "training step",
        "smoothed reward",
        &[Series { name: cfg.policy.to_string(), points: binned(&[curve], cfg.steps) }],
    )?;
    bar_panels(
        &out.join(LATENCY_ENERGY_PLOT),
        &[cfg.policy.to_string()],
        &[
            BarPanel { title: "average latency (s)".into(), values: vec![(summary.avg_latency, 0.0)] },
            BarPanel { title: "average energy (J)".into(), values: vec![(summary.avg_energy, 0.0)] },
        ],
    )?;
    Ok(summary)
}

pub fn run_dir(out: &Path, policy: PolicyKind, seed: u64) -> PathBuf {
    out.join(policy.name()).join(format!("seed-{seed}"))
}

/// One-sided paired t-test of `mean(a - b) > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedTest {
    pub mean_diff: f64,
    pub t: f64,
    pub df: usize,
    pub p_value: f64,
}

pub fn paired_greater(a: &[f64], b: &[f64]) -> Option<PairedTest> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let md = mean(&d);
    let sd = std_dev(&d);
    let (t, p) = if sd > 0.0 {
        let t = md / (sd / (n as f64).sqrt());
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).ok()?;
        (t, 1.0 - dist.cdf(t))
    } else if md > 0.0 {
        (f64::INFINITY, 0.0)
    } else if md < 0.0 {
        (f64::NEG_INFINITY, 1.0)
    } else {
        (0.0, 1.0)
    };
    Some(PairedTest { mean_diff: md, t, df: n - 1, p_value: p })
}

/// Per-policy aggregates over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyStats {
    pub policy: PolicyKind,
    pub runs: Vec<RunSummary>,
}

impl PolicyStats {
    fn column(&self, f: fn(&RunSummary) -> f64) -> Vec<f64> {
        self.runs.iter().map(f).collect()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.column(|r| r.final_reward)
    }

    pub fn latencies(&self) -> Vec<f64> {
        self.column(|r| r.avg_latency)
    }

    pub fn energies(&self) -> Vec<f64> {
        self.column(|r| r.avg_energy)
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    (mean(xs), if xs.len() > 1 { std_dev(xs) } else { 0.0 })
}

/// Comparison results, recomputed from the runs' `metrics.csv` files.
pub struct Comparison {
    pub policies: Vec<PolicyStats>,
}

impl Comparison {
    pub fn get(&self, policy: PolicyKind) -> Option<&PolicyStats> {
        self.policies.iter().find(|p| p.policy == policy)
    }
}

/// Reads every `(policy, seed)` run under `out` and summarizes it.
pub fn collect(cfg: &ExperimentConfig, out: &Path, policies: &[PolicyKind], seeds: &[u64]) -> Result<Comparison> {
    let mut stats = Vec::new();
    for &policy in policies {
        let mut runs = Vec::new();
        for &seed in seeds {
            let rows = read_metrics(&run_dir(out, policy, seed).join(METRICS_FILE))?;
            runs.push(summarize(&rows, &cfg.simulation(policy, seed)));
        }
        stats.push(PolicyStats { policy, runs });
    }
    Ok(Comparison { policies: stats })
}

const TESTS: [(&str, PolicyKind, PolicyKind); 7] = [
    ("reward", PolicyKind::CtoTp, PolicyKind::Cto),
    ("reward", PolicyKind::Cto, PolicyKind::Fa),
    ("reward", PolicyKind::Fa, PolicyKind::Ra),
    ("latency", PolicyKind::Fa, PolicyKind::CtoTp),
    ("latency", PolicyKind::Ra, PolicyKind::CtoTp),
    ("energy", PolicyKind::Fa, PolicyKind::CtoTp),
    ("energy", PolicyKind::Ra, PolicyKind::CtoTp),
];

/// `compare`: every policy on every seed over shared workloads, then
/// summary tables and plots in `out`.
pub fn compare(cfg: &ExperimentConfig, policies: &[PolicyKind], out: &Path, jobs: usize) -> Result<Comparison> {
    cfg.validate()?;
    if policies.is_empty() {
        return Err(Error::Config("compare needs at least one policy".into()));
    }
    let topology = cfg.topology()?;
    create_dir(out)?;
    std::fs::write(out.join("config.toml"), cfg.render()).map_err(Error::io(out))?;
    std::fs::write(out.join("topology.toml"), render_topology(&topology)).map_err(Error::io(out))?;

    let mut workloads = Vec::new();
    let mut forecasters = Vec::new();
    for &seed in &cfg.seeds {
        let workload = load_workload(cfg, &topology, seed)?;
        let forecaster = if policies.contains(&PolicyKind::CtoTp) {
            let dir = out.join("predictor").join(format!("seed-{seed}"));
            create_dir(&dir)?;
            let seeded = ExperimentConfig { seed, ..cfg.clone() };
            Some(forecaster_for(&seeded, &workload, &topology, &dir)?)
        } else {
            None
        };
        workloads.push(workload);
        forecasters.push(forecaster);
    }

    let tasks: Vec<(usize, PolicyKind)> = (0..cfg.seeds.len()).flat_map(|i| policies.iter().map(move |&p| (i, p))).collect();
    let next = AtomicUsize::new(0);
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let workers = jobs.clamp(1, tasks.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= tasks.len() || failure.lock().expect("lock").is_some() {
                    break;
                }
                let (i, policy) = tasks[k];
                let seed = cfg.seeds[i];
                let forecaster = if policy == PolicyKind::CtoTp { forecasters[i].as_ref() } else { None };
                if let Err(e) = execute(cfg, &topology, &workloads[i], forecaster, policy, seed, &run_dir(out, policy, seed)) {
                    failure.lock().expect("lock").get_or_insert(e);
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().expect("lock") {
        return Err(e);
    }

    let comparison = collect(cfg, out, policies, &cfg.seeds)?;
    write_comparison(cfg, out, &comparison)?;
    Ok(comparison)
}

fn write_comparison(cfg: &ExperimentConfig, out: &Path, cmp: &Comparison) -> Result<()> {
    let runs: Vec<String> = cmp.policies.iter().flat_map(|p| p.runs.iter().map(run_summary_line)).collect();
    write_lines(&out.join("runs.csv"), RUN_SUMMARY_HEADER, &runs)?;

    let lines: Vec<String> = cmp
        .policies
        .iter()
        .map(|p| {
            let (rm, rs) = mean_std(&p.rewards());
            let (lm, ls) = mean_std(&p.latencies());
            let (em, es) = mean_std(&p.energies());
            let violations: u32 = p.runs.iter().map(|r| r.violations.total()).sum();
            format!("{},{},{rm},{rs},{lm},{ls},{em},{es},{violations}", p.policy, p.runs.len())
        })
        .collect();
    write_lines(
        &out.join(SUMMARY_FILE),
        "policy,runs,final_reward_mean,final_reward_std,avg_latency_mean_s,avg_latency_std_s,avg_energy_mean_j,avg_energy_std_j,violations",
        &lines,
    )?;

    let mut tests = Vec::new();
    for (metric, better, worse) in TESTS {
        let (Some(b), Some(w)) = (cmp.get(better), cmp.get(worse)) else { continue };
        let pick = |s: &PolicyStats| match metric {
            "reward" => s.rewards(),
            "latency" => s.latencies(),
            _ => s.energies(),
        };
        if let Some(t) = paired_greater(&pick(b), &pick(w)) {
            tests.push(format!("{metric},{better},{worse},{},{},{},{}", t.mean_diff, t.t, t.df, t.p_value));
        }
    }
    write_lines(&out.join("tests.csv"), "metric,greater,lesser,mean_diff,t,df,p_value", &tests)?;

    let mut series = Vec::new();
    for p in &cmp.policies {
        let curves = p
            .runs
            .iter()
            .map(|r| read_metrics(&run_dir(out, p.policy, r.seed).join(METRICS_FILE)).map(|rows| reward_curve(&rows, cfg.smoothing_window)))
            .collect::<Result<Vec<_>>>()?;
        series.push(Series { name: p.policy.to_string(), points: binned(&curves, cfg.steps) });
    }
    line_chart(&out.join(REWARD_PLOT), "reward per training step", "training step", "smoothed reward", &series)?;
    let names: Vec<String> = cmp.policies.iter().map(|p| p.policy.to_string()).collect();
    bar_panels(
        &out.join(LATENCY_ENERGY_PLOT),
        &names,
        &[
            BarPanel { title: "average latency (s)".into(), values: cmp.policies.iter().map(|p| mean_std(&p.latencies())).collect() },
            BarPanel { title: "average energy (J)".into(), values: cmp.policies.iter().map(|p| mean_std(&p.energies())).collect() },
        ],
    )
}

/// `train-predictor`: fit on the workload of `cfg.seed` and write the model
/// and its held-out R² report.
pub fn train_predictor(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<R2Row>> {
    cfg.validate()?;
    let topology = cfg.topology()?;
    let workload = load_workload(cfg, &topology, cfg.seed)?;
    create_dir(out)?;
    let (model, rows) = fit_forecaster(cfg, &workload.events, topology.num_servers())?;
    write_json(&out.join(PREDICTOR_FILE), &model)?;
    write_r2(&out.join(R2_FILE), &rows)?;
    Ok(rows)
}
