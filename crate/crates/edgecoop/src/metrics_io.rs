//! `metrics.csv` and `summary.csv`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use edgecoop_core::harness::{MetricsRow, RunSummary, Violations};

use crate::error::{Error, Result};

/// Rows between explicit flushes of the metrics file.
const FLUSH_EVERY: u64 = 100;

pub fn metrics_header(num_servers: usize) -> String {
    let mut h = String::from("step,time_s,skipped,active_servers,reward,total_latency_s,total_energy_j");
    for m in 0..num_servers {
        let _ = write!(h, ",utilisation_{m}");
    }
    h.push_str(",epsilon,noise_scale,dqn_updates,ddpg_updates,cpu_violations,bandwidth_violations,ratio_violations");
    h
}

pub fn metrics_line(row: &MetricsRow) -> String {
    let mut s = format!(
        "{},{},{},{},{},{},{}",
        row.step,
        row.time,
        u8::from(row.skipped),
        row.active_servers,
        row.reward,
        row.total_latency,
        row.total_energy
    );
    for u in &row.utilisation {
        let _ = write!(s, ",{u}");
    }
    let v = row.violations;
    let _ = write!(
        s,
        ",{},{},{},{},{},{},{}",
        row.epsilon, row.noise_scale, row.dqn_updates, row.ddpg_updates, v.cpu, v.bandwidth, v.ratio
    );
    s
}

/// Appends rows as they are produced, flushing periodically so a crashed
/// run leaves a readable prefix.
pub struct MetricsWriter {
    path: PathBuf,
    out: BufWriter<File>,
    written: u64,
}

impl MetricsWriter {
    pub fn create(path: &Path, num_servers: usize) -> Result<Self> {
        let file = File::create(path).map_err(Error::io(path))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{}", metrics_header(num_servers)).map_err(Error::io(path))?;
        Ok(Self { path: path.into(), out, written: 0 })
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<()> {
        writeln!(self.out, "{}", metrics_line(row)).map_err(Error::io(&self.path))?;
        self.written += 1;
        if self.written % FLUSH_EVERY == 0 {
            self.out.flush().map_err(Error::io(&self.path))?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(Error::io(&self.path))
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    if !path.exists() {
        return Err(Error::MissingRun(path.into()));
    }
    let mut rdr = csv::Reader::from_path(path).map_err(Error::csv(path))?;
    let headers = rdr.headers().map_err(Error::csv(path))?.clone();
    let servers = headers.iter().filter(|h| h.starts_with("utilisation_")).count();
    if headers.len() != 14 + servers {
        return Err(Error::Parse { path: path.into(), msg: "unexpected metrics header".into() });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(Error::csv(path))?;
        let bad = |col: usize| Error::Parse { path: path.into(), msg: format!("row {}: bad value in column {}", i + 1, &headers[col]) };
        let f = |col: usize| rec[col].parse::<f64>().map_err(|_| bad(col));
        let u = |col: usize| rec[col].parse::<u64>().map_err(|_| bad(col));
        let tail = 7 + servers;
        rows.push(MetricsRow {
            step: u(0)?,
            time: f(1)?,
            skipped: u(2)? != 0,
            active_servers: u(3)? as usize,
            reward: f(4)?,
            total_latency: f(5)?,
            total_energy: f(6)?,
            utilisation: (7..tail).map(f).collect::<Result<_>>()?,
            epsilon: f(tail)?,
            noise_scale: f(tail + 1)?,
            dqn_updates: u(tail + 2)?,
            ddpg_updates: u(tail + 3)?,
            violations: Violations { cpu: u(tail + 4)? as u32, bandwidth: u(tail + 5)? as u32, ratio: u(tail + 6)? as u32 },
        });
    }
    Ok(rows)
}

pub const RUN_SUMMARY_HEADER: &str =
    "policy,seed,steps,active_slots,final_reward,avg_latency_s,avg_energy_j,objective,violations,dqn_updates,ddpg_updates";

pub fn run_summary_line(s: &RunSummary) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        s.policy,
        s.seed,
        s.steps,
        s.active_slots,
        s.final_reward,
        s.avg_latency,
        s.avg_energy,
        s.objective,
        s.violations.total(),
        s.dqn_updates,
        s.ddpg_updates
    )
}

pub fn write_lines(path: &Path, header: &str, lines: &[String]) -> Result<()> {
    let mut text = String::with_capacity(64 * (lines.len() + 1));
    text.push_str(header);
    text.push('\n');
    for l in lines {
        text.push_str(l);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(Error::io(path))
}
