//! Network description files.
//!
//! ```toml
//! [[server]]
//! cpu_capacity_ghz = 100.0
//! power_min_w = 176.0
//! power_max_w = 396.0
//!
//! [[link]]
//! endpoints = [0, 1]
//! bandwidth_bps = 1e10
//! snr_db = 10.0
//! ```
//!
//! Servers and links are numbered in file order.

use std::path::Path;

use edgecoop_core::env::{LinkSpec, ServerSpec, Topology};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ServerEntry {
    cpu_capacity_ghz: f64,
    power_min_w: f64,
    power_max_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkEntry {
    endpoints: [usize; 2],
    bandwidth_bps: f64,
    snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyFile {
    #[serde(default)]
    server: Vec<ServerEntry>,
    #[serde(default)]
    link: Vec<LinkEntry>,
}

pub fn parse_topology(text: &str) -> Result<Topology> {
    let file: TopologyFile = toml::from_str(text).map_err(|e| Error::Config(format!("topology: {e}")))?;
    let servers = file
        .server
        .iter()
        .enumerate()
        .map(|(server_id, s)| ServerSpec {
            server_id,
            cpu_capacity: s.cpu_capacity_ghz,
            power_min: s.power_min_w,
            power_max: s.power_max_w,
        })
        .collect();
    let links = file
        .link
        .iter()
        .enumerate()
        .map(|(link_id, l)| LinkSpec {
            link_id,
            endpoints: (l.endpoints[0], l.endpoints[1]),
            bandwidth_capacity: l.bandwidth_bps,
            snr_db: l.snr_db,
        })
        .collect();
    Ok(Topology::new(servers, links)?)
}

pub fn render_topology(topology: &Topology) -> String {
    let file = TopologyFile {
        server: topology
            .servers()
            .iter()
            .map(|s| ServerEntry { cpu_capacity_ghz: s.cpu_capacity, power_min_w: s.power_min, power_max_w: s.power_max })
            .collect(),
        link: topology
            .links()
            .iter()
            .map(|l| LinkEntry { endpoints: [l.endpoints.0, l.endpoints.1], bandwidth_bps: l.bandwidth_capacity, snr_db: l.snr_db })
            .collect(),
    };
    toml::to_string(&file).expect("topology serializes")
}

pub fn read_topology(path: &Path) -> Result<Topology> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    parse_topology(&text).map_err(|e| Error::Parse { path: path.into(), msg: e.to_string() })
}
