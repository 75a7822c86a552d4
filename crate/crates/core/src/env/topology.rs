use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerSpec {
    pub server_id: usize,
    /// Gigacycles per second.
    pub cpu_capacity: f64,
    /// Watts at zero load.
    pub power_min: f64,
    /// Watts at full load.
    pub power_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub link_id: usize,
    pub endpoints: (usize, usize),
    /// Bits per second.
    pub bandwidth_capacity: f64,
    pub snr_db: f64,
}

impl LinkSpec {
    pub fn connects(&self, a: usize, b: usize) -> bool {
        self.endpoints == (a, b) || self.endpoints == (b, a)
    }
}

/// Servers and the backhaul links between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    servers: Vec<ServerSpec>,
    links: Vec<LinkSpec>,
}

impl Topology {
    pub fn new(servers: Vec<ServerSpec>, links: Vec<LinkSpec>) -> Result<Self> {
        if servers.is_empty() {
            return Err(Error::Topology("no servers".into()));
        }
        for (i, s) in servers.iter().enumerate() {
            if s.server_id != i {
                return Err(Error::Topology(format!("server ids must be 0..M in order, found {} at {i}", s.server_id)));
            }
            if !(s.cpu_capacity > 0.0) {
                return Err(Error::Topology(format!("server {i}: cpu_capacity must be positive")));
            }
            if !(s.power_min > 0.0 && s.power_min <= s.power_max) {
                return Err(Error::Topology(format!("server {i}: need 0 < power_min <= power_max")));
            }
        }
        let m = servers.len();
        for (k, l) in links.iter().enumerate() {
            let (a, b) = l.endpoints;
            if l.link_id != k {
                return Err(Error::Topology(format!("link ids must be 0..K in order, found {} at {k}", l.link_id)));
            }
            if a == b || a >= m || b >= m {
                return Err(Error::Topology(format!("link {k}: bad endpoints ({a}, {b})")));
            }
            if !(l.bandwidth_capacity > 0.0) {
                return Err(Error::Topology(format!("link {k}: bandwidth_capacity must be positive")));
            }
            if !l.snr_db.is_finite() {
                return Err(Error::Topology(format!("link {k}: snr_db must be finite")));
            }
            if links[..k].iter().any(|o| o.connects(a, b)) {
                return Err(Error::Topology(format!("link {k}: duplicate link between {a} and {b}")));
            }
        }
        Ok(Self { servers, links })
    }

    /// Fully meshed network of identical servers and links.
    pub fn full_mesh(
        num_servers: usize,
        cpu_capacity: f64,
        power_min: f64,
        power_max: f64,
        bandwidth: f64,
        snr_db: f64,
    ) -> Result<Self> {
        let servers = (0..num_servers)
            .map(|server_id| ServerSpec { server_id, cpu_capacity, power_min, power_max })
            .collect();
        let mut links = Vec::new();
        for a in 0..num_servers {
            for b in a + 1..num_servers {
                links.push(LinkSpec {
                    link_id: links.len(),
                    endpoints: (a, b),
                    bandwidth_capacity: bandwidth,
                    snr_db,
                });
            }
        }
        Self::new(servers, links)
    }

    /// Three 100 GHz servers, 176/396 W, meshed by 10 Gbps links at 10 dB.
    pub fn reference() -> Self {
        Self::full_mesh(3, 100.0, 176.0, 396.0, 10.0e9, 10.0).expect("reference topology is valid")
    }

    pub fn servers(&self) -> &[ServerSpec] {
        &self.servers
    }

    pub fn links(&self) -> &[LinkSpec] {
        &self.links
    }

    pub fn num_servers(&self) -> usize {
        self.servers.len()
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn link_between(&self, a: usize, b: usize) -> Option<usize> {
        self.links.iter().position(|l| l.connects(a, b))
    }

    /// All other servers in ascending id order. Position `i` in this list is
    /// bit `i` of a discrete target-set index.
    pub fn peers(&self, server: usize) -> Vec<usize> {
        (0..self.num_servers()).filter(|&n| n != server).collect()
    }
}

impl Default for Topology {
    fn default() -> Self {
        Self::reference()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn reference_is_full_mesh() {
        let t = Topology::reference();
        assert_eq!(t.num_servers(), 3);
        assert_eq!(t.num_links(), 3);
        assert_eq!(t.link_between(2, 0), Some(1));
        assert_eq!(t.peers(1), vec![0, 2]);
    }

    #[test]
    fn rejects_bad_specs() {
        let s = |id| ServerSpec { server_id: id, cpu_capacity: 1.0, power_min: 1.0, power_max: 2.0 };
        let l = |id, a, b| LinkSpec { link_id: id, endpoints: (a, b), bandwidth_capacity: 1.0, snr_db: 0.0 };
        assert!(Topology::new(vec![s(0), s(1)], vec![l(0, 0, 0)]).is_err());
        assert!(Topology::new(vec![s(0), s(1)], vec![l(0, 0, 1), l(1, 1, 0)]).is_err());
        let mut bad = s(0);
        bad.power_min = 3.0;
        assert!(Topology::new(vec![bad], vec![]).is_err());
        assert!(Topology::new(vec![s(0), s(1)], vec![l(0, 0, 1)]).is_ok());
    }
}
