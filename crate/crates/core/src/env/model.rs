//! Closed-form link, computation and energy relations.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Bits in one megabyte (decimal).
pub const BITS_PER_MEGABYTE: f64 = 8.0e6;

pub fn linear_snr(snr_db: f64) -> f64 {
    libm::pow(10.0, snr_db / 10.0)
}

/// Shannon-style link rate in bits/second for an allocated bandwidth.
pub fn data_rate(bandwidth: f64, snr_linear: f64) -> f64 {
    bandwidth * libm::log2(1.0 + snr_linear)
}

pub fn transmission_latency(payload_bits: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(Error::Domain("transmission over a link with zero rate"));
    }
    Ok(payload_bits / rate)
}

/// Seconds needed to run `demand` gigacycles at `allocated` gigacycles/second.
///
/// Local execution and cooperative execution share this form.
pub fn compute_latency(demand: f64, allocated: f64) -> Result<f64> {
    if demand == 0.0 {
        return Ok(0.0);
    }
    if !(allocated > 0.0) {
        return Err(Error::Domain("nonzero demand with zero compute allocation"));
    }
    Ok(demand / allocated)
}

/// Linear power model: idle draw for the busy period plus the load-dependent
/// share.
pub fn server_energy(power_min: f64, power_max: f64, utilisation: f64, busy_time: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&utilisation) {
        return Err(Error::Domain("utilisation outside [0, 1]"));
    }
    if !(busy_time >= 0.0) {
        return Err(Error::Domain("negative busy time"));
    }
    Ok(power_min * busy_time + (power_max - power_min) * utilisation * busy_time)
}

/// Latency components of one origin server in one slot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ServerLatency {
    pub local: f64,
    /// `(transmission, cooperative compute)` per offload target.
    pub paths: Vec<(f64, f64)>,
}

impl ServerLatency {
    /// Completion time of the slowest piece of this server's work.
    pub fn completion(&self) -> f64 {
        self.paths
            .iter()
            .map(|(trans, coop)| trans + coop)
            .fold(self.local, f64::max)
    }
}

/// System latency for a slot: every origin server waits for its slowest piece.
pub fn slot_latency(per_server: &[ServerLatency]) -> f64 {
    per_server.iter().map(ServerLatency::completion).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use alloc::vec;

    #[test]
    fn decibel_conversion() {
        assert_eq!(linear_snr(0.0), 1.0);
        assert_relative_eq!(linear_snr(10.0), 10.0, max_relative = 1e-12);
        assert_relative_eq!(linear_snr(20.0), 100.0, max_relative = 1e-12);
    }

    #[test]
    fn rate_examples() {
        assert_eq!(data_rate(1e9, 1.0), 1e9);
        assert_eq!(data_rate(5e8, 0.0), 0.0);
        // 1e10 * log2(11)
        assert_relative_eq!(data_rate(1e10, 10.0), 3.459_431_618_637_297e10, max_relative = 1e-12);
    }

    #[test]
    fn transmission_examples() {
        assert_eq!(transmission_latency(0.0, 3.0e10).unwrap(), 0.0);
        let t = transmission_latency(20.0 * BITS_PER_MEGABYTE, 3.4594e10).unwrap();
        assert_relative_eq!(t, 4.625e-3, max_relative = 1e-3);
        assert_relative_eq!(transmission_latency(2.5e9 * 0.3, 2.5e9).unwrap(), 0.3, max_relative = 1e-12);
        assert!(matches!(transmission_latency(1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn compute_examples() {
        assert_eq!(compute_latency(0.0, 40.0).unwrap(), 0.0);
        assert_eq!(compute_latency(50.0, 100.0).unwrap(), 0.5);
        assert_relative_eq!(compute_latency(7.0 * 1.25, 7.0).unwrap(), 1.25, max_relative = 1e-12);
        assert!(compute_latency(1.0, 0.0).is_err());
    }

    #[test]
    fn energy_examples() {
        assert_eq!(server_energy(176.0, 396.0, 0.0, 1.0).unwrap(), 176.0);
        assert_eq!(server_energy(176.0, 396.0, 1.0, 1.0).unwrap(), 396.0);
        assert_eq!(server_energy(176.0, 396.0, 0.5, 2.0).unwrap(), 572.0);
        assert!(server_energy(176.0, 396.0, 1.5, 1.0).is_err());
        assert!(server_energy(176.0, 396.0, -0.1, 1.0).is_err());
    }

    #[test]
    fn slot_latency_examples() {
        let one = ServerLatency { local: 0.5, paths: vec![] };
        assert_eq!(slot_latency(&[one.clone()]), 0.5);
        let b = ServerLatency { local: 0.2, paths: vec![(0.1, 0.3)] };
        assert_relative_eq!(slot_latency(&[one, b]), 0.9, max_relative = 1e-12);
        assert_eq!(slot_latency(&[ServerLatency::default(), ServerLatency::default()]), 0.0);
    }

    #[test]
    fn energy_second_differences_vanish() {
        let h = 0.05;
        for &(u, t) in &[(0.2, 0.4), (0.5, 0.9), (0.7, 0.1)] {
            let e = |u: f64, t: f64| server_energy(176.0, 396.0, u, t).unwrap();
            let du = e(u + h, t) - 2.0 * e(u, t) + e(u - h, t);
            let dt = e(u, t + h) - 2.0 * e(u, t) + e(u, t - h);
            assert!(du.abs() < 1e-10 && dt.abs() < 1e-10, "{du} {dt}");
        }
    }

    proptest::proptest! {
        #[test]
        fn slot_latency_is_monotone(
            local in 0.0f64..5.0,
            trans in 0.0f64..1.0,
            coop in 0.0f64..5.0,
            bump in 0.0f64..1.0,
            which in 0usize..3,
        ) {
            let base = ServerLatency { local, paths: vec![(trans, coop)] };
            let mut raised = base.clone();
            match which {
                0 => raised.local += bump,
                1 => raised.paths[0].0 += bump,
                _ => raised.paths[0].1 += bump,
            }
            proptest::prop_assert!(slot_latency(&[raised]) >= slot_latency(&[base]));
        }
    }
}
