//! Immediate reward: normalized data gain minus energy, latency and payment
//! costs.

use serde::{Deserialize, Serialize};

use super::physics::{transmission_latency, PhysicsConfig};
use crate::error::{Error, Result};
use crate::queue::QueueConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub alpha_d: f64,
    pub alpha_e: f64,
    pub alpha_l: f64,
    pub alpha_i: f64,
    /// Price per quality-weighted data unit paid to devices.
    pub psi1: f64,
    /// Miner price factor.
    pub psi2: f64,
    /// Per-device data quality indicators.
    pub eta: Vec<f64>,
    pub d_norm: f64,
    pub e_norm: f64,
    pub l_norm: f64,
    pub i_norm: f64,
}

/// The four reward ingredients of one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Components {
    /// Quality-weighted data units.
    pub data: f64,
    /// Energy units spent.
    pub energy: f64,
    /// Seconds.
    pub latency: f64,
    pub payment: f64,
}

/// Normalizers derived from worst-case values of each reward term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizers {
    pub d_norm: f64,
    pub e_norm: f64,
    pub l_norm: f64,
    pub i_norm: f64,
}

impl Normalizers {
    /// `d_norm = D_max`, `e_norm = N E_max`, `l_norm` is the slowest training
    /// (d = D_max at one energy unit) plus transmission, fixed block delays and
    /// the 99th-percentile mining delay at `mu0`; `i_norm = psi1 D_max +
    /// psi2 / ln 2`.
    pub fn derive(
        n_devices: usize,
        d_max: u32,
        e_max: u32,
        psi1: f64,
        psi2: f64,
        physics: &PhysicsConfig,
        queue: &QueueConfig,
    ) -> Self {
        let d_max = f64::from(d_max);
        let worst_training =
            (physics.tau * physics.nu.powi(3) * d_max.powi(3) / physics.delta).sqrt();
        let mining_p99 = 100f64.ln() / (f64::from(queue.mu0) - queue.lambda);
        Normalizers {
            d_norm: d_max,
            e_norm: n_devices as f64 * f64::from(e_max),
            l_norm: worst_training
                + transmission_latency(physics, true)
                + queue.l_cr
                + queue.l_bp
                + mining_p99,
            i_norm: psi1 * d_max + psi2 / 2f64.ln(),
        }
    }
}

impl RewardWeights {
    /// Default scales and prices with the given quality vector and normalizers.
    pub fn new(eta: Vec<f64>, norms: Normalizers) -> Self {
        RewardWeights {
            alpha_d: 10.0,
            alpha_e: 1.0,
            alpha_l: 3.0,
            alpha_i: 2.0,
            psi1: 0.2,
            psi2: 0.8,
            eta,
            d_norm: norms.d_norm,
            e_norm: norms.e_norm,
            l_norm: norms.l_norm,
            i_norm: norms.i_norm,
        }
    }

    pub fn validate(&self, n_devices: usize) -> Result<()> {
        let fields = [
            ("alpha_d", self.alpha_d),
            ("alpha_e", self.alpha_e),
            ("alpha_l", self.alpha_l),
            ("alpha_i", self.alpha_i),
            ("psi1", self.psi1),
            ("psi2", self.psi2),
            ("d_norm", self.d_norm),
            ("e_norm", self.e_norm),
            ("l_norm", self.l_norm),
            ("i_norm", self.i_norm),
        ];
        for (name, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::invalid(
                    name,
                    format!("{value} must be positive and finite"),
                ));
            }
        }
        if self.eta.len() != n_devices {
            return Err(Error::invalid(
                "eta",
                format!("expected {n_devices} entries, got {}", self.eta.len()),
            ));
        }
        if self.eta.iter().any(|&q| !(q > 0.0 && q.is_finite())) {
            return Err(Error::invalid("eta", "quality indicators must be positive"));
        }
        Ok(())
    }
}

/// Quality-weighted average data demand `sum(eta_i d_i) / sum(eta_i)`.
pub fn weighted_data(d: &[u32], eta: &[f64]) -> f64 {
    let total: f64 = eta.iter().sum();
    let weighted: f64 = d.iter().zip(eta).map(|(&di, &q)| q * f64::from(di)).sum();
    weighted / total
}

/// Total payment `psi1 D + psi2 / ln(1 + m)`, with `m` clamped to at least 1
/// inside the logarithm.
pub fn payment(data: f64, m: u64, weights: &RewardWeights) -> f64 {
    let occupancy = m.max(1) as f64;
    weights.psi1 * data + weights.psi2 / occupancy.ln_1p()
}

pub fn reward(c: &Components, w: &RewardWeights) -> f64 {
    w.alpha_d * c.data / w.d_norm
        - w.alpha_e * c.energy / w.e_norm
        - w.alpha_l * c.latency / w.l_norm
        - w.alpha_i * c.payment / w.i_norm
}
