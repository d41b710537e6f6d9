//! Device computation and wireless transmission latency.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants. SNRs are stored linear; conversion from dB happens
/// once when a configuration document is resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConfig {
    /// Joules per energy unit.
    pub delta: f64,
    /// Effective switched capacitance.
    pub tau: f64,
    /// CPU cycles per data unit.
    pub nu: f64,
    /// CPU cycles (Hz) per CPU-share unit.
    pub sigma: f64,
    pub w_up: f64,
    pub w_dn: f64,
    pub snr_up: f64,
    pub snr_dn: f64,
    /// Model update size in bits.
    pub model_size: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            delta: 1.0,
            tau: 1e-28,
            nu: 1e10,
            sigma: 0.6e9,
            w_up: 3e5,
            w_dn: 3e5,
            snr_up: 10.0,
            snr_dn: 10.0,
            model_size: 1e4,
        }
    }
}

impl PhysicsConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("delta", self.delta),
            ("tau", self.tau),
            ("nu", self.nu),
            ("sigma", self.sigma),
            ("w_up", self.w_up),
            ("w_dn", self.w_dn),
            ("snr_up", self.snr_up),
            ("snr_dn", self.snr_dn),
            ("model_size", self.model_size),
        ];
        for (name, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::invalid(
                    name,
                    format!("{value} must be positive and finite"),
                ));
            }
        }
        Ok(())
    }
}

/// Converts a dB ratio to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// CPU frequency needed to train `d` data units with `e` energy units:
/// `sqrt(delta e / (tau nu d))`.
pub fn cpu_frequency(e: u32, d: u32, physics: &PhysicsConfig) -> Result<f64> {
    if d == 0 {
        return Err(Error::invalid(
            "d",
            "cpu frequency is singular at zero data",
        ));
    }
    if e == 0 {
        return Err(Error::invalid(
            "e",
            "cpu frequency needs at least one energy unit",
        ));
    }
    Ok((physics.delta * f64::from(e) / (physics.tau * physics.nu * f64::from(d))).sqrt())
}

/// Slowest device's training time, `max_i nu d_i / f_i^c`. Devices with no
/// data do not train; zero when nobody trains.
pub fn training_latency(d: &[u32], e: &[u32], physics: &PhysicsConfig) -> Result<f64> {
    if d.len() != e.len() {
        return Err(Error::Shape(format!(
            "{} data demands vs {} energy demands",
            d.len(),
            e.len()
        )));
    }
    let mut worst = 0.0f64;
    for (&di, &ei) in d.iter().zip(e) {
        if di == 0 {
            continue;
        }
        let freq = cpu_frequency(ei, di, physics)?;
        worst = worst.max(physics.nu * f64::from(di) / freq);
    }
    Ok(worst)
}

/// Model download plus upload time; zero when no device trains.
pub fn transmission_latency(physics: &PhysicsConfig, any_training: bool) -> f64 {
    if !any_training {
        return 0.0;
    }
    physics.model_size / (physics.w_dn * (1.0 + physics.snr_dn).log2())
        + physics.model_size / (physics.w_up * (1.0 + physics.snr_up).log2())
}
