//! The blockchain as an M/M/1 queue with constant cross-verification and
//! block-propagation delays.
//!
//! Transactions arrive at rate `lambda`; the mining winner is the single
//! server, producing blocks at rate `mu`. The stationary occupancy law is
//! `P_m = (1 - rho) rho^m` with `rho = lambda / mu`, and the mining delay is
//! exponential with mean `1 / (mu - lambda)`.

use rand::Rng;
use rand_distr::{Distribution, Exp, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueConfig {
    /// Transaction arrival rate (tx/s).
    pub lambda: f64,
    /// Minimum block generation rate (blocks/s).
    pub mu0: u32,
    /// Maximum block generation rate (blocks/s).
    pub mu_max: u32,
    /// Cross-verification delay (s).
    pub l_cr: f64,
    /// Block-propagation delay (s).
    pub l_bp: f64,
    /// Cap applied to the occupancy in observations and table keys.
    pub m_cap: u32,
}

impl Default for QueueConfig {
    fn default() -> Self {
        QueueConfig {
            lambda: 3.0,
            mu0: 5,
            mu_max: 10,
            l_cr: 1.0,
            l_bp: 1.0,
            m_cap: 20,
        }
    }
}

impl QueueConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda", "must be positive and finite"));
        }
        if f64::from(self.mu0) <= self.lambda {
            return Err(Error::UnstableQueue {
                lambda: self.lambda,
                mu: f64::from(self.mu0),
            });
        }
        if self.mu_max < self.mu0 {
            return Err(Error::invalid("mu_max", "must be at least mu0"));
        }
        if !(self.l_cr >= 0.0 && self.l_cr.is_finite()) {
            return Err(Error::invalid("l_cr", "must be non-negative"));
        }
        if !(self.l_bp >= 0.0 && self.l_bp.is_finite()) {
            return Err(Error::invalid("l_bp", "must be non-negative"));
        }
        if self.m_cap < 1 {
            return Err(Error::invalid("m_cap", "must be at least 1"));
        }
        Ok(())
    }

    /// Number of selectable block rates, `mu_max - mu0 + 1`.
    pub fn rate_count(&self) -> usize {
        (self.mu_max - self.mu0 + 1) as usize
    }

    pub fn check_rate(&self, mu: u32) -> Result<()> {
        if mu < self.mu0 || mu > self.mu_max {
            return Err(Error::RateOutOfRange {
                mu,
                min: self.mu0,
                max: self.mu_max,
            });
        }
        Ok(())
    }

    /// Occupancy as seen by observers.
    pub fn clamp_occupancy(&self, m: u64) -> u32 {
        m.min(u64::from(self.m_cap)) as u32
    }
}

/// Queue utilization `lambda / mu`.
pub fn utilization(lambda: f64, mu: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid("lambda", "must be positive and finite"));
    }
    if !(mu.is_finite() && mu > lambda) {
        return Err(Error::UnstableQueue { lambda, mu });
    }
    Ok(lambda / mu)
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::invalid("rho", format!("{rho} is outside [0, 1)")));
    }
    Ok(())
}

/// Stationary probability of occupancy `m`: `(1 - rho) rho^m`.
pub fn stationary_prob(rho: f64, m: u32) -> Result<f64> {
    check_rho(rho)?;
    // powi(0) is 1 even for rho = 0.
    Ok((1.0 - rho) * rho.powi(m as i32))
}

/// Draws an occupancy from the stationary law. The result is unbounded;
/// observers clamp it with [`QueueConfig::clamp_occupancy`].
pub fn sample_queue_state<R: Rng + ?Sized>(rho: f64, rng: &mut R) -> Result<u64> {
    check_rho(rho)?;
    if rho == 0.0 {
        return Ok(0);
    }
    // Failures before the first success with success probability 1 - rho.
    let law = Geometric::new(1.0 - rho).map_err(|e| Error::invalid("rho", e.to_string()))?;
    Ok(law.sample(rng))
}

/// Exponential mining delay with mean `1 / (mu - lambda)`.
pub fn sample_mining_delay<R: Rng + ?Sized>(mu: f64, lambda: f64, rng: &mut R) -> Result<f64> {
    if !(mu.is_finite() && lambda.is_finite() && mu > lambda) {
        return Err(Error::UnstableQueue { lambda, mu });
    }
    let law = Exp::new(mu - lambda).map_err(|e| Error::invalid("mu", e.to_string()))?;
    loop {
        let delay: f64 = law.sample(rng);
        if delay > 0.0 {
            return Ok(delay);
        }
    }
}

/// Block latency `l_cr + l_bp + l_mn` for block rate `mu`.
pub fn block_latency<R: Rng + ?Sized>(mu: u32, cfg: &QueueConfig, rng: &mut R) -> Result<f64> {
    cfg.check_rate(mu)?;
    let mining = sample_mining_delay(f64::from(mu), cfg.lambda, rng)?;
    Ok(cfg.l_cr + cfg.l_bp + mining)
}
