//! Joint actions and their canonical integer encoding.
//!
//! Each device gets a demand pair drawn from `{(0,0)} ∪ [1, D_max] × [1, E_max]`,
//! numbered `0` for the idle pair and `1 + (d - 1) E_max + (e - 1)` otherwise.
//! The joint index is mixed-radix: device 0 is the least significant digit,
//! the block rate offset `mu - mu0` the most significant.

use serde::{Deserialize, Serialize};

use super::EnvConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    /// Data units demanded per device.
    pub d: Vec<u32>,
    /// Energy units demanded per device.
    pub e: Vec<u32>,
    /// Block generation rate.
    pub mu: u32,
}

impl Action {
    /// No demands at the given block rate.
    pub fn idle(n_devices: usize, mu: u32) -> Self {
        Action {
            d: vec![0; n_devices],
            e: vec![0; n_devices],
            mu,
        }
    }

    pub fn total_data(&self) -> u64 {
        self.d.iter().map(|&d| u64::from(d)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSpace {
    n_devices: usize,
    d_max: u32,
    e_max: u32,
    mu0: u32,
    rates: usize,
}

impl ActionSpace {
    pub fn new(cfg: &EnvConfig) -> Self {
        ActionSpace {
            n_devices: cfg.n_devices,
            d_max: cfg.d_max,
            e_max: cfg.e_max,
            mu0: cfg.queue.mu0,
            rates: cfg.queue.rate_count(),
        }
    }

    pub fn n_devices(&self) -> usize {
        self.n_devices
    }

    /// Size of the per-device pair set, `1 + D_max E_max`.
    pub fn pair_count(&self) -> usize {
        1 + (self.d_max * self.e_max) as usize
    }

    pub fn rate_count(&self) -> usize {
        self.rates
    }

    pub fn count(&self) -> usize {
        self.pair_count().pow(self.n_devices as u32) * self.rates
    }

    pub fn pair_index(&self, d: u32, e: u32) -> Result<usize> {
        match (d, e) {
            (0, 0) => Ok(0),
            (0, _) | (_, 0) => Err(Error::invalid(
                "action",
                format!("pair (d={d}, e={e}) violates the zero-data/zero-energy pairing rule"),
            )),
            _ if d > self.d_max => Err(Error::invalid(
                "action",
                format!("d = {d} exceeds D_max = {}", self.d_max),
            )),
            _ if e > self.e_max => Err(Error::invalid(
                "action",
                format!("e = {e} exceeds E_max = {}", self.e_max),
            )),
            _ => Ok(1 + ((d - 1) * self.e_max + (e - 1)) as usize),
        }
    }

    /// Inverse of [`ActionSpace::pair_index`]; `pair` must be below
    /// [`ActionSpace::pair_count`].
    pub fn pair(&self, pair: usize) -> (u32, u32) {
        if pair == 0 {
            return (0, 0);
        }
        let k = (pair - 1) as u32;
        (k / self.e_max + 1, k % self.e_max + 1)
    }

    pub fn encode(&self, action: &Action) -> Result<usize> {
        if action.d.len() != self.n_devices || action.e.len() != self.n_devices {
            return Err(Error::Shape(format!(
                "action has {}/{} device entries, expected {}",
                action.d.len(),
                action.e.len(),
                self.n_devices
            )));
        }
        if action.mu < self.mu0 || (action.mu - self.mu0) as usize >= self.rates {
            return Err(Error::RateOutOfRange {
                mu: action.mu,
                min: self.mu0,
                max: self.mu0 + self.rates as u32 - 1,
            });
        }
        let radix = self.pair_count();
        let mut index = (action.mu - self.mu0) as usize;
        for device in (0..self.n_devices).rev() {
            index = index * radix + self.pair_index(action.d[device], action.e[device])?;
        }
        Ok(index)
    }

    pub fn decode(&self, index: usize) -> Result<Action> {
        let limit = self.count();
        if index >= limit {
            return Err(Error::IndexOutOfRange { index, limit });
        }
        let radix = self.pair_count();
        let mut rest = index;
        let mut d = Vec::with_capacity(self.n_devices);
        let mut e = Vec::with_capacity(self.n_devices);
        for _ in 0..self.n_devices {
            let (di, ei) = self.pair(rest % radix);
            d.push(di);
            e.push(ei);
            rest /= radix;
        }
        Ok(Action {
            d,
            e,
            mu: self.mu0 + rest as u32,
        })
    }

    /// Pair digit of `device` within a joint index.
    pub fn pair_digit(&self, index: usize, device: usize) -> usize {
        (index / self.pair_count().pow(device as u32)) % self.pair_count()
    }
}

pub fn encode_action(action: &Action, cfg: &EnvConfig) -> Result<usize> {
    ActionSpace::new(cfg).encode(action)
}

pub fn decode_action(index: usize, cfg: &EnvConfig) -> Result<Action> {
    ActionSpace::new(cfg).decode(index)
}
