//! The resource-management Markov decision process.
//!
//! State: per-device CPU shares and energy units plus the blockchain queue
//! occupancy. Action: per-device data/energy demands plus a block rate.
//! Transitions harvest Poisson energy, redraw CPU shares uniformly and redraw
//! the occupancy from the queue's stationary law at the chosen rate.

mod action;
mod physics;
mod reward;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

pub use action::{decode_action, encode_action, Action, ActionSpace};
pub use physics::{
    cpu_frequency, db_to_linear, training_latency, transmission_latency, PhysicsConfig,
};
pub use reward::{payment, reward, weighted_data, Components, Normalizers, RewardWeights};

use crate::error::{Error, Result};
use crate::queue::{self, QueueConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub n_devices: usize,
    pub f_max: u32,
    pub c_max: u32,
    pub d_max: u32,
    pub e_max: u32,
    /// Raw data units that end an episode.
    pub b_target: u64,
    /// Mean harvested energy units per device and iteration.
    pub kappa: f64,
    pub queue: QueueConfig,
    pub physics: PhysicsConfig,
    pub weights: RewardWeights,
}

impl Default for EnvConfig {
    /// Default physical, queue and reward parameters with a 2000-unit data budget.
    fn default() -> Self {
        EnvConfig::with_budget(2000)
    }
}

impl EnvConfig {
    /// Default parameters with the given per-episode data budget.
    pub fn with_budget(b_target: u64) -> Self {
        let (n_devices, d_max, e_max) = (3, 3, 3);
        let queue = QueueConfig::default();
        let physics = PhysicsConfig::default();
        let norms = Normalizers::derive(n_devices, d_max, e_max, 0.2, 0.8, &physics, &queue);
        EnvConfig {
            n_devices,
            f_max: 3,
            c_max: 3,
            d_max,
            e_max,
            b_target,
            kappa: 1.0,
            queue,
            physics,
            weights: RewardWeights::new(vec![1.0; n_devices], norms),
        }
    }

    /// Desk-scale profile: defaults with a 200-unit data budget.
    pub fn small() -> Self {
        EnvConfig::with_budget(200)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_devices < 1 {
            return Err(Error::invalid("n_devices", "need at least one device"));
        }
        for (name, value) in [
            ("f_max", self.f_max),
            ("c_max", self.c_max),
            ("d_max", self.d_max),
            ("e_max", self.e_max),
        ] {
            if value < 1 {
                return Err(Error::invalid(name, "must be at least 1"));
            }
        }
        if self.e_max > self.c_max {
            return Err(Error::invalid("e_max", "must not exceed c_max"));
        }
        if self.b_target < 1 {
            return Err(Error::invalid("b_target", "must be at least 1"));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::invalid("kappa", "must be non-negative and finite"));
        }
        self.queue.validate()?;
        self.physics.validate()?;
        self.weights.validate(self.n_devices)
    }

    pub fn action_space(&self) -> ActionSpace {
        ActionSpace::new(self)
    }

    pub fn action_count(&self) -> usize {
        self.action_space().count()
    }

    /// Length of the observation vector, `2N + 1`.
    pub fn feature_len(&self) -> usize {
        2 * self.n_devices + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeviceState {
    /// CPU shares available for training.
    pub f: u32,
    /// Energy units in the battery.
    pub c: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemState {
    pub devices: Vec<DeviceState>,
    /// Raw queue occupancy.
    pub m: u64,
}

impl SystemState {
    /// Observation vector `(f_i / F_max.., c_i / C_max.., min(m, m_cap) / m_cap)`.
    pub fn features(&self, cfg: &EnvConfig) -> Vec<f64> {
        let mut x = Vec::with_capacity(cfg.feature_len());
        x.extend(
            self.devices
                .iter()
                .map(|d| f64::from(d.f) / f64::from(cfg.f_max)),
        );
        x.extend(
            self.devices
                .iter()
                .map(|d| f64::from(d.c) / f64::from(cfg.c_max)),
        );
        x.push(f64::from(cfg.queue.clamp_occupancy(self.m)) / f64::from(cfg.queue.m_cap));
        x
    }
}

/// Checks one device's demand pair against its resources; returns the
/// violated constraint.
pub fn check_pair(d: u32, e: u32, device: DeviceState, cfg: &EnvConfig) -> Result<(), String> {
    if d == 0 && e == 0 {
        return Ok(());
    }
    if d == 0 || e == 0 {
        return Err(format!(
            "pairing rule: d = {d} and e = {e} must be both zero or both positive"
        ));
    }
    if d > cfg.d_max {
        return Err(format!("data: d = {d} > D_max = {}", cfg.d_max));
    }
    if e > cfg.e_max {
        return Err(format!("energy: e = {e} > E_max = {}", cfg.e_max));
    }
    if e > device.c {
        return Err(format!("energy: e = {e} > available c = {}", device.c));
    }
    let needed = cpu_frequency(e, d, &cfg.physics).map_err(|err| err.to_string())?;
    let available = cfg.physics.sigma * f64::from(device.f);
    if needed > available {
        return Err(format!(
            "cpu: required {needed:.6e} Hz > available {available:.6e} Hz (f = {})",
            device.f
        ));
    }
    Ok(())
}

/// Feasible demand pairs per device, indexed by pair number.
pub fn feasible_pairs(state: &SystemState, cfg: &EnvConfig) -> Vec<Vec<bool>> {
    let space = cfg.action_space();
    state
        .devices
        .iter()
        .map(|&device| {
            (0..space.pair_count())
                .map(|p| {
                    let (d, e) = space.pair(p);
                    check_pair(d, e, device, cfg).is_ok()
                })
                .collect()
        })
        .collect()
}

/// One flag per joint action index. The idle action is always feasible.
pub fn feasible_mask(state: &SystemState, cfg: &EnvConfig) -> Vec<bool> {
    let pairs = feasible_pairs(state, cfg);
    let space = cfg.action_space();
    let radix = space.pair_count();
    // The rate digit never constrains, so build one block of device digits
    // and repeat it for every rate.
    let per_rate: Vec<bool> = (0..space.count() / space.rate_count())
        .map(|idx| {
            let mut rest = idx;
            let mut ok = true;
            for allowed in &pairs {
                ok &= allowed[rest % radix];
                rest /= radix;
            }
            ok
        })
        .collect();
    per_rate.repeat(space.rate_count())
}

/// Validates a full action against the state, naming the first violation.
pub fn check_action(state: &SystemState, action: &Action, cfg: &EnvConfig) -> Result<()> {
    if action.d.len() != cfg.n_devices || action.e.len() != cfg.n_devices {
        return Err(Error::Shape(format!(
            "action covers {}/{} devices, expected {}",
            action.d.len(),
            action.e.len(),
            cfg.n_devices
        )));
    }
    cfg.queue.check_rate(action.mu)?;
    for (device, (&dev, (&d, &e))) in state
        .devices
        .iter()
        .zip(action.d.iter().zip(&action.e))
        .enumerate()
    {
        check_pair(d, e, dev, cfg)
            .map_err(|constraint| Error::Infeasible { device, constraint })?;
    }
    Ok(())
}

/// Initial state: CPU shares uniform on `0..=F_max`, full batteries,
/// occupancy from the stationary law at `mu0`.
pub fn reset<R: Rng + ?Sized>(cfg: &EnvConfig, rng: &mut R) -> Result<SystemState> {
    let devices = (0..cfg.n_devices)
        .map(|_| DeviceState {
            f: rng.random_range(0..=cfg.f_max),
            c: cfg.c_max,
        })
        .collect();
    let rho = queue::utilization(cfg.queue.lambda, f64::from(cfg.queue.mu0))?;
    let m = queue::sample_queue_state(rho, rng)?;
    Ok(SystemState { devices, m })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub next_state: SystemState,
    pub reward: f64,
    pub components: Components,
    /// Energy harvested per device before clamping to `C_max`.
    pub harvested: Vec<u64>,
    /// Raw data units accumulated this episode, including this step.
    pub episode_data_so_far: u64,
    pub done: bool,
}

/// Applies `action` in `state`. `data_so_far` is the episode's raw data
/// accumulator before this step.
pub fn step<R: Rng + ?Sized>(
    state: &SystemState,
    action: &Action,
    cfg: &EnvConfig,
    data_so_far: u64,
    rng: &mut R,
) -> Result<StepOutcome> {
    if state.devices.len() != cfg.n_devices {
        return Err(Error::Shape(format!(
            "state has {} devices, expected {}",
            state.devices.len(),
            cfg.n_devices
        )));
    }
    check_action(state, action, cfg)?;

    let data = weighted_data(&action.d, &cfg.weights.eta);
    let energy: f64 = action.e.iter().map(|&e| f64::from(e)).sum();
    let any_training = action.d.iter().any(|&d| d > 0);
    let latency = training_latency(&action.d, &action.e, &cfg.physics)?
        + transmission_latency(&cfg.physics, any_training)
        + queue::block_latency(action.mu, &cfg.queue, rng)?;
    let components = Components {
        data,
        energy,
        latency,
        payment: payment(data, state.m, &cfg.weights),
    };
    let reward = reward(&components, &cfg.weights);

    let harvest = if cfg.kappa > 0.0 {
        Some(Poisson::new(cfg.kappa).map_err(|e| Error::invalid("kappa", e.to_string()))?)
    } else {
        None
    };
    let mut harvested = Vec::with_capacity(cfg.n_devices);
    let mut devices = Vec::with_capacity(cfg.n_devices);
    for (dev, &e) in state.devices.iter().zip(&action.e) {
        let k = harvest.map_or(0, |law| law.sample(rng) as u64);
        harvested.push(k);
        let c = (u64::from(dev.c - e) + k).min(u64::from(cfg.c_max)) as u32;
        devices.push(DeviceState { f: 0, c });
    }
    for dev in &mut devices {
        dev.f = rng.random_range(0..=cfg.f_max);
    }
    let rho = queue::utilization(cfg.queue.lambda, f64::from(action.mu))?;
    let m = queue::sample_queue_state(rho, rng)?;

    let episode_data_so_far = data_so_far + action.total_data();
    Ok(StepOutcome {
        next_state: SystemState { devices, m },
        reward,
        components,
        harvested,
        episode_data_so_far,
        done: episode_data_so_far >= cfg.b_target,
    })
}

/// Stateful wrapper around [`reset`] and [`step`] that tracks the current
/// state and the episode's data accumulator.
#[derive(Debug, Clone)]
pub struct Environment {
    cfg: EnvConfig,
    space: ActionSpace,
    state: SystemState,
    data_so_far: u64,
}

impl Environment {
    pub fn new<R: Rng + ?Sized>(cfg: EnvConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let state = reset(&cfg, rng)?;
        Ok(Environment {
            space: cfg.action_space(),
            cfg,
            state,
            data_so_far: 0,
        })
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<&SystemState> {
        self.state = reset(&self.cfg, rng)?;
        self.data_so_far = 0;
        Ok(&self.state)
    }

    pub fn step<R: Rng + ?Sized>(&mut self, action: &Action, rng: &mut R) -> Result<StepOutcome> {
        let outcome = step(&self.state, action, &self.cfg, self.data_so_far, rng)?;
        self.state = outcome.next_state.clone();
        self.data_so_far = outcome.episode_data_so_far;
        Ok(outcome)
    }

    pub fn step_index<R: Rng + ?Sized>(
        &mut self,
        index: usize,
        rng: &mut R,
    ) -> Result<StepOutcome> {
        let action = self.space.decode(index)?;
        self.step(&action, rng)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn data_so_far(&self) -> u64 {
        self.data_so_far
    }

    pub fn features(&self) -> Vec<f64> {
        self.state.features(&self.cfg)
    }

    pub fn mask(&self) -> Vec<bool> {
        feasible_mask(&self.state, &self.cfg)
    }
}
