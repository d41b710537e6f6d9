//! Deep Q-network agent with replay memory and a periodically synced target
//! network.

use std::collections::HashMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{select_epsilon_greedy, EpsilonSchedule, Observation, Policy};
use super::{ReplayMemory, Transition};
use crate::error::{Error, Result};
use crate::network::{Gradients, NetworkParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqnConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Learn steps between target syncs.
    pub sync_period: u64,
    pub replay_capacity: usize,
    /// Transitions collected before learning starts.
    pub warmup: usize,
    pub schedule: EpsilonSchedule,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            gamma: 0.9,
            learning_rate: 0.001,
            batch_size: 64,
            sync_period: 200,
            replay_capacity: 10_000,
            warmup: 1000,
            schedule: EpsilonSchedule::default(),
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::invalid("gamma", "must lie in [0, 1)"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be positive"));
        }
        if self.batch_size < 1 {
            return Err(Error::invalid("batch_size", "must be at least 1"));
        }
        if self.sync_period < 1 {
            return Err(Error::invalid("sync_period", "must be at least 1"));
        }
        if self.replay_capacity < self.batch_size {
            return Err(Error::invalid(
                "replay_capacity",
                "must hold at least one batch",
            ));
        }
        self.schedule.validate()
    }
}

/// Serialized agent: the online network plus agent metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqnCheckpoint {
    pub agent: String,
    pub gamma: f64,
    pub steps_done: u64,
    pub episodes_done: u64,
    pub schedule: EpsilonSchedule,
    pub network: NetworkParams,
}

pub struct DqnAgent {
    online: NetworkParams,
    target: NetworkParams,
    cfg: DqnConfig,
    memory: ReplayMemory,
    steps_done: u64,
    learn_steps: u64,
    episodes_done: u64,
    /// Bootstrap maxima of the current target network, keyed by next-state
    /// features and mask. Cleared on every sync.
    target_cache: HashMap<Vec<u64>, f64>,
}

fn cache_key(s_next: &[f64], mask: &[bool]) -> Vec<u64> {
    let mut key: Vec<u64> = s_next.iter().map(|v| v.to_bits()).collect();
    key.extend(mask.chunks(64).map(|chunk| {
        chunk
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | (u64::from(b) << i))
    }));
    key
}

impl DqnAgent {
    pub fn new(online: NetworkParams, cfg: DqnConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(DqnAgent {
            target: online.clone(),
            memory: ReplayMemory::new(cfg.replay_capacity)?,
            online,
            cfg,
            steps_done: 0,
            learn_steps: 0,
            episodes_done: 0,
            target_cache: HashMap::new(),
        })
    }

    pub fn from_checkpoint(ckpt: DqnCheckpoint, cfg: DqnConfig) -> Result<Self> {
        let mut agent = DqnAgent::new(ckpt.network, cfg)?;
        agent.steps_done = ckpt.steps_done;
        agent.episodes_done = ckpt.episodes_done;
        Ok(agent)
    }

    pub fn checkpoint(&self) -> DqnCheckpoint {
        DqnCheckpoint {
            agent: "dqn".into(),
            gamma: self.cfg.gamma,
            steps_done: self.steps_done,
            episodes_done: self.episodes_done,
            schedule: self.cfg.schedule,
            network: self.online.clone(),
        }
    }

    pub fn online(&self) -> &NetworkParams {
        &self.online
    }

    pub fn target(&self) -> &NetworkParams {
        &self.target
    }

    pub fn config(&self) -> &DqnConfig {
        &self.cfg
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    pub fn learn_steps(&self) -> u64 {
        self.learn_steps
    }

    pub fn steps_done(&self) -> u64 {
        self.steps_done
    }

    pub fn episodes_done(&self) -> u64 {
        self.episodes_done
    }

    pub fn remember(&mut self, t: Transition) {
        self.memory.push(t);
    }

    /// One minibatch update: uniform sampling with replacement, then
    /// [`DqnAgent::learn_on_slots`]. Returns the batch's mean squared TD
    /// error before the update.
    pub fn dqn_learn_step<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Result<f64> {
        let slots = self.memory.sample_slots(self.cfg.batch_size, rng)?;
        self.learn_on_slots(&slots)
    }

    /// Gradient step on the given replay slots. Targets are
    /// `r + gamma max_a' Q_target(s', a')` over feasible `a'`, or `r` for
    /// terminal transitions. Syncs the target every `sync_period` calls.
    pub fn learn_on_slots(&mut self, slots: &[usize]) -> Result<f64> {
        if slots.is_empty() {
            return Err(Error::InsufficientMemory {
                have: self.memory.len(),
                need: 1,
            });
        }
        let transitions: Vec<&Transition> = slots
            .iter()
            .map(|&s| {
                self.memory.slot(s).ok_or(Error::IndexOutOfRange {
                    index: s,
                    limit: self.memory.len(),
                })
            })
            .collect::<Result<_>>()?;

        // Bootstrap maxima, memoized per (next state, mask) until the next
        // target sync.
        let mut keys = Vec::with_capacity(transitions.len());
        for t in &transitions {
            if t.done || self.cfg.gamma == 0.0 {
                keys.push(None);
                continue;
            }
            let key = cache_key(&t.s_next, &t.mask_next);
            if !self.target_cache.contains_key(&key) {
                let (_, best) = self.target.masked_best(&t.s_next, &t.mask_next)?;
                self.target_cache.insert(key.clone(), best);
            }
            keys.push(Some(key));
        }

        let scale = 1.0 / transitions.len() as f64;
        let mut inputs = Vec::with_capacity(transitions.len() * self.online.input_dim());
        let mut actions = Vec::with_capacity(transitions.len());
        let mut targets = Vec::with_capacity(transitions.len());
        for (t, key) in transitions.iter().zip(&keys) {
            let bootstrap = key.as_ref().map_or(0.0, |k| self.target_cache[k]);
            inputs.extend_from_slice(&t.s);
            actions.push(t.a);
            targets.push(t.r + self.cfg.gamma * bootstrap);
        }
        let mut grads = Gradients::zeros(&self.online);
        let tds = self
            .online
            .accumulate_td_gradient_batch(&inputs, &actions, &targets, scale, &mut grads)?;
        let sq: f64 = tds.iter().map(|td| td * td).sum();
        self.online.apply_update(&grads, self.cfg.learning_rate)?;
        if !self.online.is_finite_after(&grads) {
            return Err(Error::NonFinite(format!(
                "online network after learn step {}",
                self.learn_steps + 1
            )));
        }
        self.learn_steps += 1;
        if self.learn_steps.is_multiple_of(self.cfg.sync_period) {
            self.sync_target();
        }
        Ok(sq * scale)
    }

    pub fn sync_target(&mut self) {
        self.target.clone_from(&self.online);
        self.target_cache.clear();
    }
}

impl Policy for DqnAgent {
    fn name(&self) -> &'static str {
        "dqn"
    }

    fn select_action(
        &mut self,
        obs: &Observation<'_>,
        epsilon: f64,
        rng: &mut dyn RngCore,
    ) -> Result<usize> {
        let online = &self.online;
        select_epsilon_greedy(obs.mask, epsilon, rng, || {
            online.masked_best(obs.features, obs.mask).map(|(a, _)| a)
        })
    }

    fn schedule(&self) -> Option<&EpsilonSchedule> {
        Some(&self.cfg.schedule)
    }

    fn learn(&mut self, transition: Transition, rng: &mut dyn RngCore) -> Result<Option<f64>> {
        self.steps_done += 1;
        self.memory.push(transition);
        if self.memory.len() < self.cfg.warmup.max(self.cfg.batch_size) {
            return Ok(None);
        }
        self.dqn_learn_step(rng).map(Some)
    }

    fn end_episode(&mut self) {
        self.episodes_done += 1;
    }
}
