//! Sparse tabular Q-learning baseline.

use std::collections::HashMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{
    masked_argmax, select_epsilon_greedy, EpsilonSchedule, Observation, Policy, Transition,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QLearnConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub schedule: EpsilonSchedule,
}

impl Default for QLearnConfig {
    fn default() -> Self {
        QLearnConfig {
            alpha: 0.1,
            gamma: 0.9,
            schedule: EpsilonSchedule::default(),
        }
    }
}

impl QLearnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid("qlearn_alpha", "must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::invalid("gamma", "must lie in [0, 1)"));
        }
        self.schedule.validate()
    }
}

/// State key: the bit patterns of the observation vector, which already
/// encodes `(f, c, min(m, m_cap))` one-to-one.
type StateKey = Vec<u64>;

fn state_key(features: &[f64]) -> StateKey {
    features.iter().map(|v| v.to_bits()).collect()
}

/// Only visited pairs are stored; everything else reads as zero.
#[derive(Debug, Clone)]
pub struct QTable {
    cfg: QLearnConfig,
    table: HashMap<StateKey, HashMap<usize, f64>>,
    episodes_done: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QEntry {
    pub state: Vec<f64>,
    pub action: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTableCheckpoint {
    pub agent: String,
    pub alpha: f64,
    pub gamma: f64,
    pub episodes_done: u64,
    pub schedule: EpsilonSchedule,
    pub entries: Vec<QEntry>,
}

impl QTable {
    pub fn new(cfg: QLearnConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(QTable {
            cfg,
            table: HashMap::new(),
            episodes_done: 0,
        })
    }

    pub fn config(&self) -> &QLearnConfig {
        &self.cfg
    }

    pub fn get(&self, state: &[f64], action: usize) -> f64 {
        self.table
            .get(&state_key(state))
            .and_then(|row| row.get(&action))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn set(&mut self, state: &[f64], action: usize, value: f64) {
        self.table
            .entry(state_key(state))
            .or_default()
            .insert(action, value);
    }

    /// Number of stored state-action pairs.
    pub fn len(&self) -> usize {
        self.table.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dense row of values for `state`, zero where unvisited.
    pub fn values(&self, state: &[f64], action_count: usize) -> Vec<f64> {
        let mut row = vec![0.0; action_count];
        if let Some(stored) = self.table.get(&state_key(state)) {
            for (&a, &v) in stored {
                if a < action_count {
                    row[a] = v;
                }
            }
        }
        row
    }

    /// Largest value over feasible actions of `state`.
    fn feasible_max(&self, state: &[f64], mask: &[bool]) -> Result<f64> {
        let stored = self.table.get(&state_key(state));
        let mut best: Option<f64> = None;
        for (a, _) in mask.iter().enumerate().filter(|(_, &ok)| ok) {
            let v = stored.and_then(|row| row.get(&a)).copied().unwrap_or(0.0);
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
        best.ok_or(Error::EmptyMask)
    }

    /// Watkins update `Q <- Q + alpha (r + gamma max_a' Q(s', a') - Q)` with
    /// the max over feasible next actions; terminal transitions use `r`.
    /// Returns the updated value.
    pub fn qlearn_update(&mut self, t: &Transition) -> Result<f64> {
        let target = if t.done {
            t.r
        } else {
            t.r + self.cfg.gamma * self.feasible_max(&t.s_next, &t.mask_next)?
        };
        let current = self.get(&t.s, t.a);
        if self.cfg.alpha == 0.0 {
            return Ok(current);
        }
        let updated = current + self.cfg.alpha * (target - current);
        self.set(&t.s, t.a, updated);
        Ok(updated)
    }

    pub fn checkpoint(&self) -> QTableCheckpoint {
        let mut entries: Vec<QEntry> = self
            .table
            .iter()
            .flat_map(|(key, row)| {
                row.iter().map(move |(&action, &value)| QEntry {
                    state: key.iter().map(|&b| f64::from_bits(b)).collect(),
                    action,
                    value,
                })
            })
            .collect();
        entries.sort_by(|a, b| {
            a.state
                .iter()
                .zip(&b.state)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.action.cmp(&b.action))
        });
        QTableCheckpoint {
            agent: "qlearn".into(),
            alpha: self.cfg.alpha,
            gamma: self.cfg.gamma,
            episodes_done: self.episodes_done,
            schedule: self.cfg.schedule,
            entries,
        }
    }

    pub fn from_checkpoint(ckpt: QTableCheckpoint) -> Result<Self> {
        let mut table = QTable::new(QLearnConfig {
            alpha: ckpt.alpha,
            gamma: ckpt.gamma,
            schedule: ckpt.schedule,
        })?;
        table.episodes_done = ckpt.episodes_done;
        for e in ckpt.entries {
            table.set(&e.state, e.action, e.value);
        }
        Ok(table)
    }
}

impl Policy for QTable {
    fn name(&self) -> &'static str {
        "qlearn"
    }

    fn select_action(
        &mut self,
        obs: &Observation<'_>,
        epsilon: f64,
        rng: &mut dyn RngCore,
    ) -> Result<usize> {
        select_epsilon_greedy(obs.mask, epsilon, rng, || {
            masked_argmax(&self.values(obs.features, obs.mask.len()), obs.mask)
        })
    }

    fn schedule(&self) -> Option<&EpsilonSchedule> {
        Some(&self.cfg.schedule)
    }

    fn learn(&mut self, transition: Transition, _rng: &mut dyn RngCore) -> Result<Option<f64>> {
        let before = self.get(&transition.s, transition.a);
        let target = if transition.done {
            transition.r
        } else {
            transition.r
                + self.cfg.gamma * self.feasible_max(&transition.s_next, &transition.mask_next)?
        };
        self.qlearn_update(&transition)?;
        Ok(Some((target - before).powi(2)))
    }

    fn end_episode(&mut self) {
        self.episodes_done += 1;
    }
}
