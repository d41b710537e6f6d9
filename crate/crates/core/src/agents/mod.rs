//! Decision policies: DQN, tabular Q-learning, Greedy and Random.
//!
//! Every policy sees the same [`Observation`] (state, feature vector and
//! feasibility mask) and returns a joint action index that is feasible in
//! that state.

mod baseline;
mod dqn;
mod qlearn;
mod replay;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

pub use baseline::{greedy_action, random_policy, GreedyPolicy, RandomPolicy};
pub use dqn::{DqnAgent, DqnCheckpoint, DqnConfig};
pub use qlearn::{QLearnConfig, QTable, QTableCheckpoint};
pub use replay::{ReplayMemory, Transition};

use crate::env::{EnvConfig, SystemState};
use crate::error::{Error, Result};

/// What a policy sees before acting.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub state: &'a SystemState,
    pub features: &'a [f64],
    pub mask: &'a [bool],
    pub cfg: &'a EnvConfig,
}

pub trait Policy {
    fn name(&self) -> &'static str;

    /// Picks a feasible action index. `epsilon` is the exploration
    /// probability; policies without exploration ignore it.
    fn select_action(
        &mut self,
        obs: &Observation<'_>,
        epsilon: f64,
        rng: &mut dyn RngCore,
    ) -> Result<usize>;

    /// Exploration schedule, if the policy explores.
    fn schedule(&self) -> Option<&EpsilonSchedule> {
        None
    }

    /// Feeds one transition to a learning policy; returns the squared TD
    /// error of whatever update ran.
    fn learn(&mut self, _transition: Transition, _rng: &mut dyn RngCore) -> Result<Option<f64>> {
        Ok(None)
    }

    fn end_episode(&mut self) {}
}

/// Linear decay from `eps_start` at episode 0 to `eps_end` at
/// `decay_episodes`, flat afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub eps_start: f64,
    pub eps_end: f64,
    pub decay_episodes: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule {
            eps_start: 0.9,
            eps_end: 0.1,
            decay_episodes: 2000,
        }
    }
}

impl EpsilonSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.eps_end && self.eps_end <= self.eps_start && self.eps_start <= 1.0) {
            return Err(Error::invalid(
                "schedule",
                format!(
                    "need 0 <= eps_end ({}) <= eps_start ({}) <= 1",
                    self.eps_end, self.eps_start
                ),
            ));
        }
        if self.decay_episodes < 1 {
            return Err(Error::invalid("decay_episodes", "must be at least 1"));
        }
        Ok(())
    }

    pub fn epsilon(&self, episode: u64) -> f64 {
        if episode >= self.decay_episodes {
            return self.eps_end;
        }
        let frac = episode as f64 / self.decay_episodes as f64;
        self.eps_start + (self.eps_end - self.eps_start) * frac
    }
}

pub fn epsilon(episode: u64, schedule: &EpsilonSchedule) -> f64 {
    schedule.epsilon(episode)
}

/// Index of the largest value among feasible entries; lowest index wins ties.
pub fn masked_argmax(values: &[f64], mask: &[bool]) -> Result<usize> {
    if values.len() != mask.len() {
        return Err(Error::Shape(format!(
            "{} values vs {} mask entries",
            values.len(),
            mask.len()
        )));
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, (&v, &ok)) in values.iter().zip(mask).enumerate() {
        if ok && best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::EmptyMask)
}

/// Largest value among feasible entries.
pub fn masked_max(values: &[f64], mask: &[bool]) -> Result<f64> {
    masked_argmax(values, mask).map(|i| values[i])
}

/// Uniform draw over feasible indices.
pub fn uniform_feasible<R: Rng + ?Sized>(mask: &[bool], rng: &mut R) -> Result<usize> {
    let count = mask.iter().filter(|&&ok| ok).count();
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let pick = rng.random_range(0..count);
    Ok(mask
        .iter()
        .enumerate()
        .filter(|(_, &ok)| ok)
        .nth(pick)
        .map(|(i, _)| i)
        .expect("pick < count"))
}

/// Epsilon-greedy selection; `greedy` returns the exploiting choice. One
/// uniform draw decides exploration on every call so the stream advances
/// identically whatever `epsilon` is.
pub fn select_epsilon_greedy<R, F>(
    mask: &[bool],
    epsilon: f64,
    rng: &mut R,
    greedy: F,
) -> Result<usize>
where
    R: Rng + ?Sized,
    F: FnOnce() -> Result<usize>,
{
    if !mask.iter().any(|&ok| ok) {
        return Err(Error::EmptyMask);
    }
    let u: f64 = rng.random();
    if u < epsilon {
        uniform_feasible(mask, rng)
    } else {
        greedy()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn schedule_endpoints() {
        let s = EpsilonSchedule::default();
        assert_eq!(epsilon(0, &s), 0.9);
        assert!((epsilon(2000, &s) - 0.1).abs() < 1e-15);
        assert!((epsilon(1000, &s) - 0.5).abs() < 1e-15);
        assert_eq!(epsilon(5000, &s), 0.1);
        assert!(s.validate().is_ok());
        let bad = EpsilonSchedule {
            eps_start: 0.1,
            eps_end: 0.5,
            decay_episodes: 10,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn greedy_choice_respects_mask_and_ties() {
        let mut rng = seeded_rng(1);
        let mask = [true, false, true];
        let pick = select_epsilon_greedy(&mask, 0.0, &mut rng, || {
            masked_argmax(&[3.0, 7.0, 5.0], &mask)
        })
        .unwrap();
        assert_eq!(pick, 2);
        let pick = select_epsilon_greedy(&[true; 4], 0.0, &mut rng, || {
            masked_argmax(&[1.0; 4], &[true; 4])
        })
        .unwrap();
        assert_eq!(pick, 0);
        assert!(matches!(
            select_epsilon_greedy(&[false; 3], 0.0, &mut rng, || Ok(0)),
            Err(Error::EmptyMask)
        ));
        let explored = select_epsilon_greedy(&mask, 1.0, &mut rng, || Ok(1)).unwrap();
        assert!(mask[explored]);
    }

    #[test]
    fn argmax_is_scale_invariant() {
        let values = [0.3, -1.0, 2.5, 2.5, 0.0];
        let mask = [true, true, false, true, true];
        let base = masked_argmax(&values, &mask).unwrap();
        for scale in [0.001, 1.0, 7.5, 1e6] {
            let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
            assert_eq!(masked_argmax(&scaled, &mask).unwrap(), base);
        }
        assert_eq!(base, 3);
    }

    #[test]
    fn uniform_single_feasible() {
        let mut rng = seeded_rng(2);
        let mut mask = vec![false; 50];
        mask[17] = true;
        for _ in 0..1000 {
            assert_eq!(uniform_feasible(&mask, &mut rng).unwrap(), 17);
        }
    }
}
