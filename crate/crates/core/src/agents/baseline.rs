//! Non-learning baselines.

use rand::{Rng, RngCore};

use super::{uniform_feasible, Observation, Policy};
use crate::env::{check_pair, Action, EnvConfig, SystemState};
use crate::error::Result;

/// Demands `D_max` from every device that can take it, with energy drawn
/// uniformly from the feasible set. A device that cannot take `D_max` falls
/// back to the largest feasible data amount, or nothing. The block rate is
/// uniform over its range.
pub fn greedy_action<R: Rng + ?Sized>(
    state: &SystemState,
    cfg: &EnvConfig,
    rng: &mut R,
) -> Result<usize> {
    let mut action = Action::idle(cfg.n_devices, cfg.queue.mu0);
    for (i, &device) in state.devices.iter().enumerate() {
        for d in (1..=cfg.d_max).rev() {
            let energies: Vec<u32> = (1..=cfg.e_max)
                .filter(|&e| check_pair(d, e, device, cfg).is_ok())
                .collect();
            if !energies.is_empty() {
                action.d[i] = d;
                action.e[i] = energies[rng.random_range(0..energies.len())];
                break;
            }
        }
    }
    action.mu = rng.random_range(cfg.queue.mu0..=cfg.queue.mu_max);
    cfg.action_space().encode(&action)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyPolicy;

impl Policy for GreedyPolicy {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn select_action(
        &mut self,
        obs: &Observation<'_>,
        _epsilon: f64,
        rng: &mut dyn RngCore,
    ) -> Result<usize> {
        greedy_action(obs.state, obs.cfg, rng)
    }
}

/// Uniform over feasible actions.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn name(&self) -> &'static str {
        "random"
    }

    fn select_action(
        &mut self,
        obs: &Observation<'_>,
        _epsilon: f64,
        rng: &mut dyn RngCore,
    ) -> Result<usize> {
        uniform_feasible(obs.mask, rng)
    }
}

pub fn random_policy<R: Rng + ?Sized>(mask: &[bool], rng: &mut R) -> Result<usize> {
    uniform_feasible(mask, rng)
}
