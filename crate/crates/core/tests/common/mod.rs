//! Independent oracles shared by the integration suites.

#![allow(dead_code)]

use bfl_core::env::{Action, DeviceState, EnvConfig, SystemState};
use bfl_core::network::{Gradients, NetworkParams};
use rand::Rng;

/// `0.5 (target - Q_a(x))^2`.
pub fn td_loss(net: &NetworkParams, x: &[f64], action: usize, target: f64) -> f64 {
    let q = net.forward(x).unwrap()[action];
    0.5 * (target - q).powi(2)
}

/// Worst relative disagreement between `grads` and central differences of
/// the TD loss over every parameter.
pub fn finite_difference_error(
    net: &NetworkParams,
    grads: &Gradients,
    x: &[f64],
    action: usize,
    target: f64,
    h: f64,
) -> f64 {
    let dims = net.layer_dims().to_vec();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    let mut compare = |analytic: f64, numeric: f64| {
        let scale = analytic.abs().max(numeric.abs());
        let err = if scale > 1e-7 {
            (analytic - numeric).abs() / scale
        } else {
            // Both effectively zero; measure against the step noise floor.
            (analytic - numeric).abs() / 1e-7
        };
        worst = worst.max(err);
    };
    for l in 0..dims.len() - 1 {
        for row in 0..dims[l + 1] {
            for col in 0..dims[l] {
                let w = net.weight(l, row, col);
                probe.set_weight(l, row, col, w + h);
                let up = td_loss(&probe, x, action, target);
                probe.set_weight(l, row, col, w - h);
                let down = td_loss(&probe, x, action, target);
                probe.set_weight(l, row, col, w);
                compare(grads.weight(l, row, col), (up - down) / (2.0 * h));
            }
            let b = net.bias(l, row);
            probe.set_bias(l, row, b + h);
            let up = td_loss(&probe, x, action, target);
            probe.set_bias(l, row, b - h);
            let down = td_loss(&probe, x, action, target);
            probe.set_bias(l, row, b);
            compare(grads.bias(l, row), (up - down) / (2.0 * h));
        }
    }
    worst
}

/// Required CPU frequency evaluated from scratch.
pub fn required_frequency(cfg: &EnvConfig, d: u32, e: u32) -> f64 {
    let p = &cfg.physics;
    (p.delta * f64::from(e) / (p.tau * p.nu * f64::from(d))).sqrt()
}

/// Brute-force feasibility of a decoded action, written without the
/// library's pair tables.
pub fn brute_force_feasible(state: &SystemState, action: &Action, cfg: &EnvConfig) -> bool {
    if action.mu < cfg.queue.mu0 || action.mu > cfg.queue.mu_max {
        return false;
    }
    action
        .d
        .iter()
        .zip(&action.e)
        .zip(&state.devices)
        .all(|((&d, &e), dev)| {
            if (d == 0) != (e == 0) {
                return false;
            }
            if d == 0 {
                return true;
            }
            d <= cfg.d_max
                && e <= cfg.e_max
                && e <= dev.c
                && required_frequency(cfg, d, e) <= cfg.physics.sigma * f64::from(dev.f)
        })
}

/// Decodes a joint index by direct mixed-radix arithmetic: device 0 is the
/// least significant digit, the block rate the most significant.
pub fn decode_by_hand(index: usize, cfg: &EnvConfig) -> Action {
    let pairs = 1 + (cfg.d_max * cfg.e_max) as usize;
    let mut rest = index;
    let mut d = Vec::new();
    let mut e = Vec::new();
    for _ in 0..cfg.n_devices {
        let p = rest % pairs;
        rest /= pairs;
        if p == 0 {
            d.push(0);
            e.push(0);
        } else {
            d.push(1 + ((p - 1) / cfg.e_max as usize) as u32);
            e.push(1 + ((p - 1) % cfg.e_max as usize) as u32);
        }
    }
    Action {
        d,
        e,
        mu: cfg.queue.mu0 + rest as u32,
    }
}

pub fn random_state<R: Rng>(cfg: &EnvConfig, rng: &mut R) -> SystemState {
    SystemState {
        devices: (0..cfg.n_devices)
            .map(|_| DeviceState {
                f: rng.random_range(0..=cfg.f_max),
                c: rng.random_range(0..=cfg.c_max),
            })
            .collect(),
        m: rng.random_range(0..40),
    }
}

/// Mean squared error of a scalar-output net on (input, target) pairs.
pub fn mse(net: &NetworkParams, data: &[([f64; 2], f64)]) -> f64 {
    data.iter()
        .map(|(x, y)| (net.forward(x).unwrap()[0] - y).powi(2))
        .sum::<f64>()
        / data.len() as f64
}

pub const XOR: [([f64; 2], f64); 4] = [
    ([0.0, 0.0], 0.0),
    ([0.0, 1.0], 1.0),
    ([1.0, 0.0], 1.0),
    ([1.0, 1.0], 0.0),
];

/// Full-batch gradient descent on XOR; returns the MSE after each update.
pub fn fit_xor(net: &mut NetworkParams, alpha: f64, updates: usize) -> Vec<f64> {
    let mut curve = Vec::with_capacity(updates);
    for _ in 0..updates {
        let mut grads = Gradients::zeros(net);
        for (x, y) in &XOR {
            net.accumulate_td_gradient(x, 0, *y, 1.0 / XOR.len() as f64, &mut grads)
                .unwrap();
        }
        net.apply_update(&grads, alpha).unwrap();
        assert!(net.is_finite());
        curve.push(mse(net, &XOR));
    }
    curve
}
