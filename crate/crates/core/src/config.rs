//! JSON configuration documents.
//!
//! A document mirrors [`RunConfig`]: top-level environment capacities plus
//! `queue`, `physics`, `weights`, `agent` and `run` sections. Every key is
//! optional, unknown keys are rejected, and SNR values are given in dB.
//! Reward normalizers default to values derived from the other parameters.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::EpsilonSchedule;
use crate::env::{db_to_linear, EnvConfig, Normalizers, PhysicsConfig, RewardWeights};
use crate::error::{Error, Result};
use crate::harness::{AgentKind, AgentParams, RunConfig};
use crate::queue::QueueConfig;

/// File name of the echoed effective configuration.
pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config.json";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Dotted path of the offending key, e.g. `queue.mu0`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    Invalid(Vec<Violation>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse {
                line,
                column,
                message,
            } => write!(
                f,
                "config parse error at line {line}, column {column}: {message}"
            ),
            ConfigError::Invalid(violations) => {
                f.write_str("invalid config: ")?;
                for (i, v) in violations.iter().enumerate() {
                    if i > 0 {
                        f.write_str("; ")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ConfigError::Invalid(v) => v,
            ConfigError::Parse { .. } => &[],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_devices: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_max: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_max: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_max: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_max: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_target: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub queue: QueueSection,
    #[serde(default)]
    pub physics: PhysicsSection,
    #[serde(default)]
    pub weights: WeightsSection,
    #[serde(default)]
    pub agent: AgentSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu0: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_max: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_cr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_bp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_cap: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_up: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_dn: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_up_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_dn_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_size_bits: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_i: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i_norm: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<AgentKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qlearn_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replay_capacity: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sync_period: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_decay_episodes: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episodes: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_episodes: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics_window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<u64>,
}

fn push(out: &mut Vec<Violation>, path: &str, message: String) {
    out.push(Violation {
        path: path.to_string(),
        message,
    });
}

/// Parses a document, mapping syntax and type errors to line and column.
pub fn parse_document(text: &str) -> Result<ConfigDocument, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: strip_position(&e.to_string()),
    })
}

fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message.to_string(),
    }
}

impl ConfigDocument {
    /// Copy with every omitted key filled in. Normalizers left unset are
    /// derived from the resolved physics, queue and capacities.
    pub fn resolved(&self) -> ConfigDocument {
        let env = EnvConfig::default();
        let run = RunConfig::default();
        let params = AgentParams::default();
        let q = &self.queue;
        let p = &self.physics;
        let w = &self.weights;
        let a = &self.agent;
        let r = &self.run;

        let n_devices = self.n_devices.unwrap_or(env.n_devices);
        let queue = QueueSection {
            lambda: q.lambda.or(Some(env.queue.lambda)),
            mu0: q.mu0.or(Some(env.queue.mu0)),
            mu_max: q.mu_max.or(Some(env.queue.mu_max)),
            l_cr: q.l_cr.or(Some(env.queue.l_cr)),
            l_bp: q.l_bp.or(Some(env.queue.l_bp)),
            m_cap: q.m_cap.or(Some(env.queue.m_cap)),
        };
        let physics = PhysicsSection {
            delta: p.delta.or(Some(env.physics.delta)),
            tau: p.tau.or(Some(env.physics.tau)),
            nu: p.nu.or(Some(env.physics.nu)),
            sigma: p.sigma.or(Some(env.physics.sigma)),
            w_up: p.w_up.or(Some(env.physics.w_up)),
            w_dn: p.w_dn.or(Some(env.physics.w_dn)),
            snr_up_db: p.snr_up_db.or(Some(10.0)),
            snr_dn_db: p.snr_dn_db.or(Some(10.0)),
            model_size_bits: p.model_size_bits.or(Some(env.physics.model_size)),
        };
        let mut doc = ConfigDocument {
            n_devices: Some(n_devices),
            f_max: self.f_max.or(Some(env.f_max)),
            c_max: self.c_max.or(Some(env.c_max)),
            d_max: self.d_max.or(Some(env.d_max)),
            e_max: self.e_max.or(Some(env.e_max)),
            b_target: self.b_target.or(Some(env.b_target)),
            kappa: self.kappa.or(Some(env.kappa)),
            queue,
            physics,
            weights: WeightsSection {
                alpha_d: w.alpha_d.or(Some(env.weights.alpha_d)),
                alpha_e: w.alpha_e.or(Some(env.weights.alpha_e)),
                alpha_l: w.alpha_l.or(Some(env.weights.alpha_l)),
                alpha_i: w.alpha_i.or(Some(env.weights.alpha_i)),
                psi1: w.psi1.or(Some(env.weights.psi1)),
                psi2: w.psi2.or(Some(env.weights.psi2)),
                eta: w.eta.clone().or_else(|| Some(vec![1.0; n_devices])),
                ..WeightsSection::default()
            },
            agent: AgentSection {
                kind: a.kind.or(Some(run.agent)),
                gamma: a.gamma.or(Some(params.gamma)),
                learning_rate: a.learning_rate.or(Some(params.learning_rate)),
                qlearn_alpha: a.qlearn_alpha.or(Some(params.qlearn_alpha)),
                batch_size: a.batch_size.or(Some(params.batch_size)),
                replay_capacity: a.replay_capacity.or(Some(params.replay_capacity)),
                sync_period: a.sync_period.or(Some(params.sync_period)),
                warmup: a.warmup.or(Some(params.warmup)),
                hidden: a.hidden.clone().or_else(|| Some(params.hidden.clone())),
                eps_start: a.eps_start.or(Some(params.schedule.eps_start)),
                eps_end: a.eps_end.or(Some(params.schedule.eps_end)),
                eps_decay_episodes: a
                    .eps_decay_episodes
                    .or(Some(params.schedule.decay_episodes)),
            },
            run: RunSection {
                episodes: r.episodes.or(Some(run.episodes)),
                seed: r.seed.or(Some(run.seed)),
                eval_episodes: r.eval_episodes.or(Some(run.eval_episodes)),
                metrics_window: r.metrics_window.or(Some(run.metrics_window)),
                checkpoint_every: r.checkpoint_every.or(Some(run.checkpoint_every)),
            },
        };
        let derived = doc.derived_normalizers();
        doc.weights.d_norm = w.d_norm.or(Some(derived.d_norm));
        doc.weights.e_norm = w.e_norm.or(Some(derived.e_norm));
        doc.weights.l_norm = w.l_norm.or(Some(derived.l_norm));
        doc.weights.i_norm = w.i_norm.or(Some(derived.i_norm));
        doc
    }

    /// Normalizers derived from this (resolved) document.
    fn derived_normalizers(&self) -> Normalizers {
        Normalizers::derive(
            self.n_devices.expect("resolved"),
            self.d_max.expect("resolved"),
            self.e_max.expect("resolved"),
            self.weights.psi1.expect("resolved"),
            self.weights.psi2.expect("resolved"),
            &self.physics_config(),
            &self.queue_config(),
        )
    }

    fn queue_config(&self) -> QueueConfig {
        let q = &self.queue;
        QueueConfig {
            lambda: q.lambda.expect("resolved"),
            mu0: q.mu0.expect("resolved"),
            mu_max: q.mu_max.expect("resolved"),
            l_cr: q.l_cr.expect("resolved"),
            l_bp: q.l_bp.expect("resolved"),
            m_cap: q.m_cap.expect("resolved"),
        }
    }

    fn physics_config(&self) -> PhysicsConfig {
        let p = &self.physics;
        PhysicsConfig {
            delta: p.delta.expect("resolved"),
            tau: p.tau.expect("resolved"),
            nu: p.nu.expect("resolved"),
            sigma: p.sigma.expect("resolved"),
            w_up: p.w_up.expect("resolved"),
            w_dn: p.w_dn.expect("resolved"),
            snr_up: db_to_linear(p.snr_up_db.expect("resolved")),
            snr_dn: db_to_linear(p.snr_dn_db.expect("resolved")),
            model_size: p.model_size_bits.expect("resolved"),
        }
    }

    /// Every violated constraint of the resolved document.
    pub fn violations(&self) -> Vec<Violation> {
        let doc = self.resolved();
        let mut out = Vec::new();

        let n = doc.n_devices.expect("resolved");
        if n < 1 {
            push(&mut out, "n_devices", "must be at least 1".into());
        }
        for (path, value) in [
            ("f_max", doc.f_max),
            ("c_max", doc.c_max),
            ("d_max", doc.d_max),
            ("e_max", doc.e_max),
        ] {
            if value.expect("resolved") < 1 {
                push(&mut out, path, "must be at least 1".into());
            }
        }
        let (c_max, e_max) = (doc.c_max.expect("resolved"), doc.e_max.expect("resolved"));
        if e_max > c_max {
            push(
                &mut out,
                "e_max",
                format!("must not exceed c_max ({e_max} > {c_max})"),
            );
        }
        if doc.b_target.expect("resolved") < 1 {
            push(&mut out, "b_target", "must be at least 1".into());
        }
        let kappa = doc.kappa.expect("resolved");
        if !(kappa >= 0.0 && kappa.is_finite()) {
            push(
                &mut out,
                "kappa",
                format!("must be non-negative and finite, got {kappa}"),
            );
        }

        let q = doc.queue_config();
        if !(q.lambda > 0.0 && q.lambda.is_finite()) {
            push(
                &mut out,
                "queue.lambda",
                format!("must be positive and finite, got {}", q.lambda),
            );
        }
        if f64::from(q.mu0) <= q.lambda {
            push(
                &mut out,
                "queue.mu0",
                format!(
                    "queue stability requires mu0 > lambda (mu0 = {}, lambda = {})",
                    q.mu0, q.lambda
                ),
            );
        }
        if q.mu_max < q.mu0 {
            push(
                &mut out,
                "queue.mu_max",
                format!("must be at least mu0 ({} < {})", q.mu_max, q.mu0),
            );
        }
        for (path, value) in [("queue.l_cr", q.l_cr), ("queue.l_bp", q.l_bp)] {
            if !(value >= 0.0 && value.is_finite()) {
                push(
                    &mut out,
                    path,
                    format!("must be non-negative and finite, got {value}"),
                );
            }
        }
        if q.m_cap < 1 {
            push(&mut out, "queue.m_cap", "must be at least 1".into());
        }

        let p = &doc.physics;
        for (path, value) in [
            ("physics.delta", p.delta),
            ("physics.tau", p.tau),
            ("physics.nu", p.nu),
            ("physics.sigma", p.sigma),
            ("physics.w_up", p.w_up),
            ("physics.w_dn", p.w_dn),
            ("physics.model_size_bits", p.model_size_bits),
        ] {
            let value = value.expect("resolved");
            if !(value > 0.0 && value.is_finite()) {
                push(
                    &mut out,
                    path,
                    format!("must be positive and finite, got {value}"),
                );
            }
        }
        for (path, value) in [
            ("physics.snr_up_db", p.snr_up_db),
            ("physics.snr_dn_db", p.snr_dn_db),
        ] {
            let value = value.expect("resolved");
            if !value.is_finite() {
                push(&mut out, path, format!("must be finite, got {value}"));
            }
        }

        let w = &doc.weights;
        for (path, value) in [
            ("weights.alpha_d", w.alpha_d),
            ("weights.alpha_e", w.alpha_e),
            ("weights.alpha_l", w.alpha_l),
            ("weights.alpha_i", w.alpha_i),
            ("weights.psi1", w.psi1),
            ("weights.psi2", w.psi2),
        ] {
            let value = value.expect("resolved");
            if !(value > 0.0 && value.is_finite()) {
                push(
                    &mut out,
                    path,
                    format!("must be positive and finite, got {value}"),
                );
            }
        }
        // Derived normalizers inherit any upstream violation, so only
        // explicit ones are checked until everything else is clean.
        let upstream_clean = out.is_empty();
        for (path, given, value) in [
            ("weights.d_norm", self.weights.d_norm, w.d_norm),
            ("weights.e_norm", self.weights.e_norm, w.e_norm),
            ("weights.l_norm", self.weights.l_norm, w.l_norm),
            ("weights.i_norm", self.weights.i_norm, w.i_norm),
        ] {
            let value = value.expect("resolved");
            if (given.is_some() || upstream_clean) && !(value > 0.0 && value.is_finite()) {
                push(
                    &mut out,
                    path,
                    format!("must be positive and finite, got {value}"),
                );
            }
        }
        let eta = w.eta.as_ref().expect("resolved");
        if eta.len() != n {
            push(
                &mut out,
                "weights.eta",
                format!("expected {n} entries (one per device), got {}", eta.len()),
            );
        }
        for (i, &q) in eta.iter().enumerate() {
            if !(q > 0.0 && q.is_finite()) {
                push(
                    &mut out,
                    &format!("weights.eta[{i}]"),
                    format!("must be positive, got {q}"),
                );
            }
        }

        let a = &doc.agent;
        let gamma = a.gamma.expect("resolved");
        if !(0.0..1.0).contains(&gamma) {
            push(
                &mut out,
                "agent.gamma",
                format!("must lie in [0, 1), got {gamma}"),
            );
        }
        let lr = a.learning_rate.expect("resolved");
        if !(lr > 0.0 && lr.is_finite()) {
            push(
                &mut out,
                "agent.learning_rate",
                format!("must be positive and finite, got {lr}"),
            );
        }
        let qa = a.qlearn_alpha.expect("resolved");
        if !(0.0..=1.0).contains(&qa) {
            push(
                &mut out,
                "agent.qlearn_alpha",
                format!("must lie in [0, 1], got {qa}"),
            );
        }
        let batch = a.batch_size.expect("resolved");
        let capacity = a.replay_capacity.expect("resolved");
        if batch < 1 {
            push(&mut out, "agent.batch_size", "must be at least 1".into());
        }
        if capacity < batch.max(1) {
            push(
                &mut out,
                "agent.replay_capacity",
                format!("must hold at least one batch ({capacity} < {batch})"),
            );
        }
        if a.sync_period.expect("resolved") < 1 {
            push(&mut out, "agent.sync_period", "must be at least 1".into());
        }
        let hidden = a.hidden.as_ref().expect("resolved");
        for (i, &h) in hidden.iter().enumerate() {
            if h < 1 {
                push(
                    &mut out,
                    &format!("agent.hidden[{i}]"),
                    "layer width must be positive".into(),
                );
            }
        }
        let (s, e) = (a.eps_start.expect("resolved"), a.eps_end.expect("resolved"));
        if !(0.0..=1.0).contains(&s) {
            push(
                &mut out,
                "agent.eps_start",
                format!("must lie in [0, 1], got {s}"),
            );
        }
        if !(0.0 <= e && e <= s) {
            push(
                &mut out,
                "agent.eps_end",
                format!("must lie in [0, eps_start], got {e}"),
            );
        }
        if a.eps_decay_episodes.expect("resolved") < 1 {
            push(
                &mut out,
                "agent.eps_decay_episodes",
                "must be at least 1".into(),
            );
        }

        let r = &doc.run;
        if r.episodes.expect("resolved") < 1 {
            push(&mut out, "run.episodes", "must be at least 1".into());
        }
        if r.eval_episodes.expect("resolved") < 1 {
            push(&mut out, "run.eval_episodes", "must be at least 1".into());
        }
        if r.metrics_window.expect("resolved") < 1 {
            push(&mut out, "run.metrics_window", "must be at least 1".into());
        }
        out
    }

    /// Validated, fully-defaulted run configuration.
    pub fn to_run_config(&self) -> Result<RunConfig, ConfigError> {
        let violations = self.violations();
        if !violations.is_empty() {
            return Err(ConfigError::Invalid(violations));
        }
        let doc = self.resolved();
        let w = &doc.weights;
        let a = &doc.agent;
        let r = &doc.run;
        let env = EnvConfig {
            n_devices: doc.n_devices.expect("resolved"),
            f_max: doc.f_max.expect("resolved"),
            c_max: doc.c_max.expect("resolved"),
            d_max: doc.d_max.expect("resolved"),
            e_max: doc.e_max.expect("resolved"),
            b_target: doc.b_target.expect("resolved"),
            kappa: doc.kappa.expect("resolved"),
            queue: doc.queue_config(),
            physics: doc.physics_config(),
            weights: RewardWeights {
                alpha_d: w.alpha_d.expect("resolved"),
                alpha_e: w.alpha_e.expect("resolved"),
                alpha_l: w.alpha_l.expect("resolved"),
                alpha_i: w.alpha_i.expect("resolved"),
                psi1: w.psi1.expect("resolved"),
                psi2: w.psi2.expect("resolved"),
                eta: w.eta.clone().expect("resolved"),
                d_norm: w.d_norm.expect("resolved"),
                e_norm: w.e_norm.expect("resolved"),
                l_norm: w.l_norm.expect("resolved"),
                i_norm: w.i_norm.expect("resolved"),
            },
        };
        let run = RunConfig {
            agent: a.kind.expect("resolved"),
            episodes: r.episodes.expect("resolved"),
            seed: r.seed.expect("resolved"),
            env,
            params: AgentParams {
                gamma: a.gamma.expect("resolved"),
                learning_rate: a.learning_rate.expect("resolved"),
                qlearn_alpha: a.qlearn_alpha.expect("resolved"),
                batch_size: a.batch_size.expect("resolved"),
                replay_capacity: a.replay_capacity.expect("resolved"),
                sync_period: a.sync_period.expect("resolved"),
                warmup: a.warmup.expect("resolved"),
                hidden: a.hidden.clone().expect("resolved"),
                schedule: EpsilonSchedule {
                    eps_start: a.eps_start.expect("resolved"),
                    eps_end: a.eps_end.expect("resolved"),
                    decay_episodes: a.eps_decay_episodes.expect("resolved"),
                },
            },
            out_dir: None,
            eval_episodes: r.eval_episodes.expect("resolved"),
            metrics_window: r.metrics_window.expect("resolved"),
            checkpoint_every: r.checkpoint_every.expect("resolved"),
        };
        run.validate().map_err(|e| {
            ConfigError::Invalid(vec![Violation {
                path: "$".into(),
                message: e.to_string(),
            }])
        })?;
        Ok(run)
    }
}

/// Parses and validates a configuration string.
pub fn parse_config(text: &str) -> Result<(RunConfig, ConfigDocument), ConfigError> {
    let doc = parse_document(text)?;
    let run = doc.to_run_config()?;
    Ok((run, doc.resolved()))
}

/// Reads, validates and fully defaults a configuration file. Also returns
/// the resolved document for echoing.
pub fn load_config(path: &Path) -> Result<(RunConfig, ConfigDocument)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_config(&text)?)
}

/// Writes the resolved document to `dir/effective_config.json`.
pub fn write_effective_config(doc: &ConfigDocument, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(EFFECTIVE_CONFIG_FILE);
    let mut text = serde_json::to_string_pretty(&doc.resolved())?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}
