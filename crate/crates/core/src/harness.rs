//! Episodic training and evaluation loops, metric collection and the
//! data-quality sweep.
//!
//! A run's master seed is split into three ChaCha streams: environment,
//! exploration (policy and replay sampling) and weight initialization, so
//! switching the agent leaves the environment's randomness unchanged.

use std::fmt;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{
    DqnAgent, DqnCheckpoint, DqnConfig, EpsilonSchedule, GreedyPolicy, Observation, Policy,
    QLearnConfig, QTable, QTableCheckpoint, RandomPolicy, Transition,
};
use crate::env::{EnvConfig, Environment};
use crate::error::{Error, Result};
use crate::network::NetworkParams;
use crate::seeded_rng;

/// Steps after which an episode is aborted.
pub const EPISODE_STEP_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Dqn,
    Qlearn,
    Greedy,
    Random,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [
        AgentKind::Dqn,
        AgentKind::Qlearn,
        AgentKind::Greedy,
        AgentKind::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Dqn => "dqn",
            AgentKind::Qlearn => "qlearn",
            AgentKind::Greedy => "greedy",
            AgentKind::Random => "random",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid("agent", format!("unknown agent `{s}`")))
    }
}

/// Learning hyperparameters shared by the agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub gamma: f64,
    /// DQN step size.
    pub learning_rate: f64,
    /// Tabular Q-learning step size.
    pub qlearn_alpha: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub sync_period: u64,
    pub warmup: usize,
    pub hidden: Vec<usize>,
    pub schedule: EpsilonSchedule,
}

impl Default for AgentParams {
    fn default() -> Self {
        let dqn = DqnConfig::default();
        AgentParams {
            gamma: dqn.gamma,
            learning_rate: dqn.learning_rate,
            qlearn_alpha: QLearnConfig::default().alpha,
            batch_size: dqn.batch_size,
            replay_capacity: dqn.replay_capacity,
            sync_period: dqn.sync_period,
            warmup: dqn.warmup,
            hidden: vec![128, 128],
            schedule: dqn.schedule,
        }
    }
}

impl AgentParams {
    pub fn dqn_config(&self) -> DqnConfig {
        DqnConfig {
            gamma: self.gamma,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            sync_period: self.sync_period,
            replay_capacity: self.replay_capacity,
            warmup: self.warmup,
            schedule: self.schedule,
        }
    }

    pub fn qlearn_config(&self) -> QLearnConfig {
        QLearnConfig {
            alpha: self.qlearn_alpha,
            gamma: self.gamma,
            schedule: self.schedule,
        }
    }

    /// Network dims for an environment: features, hidden layers, actions.
    pub fn layer_dims(&self, env: &EnvConfig) -> Vec<usize> {
        let mut dims = vec![env.feature_len()];
        dims.extend(&self.hidden);
        dims.push(env.action_count());
        dims
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub agent: AgentKind,
    pub episodes: u64,
    pub seed: u64,
    pub env: EnvConfig,
    pub params: AgentParams,
    pub out_dir: Option<PathBuf>,
    pub eval_episodes: u64,
    pub metrics_window: usize,
    pub checkpoint_every: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            agent: AgentKind::Dqn,
            episodes: 3000,
            seed: 0,
            env: EnvConfig::default(),
            params: AgentParams::default(),
            out_dir: None,
            eval_episodes: 100,
            metrics_window: 100,
            checkpoint_every: 500,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes < 1 {
            return Err(Error::invalid("episodes", "must be at least 1"));
        }
        if self.metrics_window < 1 {
            return Err(Error::invalid("metrics_window", "must be at least 1"));
        }
        if self.params.hidden.contains(&0) {
            return Err(Error::invalid("hidden", "layer widths must be positive"));
        }
        self.env.validate()?;
        self.params.dqn_config().validate()?;
        self.params.qlearn_config().validate()
    }
}

/// Independent substreams derived from one master seed.
pub struct Streams {
    pub env: ChaCha8Rng,
    pub explore: ChaCha8Rng,
    pub init: ChaCha8Rng,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        let stream = |id: u64| {
            let mut rng = seeded_rng(seed);
            rng.set_stream(id);
            rng
        };
        Streams {
            env: stream(1),
            explore: stream(2),
            init: stream(3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: u64,
    pub steps: u64,
    pub cum_reward: f64,
    pub total_energy: f64,
    pub total_latency: f64,
    pub total_payment: f64,
    /// Raw data units taken from each device.
    pub data_per_device: Vec<u64>,
    pub epsilon: Option<f64>,
    pub mean_td_loss: Option<f64>,
}

impl EpisodeMetrics {
    pub fn is_finite(&self) -> bool {
        [
            self.cum_reward,
            self.total_energy,
            self.total_latency,
            self.total_payment,
        ]
        .iter()
        .chain(self.epsilon.iter())
        .chain(self.mean_td_loss.iter())
        .all(|v| v.is_finite())
    }
}

/// A trained (or stateless) agent of any kind.
pub enum Agent {
    Dqn(Box<DqnAgent>),
    Qlearn(QTable),
    Greedy(GreedyPolicy),
    Random(RandomPolicy),
}

impl Agent {
    /// Fresh agent for `run`, drawing initial weights from `init_rng`.
    pub fn build(run: &RunConfig, init_rng: &mut dyn RngCore) -> Result<Self> {
        Ok(match run.agent {
            AgentKind::Dqn => {
                let net = NetworkParams::init(&run.params.layer_dims(&run.env), init_rng)?;
                Agent::Dqn(Box::new(DqnAgent::new(net, run.params.dqn_config())?))
            }
            AgentKind::Qlearn => Agent::Qlearn(QTable::new(run.params.qlearn_config())?),
            AgentKind::Greedy => Agent::Greedy(GreedyPolicy),
            AgentKind::Random => Agent::Random(RandomPolicy),
        })
    }

    pub fn kind(&self) -> AgentKind {
        match self {
            Agent::Dqn(_) => AgentKind::Dqn,
            Agent::Qlearn(_) => AgentKind::Qlearn,
            Agent::Greedy(_) => AgentKind::Greedy,
            Agent::Random(_) => AgentKind::Random,
        }
    }

    pub fn policy_mut(&mut self) -> &mut dyn Policy {
        match self {
            Agent::Dqn(a) => a.as_mut(),
            Agent::Qlearn(a) => a,
            Agent::Greedy(a) => a,
            Agent::Random(a) => a,
        }
    }

    /// Checkpoint document, for agents with learnable state.
    pub fn checkpoint(&self) -> Option<AgentCheckpoint> {
        match self {
            Agent::Dqn(a) => Some(AgentCheckpoint::Dqn(a.checkpoint())),
            Agent::Qlearn(q) => Some(AgentCheckpoint::Qlearn(q.checkpoint())),
            _ => None,
        }
    }

    pub fn from_checkpoint(ckpt: AgentCheckpoint, run: &RunConfig) -> Result<Self> {
        match ckpt {
            AgentCheckpoint::Dqn(c) => {
                let expected = run.params.layer_dims(&run.env);
                let (have_in, have_out) = (c.network.input_dim(), c.network.output_dim());
                if have_in != expected[0] || have_out != *expected.last().expect("dims") {
                    return Err(Error::Shape(format!(
                        "checkpoint network maps {have_in} features to {have_out} actions, \
                         configuration needs {} to {}",
                        expected[0],
                        expected.last().expect("dims")
                    )));
                }
                Ok(Agent::Dqn(Box::new(DqnAgent::from_checkpoint(
                    c,
                    run.params.dqn_config(),
                )?)))
            }
            AgentCheckpoint::Qlearn(c) => {
                if let Some(e) = c
                    .entries
                    .iter()
                    .find(|e| e.state.len() != run.env.feature_len())
                {
                    return Err(Error::Shape(format!(
                        "checkpoint state has {} features, configuration needs {}",
                        e.state.len(),
                        run.env.feature_len()
                    )));
                }
                Ok(Agent::Qlearn(QTable::from_checkpoint(c)?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AgentCheckpoint {
    Dqn(DqnCheckpoint),
    Qlearn(QTableCheckpoint),
}

impl AgentCheckpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(match self {
            AgentCheckpoint::Dqn(c) => serde_json::to_string(c)?,
            AgentCheckpoint::Qlearn(c) => serde_json::to_string(c)?,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("agent").and_then(|a| a.as_str()) {
            Some("qlearn") => Ok(AgentCheckpoint::Qlearn(serde_json::from_value(value)?)),
            Some("dqn") | None => Ok(AgentCheckpoint::Dqn(serde_json::from_value(value)?)),
            Some(other) => Err(Error::invalid(
                "agent",
                format!("checkpoint for unsupported agent `{other}`"),
            )),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        AgentCheckpoint::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Runs one episode from a fresh reset until the data budget is met.
/// With `learn` the policy explores per its schedule and learns from every
/// transition; without it the policy acts greedily (epsilon 0) and is left
/// untouched.
pub fn run_episode(
    env: &mut Environment,
    policy: &mut dyn Policy,
    episode: u64,
    env_rng: &mut ChaCha8Rng,
    agent_rng: &mut ChaCha8Rng,
    learn: bool,
) -> Result<EpisodeMetrics> {
    let wrap = |source: Error| Error::Episode {
        episode: episode as usize,
        source: Box::new(source),
    };
    let eps = match (learn, policy.schedule()) {
        (true, Some(s)) => Some(s.epsilon(episode)),
        (false, Some(_)) => Some(0.0),
        (_, None) => None,
    };
    env.reset(env_rng).map_err(wrap)?;
    let cfg = env.config().clone();
    let mut metrics = EpisodeMetrics {
        episode,
        steps: 0,
        cum_reward: 0.0,
        total_energy: 0.0,
        total_latency: 0.0,
        total_payment: 0.0,
        data_per_device: vec![0; cfg.n_devices],
        epsilon: eps,
        mean_td_loss: None,
    };
    let (mut loss_sum, mut loss_count) = (0.0, 0u64);
    let mut features = env.features();
    let mut mask = env.mask();
    loop {
        if metrics.steps as usize >= EPISODE_STEP_CAP {
            return Err(Error::StepCap {
                episode: episode as usize,
                cap: EPISODE_STEP_CAP,
            });
        }
        let obs = Observation {
            state: env.state(),
            features: &features,
            mask: &mask,
            cfg: &cfg,
        };
        let index = policy
            .select_action(&obs, eps.unwrap_or(0.0), agent_rng)
            .map_err(wrap)?;
        let action = env.space().decode(index).map_err(wrap)?;
        let outcome = env.step(&action, env_rng).map_err(wrap)?;

        metrics.steps += 1;
        metrics.cum_reward += outcome.reward;
        metrics.total_energy += outcome.components.energy;
        metrics.total_latency += outcome.components.latency;
        metrics.total_payment += outcome.components.payment;
        for (acc, &d) in metrics.data_per_device.iter_mut().zip(&action.d) {
            *acc += u64::from(d);
        }

        let next_features = env.features();
        let next_mask = env.mask();
        if learn {
            let transition = Transition {
                s: features,
                a: index,
                r: outcome.reward,
                s_next: next_features.clone(),
                done: outcome.done,
                mask_next: next_mask.clone(),
            };
            if let Some(loss) = policy.learn(transition, agent_rng).map_err(wrap)? {
                loss_sum += loss;
                loss_count += 1;
            }
        }
        features = next_features;
        mask = next_mask;
        if outcome.done {
            break;
        }
    }
    if learn {
        policy.end_episode();
    }
    if loss_count > 0 {
        metrics.mean_td_loss = Some(loss_sum / loss_count as f64);
    }
    if !metrics.is_finite() {
        return Err(Error::NonFinite(format!("episode {episode} metrics")));
    }
    Ok(metrics)
}

pub fn metrics_header(n_devices: usize) -> Vec<String> {
    let mut header: Vec<String> = [
        "episode",
        "steps",
        "cum_reward",
        "total_energy",
        "total_latency",
        "total_payment",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..n_devices).map(|k| format!("data_dev_{k}")));
    header.push("epsilon".into());
    header.push("mean_td_loss".into());
    header
}

fn metrics_record(m: &EpisodeMetrics) -> Vec<String> {
    let mut rec = vec![
        m.episode.to_string(),
        m.steps.to_string(),
        m.cum_reward.to_string(),
        m.total_energy.to_string(),
        m.total_latency.to_string(),
        m.total_payment.to_string(),
    ];
    rec.extend(m.data_per_device.iter().map(u64::to_string));
    rec.push(m.epsilon.map_or_else(String::new, |v| v.to_string()));
    rec.push(m.mean_td_loss.map_or_else(String::new, |v| v.to_string()));
    rec
}

/// Appends one row per episode and flushes after each, so a crashed run
/// keeps every completed episode.
pub struct MetricsWriter {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path, n_devices: usize) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = csv::Writer::from_writer(file);
        writer
            .write_record(metrics_header(n_devices))
            .map_err(|e| csv_error(path, e))?;
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(MetricsWriter {
            path: path.to_path_buf(),
            writer,
        })
    }

    pub fn write(&mut self, m: &EpisodeMetrics) -> Result<()> {
        self.writer
            .write_record(metrics_record(m))
            .map_err(|e| csv_error(&self.path, e))?;
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

/// Reads a metrics CSV back.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<EpisodeMetrics>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let n_devices = header.iter().filter(|h| h.starts_with("data_dev_")).count();
    if header.iter().collect::<Vec<_>>() != metrics_header(n_devices) {
        return Err(Error::invalid(
            "metrics",
            format!("unexpected header in {}", path.display()),
        ));
    }
    let bad = |what: &str| Error::invalid("metrics", format!("bad {what} in {}", path.display()));
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let float = |i: usize| -> Result<f64> { record[i].parse().map_err(|_| bad(&header[i])) };
        let int = |i: usize| -> Result<u64> { record[i].parse().map_err(|_| bad(&header[i])) };
        let optional = |i: usize| -> Result<Option<f64>> {
            if record[i].is_empty() {
                Ok(None)
            } else {
                float(i).map(Some)
            }
        };
        rows.push(EpisodeMetrics {
            episode: int(0)?,
            steps: int(1)?,
            cum_reward: float(2)?,
            total_energy: float(3)?,
            total_latency: float(4)?,
            total_payment: float(5)?,
            data_per_device: (0..n_devices).map(|k| int(6 + k)).collect::<Result<_>>()?,
            epsilon: optional(6 + n_devices)?,
            mean_td_loss: optional(7 + n_devices)?,
        });
    }
    Ok(rows)
}

/// Trailing moving average; early entries average what is available.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, &v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

pub struct TrainOutcome {
    pub metrics: Vec<EpisodeMetrics>,
    pub agent: Agent,
}

/// Trains a fresh agent for `run.episodes` episodes. With an output
/// directory, writes `metrics.csv` row by row, `curves.csv` (moving
/// averages) at the end, and `checkpoint.json` every `checkpoint_every`
/// episodes and at the end for agents with learnable state.
pub fn train(run: &RunConfig) -> Result<TrainOutcome> {
    run.validate()?;
    let mut streams = Streams::new(run.seed);
    let mut agent = Agent::build(run, &mut streams.init)?;
    let mut env = Environment::new(run.env.clone(), &mut streams.env)?;

    let mut writer = match &run.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            Some(MetricsWriter::create(
                &dir.join("metrics.csv"),
                run.env.n_devices,
            )?)
        }
        None => None,
    };

    let mut metrics = Vec::with_capacity(run.episodes as usize);
    for episode in 0..run.episodes {
        let m = run_episode(
            &mut env,
            agent.policy_mut(),
            episode,
            &mut streams.env,
            &mut streams.explore,
            true,
        )?;
        if let Some(w) = writer.as_mut() {
            w.write(&m)?;
        }
        metrics.push(m);
        let done = episode + 1;
        if let (Some(dir), Some(ckpt)) = (&run.out_dir, agent.checkpoint()) {
            if run.checkpoint_every > 0 && done % run.checkpoint_every == 0 && done < run.episodes {
                ckpt.save(&dir.join("checkpoint.json"))?;
            }
        }
    }
    if let Some(dir) = &run.out_dir {
        if let Some(ckpt) = agent.checkpoint() {
            ckpt.save(&dir.join("checkpoint.json"))?;
        }
        write_curves(&dir.join("curves.csv"), &metrics, run.metrics_window)?;
    }
    Ok(TrainOutcome { metrics, agent })
}

fn write_curves(path: &Path, metrics: &[EpisodeMetrics], window: usize) -> Result<()> {
    let column = |f: fn(&EpisodeMetrics) -> f64| {
        moving_average(&metrics.iter().map(f).collect::<Vec<_>>(), window)
    };
    let reward = column(|m| m.cum_reward);
    let energy = column(|m| m.total_energy);
    let latency = column(|m| m.total_latency);
    let payment = column(|m| m.total_payment);
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record([
        "episode",
        "cum_reward_ma",
        "total_energy_ma",
        "total_latency_ma",
        "total_payment_ma",
    ])
    .map_err(|e| csv_error(path, e))?;
    for (i, m) in metrics.iter().enumerate() {
        w.write_record([
            m.episode.to_string(),
            reward[i].to_string(),
            energy[i].to_string(),
            latency[i].to_string(),
            payment[i].to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub column: String,
    pub mean: f64,
    /// Sample standard deviation; zero for a single episode.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub episodes: Vec<EpisodeMetrics>,
    pub summary: Vec<ColumnSummary>,
}

impl EvalReport {
    pub fn mean(&self, column: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|c| c.column == column)
            .map(|c| c.mean)
    }
}

pub fn summarize(episodes: &[EpisodeMetrics]) -> Vec<ColumnSummary> {
    let n_devices = episodes.first().map_or(0, |m| m.data_per_device.len());
    let mut columns: Vec<(String, Vec<f64>)> = vec![
        (
            "steps".into(),
            episodes.iter().map(|m| m.steps as f64).collect(),
        ),
        (
            "cum_reward".into(),
            episodes.iter().map(|m| m.cum_reward).collect(),
        ),
        (
            "total_energy".into(),
            episodes.iter().map(|m| m.total_energy).collect(),
        ),
        (
            "total_latency".into(),
            episodes.iter().map(|m| m.total_latency).collect(),
        ),
        (
            "total_payment".into(),
            episodes.iter().map(|m| m.total_payment).collect(),
        ),
    ];
    for k in 0..n_devices {
        columns.push((
            format!("data_dev_{k}"),
            episodes
                .iter()
                .map(|m| m.data_per_device[k] as f64)
                .collect(),
        ));
    }
    columns
        .into_iter()
        .map(|(column, values)| {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let std = if values.len() > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            ColumnSummary { column, mean, std }
        })
        .collect()
}

/// Runs `run.eval_episodes` non-learning episodes with exploration off.
/// With an output directory, writes `eval.csv` and `eval_summary.json`.
pub fn evaluate_policy(run: &RunConfig, policy: &mut dyn Policy) -> Result<EvalReport> {
    if run.eval_episodes < 1 {
        return Err(Error::invalid("eval_episodes", "must be at least 1"));
    }
    run.env.validate()?;
    let mut streams = Streams::new(run.seed);
    let mut env = Environment::new(run.env.clone(), &mut streams.env)?;
    let mut writer = match &run.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            Some(MetricsWriter::create(
                &dir.join("eval.csv"),
                run.env.n_devices,
            )?)
        }
        None => None,
    };
    let mut episodes = Vec::with_capacity(run.eval_episodes as usize);
    for episode in 0..run.eval_episodes {
        let m = run_episode(
            &mut env,
            policy,
            episode,
            &mut streams.env,
            &mut streams.explore,
            false,
        )?;
        if let Some(w) = writer.as_mut() {
            w.write(&m)?;
        }
        episodes.push(m);
    }
    let summary = summarize(&episodes);
    if let Some(dir) = &run.out_dir {
        let path = dir.join("eval_summary.json");
        let mut f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::to_writer_pretty(&mut f, &summary)?;
        writeln!(f).map_err(|e| Error::io(&path, e))?;
    }
    Ok(EvalReport { episodes, summary })
}

/// Loads a checkpoint into an agent matching `run` and evaluates it.
pub fn evaluate(run: &RunConfig, checkpoint: AgentCheckpoint) -> Result<EvalReport> {
    let mut agent = Agent::from_checkpoint(checkpoint, run)?;
    evaluate_policy(run, agent.policy_mut())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ratio: String,
    pub device: usize,
    pub mean_data: f64,
    /// Device's fraction of all data taken.
    pub share: f64,
}

/// Formats a quality vector as `a:b:c`.
pub fn ratio_label(ratio: &[f64]) -> String {
    ratio
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(":")
}

/// Parses `a:b:c[,a:b:c...]` into quality vectors.
pub fn parse_ratios(text: &str) -> Result<Vec<Vec<f64>>> {
    text.split(',')
        .map(|group| {
            group
                .split(':')
                .map(|v| {
                    let q: f64 = v
                        .trim()
                        .parse()
                        .map_err(|_| Error::invalid("ratios", format!("`{v}` is not a number")))?;
                    if !(q > 0.0 && q.is_finite()) {
                        return Err(Error::invalid("ratios", format!("`{v}` must be positive")));
                    }
                    Ok(q)
                })
                .collect()
        })
        .collect()
}

/// Trains and evaluates one DQN per quality ratio and tabulates the mean
/// data taken from each device per evaluation episode.
pub fn sweep_quality(base: &RunConfig, ratios: &[Vec<f64>]) -> Result<Vec<SweepRow>> {
    for ratio in ratios {
        if ratio.len() != base.env.n_devices {
            return Err(Error::invalid(
                "ratios",
                format!(
                    "ratio {} has {} entries for {} devices",
                    ratio_label(ratio),
                    ratio.len(),
                    base.env.n_devices
                ),
            ));
        }
    }
    let mut rows = Vec::new();
    for ratio in ratios {
        let label = ratio_label(ratio);
        let mut run = base.clone();
        run.agent = AgentKind::Dqn;
        run.env.weights.eta = ratio.clone();
        run.out_dir = base
            .out_dir
            .as_ref()
            .map(|d| d.join(format!("ratio_{}", label.replace(':', "-"))));
        let mut trained = train(&run)?;
        let report = evaluate_policy(&run, trained.agent.policy_mut())?;
        rows.extend(sweep_rows(&label, &report));
    }
    if let Some(dir) = &base.out_dir {
        write_sweep_csv(&dir.join("sweep.csv"), &rows)?;
    }
    Ok(rows)
}

/// Per-device data rows for one evaluated ratio.
pub fn sweep_rows(label: &str, report: &EvalReport) -> Vec<SweepRow> {
    let n_devices = report
        .episodes
        .first()
        .map_or(0, |m| m.data_per_device.len());
    let means: Vec<f64> = (0..n_devices)
        .map(|k| report.mean(&format!("data_dev_{k}")).unwrap_or(0.0))
        .collect();
    let total: f64 = means.iter().sum();
    means
        .iter()
        .enumerate()
        .map(|(device, &mean_data)| SweepRow {
            ratio: label.to_string(),
            device,
            mean_data,
            share: if total > 0.0 { mean_data / total } else { 0.0 },
        })
        .collect()
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
