//! Simulator and controllers for resource management in blockchain-enabled
//! federated learning.
//!
//! A model owner repeatedly decides how much data and energy to request from
//! each device and which block generation rate to ask of the miners. The
//! [`env`] module models devices, rewards and feasibility; [`queue`] models
//! the transaction queue and block latency; [`agents`] holds the DQN and the
//! baselines; [`harness`] runs training and evaluation.

pub mod agents;
pub mod config;
pub mod env;
pub mod error;
pub mod harness;
pub mod network;
pub mod queue;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use agents::{
    DqnAgent, DqnConfig, EpsilonSchedule, GreedyPolicy, Observation, Policy, QLearnConfig, QTable,
    RandomPolicy, ReplayMemory, Transition,
};
pub use config::{load_config, parse_config, ConfigDocument, ConfigError, Violation};
pub use env::{
    Action, ActionSpace, DeviceState, EnvConfig, Environment, PhysicsConfig, RewardWeights,
    StepOutcome, SystemState,
};
pub use error::{Error, Result};
pub use harness::{
    evaluate, sweep_quality, train, AgentCheckpoint, AgentKind, AgentParams, EpisodeMetrics,
    RunConfig,
};
pub use network::NetworkParams;
pub use queue::QueueConfig;

/// Deterministic generator for a seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
