//! Function approximators, replay and the multi-agent actor-critic trainer.

pub mod checkpoint;
pub mod maddpg;
pub mod nn;
pub mod optim;
pub mod registry;
pub mod replay;

pub use maddpg::{EpisodeStats, Framework, TrainReport, Trainer};
pub use nn::{count_params, Activation, Mlp, ParamSet};
pub use optim::{Optimizer, OptimizerKind};
pub use registry::{NetRole, NetworkRegistry};
pub use replay::{ReplayBuffer, Transition};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EnvError;
use crate::fedavg::FedError;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("input width {got}, network expects {expected}")]
    Shape { expected: usize, got: usize },
    #[error("parameter set does not match the network layout")]
    ParamShape,
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("{network} diverged at update {update}: loss {loss}")]
    Diverged { network: String, update: u64, loss: f64 },
    #[error("invalid trainer configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Fed(#[from] FedError),
}

/// Hidden-layer widths of each network family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSizes {
    pub actor: Vec<usize>,
    pub local_critic: Vec<usize>,
    pub global_critic: Vec<usize>,
}

impl Default for NetSizes {
    fn default() -> Self {
        Self {
            actor: vec![64, 64],
            local_critic: vec![64, 64],
            global_critic: vec![64, 64],
        }
    }
}

impl NetSizes {
    /// Widths used for the large configuration: 2048/1024/512 actors,
    /// 1024/512 local critics, 2048/1024 global critics.
    pub fn large() -> Self {
        Self {
            actor: vec![2048, 1024, 512],
            local_critic: vec![1024, 512],
            global_critic: vec![2048, 1024],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub episodes: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub gamma: f64,
    pub tau: f64,
    pub batch: usize,
    pub replay_capacity: usize,
    pub hidden: NetSizes,
    /// Actors, local critics and their targets update every `policy_delay`-th update.
    pub policy_delay: u64,
    /// Exploration noise standard deviation at the first and last episode.
    pub noise_start: f64,
    pub noise_end: f64,
    /// Environment steps taken with uniformly random actions before learning.
    pub warmup_steps: u64,
    /// Environment steps between gradient updates.
    pub train_every: u64,
    pub optimizer: OptimizerKind,
    pub grad_clip: Option<f64>,
    /// Multiplier applied to rewards before they enter the replay buffer.
    pub reward_scale: f64,
    /// Abort when a critic loss exceeds this bound.
    pub max_loss: f64,
    /// Two global critics with a min target, or one.
    pub twin_critics: bool,
    pub local_critics: bool,
    /// Episodes between actor aggregations in federated mode.
    pub fed_period: usize,
    /// Self-weight of the aggregation.
    pub fed_weight: f64,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            episodes: 200,
            lr_actor: 1e-4,
            lr_critic: 1e-3,
            gamma: 0.99,
            tau: 5e-4,
            batch: 64,
            replay_capacity: 500_000,
            hidden: NetSizes::default(),
            policy_delay: 2,
            noise_start: 0.3,
            noise_end: 0.05,
            warmup_steps: 1_000,
            train_every: 1,
            optimizer: OptimizerKind::Adam,
            grad_clip: None,
            reward_scale: 1.0,
            max_loss: 1e9,
            twin_critics: true,
            local_critics: true,
            fed_period: 5,
            fed_weight: 0.5,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    /// Settings for the small four-device scenario: faster target tracking,
    /// a shorter horizon and clipped gradients.
    pub fn toy() -> Self {
        Self {
            lr_actor: 3e-4,
            gamma: 0.9,
            tau: 0.01,
            grad_clip: Some(1.0),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::Config(m.to_string()));
        if !(self.lr_actor >= 0.0 && self.lr_critic >= 0.0) {
            return bad("learning rates must be non-negative");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad("tau must lie in [0, 1]");
        }
        if self.batch == 0 || self.replay_capacity < self.batch {
            return bad("batch must be positive and fit in the replay buffer");
        }
        if self.policy_delay == 0 || self.train_every == 0 || self.fed_period == 0 {
            return bad("policy_delay, train_every and fed_period must be at least 1");
        }
        if !(self.noise_start >= 0.0 && self.noise_end >= 0.0) {
            return bad("noise levels must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.fed_weight) {
            return bad("fed_weight must lie in [0, 1]");
        }
        if !(self.reward_scale > 0.0 && self.max_loss > 0.0) {
            return bad("reward_scale and max_loss must be positive");
        }
        Ok(())
    }
}
