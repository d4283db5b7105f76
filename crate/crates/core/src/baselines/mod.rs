//! Non-learned controllers, the exhaustive oracle for tiny instances, and
//! the scenario variants used by the ablations.

pub mod ablation;
mod oracle;
mod policies;

pub use oracle::{freeze, oracle_from_world, oracle_schedule, OracleResult, ORACLE_MAX_DEVICES, ORACLE_MAX_SLOTS, ORACLE_MAX_UAVS};
pub use policies::{greedy_action, round_robin_action};

use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::age::AoiSummary;
use crate::env::{bs_action_len, decode, uav_action_len, EnvError, JointAction, MetricsRecord, World};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("oracle limit exceeded: {what} = {got}, at most {limit}")]
    SearchSpace { what: &'static str, limit: usize, got: usize },
    #[error("oracle needs a frozen instance: {0}")]
    NotFrozen(&'static str),
    #[error("oracle schedule has no action for slot {0}")]
    ScheduleExhausted(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Uniform raw actor outputs, decoded like a learner's.
    Random,
    RoundRobin,
    GreedyMaxAge,
    /// Greedy on the direct-to-BS variant of the scenario.
    NoUav,
    /// Replays the exhaustive optimum of a frozen tiny instance.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    /// Seed of the random policy's generator.
    #[serde(default)]
    pub seed: u64,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind) -> Self {
        Self { kind, seed: 0 }
    }

    /// The scenario this policy actually runs on.
    pub fn scenario(&self, config: &ScenarioConfig) -> ScenarioConfig {
        match self.kind {
            PolicyKind::NoUav => no_uav_scenario(config),
            PolicyKind::Oracle => freeze(config),
            _ => config.clone(),
        }
    }
}

/// A policy bound to one episode.
pub struct Policy {
    spec: PolicySpec,
    rng: ChaCha8Rng,
    schedule: Vec<JointAction>,
}

impl Policy {
    /// Builds the policy for `config`, which must already be
    /// [`PolicySpec::scenario`] of the intended scenario. The oracle solves
    /// the instance here.
    pub fn new(spec: PolicySpec, config: &ScenarioConfig) -> Result<Self, BaselineError> {
        let schedule = match spec.kind {
            PolicyKind::Oracle => oracle_schedule(config)?.schedule,
            _ => Vec::new(),
        };
        Ok(Self {
            spec,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            schedule,
        })
    }

    pub fn act(&mut self, world: &World) -> Result<JointAction, BaselineError> {
        match self.spec.kind {
            PolicyKind::Random => {
                let cfg = &world.config;
                let uav: Vec<Vec<f64>> = (0..cfg.uavs)
                    .map(|_| (0..uav_action_len(cfg)).map(|_| self.rng.random()).collect())
                    .collect();
                let bs: Vec<f64> = (0..bs_action_len(cfg)).map(|_| self.rng.random()).collect();
                Ok(decode(world, &uav, &bs)?)
            }
            PolicyKind::RoundRobin => Ok(round_robin_action(world)),
            PolicyKind::GreedyMaxAge | PolicyKind::NoUav => Ok(greedy_action(world)),
            PolicyKind::Oracle => self
                .schedule
                .get(world.slot)
                .cloned()
                .ok_or(BaselineError::ScheduleExhausted(world.slot)),
        }
    }
}

/// Plays one full episode of `spec` on its variant of `config`.
pub fn run_policy(
    spec: PolicySpec,
    config: &ScenarioConfig,
) -> Result<(AoiSummary, Vec<MetricsRecord>), BaselineError> {
    let scenario = spec.scenario(config);
    let mut world = World::new(scenario.clone())?;
    let mut policy = Policy::new(spec, &scenario)?;
    let mut records = Vec::with_capacity(scenario.slots);
    while !world.is_done() {
        let act = policy.act(&world)?;
        records.push(world.step(&act)?.record);
    }
    Ok((world.summary(), records))
}

/// Devices upload whole tasks straight to the BS, which does all the
/// processing.
pub fn no_uav_scenario(config: &ScenarioConfig) -> ScenarioConfig {
    ScenarioConfig {
        uavs: 0,
        no_uav: true,
        split_ratio: 0.0,
        split_ratio_per_device: None,
        ..config.clone()
    }
}

/// One UAV per backhaul subcarrier, so no co-channel interference.
pub fn ofdma_backhaul_variant(config: &ScenarioConfig) -> ScenarioConfig {
    ScenarioConfig {
        uavs_per_backhaul_subcarrier: 1,
        ..config.clone()
    }
}

#[cfg(test)]
mod tests;
