//! Signalling volume of the two training frameworks and trainable-parameter
//! inventories.

use serde::{Deserialize, Serialize};

use crate::env::{bs_obs_len, uav_obs_len};
use crate::fedavg::schedule;
use crate::learn::{count_params, Framework, NetworkRegistry, Trainer, TrainerConfig};
use crate::scenario::ScenarioConfig;

/// Bits used to encode one exchanged number.
pub const BITS_PER_ELEMENT: u64 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub framework: Framework,
    pub uavs: usize,
    /// Length of one UAV observation.
    pub uav_state_len: usize,
    /// Length of the joint observation.
    pub global_state_len: usize,
    /// Parameters of one UAV actor.
    pub actor_params: usize,
    /// Bits of one exchange: every slot for MADDPG, every aggregation for FRL.
    pub bits_per_exchange: u64,
    pub exchanges: u64,
    pub episodes: usize,
    pub total_bits: u64,
    pub bits_per_episode: f64,
    pub bytes_per_episode: f64,
}

/// `16 (M - 1) |s^u| + 16 M |S|`: UAVs share observations with each other
/// and send the joint state to the central critic.
pub fn maddpg_bits(uavs: usize, uav_state_len: usize, global_state_len: usize) -> u64 {
    let m = uavs as u64;
    BITS_PER_ELEMENT * m.saturating_sub(1) * uav_state_len as u64 + BITS_PER_ELEMENT * m * global_state_len as u64
}

/// `16 L + 16 M L`: the server broadcasts the mixed actor and every UAV
/// uploads its own.
pub fn frl_bits(uavs: usize, actor_params: usize) -> u64 {
    let (m, l) = (uavs as u64, actor_params as u64);
    BITS_PER_ELEMENT * l + BITS_PER_ELEMENT * m * l
}

/// Length of the joint observation of all agents.
pub fn global_state_len(config: &ScenarioConfig) -> usize {
    config.uavs * uav_obs_len(config) + bs_obs_len(config)
}

/// Parameters of one UAV actor under `trainer`.
pub fn actor_params(config: &ScenarioConfig, trainer: &TrainerConfig) -> usize {
    let mut sizes = vec![uav_obs_len(config)];
    sizes.extend(&trainer.hidden.actor);
    sizes.push(crate::env::uav_action_len(config));
    count_params(&sizes)
}

/// Aggregations performed over `episodes` episodes with period `period`.
pub fn aggregations(episodes: usize, period: usize) -> u64 {
    (1..=episodes).filter(|&e| schedule(e, period)).count() as u64
}

/// Overhead of `framework` over a whole training run.
pub fn overhead(config: &ScenarioConfig, trainer: &TrainerConfig, framework: Framework) -> OverheadReport {
    let uav_state_len = uav_obs_len(config);
    let global = global_state_len(config);
    let actor = actor_params(config, trainer);
    let episodes = trainer.episodes;
    let (bits, exchanges) = match framework {
        Framework::Maddpg => (
            maddpg_bits(config.uavs, uav_state_len, global),
            (episodes * config.slots) as u64,
        ),
        Framework::Frl => (
            frl_bits(config.uavs, actor),
            if config.uavs > 1 { aggregations(episodes, trainer.fed_period) } else { 0 },
        ),
    };
    let total = bits * exchanges;
    let per_episode = if episodes > 0 { total as f64 / episodes as f64 } else { 0.0 };
    OverheadReport {
        framework,
        uavs: config.uavs,
        uav_state_len,
        global_state_len: global,
        actor_params: actor,
        bits_per_exchange: bits,
        exchanges,
        episodes,
        total_bits: total,
        bits_per_episode: per_episode,
        bytes_per_episode: per_episode / 8.0,
    }
}

/// One row of the parameter inventory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRow {
    pub network: String,
    pub sizes: String,
    pub params: usize,
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamReport {
    pub rows: Vec<ParamRow>,
    pub networks: usize,
    pub networks_without_twin: usize,
    /// Network count predicted for an actor and critic per agent plus targets.
    pub formula_networks: usize,
    pub trainable_params: usize,
    pub total_params: usize,
}

/// Per-network and total parameter counts of a built trainer.
pub fn report_params(trainer: &Trainer) -> ParamReport {
    let reg: NetworkRegistry = trainer.registry();
    let rows = reg
        .entries
        .iter()
        .map(|e| ParamRow {
            network: e.role.name(),
            sizes: e.sizes.iter().map(usize::to_string).collect::<Vec<_>>().join("x"),
            params: e.params,
            trainable: !e.role.name().ends_with("_target"),
        })
        .collect();
    ParamReport {
        rows,
        networks: reg.count(),
        networks_without_twin: reg.count_without_twin(),
        formula_networks: NetworkRegistry::formula_count(reg.uav_agents),
        trainable_params: reg.trainable_params(),
        total_params: reg.total_params(),
    }
}
