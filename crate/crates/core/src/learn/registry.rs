//! Inventory of a trainer's networks and their parameter counts.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetRole {
    UavActor(usize),
    UavActorTarget(usize),
    UavCritic(usize),
    UavCriticTarget(usize),
    BsActor,
    BsActorTarget,
    /// Global critic `j`; the BS-side critic is `GlobalCritic(0)`.
    GlobalCritic(usize),
    GlobalCriticTarget(usize),
}

impl NetRole {
    pub fn name(&self) -> String {
        match self {
            NetRole::UavActor(m) => format!("uav_actor_{m}"),
            NetRole::UavActorTarget(m) => format!("uav_actor_{m}_target"),
            NetRole::UavCritic(m) => format!("uav_critic_{m}"),
            NetRole::UavCriticTarget(m) => format!("uav_critic_{m}_target"),
            NetRole::BsActor => "bs_actor".into(),
            NetRole::BsActorTarget => "bs_actor_target".into(),
            NetRole::GlobalCritic(j) => format!("global_critic_{j}"),
            NetRole::GlobalCriticTarget(j) => format!("global_critic_{j}_target"),
        }
    }

    /// Whether this is the second global critic or its target.
    pub fn is_twin(&self) -> bool {
        matches!(self, NetRole::GlobalCritic(j) | NetRole::GlobalCriticTarget(j) if *j > 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkEntry {
    pub role: NetRole,
    /// Layer widths, input first.
    pub sizes: Vec<usize>,
    pub params: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRegistry {
    pub uav_agents: usize,
    pub entries: Vec<NetworkEntry>,
}

impl NetworkRegistry {
    pub fn count(&self) -> usize {
        self.entries.len()
    }

    /// Networks excluding the twin global critic and its target.
    pub fn count_without_twin(&self) -> usize {
        self.entries.iter().filter(|e| !e.role.is_twin()).count()
    }

    /// `2 (n (1 + 1) + (1 + 1))`: an actor and a critic per UAV agent, an
    /// actor and a critic on the BS side, each with a target.
    pub fn formula_count(uav_agents: usize) -> usize {
        2 * (uav_agents * (1 + 1) + (1 + 1))
    }

    pub fn total_params(&self) -> usize {
        self.entries.iter().map(|e| e.params).sum()
    }

    /// Parameters of the trainable (non-target) networks.
    pub fn trainable_params(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| {
                !matches!(
                    e.role,
                    NetRole::UavActorTarget(_)
                        | NetRole::UavCriticTarget(_)
                        | NetRole::BsActorTarget
                        | NetRole::GlobalCriticTarget(_)
                )
            })
            .map(|e| e.params)
            .sum()
    }

    pub fn get(&self, role: NetRole) -> Option<&NetworkEntry> {
        self.entries.iter().find(|e| e.role == role)
    }
}
