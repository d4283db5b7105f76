use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, BenchError};
use crate::baselines::{no_uav_scenario, ofdma_backhaul_variant};
use crate::learn::TrainerConfig;
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Maddpg,
    Frl,
    Random,
    Greedy,
    RoundRobin,
}

impl Algo {
    pub fn is_learner(self) -> bool {
        matches!(self, Algo::Maddpg | Algo::Frl)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algo::Maddpg => "maddpg",
            Algo::Frl => "frl",
            Algo::Random => "random",
            Algo::Greedy => "greedy",
            Algo::RoundRobin => "round_robin",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackhaulMode {
    /// Shared subcarriers with successive interference cancellation.
    Noma,
    /// One UAV per backhaul subcarrier.
    Ofdma,
}

impl fmt::Display for BackhaulMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackhaulMode::Noma => "noma",
            BackhaulMode::Ofdma => "ofdma",
        })
    }
}

/// A grid of runs. Axes left out take the base scenario's value; an axis
/// given as an empty list is an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub trainer: TrainerConfig,
    pub algos: Vec<Algo>,
    #[serde(default)]
    pub devices: Option<Vec<usize>>,
    #[serde(default)]
    pub access_subcarriers: Option<Vec<usize>>,
    #[serde(default)]
    pub backhaul: Option<Vec<BackhaulMode>>,
    #[serde(default)]
    pub no_uav: Option<Vec<bool>>,
    pub seeds: Vec<u64>,
    /// Trailing training episodes averaged into a learner's score.
    #[serde(default = "default_window")]
    pub eval_window: usize,
    /// Episodes played by each non-learning policy.
    #[serde(default = "default_baseline_episodes")]
    pub baseline_episodes: usize,
}

fn default_window() -> usize {
    20
}

fn default_baseline_episodes() -> usize {
    1
}

/// One point of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub algo: Algo,
    pub devices: usize,
    pub access_subcarriers: usize,
    pub backhaul: BackhaulMode,
    pub no_uav: bool,
}

impl Cell {
    /// Directory-safe identifier.
    pub fn id(&self) -> String {
        format!(
            "{}_k{}_f{}_{}{}",
            self.algo,
            self.devices,
            self.access_subcarriers,
            self.backhaul,
            if self.no_uav { "_nouav" } else { "" }
        )
    }

    /// The scenario this cell runs for `seed`.
    pub fn scenario(&self, base: &ScenarioConfig, seed: u64) -> ScenarioConfig {
        let mut cfg = ScenarioConfig {
            devices: self.devices,
            access_subcarriers: self.access_subcarriers,
            seed,
            ..base.clone()
        };
        if self.devices != base.devices {
            cfg.split_ratio_per_device = None;
        }
        if self.backhaul == BackhaulMode::Ofdma {
            cfg = ofdma_backhaul_variant(&cfg);
        }
        if self.no_uav {
            cfg = no_uav_scenario(&cfg);
        }
        cfg
    }
}

impl ExperimentPlan {
    /// A single-cell plan over seeds `0..seeds`.
    pub fn single(scenario: ScenarioConfig, trainer: TrainerConfig, algo: Algo, seeds: u64) -> Self {
        Self {
            scenario,
            trainer,
            algos: vec![algo],
            devices: None,
            access_subcarriers: None,
            backhaul: None,
            no_uav: None,
            seeds: (0..seeds).collect(),
            eval_window: default_window(),
            baseline_episodes: default_baseline_episodes(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let plan: Self = serde_json::from_str(&text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Plan(m));
        if self.algos.is_empty() {
            return bad("algos is empty".into());
        }
        for (name, empty) in [
            ("devices", self.devices.as_ref().is_some_and(Vec::is_empty)),
            ("access_subcarriers", self.access_subcarriers.as_ref().is_some_and(Vec::is_empty)),
            ("backhaul", self.backhaul.as_ref().is_some_and(Vec::is_empty)),
            ("no_uav", self.no_uav.as_ref().is_some_and(Vec::is_empty)),
        ] {
            if empty {
                return bad(format!("sweep axis {name} is empty"));
            }
        }
        if self.seeds.is_empty() {
            return bad("no seeds".into());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if self.baseline_episodes == 0 {
            return bad("baseline_episodes must be at least 1".into());
        }
        self.trainer.validate()?;
        for cell in self.cells() {
            for &seed in &self.seeds {
                cell.scenario(&self.scenario, seed).validate()?;
            }
        }
        Ok(())
    }

    /// Every grid point, algorithm outermost.
    pub fn cells(&self) -> Vec<Cell> {
        let base = &self.scenario;
        let devices = self.devices.clone().unwrap_or_else(|| vec![base.devices]);
        let subcarriers = self.access_subcarriers.clone().unwrap_or_else(|| vec![base.access_subcarriers]);
        let backhaul = self.backhaul.clone().unwrap_or_else(|| vec![BackhaulMode::Noma]);
        let no_uav = self.no_uav.clone().unwrap_or_else(|| vec![base.no_uav]);
        let mut cells = Vec::new();
        for &algo in &self.algos {
            for &k in &devices {
                for &f in &subcarriers {
                    for &b in &backhaul {
                        for &n in &no_uav {
                            cells.push(Cell {
                                algo,
                                devices: k,
                                access_subcarriers: f,
                                backhaul: b,
                                no_uav: n,
                            });
                        }
                    }
                }
            }
        }
        cells
    }
}
