//! Scenario configuration, task generation and seeded randomness.
//!
//! Every random quantity in a run is drawn from a ChaCha stream derived from
//! [`ScenarioConfig::seed`]. Device and UAV placement share one stream; the
//! n-th task of device k is drawn from its own stream keyed by `(seed, k, n)`,
//! so task contents never depend on the schedule that led to them.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::Pose;

/// Bits in one (decimal) kilobyte.
pub const BITS_PER_KB: f64 = 8000.0;

const PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("could not place {uavs} UAVs at least {d_min} m apart in a {area} m square after {attempts} attempts")]
    Placement {
        uavs: usize,
        d_min: f64,
        area: f64,
        attempts: usize,
    },
    #[error("device {device} still has a task in flight")]
    TaskInFlight { device: usize },
    #[error("reading config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Json(#[from] serde_json::Error),
}

/// How `task_cycles` is to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleUnit {
    /// `task_cycles` bounds the CPU cycles needed per input bit.
    PerBit,
    /// `task_cycles` bounds the total CPU cycles of a task.
    PerTask,
}

/// Distance used by the device coverage test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageMetric {
    /// Ground-plane distance between UAV and device.
    Horizontal,
    /// Full 3D distance including the UAV altitude.
    Slant,
}

/// Model for the UAV to BS channel coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackhaulChannel {
    /// Line-of-sight gain times a unit-mean exponential factor, redrawn every slot.
    LosFading,
    /// Deterministic line-of-sight gain.
    Los,
}

/// Which transmit power weighs an interferer in the backhaul SINR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SicPowerIndex {
    /// The interferer's own power and allocation (standard SIC).
    Interferer,
    /// The receiving UAV's power and allocation, as the formula is printed.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// K
    pub devices: usize,
    /// M
    pub uavs: usize,
    /// F, access subcarriers available at every receiver.
    pub access_subcarriers: usize,
    /// L
    pub backhaul_subcarriers: usize,
    /// L_l, how many UAVs may share one backhaul subcarrier.
    pub uavs_per_backhaul_subcarrier: usize,
    /// T
    pub slots: usize,
    pub slot_ms: f64,
    pub area_m: f64,
    pub uav_altitude_m: f64,
    pub bs_height_m: f64,
    /// Largest horizontal displacement per slot (m).
    pub v_max: f64,
    pub d_min_m: f64,
    pub r_max_m: f64,
    /// Channel gain at 1 m (linear).
    pub beta0: f64,
    pub access_bandwidth_hz: f64,
    /// Bandwidth of one backhaul subcarrier; `None` means the access bandwidth.
    pub backhaul_bandwidth_hz: Option<f64>,
    pub noise_power_w: f64,
    pub device_power_w: f64,
    pub uav_power_max_w: f64,
    pub uav_cpu_cycles_per_ms: f64,
    pub bs_cpu_cycles_per_ms: f64,
    /// Inclusive bounds on task size (bits).
    pub task_bits: [f64; 2],
    /// Inclusive bounds on CPU demand, see [`CycleUnit`].
    pub task_cycles: [f64; 2],
    pub cycle_unit: CycleUnit,
    /// Fraction of each task's cycles executed at the UAV (λ).
    pub split_ratio: f64,
    pub split_ratio_per_device: Option<Vec<f64>>,
    /// D'/D; `None` means 1 - λ_k.
    pub residual_ratio: Option<f64>,
    pub k1: f64,
    pub k2: f64,
    pub violation_penalty: f64,
    pub seed: u64,
    pub coverage: CoverageMetric,
    pub backhaul_channel: BackhaulChannel,
    pub sic_power: SicPowerIndex,
    /// Ignore velocity commands.
    pub static_uavs: bool,
    /// Devices upload straight to the BS; requires `uavs == 0`.
    pub no_uav: bool,
    /// Ages are divided by this before entering observations.
    pub obs_age_scale: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            devices: 15,
            uavs: 5,
            access_subcarriers: 2,
            backhaul_subcarriers: 3,
            uavs_per_backhaul_subcarrier: 2,
            slots: 100,
            slot_ms: 1.0,
            area_m: 200.0,
            uav_altitude_m: 100.0,
            bs_height_m: 25.0,
            v_max: 5.0,
            d_min_m: 10.0,
            r_max_m: 150.0,
            beta0: 1e-5,
            access_bandwidth_hz: 45e6,
            backhaul_bandwidth_hz: None,
            noise_power_w: 1e-13,
            device_power_w: 0.1,
            uav_power_max_w: 0.5,
            uav_cpu_cycles_per_ms: 3e10,
            bs_cpu_cycles_per_ms: 6e10,
            task_bits: [20.0 * BITS_PER_KB, 50.0 * BITS_PER_KB],
            task_cycles: [18_750.0, 75_000.0],
            cycle_unit: CycleUnit::PerBit,
            split_ratio: 0.5,
            split_ratio_per_device: None,
            residual_ratio: None,
            k1: 0.1,
            k2: 0.1,
            violation_penalty: 1.0,
            seed: 0,
            coverage: CoverageMetric::Horizontal,
            backhaul_channel: BackhaulChannel::LosFading,
            sic_power: SicPowerIndex::Interferer,
            static_uavs: false,
            no_uav: false,
            obs_age_scale: 10.0,
        }
    }
}

impl ScenarioConfig {
    /// Four devices, two UAVs, two subcarriers on each hop, on a 100 m
    /// square so that every UAV covers every device wherever it flies.
    pub fn toy() -> Self {
        Self {
            devices: 4,
            uavs: 2,
            access_subcarriers: 2,
            backhaul_subcarriers: 2,
            area_m: 100.0,
            ..Self::default()
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self, ScenarioError> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::Invalid(msg));
        if self.devices == 0 {
            return bad("devices must be at least 1".into());
        }
        if self.no_uav {
            if self.uavs != 0 {
                return bad("no_uav requires uavs = 0".into());
            }
        } else if self.uavs == 0 {
            return bad("uavs must be at least 1".into());
        }
        for (name, v) in [
            ("access_subcarriers", self.access_subcarriers),
            ("backhaul_subcarriers", self.backhaul_subcarriers),
            ("uavs_per_backhaul_subcarrier", self.uavs_per_backhaul_subcarrier),
            ("slots", self.slots),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        let positive = [
            ("slot_ms", self.slot_ms),
            ("area_m", self.area_m),
            ("uav_altitude_m", self.uav_altitude_m),
            ("bs_height_m", self.bs_height_m),
            ("v_max", self.v_max),
            ("d_min_m", self.d_min_m),
            ("r_max_m", self.r_max_m),
            ("beta0", self.beta0),
            ("access_bandwidth_hz", self.access_bandwidth_hz),
            ("backhaul_bandwidth_hz", self.backhaul_bandwidth()),
            ("noise_power_w", self.noise_power_w),
            ("device_power_w", self.device_power_w),
            ("uav_power_max_w", self.uav_power_max_w),
            ("uav_cpu_cycles_per_ms", self.uav_cpu_cycles_per_ms),
            ("bs_cpu_cycles_per_ms", self.bs_cpu_cycles_per_ms),
            ("obs_age_scale", self.obs_age_scale),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, r) in [("task_bits", self.task_bits), ("task_cycles", self.task_cycles)] {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] > 0.0 && r[0] <= r[1]) {
                return bad(format!("{name} must be 0 < lo <= hi, got {r:?}"));
            }
        }
        if self.d_min_m >= self.area_m {
            return bad("d_min_m must be smaller than area_m".into());
        }
        for (name, v) in [("k1", self.k1), ("k2", self.k2)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(self.violation_penalty.is_finite() && self.violation_penalty >= 0.0) {
            return bad("violation_penalty must be non-negative".into());
        }
        if let Some(per) = &self.split_ratio_per_device {
            if per.len() != self.devices {
                return bad(format!(
                    "split_ratio_per_device has {} entries for {} devices",
                    per.len(),
                    self.devices
                ));
            }
        }
        for k in 0..self.devices {
            let l = self.split_ratio(k);
            if !(0.0..=1.0).contains(&l) {
                return bad(format!("split ratio of device {k} must lie in [0, 1], got {l}"));
            }
        }
        if self.no_uav && (0..self.devices).any(|k| self.split_ratio(k) != 0.0) {
            return bad("no_uav requires every split ratio to be 0".into());
        }
        if let Some(r) = self.residual_ratio {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("residual_ratio must lie in [0, 1], got {r}"));
            }
        }
        // A task the receiving node cannot finish in one slot at full capacity
        // would block its device forever.
        let worst = self.max_task_cycles();
        for k in 0..self.devices {
            let lambda = self.split_ratio(k);
            if lambda * worst > self.uav_cpu_cycles_per_ms * self.slot_ms * (1.0 + 1e-12) {
                return bad(format!(
                    "UAV share of the largest task ({:.3e} cycles) exceeds one slot of UAV CPU",
                    lambda * worst
                ));
            }
            if (1.0 - lambda) * worst > self.bs_cpu_cycles_per_ms * self.slot_ms * (1.0 + 1e-12) {
                return bad(format!(
                    "BS share of the largest task ({:.3e} cycles) exceeds one slot of BS CPU",
                    (1.0 - lambda) * worst
                ));
            }
        }
        Ok(())
    }

    pub fn split_ratio(&self, device: usize) -> f64 {
        match &self.split_ratio_per_device {
            Some(per) => per[device],
            None => self.split_ratio,
        }
    }

    pub fn residual_ratio(&self, device: usize) -> f64 {
        self.residual_ratio.unwrap_or(1.0 - self.split_ratio(device))
    }

    pub fn backhaul_bandwidth(&self) -> f64 {
        self.backhaul_bandwidth_hz.unwrap_or(self.access_bandwidth_hz)
    }

    /// Worst-case total cycles of one task.
    pub fn max_task_cycles(&self) -> f64 {
        match self.cycle_unit {
            CycleUnit::PerBit => self.task_bits[1] * self.task_cycles[1],
            CycleUnit::PerTask => self.task_cycles[1],
        }
    }

    /// Number of receivers on the access hop (the BS alone without UAVs).
    pub fn access_receivers(&self) -> usize {
        if self.no_uav {
            1
        } else {
            self.uavs
        }
    }

    pub fn bs_pose(&self) -> Pose {
        Pose::new(self.area_m / 2.0, self.area_m / 2.0, self.bs_height_m)
    }
}

/// Where a task currently is in the two-hop pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    AtDevice,
    /// Held by a UAV; `processed` once its UAV share of cycles has run.
    AtUav { uav: usize, processed: bool },
    /// At the BS, forwarded by `via` (or uploaded directly when `None`).
    AtBs { via: Option<usize> },
    Done,
}

impl Stage {
    /// Position in the forward-only lifecycle, used to reject backward moves.
    pub fn rank(self) -> u8 {
        match self {
            Stage::AtDevice => 0,
            Stage::AtUav { processed: false, .. } => 1,
            Stage::AtUav { processed: true, .. } => 2,
            Stage::AtBs { .. } => 3,
            Stage::Done => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Stage::AtDevice => "at_device",
            Stage::AtUav { processed: false, .. } => "at_uav",
            Stage::AtUav { processed: true, .. } => "processed_at_uav",
            Stage::AtBs { .. } => "at_bs",
            Stage::Done => "done",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub device: usize,
    /// Sequence number of this task at its device.
    pub index: u64,
    pub bits: u64,
    pub cycles_per_bit: f64,
    /// Size after UAV processing (D'), in whole bits.
    pub residual_bits: u64,
    pub generated_at: usize,
    pub stage: Stage,
    /// Slot in which the task entered its current stage.
    pub stage_since: usize,
}

impl Task {
    pub fn total_cycles(&self) -> f64 {
        self.bits as f64 * self.cycles_per_bit
    }

    /// Cycles executed at the UAV (λ·D·F).
    pub fn uav_cycles(&self, lambda: f64) -> f64 {
        lambda * self.total_cycles()
    }

    /// Cycles left for the BS ((1-λ)·D·F).
    pub fn bs_cycles(&self, lambda: f64) -> f64 {
        (1.0 - lambda) * self.total_cycles()
    }

    /// Ready to advance at `slot`: it did not change stage earlier in the same slot.
    pub fn ready(&self, slot: usize) -> bool {
        self.stage_since < slot
    }

    pub fn advance(&mut self, next: Stage, slot: usize) {
        debug_assert!(next.rank() > self.stage.rank(), "{:?} -> {:?}", self.stage, next);
        self.stage = next;
        self.stage_since = slot;
    }
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent generator for a named stream of a seeded run.
pub fn derived_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(seed ^ splitmix64(stream)) ^ index);
    ChaCha8Rng::seed_from_u64(key)
}

const TASK_STREAM: u64 = 0x7A5C;
pub(crate) const PLACEMENT_STREAM: u64 = 0x9105;
pub(crate) const FADING_STREAM: u64 = 0xFAD1;

/// Draws the `index`-th task of `device`, generated at slot `t`.
pub fn draw_task(config: &ScenarioConfig, device: usize, index: u64, t: usize) -> Task {
    let mut rng = derived_rng(config.seed, TASK_STREAM ^ ((device as u64) << 20), index);
    let lo = config.task_bits[0].ceil() as u64;
    let hi = (config.task_bits[1].floor() as u64).max(lo);
    let bits = rng.random_range(lo..=hi);
    let [c_lo, c_hi] = config.task_cycles;
    let cycles = if c_lo < c_hi {
        rng.random_range(c_lo..=c_hi)
    } else {
        c_lo
    };
    let cycles_per_bit = match config.cycle_unit {
        CycleUnit::PerBit => cycles,
        CycleUnit::PerTask => cycles / bits as f64,
    };
    let residual_bits = (config.residual_ratio(device) * bits as f64).round() as u64;
    Task {
        device,
        index,
        bits,
        cycles_per_bit,
        residual_bits,
        generated_at: t,
        stage: Stage::AtDevice,
        stage_since: t,
    }
}

/// Device and UAV positions for a fresh scenario.
pub(crate) fn place_nodes(config: &ScenarioConfig) -> Result<(Vec<Pose>, Vec<Pose>), ScenarioError> {
    let mut rng = derived_rng(config.seed, PLACEMENT_STREAM, 0);
    let a = config.area_m;
    let devices = (0..config.devices)
        .map(|_| Pose::new(rng.random_range(0.0..=a), rng.random_range(0.0..=a), 0.0))
        .collect();
    let mut uavs: Vec<Pose> = Vec::with_capacity(config.uavs);
    let mut attempts = 0;
    while uavs.len() < config.uavs {
        if attempts == PLACEMENT_ATTEMPTS {
            return Err(ScenarioError::Placement {
                uavs: config.uavs,
                d_min: config.d_min_m,
                area: a,
                attempts,
            });
        }
        attempts += 1;
        let p = Pose::new(
            rng.random_range(0.0..=a),
            rng.random_range(0.0..=a),
            config.uav_altitude_m,
        );
        if uavs.iter().all(|q| p.horizontal_distance(q) >= config.d_min_m) {
            uavs.push(p);
        }
    }
    Ok((devices, uavs))
}
