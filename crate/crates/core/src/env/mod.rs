//! The slotted environment: world state, one-slot dynamics, observations
//! and rewards.

mod action;
mod metrics;
mod observe;

pub use action::{
    bs_action_len, bs_groups, decode, encode_velocity, uav_action_len, JointAction, Receiver, Selection, THRESHOLD,
};
pub use metrics::{write_trace, MetricsRecord, TraceRow};
pub use observe::{bs_obs_len, uav_obs_len, Observations};

use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::age::{AgeError, AgeState, AoiSummary, HopEvent, HopSample};
use crate::compute::{exec_time, CpuAllocation};
use crate::kinematics::{apply_move, in_coverage, MoveLimits, Pose, VelocityCmd};
use crate::radio::{access_gain, access_rate, backhaul_sum_rate, fits_slot, upload_time, BackhaulAssignment};
use crate::scenario::{
    derived_rng, draw_task, place_nodes, BackhaulChannel, ScenarioConfig, ScenarioError, Stage, Task, FADING_STREAM,
};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Age(#[from] AgeError),
    #[error("{what}: expected length {expected}, got {got}")]
    Shape { what: String, expected: usize, got: usize },
    #[error("{agent} action has a non-finite entry at {index}")]
    NonFinite { agent: String, index: usize },
    #[error("episode is over after {slots} slots")]
    EpisodeOver { slots: usize },
}

/// Constraint violations charged to each agent in one slot.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violations {
    pub uav: Vec<usize>,
    pub bs: usize,
}

impl Violations {
    fn new(uavs: usize) -> Self {
        Self { uav: vec![0; uavs], bs: 0 }
    }

    pub fn total(&self) -> usize {
        self.uav.iter().sum::<usize>() + self.bs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rewards {
    pub uav: Vec<f64>,
    pub bs: f64,
}

impl Rewards {
    /// Rewards in agent order: UAVs then the BS.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.uav.clone();
        v.push(self.bs);
        v
    }
}

/// Everything one call to [`World::step`] produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub rewards: Rewards,
    pub violations: Violations,
    /// Hop transition of every device's task during the slot.
    pub events: Vec<HopEvent>,
    /// Devices that received a new task at the end of the slot.
    pub respawned: Vec<usize>,
    /// Per-tier ages after the slot.
    pub sample: HopSample,
    pub record: MetricsRecord,
    /// The slot just played was the last of the episode.
    pub done: bool,
}

/// Complete simulator state for one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub config: ScenarioConfig,
    /// Next slot to be played.
    pub slot: usize,
    pub devices: Vec<Pose>,
    pub uavs: Vec<Pose>,
    /// Displacement each UAV applied in the previous slot.
    pub last_velocity: Vec<VelocityCmd>,
    /// The current task of every device.
    pub tasks: Vec<Task>,
    pub ages: AgeState,
    /// Interference each UAV met on each subcarrier in the previous slot.
    pub last_interference: Vec<Vec<f64>>,
    /// Per-tier ages after every slot played so far.
    pub history: Vec<HopSample>,
    sum_m: u64,
    sum_b: u64,
}

impl World {
    /// Places devices and UAVs and gives every device its first task.
    pub fn new(config: ScenarioConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let (devices, uavs) = place_nodes(&config)?;
        let tasks = (0..config.devices).map(|k| draw_task(&config, k, 0, 0)).collect();
        let (m, l) = (config.uavs, config.backhaul_subcarriers);
        Ok(Self {
            slot: 0,
            last_velocity: vec![VelocityCmd::ZERO; m],
            tasks,
            ages: AgeState::new(config.devices),
            last_interference: vec![vec![0.0; l]; m],
            history: Vec::with_capacity(config.slots),
            sum_m: 0,
            sum_b: 0,
            devices,
            uavs,
            config,
        })
    }

    /// A fresh episode of the same scenario.
    pub fn reset(&self) -> Self {
        Self::new(self.config.clone()).expect("configuration already validated")
    }

    pub fn move_limits(&self) -> MoveLimits {
        MoveLimits {
            max_step: self.config.v_max,
            area: self.config.area_m,
            d_min: self.config.d_min_m,
        }
    }

    pub fn is_done(&self) -> bool {
        self.slot >= self.config.slots
    }

    /// Gives device `k` a new task generated at slot `t`.
    pub fn spawn_task(&mut self, k: usize, t: usize) -> Result<&Task, ScenarioError> {
        if self.tasks[k].stage != Stage::Done {
            return Err(ScenarioError::TaskInFlight { device: k });
        }
        let next = self.tasks[k].index + 1;
        self.tasks[k] = draw_task(&self.config, k, next, t);
        self.ages.reset_device(k);
        Ok(&self.tasks[k])
    }

    /// Unit-mean exponential fading factors for slot `t`, `[uav][subcarrier]`.
    pub fn fading(&self, t: usize) -> Vec<Vec<f64>> {
        let cfg = &self.config;
        let mut rng = derived_rng(cfg.seed, FADING_STREAM, t as u64);
        (0..cfg.uavs)
            .map(|_| {
                (0..cfg.backhaul_subcarriers)
                    .map(|_| Exp1.sample(&mut rng))
                    .collect()
            })
            .collect()
    }

    /// Backhaul `|h|^2` for slot `t` at the current UAV positions.
    pub fn backhaul_gain(&self, t: usize) -> Vec<Vec<f64>> {
        let cfg = &self.config;
        let bs = cfg.bs_pose();
        let fading = match cfg.backhaul_channel {
            BackhaulChannel::LosFading => Some(self.fading(t)),
            BackhaulChannel::Los => None,
        };
        self.uavs
            .iter()
            .enumerate()
            .map(|(m, p)| {
                let los = access_gain(&bs, p, cfg.beta0);
                (0..cfg.backhaul_subcarriers)
                    .map(|l| fading.as_ref().map_or(los, |f| los * f[m][l]))
                    .collect()
            })
            .collect()
    }

    /// Access-hop receiver poses: the UAVs, or the BS alone.
    pub fn receivers(&self) -> Vec<Pose> {
        if self.config.no_uav {
            vec![self.config.bs_pose()]
        } else {
            self.uavs.clone()
        }
    }

    fn receiver_index(&self, r: Receiver) -> Option<usize> {
        match (r, self.config.no_uav) {
            (Receiver::Uav(m), false) if m < self.config.uavs => Some(m),
            (Receiver::Bs, true) => Some(0),
            _ => None,
        }
    }

    /// Uplink rate of device `k` to access receiver `r` (bits/ms).
    pub fn access_rate_to(&self, r: usize, k: usize) -> f64 {
        let cfg = &self.config;
        let rx = if cfg.no_uav { cfg.bs_pose() } else { self.uavs[r] };
        let g = access_gain(&rx, &self.devices[k], cfg.beta0);
        access_rate(g, cfg.device_power_w, cfg.noise_power_w, cfg.access_bandwidth_hz)
    }

    /// Whether receiver `r` can hear device `k` (the BS hears every device).
    pub fn covers(&self, r: usize, k: usize) -> bool {
        self.config.no_uav
            || in_coverage(&self.uavs[r], &self.devices[k], self.config.r_max_m, self.config.coverage)
    }

    /// UAV whose ground position is closest to device `k` (lower index on a tie).
    pub fn nearest_uav(&self, k: usize) -> Option<usize> {
        let d = &self.devices[k];
        (0..self.uavs.len()).min_by(|&a, &b| {
            self.uavs[a]
                .horizontal_distance_sq(d)
                .total_cmp(&self.uavs[b].horizontal_distance_sq(d))
                .then(a.cmp(&b))
        })
    }

    /// Per-tier ages charged for device `k` right now.
    pub fn hop_ages(&self, k: usize) -> (u64, u64) {
        self.ages.hop_ages(k, self.tasks[k].stage)
    }

    /// Episode averages over the slots played so far.
    pub fn summary(&self) -> AoiSummary {
        AoiSummary::from_sums(
            self.sum_m,
            self.sum_b,
            self.history.len() * self.config.devices,
            self.config.k1,
            self.config.k2,
        )
    }

    /// Integer totals of the per-tier ages over the slots played so far.
    pub fn age_sums(&self) -> (u64, u64) {
        (self.sum_m, self.sum_b)
    }

    fn check_shapes(&self, a: &JointAction) -> Result<(), EnvError> {
        let cfg = &self.config;
        let (m, l, g) = (cfg.uavs, cfg.backhaul_subcarriers, bs_groups(cfg));
        let lens = [
            ("uploads", a.uploads.len(), cfg.devices),
            ("uav_cpu_share", a.uav_cpu_share.len(), m),
            ("bs_cpu_share", a.bs_cpu_share.len(), g),
            ("zeta", a.zeta.len(), m),
            ("power", a.power.len(), m),
            ("velocity", a.velocity.len(), m),
            ("process_uav", a.process_uav.len(), m),
            ("forward", a.forward.len(), m),
            ("process_bs", a.process_bs.len(), g),
        ];
        for (what, got, expected) in lens {
            if got != expected {
                return Err(EnvError::Shape { what: what.into(), expected, got });
            }
        }
        for (what, rows) in [("zeta row", a.zeta.iter().map(Vec::len).collect::<Vec<_>>()), (
            "power row",
            a.power.iter().map(Vec::len).collect(),
        )] {
            if let Some(&got) = rows.iter().find(|&&n| n != l) {
                return Err(EnvError::Shape { what: what.into(), expected: l, got });
            }
        }
        Ok(())
    }

    /// Plays one slot.
    ///
    /// Within the slot the UAVs move, channels are refreshed, uploads run,
    /// UAVs process tasks that arrived in earlier slots, UAVs forward
    /// processed tasks, the BS processes tasks forwarded in earlier slots,
    /// ages advance, and devices whose task finished get a new one. A task
    /// changes stage at most once per slot.
    pub fn step(&mut self, act: &JointAction) -> Result<StepOutcome, EnvError> {
        if self.is_done() {
            return Err(EnvError::EpisodeOver { slots: self.config.slots });
        }
        self.check_shapes(act)?;
        let cfg = self.config.clone();
        let t = self.slot;
        let (k_n, m_n, l_n) = (cfg.devices, cfg.uavs, cfg.backhaul_subcarriers);
        let mut viol = Violations::new(m_n);
        let stages: Vec<Stage> = self.tasks.iter().map(|x| x.stage).collect();
        let mut events = vec![HopEvent::Idle; k_n];

        // (1) mobility
        if !cfg.static_uavs && m_n > 0 {
            let out = apply_move(&self.uavs, &act.velocity, self.move_limits());
            for (m, v) in viol.uav.iter_mut().enumerate() {
                *v += out.violations_of(m);
            }
            self.uavs = out.poses;
            self.last_velocity = out.applied;
        }

        // (2) channels
        let gain = self.backhaul_gain(t);

        // (3) uploads
        let receivers = cfg.access_receivers();
        let mut taken = vec![vec![false; cfg.access_subcarriers]; receivers];
        for k in 0..k_n {
            let Some((rx, f)) = act.uploads[k] else { continue };
            let blame = |viol: &mut Violations| match rx {
                Receiver::Uav(m) if m < m_n => viol.uav[m] += 1,
                _ => viol.bs += 1,
            };
            let Some(r) = self.receiver_index(rx) else {
                blame(&mut viol);
                continue;
            };
            let task = &self.tasks[k];
            if f >= cfg.access_subcarriers
                || taken[r][f]
                || task.stage != Stage::AtDevice
                || !self.covers(r, k)
            {
                blame(&mut viol);
                continue;
            }
            let time = upload_time(task.bits, true, self.access_rate_to(r, k));
            if !fits_slot(time, cfg.slot_ms) {
                blame(&mut viol);
                continue;
            }
            taken[r][f] = true;
            let (next, ev) = match rx {
                Receiver::Uav(m) => (Stage::AtUav { uav: m, processed: false }, HopEvent::Uploaded),
                Receiver::Bs => (Stage::AtBs { via: None }, HopEvent::UploadedToBs),
            };
            self.tasks[k].advance(next, t);
            events[k] = ev;
        }

        // (4) UAV processing
        for m in 0..m_n {
            let cap = act.uav_cpu_share[m].clamp(0.0, 1.0) * cfg.uav_cpu_cycles_per_ms;
            let eligible = |tk: &Task| tk.stage == Stage::AtUav { uav: m, processed: false } && tk.ready(t);
            let cost = |tk: &Task| exec_time(tk.uav_cycles(cfg.split_ratio(tk.device)), cap);
            let chosen = self.select(&act.process_uav[m], eligible, cost, cfg.slot_ms, &mut viol.uav[m]);
            for k in chosen {
                self.tasks[k].advance(Stage::AtUav { uav: m, processed: true }, t);
            }
        }

        // (5) forwarding
        let mut assign = BackhaulAssignment {
            zeta: act.zeta.clone(),
            power: act.power.clone(),
            gain,
        };
        for l in 0..l_n {
            let on: Vec<usize> = assign.occupants(l).collect();
            for &m in on.iter().skip(cfg.uavs_per_backhaul_subcarrier) {
                assign.zeta[m][l] = false;
                viol.bs += 1;
            }
        }
        for m in 0..m_n {
            let mut bad = false;
            for l in 0..l_n {
                let p = &mut assign.power[m][l];
                if !(p.is_finite() && *p >= 0.0) {
                    *p = 0.0;
                    bad = true;
                }
                if !assign.zeta[m][l] {
                    *p = 0.0;
                }
            }
            let used = assign.power_used(m);
            if used > cfg.uav_power_max_w * (1.0 + 1e-12) {
                let s = cfg.uav_power_max_w / used;
                assign.power[m].iter_mut().for_each(|p| *p *= s);
                bad = true;
            }
            if bad {
                viol.uav[m] += 1;
            }
        }
        let bw = cfg.backhaul_bandwidth();
        for m in 0..m_n {
            for l in 0..l_n {
                self.last_interference[m][l] = assign.interference(m, l, cfg.sic_power);
            }
            let rate = backhaul_sum_rate(&assign, m, cfg.noise_power_w, bw, cfg.sic_power);
            let eligible = |tk: &Task| tk.stage == Stage::AtUav { uav: m, processed: true } && tk.ready(t);
            let cost = |tk: &Task| crate::radio::backhaul_time(tk.residual_bits, rate);
            let chosen = self.select(&act.forward[m], eligible, cost, cfg.slot_ms, &mut viol.bs);
            for k in chosen {
                self.tasks[k].advance(Stage::AtBs { via: Some(m) }, t);
                events[k] = HopEvent::Forwarded;
            }
        }

        // (6) BS processing
        let cpu = if cfg.no_uav {
            CpuAllocation { f_uav: Vec::new(), f_bs: vec![cfg.bs_cpu_cycles_per_ms] }
        } else {
            CpuAllocation::from_shares(&act.uav_cpu_share, &act.bs_cpu_share, cfg.uav_cpu_cycles_per_ms, cfg.bs_cpu_cycles_per_ms)
        };
        for g in 0..bs_groups(&cfg) {
            let cap = cpu.f_bs[g];
            let eligible = |tk: &Task| match tk.stage {
                Stage::AtBs { via } => via.unwrap_or(0) == g && tk.ready(t),
                _ => false,
            };
            let cost = |tk: &Task| exec_time(tk.bs_cycles(cfg.split_ratio(tk.device)), cap);
            let chosen = self.select(&act.process_bs[g], eligible, cost, cfg.slot_ms, &mut viol.bs);
            for k in chosen {
                self.tasks[k].advance(Stage::Done, t);
                events[k] = HopEvent::Completed;
            }
        }

        // (7) ages
        self.ages.tick(&stages, &events)?;

        // (8) new tasks
        let mut respawned = Vec::new();
        for k in 0..k_n {
            if self.tasks[k].stage == Stage::Done {
                self.spawn_task(k, t + 1)?;
                respawned.push(k);
            }
        }

        let (uav_ages, bs_ages): (Vec<u64>, Vec<u64>) = (0..k_n).map(|k| self.hop_ages(k)).unzip();
        let sum_m: u64 = uav_ages.iter().sum();
        let sum_b: u64 = bs_ages.iter().sum();
        self.sum_m += sum_m;
        self.sum_b += sum_b;
        let slot_summary = AoiSummary::from_sums(sum_m, sum_b, k_n, cfg.k1, cfg.k2);

        let mut uav_reward = vec![0.0; m_n];
        for k in 0..k_n {
            if let Some(m) = self.nearest_uav(k) {
                uav_reward[m] -= cfg.k1 * uav_ages[k] as f64;
            }
        }
        for (r, v) in uav_reward.iter_mut().zip(&viol.uav) {
            *r -= cfg.violation_penalty * *v as f64;
        }
        let bs_reward = -cfg.k2 * sum_b as f64 - cfg.violation_penalty * viol.bs as f64;
        let rewards = Rewards { uav: uav_reward, bs: bs_reward };

        let sample = HopSample { uav: uav_ages, bs: bs_ages };
        self.history.push(sample.clone());
        self.slot += 1;
        let record = MetricsRecord {
            episode: 0,
            slot: t,
            mean_delta_m: slot_summary.mean_m,
            mean_delta_b: slot_summary.mean_b,
            objective: slot_summary.objective,
            rewards: rewards.to_vec(),
            violations: viol.total(),
            bytes_overhead: 0,
        };
        Ok(StepOutcome {
            rewards,
            violations: viol,
            events,
            respawned,
            sample,
            record,
            done: self.is_done(),
        })
    }

    /// Picks the tasks a node serves this slot. Costs are in ms and must
    /// add up to at most `budget`.
    fn select(
        &self,
        sel: &Selection,
        eligible: impl Fn(&Task) -> bool,
        cost: impl Fn(&Task) -> f64,
        budget: f64,
        violations: &mut usize,
    ) -> Vec<usize> {
        let mut used = 0.0;
        let mut chosen = Vec::new();
        match sel {
            Selection::Greedy => {
                let mut order: Vec<usize> = (0..self.tasks.len()).filter(|&k| eligible(&self.tasks[k])).collect();
                order.sort_by_key(|&k| (self.tasks[k].generated_at, k));
                for k in order {
                    let c = cost(&self.tasks[k]);
                    if used + c <= budget {
                        used += c;
                        chosen.push(k);
                    }
                }
            }
            Selection::Explicit(list) => {
                for &k in list {
                    if k >= self.tasks.len() || chosen.contains(&k) || !eligible(&self.tasks[k]) {
                        *violations += 1;
                        continue;
                    }
                    let c = cost(&self.tasks[k]);
                    if used + c <= budget {
                        used += c;
                        chosen.push(k);
                    } else {
                        *violations += 1;
                    }
                }
            }
        }
        chosen
    }
}

#[cfg(test)]
mod tests;
