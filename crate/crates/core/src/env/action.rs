//! Joint actions and the mapping from relaxed actor outputs to them.
//!
//! Actor outputs live in `[0, 1]`. A UAV agent emits
//! `[psi scores (K*F, device-major) | cpu share | powers (L) | vx, vy]`; the
//! BS agent emits `[zeta scores (M*L, UAV-major) | cpu shares (M)]`, or only
//! psi scores for direct uploads when there is no UAV tier.

use serde::{Deserialize, Serialize};

use super::{EnvError, World};
use crate::kinematics::{apply_move, in_coverage, VelocityCmd};
use crate::scenario::{ScenarioConfig, Stage};

/// Score at or above which a relaxed binary counts as set.
pub const THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Receiver {
    Uav(usize),
    Bs,
}

/// Which tasks a node works on this slot.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Selection {
    /// Oldest eligible tasks first, as many as fit.
    #[default]
    Greedy,
    /// Exactly these devices' tasks, in order; ineligible or overflowing
    /// entries are dropped and counted as violations.
    Explicit(Vec<usize>),
}

/// One slot's decisions for every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointAction {
    /// Per device: receiver and access subcarrier, if uploading.
    pub uploads: Vec<Option<(Receiver, usize)>>,
    /// Fraction of its CPU each UAV runs this slot.
    pub uav_cpu_share: Vec<f64>,
    /// Relative BS CPU weights per forwarding UAV (one entry without UAVs).
    pub bs_cpu_share: Vec<f64>,
    /// Backhaul subcarrier allocation `[uav][subcarrier]`.
    pub zeta: Vec<Vec<bool>>,
    /// Backhaul transmit power in W, `[uav][subcarrier]`.
    pub power: Vec<Vec<f64>>,
    pub velocity: Vec<VelocityCmd>,
    /// UAV processing per UAV.
    pub process_uav: Vec<Selection>,
    /// Forwarding per UAV.
    pub forward: Vec<Selection>,
    /// BS processing per group (forwarding UAV, or the single direct group).
    pub process_bs: Vec<Selection>,
}

impl JointAction {
    /// Does nothing: no uploads, no subcarriers, hovering, full CPU.
    pub fn idle(config: &ScenarioConfig) -> Self {
        let m = config.uavs;
        let l = config.backhaul_subcarriers;
        let groups = bs_groups(config);
        Self {
            uploads: vec![None; config.devices],
            uav_cpu_share: vec![1.0; m],
            bs_cpu_share: vec![1.0; groups],
            zeta: vec![vec![false; l]; m],
            power: vec![vec![0.0; l]; m],
            velocity: vec![VelocityCmd::ZERO; m],
            process_uav: vec![Selection::Greedy; m],
            forward: vec![Selection::Greedy; m],
            process_bs: vec![Selection::Greedy; groups],
        }
    }
}

/// Number of BS processing groups.
pub fn bs_groups(config: &ScenarioConfig) -> usize {
    config.uavs.max(1)
}

pub fn uav_action_len(config: &ScenarioConfig) -> usize {
    config.devices * config.access_subcarriers + 1 + config.backhaul_subcarriers + 2
}

pub fn bs_action_len(config: &ScenarioConfig) -> usize {
    if config.no_uav {
        config.devices * config.access_subcarriers
    } else {
        config.uavs * config.backhaul_subcarriers + config.uavs
    }
}

/// Maps a velocity component in `[-v_max, v_max]` to its raw encoding.
pub fn encode_velocity(v: f64, v_max: f64) -> f64 {
    ((v / v_max + 1.0) / 2.0).clamp(0.0, 1.0)
}

fn decode_velocity(r: f64, v_max: f64) -> f64 {
    (2.0 * r - 1.0) * v_max
}

fn check(agent: &str, raw: &[f64], expected: usize) -> Result<(), EnvError> {
    if raw.len() != expected {
        return Err(EnvError::Shape {
            what: format!("{agent} action"),
            expected,
            got: raw.len(),
        });
    }
    if let Some(index) = raw.iter().position(|v| !v.is_finite()) {
        return Err(EnvError::NonFinite { agent: agent.to_string(), index });
    }
    Ok(())
}

/// Turns raw actor outputs into a joint action for the current world.
///
/// Velocities come first so that coverage is judged on the positions the
/// UAVs will occupy when the uploads happen. Upload scores at or above the
/// threshold are granted greedily from the highest score down (ties to the
/// lower UAV, device, then subcarrier index), one subcarrier per device and
/// one device per subcarrier. Each backhaul subcarrier keeps the
/// `uavs_per_backhaul_subcarrier` highest scores at or above the threshold.
/// Powers scale to `[0, P_max]` on held subcarriers and shrink together if
/// they exceed the budget. Task selection on every node is left greedy.
pub fn decode(world: &World, uav_raw: &[Vec<f64>], bs_raw: &[f64]) -> Result<JointAction, EnvError> {
    let cfg = &world.config;
    let (k_n, f_n, l_n, m_n) = (cfg.devices, cfg.access_subcarriers, cfg.backhaul_subcarriers, cfg.uavs);
    if uav_raw.len() != m_n {
        return Err(EnvError::Shape {
            what: "UAV agents".into(),
            expected: m_n,
            got: uav_raw.len(),
        });
    }
    for (m, raw) in uav_raw.iter().enumerate() {
        check(&format!("uav {m}"), raw, uav_action_len(cfg))?;
    }
    check("bs", bs_raw, bs_action_len(cfg))?;

    let mut act = JointAction::idle(cfg);
    let psi_len = k_n * f_n;

    if cfg.no_uav {
        let mut cands: Vec<(f64, usize, usize)> = Vec::new();
        for k in 0..k_n {
            if world.tasks[k].stage != Stage::AtDevice {
                continue;
            }
            for f in 0..f_n {
                let s = bs_raw[k * f_n + f];
                if s >= THRESHOLD {
                    cands.push((s, k, f));
                }
            }
        }
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        let mut used = vec![false; f_n];
        for (_, k, f) in cands {
            if act.uploads[k].is_none() && !used[f] {
                used[f] = true;
                act.uploads[k] = Some((Receiver::Bs, f));
            }
        }
        return Ok(act);
    }

    for (m, raw) in uav_raw.iter().enumerate() {
        act.velocity[m] = VelocityCmd::new(
            decode_velocity(raw[psi_len + 1 + l_n], cfg.v_max),
            decode_velocity(raw[psi_len + 2 + l_n], cfg.v_max),
        );
        act.uav_cpu_share[m] = raw[psi_len];
    }
    let poses = if cfg.static_uavs {
        world.uavs.clone()
    } else {
        apply_move(&world.uavs, &act.velocity, world.move_limits()).poses
    };

    let mut cands: Vec<(f64, usize, usize, usize)> = Vec::new();
    for (m, raw) in uav_raw.iter().enumerate() {
        for k in 0..k_n {
            if world.tasks[k].stage != Stage::AtDevice
                || !in_coverage(&poses[m], &world.devices[k], cfg.r_max_m, cfg.coverage)
            {
                continue;
            }
            for f in 0..f_n {
                let s = raw[k * f_n + f];
                if s >= THRESHOLD {
                    cands.push((s, m, k, f));
                }
            }
        }
    }
    cands.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2, a.3).cmp(&(b.1, b.2, b.3))));
    let mut used = vec![vec![false; f_n]; m_n];
    for (_, m, k, f) in cands {
        if act.uploads[k].is_none() && !used[m][f] {
            used[m][f] = true;
            act.uploads[k] = Some((Receiver::Uav(m), f));
        }
    }

    for l in 0..l_n {
        let mut on: Vec<(f64, usize)> = (0..m_n)
            .map(|m| (bs_raw[m * l_n + l], m))
            .filter(|&(s, _)| s >= THRESHOLD)
            .collect();
        on.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, m) in on.iter().take(cfg.uavs_per_backhaul_subcarrier) {
            act.zeta[m][l] = true;
        }
    }
    for (m, raw) in uav_raw.iter().enumerate() {
        for l in 0..l_n {
            if act.zeta[m][l] {
                act.power[m][l] = raw[psi_len + 1 + l].clamp(0.0, 1.0) * cfg.uav_power_max_w;
            }
        }
        let total: f64 = act.power[m].iter().sum();
        if total > cfg.uav_power_max_w {
            let s = cfg.uav_power_max_w / total;
            act.power[m].iter_mut().for_each(|p| *p *= s);
        }
    }
    act.bs_cpu_share = bs_raw[m_n * l_n..].to_vec();
    Ok(act)
}
