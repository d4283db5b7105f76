//! Fixed-length observation vectors.
//!
//! UAV agent, per device (5 entries, all `-1` when the device is outside
//! coverage): waiting flag, UAV-tier age / `obs_age_scale`, access gain in dB
//! mapped to `[-1, 1]`, device x and y over the area side. Then its own
//! position and last velocity (4 entries).
//!
//! BS agent: per device the BS-tier age; per UAV the share of devices whose
//! task waits there ready to forward; per (UAV, subcarrier) the backhaul gain
//! in dB mapped to `[-1, 1]` and the interference met in the previous slot.
//! Without UAVs: per device the age, the waiting flag and the gain to the BS.

use serde::{Deserialize, Serialize};

use super::World;
use crate::scenario::{ScenarioConfig, Stage};

const SENTINEL: f64 = -1.0;
/// Slack in dB around the line-of-sight backhaul range for fading excursions.
const FADING_MARGIN_DB: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observations {
    pub uav: Vec<Vec<f64>>,
    pub bs: Vec<f64>,
}

impl Observations {
    /// All agents' observations concatenated, UAVs first.
    pub fn joint(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.uav.iter().flatten().copied().collect();
        v.extend_from_slice(&self.bs);
        v
    }
}

pub fn uav_obs_len(config: &ScenarioConfig) -> usize {
    5 * config.devices + 4
}

pub fn bs_obs_len(config: &ScenarioConfig) -> usize {
    if config.no_uav {
        3 * config.devices
    } else {
        config.devices + config.uavs + 2 * config.uavs * config.backhaul_subcarriers
    }
}

fn to_db(x: f64) -> f64 {
    10.0 * x.max(1e-300).log10()
}

/// Maps `x` (linear) onto `[-1, 1]` by its dB value between `lo` and `hi` (linear).
fn scale_db(x: f64, lo: f64, hi: f64) -> f64 {
    let (a, b) = (to_db(lo), to_db(hi));
    if b <= a {
        return 0.0;
    }
    (2.0 * (to_db(x) - a) / (b - a) - 1.0).clamp(-1.0, 1.0)
}

impl World {
    /// Observations at the start of the current slot.
    pub fn observe(&self) -> Observations {
        let cfg = &self.config;
        let age_scale = cfg.obs_age_scale;
        let waiting = |k: usize| {
            if self.tasks[k].stage == Stage::AtDevice {
                1.0
            } else {
                0.0
            }
        };
        if cfg.no_uav {
            let bs = cfg.bs_pose();
            let dz2 = bs.z * bs.z;
            let far = 2.0 * (cfg.area_m / 2.0).powi(2);
            let mut v = Vec::with_capacity(bs_obs_len(cfg));
            for k in 0..cfg.devices {
                let g = crate::radio::access_gain(&bs, &self.devices[k], cfg.beta0);
                v.push(self.hop_ages(k).1 as f64 / age_scale);
                v.push(waiting(k));
                v.push(scale_db(g, cfg.beta0 / (dz2 + far), cfg.beta0 / dz2));
            }
            return Observations { uav: Vec::new(), bs: v };
        }

        let h2 = cfg.uav_altitude_m.powi(2);
        let (g_lo, g_hi) = (cfg.beta0 / (h2 + cfg.r_max_m.powi(2)), cfg.beta0 / h2);
        let uav = (0..cfg.uavs)
            .map(|m| {
                let p = &self.uavs[m];
                let mut v = Vec::with_capacity(uav_obs_len(cfg));
                for k in 0..cfg.devices {
                    if self.covers(m, k) {
                        let d = &self.devices[k];
                        let g = crate::radio::access_gain(p, d, cfg.beta0);
                        v.push(waiting(k));
                        v.push(self.hop_ages(k).0 as f64 / age_scale);
                        v.push(scale_db(g, g_lo, g_hi));
                        v.push(d.x / cfg.area_m);
                        v.push(d.y / cfg.area_m);
                    } else {
                        v.extend([SENTINEL; 5]);
                    }
                }
                let vel = self.last_velocity[m];
                v.extend([p.x / cfg.area_m, p.y / cfg.area_m, vel.vx / cfg.v_max, vel.vy / cfg.v_max]);
                v
            })
            .collect();

        let dz = cfg.uav_altitude_m - cfg.bs_height_m;
        let far = 2.0 * (cfg.area_m / 2.0).powi(2);
        let margin = 10f64.powf(FADING_MARGIN_DB / 10.0);
        let (b_lo, b_hi) = (cfg.beta0 / (dz * dz + far) / margin, cfg.beta0 / (dz * dz) * margin);
        let gain = self.backhaul_gain(self.slot);
        let mut bs = Vec::with_capacity(bs_obs_len(cfg));
        for k in 0..cfg.devices {
            bs.push(self.hop_ages(k).1 as f64 / age_scale);
        }
        for m in 0..cfg.uavs {
            let ready = self
                .tasks
                .iter()
                .filter(|t| t.stage == Stage::AtUav { uav: m, processed: true })
                .count();
            bs.push(ready as f64 / cfg.devices as f64);
        }
        for m in 0..cfg.uavs {
            for l in 0..cfg.backhaul_subcarriers {
                bs.push(scale_db(gain[m][l], b_lo, b_hi));
                let i = self.last_interference[m][l] / cfg.noise_power_w;
                bs.push(((1.0 + i).log10() / 5.0).min(1.0));
            }
        }
        Observations { uav, bs }
    }
}
