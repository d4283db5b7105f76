//! UAV motion and the mobility constraints: per-slot travel limit, minimum
//! separation, and device coverage.

use serde::{Deserialize, Serialize};

use crate::scenario::CoverageMetric;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn horizontal_distance_sq(&self, other: &Pose) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn horizontal_distance(&self, other: &Pose) -> f64 {
        self.horizontal_distance_sq(other).sqrt()
    }

    pub fn distance_sq(&self, other: &Pose) -> f64 {
        let dz = self.z - other.z;
        self.horizontal_distance_sq(other) + dz * dz
    }
}

/// Commanded displacement for one slot (m/slot).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct VelocityCmd {
    pub vx: f64,
    pub vy: f64,
}

impl VelocityCmd {
    pub const ZERO: VelocityCmd = VelocityCmd { vx: 0.0, vy: 0.0 };

    pub fn new(vx: f64, vy: f64) -> Self {
        Self { vx, vy }
    }

    pub fn norm(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    /// Scales the command down to at most `limit` in magnitude.
    pub fn clipped(self, limit: f64) -> Self {
        let n = self.norm();
        if n > limit && n > 0.0 {
            let s = limit / n;
            Self::new(self.vx * s, self.vy * s)
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MoveLimits {
    /// Largest displacement per slot.
    pub max_step: f64,
    pub area: f64,
    pub d_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoveOutcome {
    pub poses: Vec<Pose>,
    /// Displacement actually applied to each UAV.
    pub applied: Vec<VelocityCmd>,
    /// Pairs `(i, j)`, `i < j`, whose proposed positions broke the spacing rule.
    pub flagged: Vec<(usize, usize)>,
}

impl MoveOutcome {
    /// Violations charged to UAV `m` (one per flagged pair it belongs to).
    pub fn violations_of(&self, m: usize) -> usize {
        self.flagged.iter().filter(|&&(i, j)| i == m || j == m).count()
    }
}

/// Moves every UAV by its (clipped) command.
///
/// Proposed positions are checked pairwise all at once. Both members of a
/// pair closer than `d_min` keep their old position and the pair is flagged;
/// this repeats until the proposal is consistent, since holding one UAV back
/// can put it in the way of a third.
pub fn apply_move(poses: &[Pose], cmds: &[VelocityCmd], limits: MoveLimits) -> MoveOutcome {
    assert_eq!(poses.len(), cmds.len(), "one command per UAV");
    let n = poses.len();
    let mut proposed: Vec<Pose> = poses
        .iter()
        .zip(cmds)
        .map(|(p, c)| {
            let c = c.clipped(limits.max_step);
            Pose::new(
                (p.x + c.vx).clamp(0.0, limits.area),
                (p.y + c.vy).clamp(0.0, limits.area),
                p.z,
            )
        })
        .collect();
    let mut moving: Vec<bool> = (0..n).map(|i| proposed[i] != poses[i]).collect();
    let mut flagged: Vec<(usize, usize)> = Vec::new();
    let d_min_sq = limits.d_min * limits.d_min;
    loop {
        let mut cancel = vec![false; n];
        for i in 0..n {
            for j in i + 1..n {
                if !(moving[i] || moving[j]) {
                    continue;
                }
                if proposed[i].horizontal_distance_sq(&proposed[j]) < d_min_sq {
                    cancel[i] = true;
                    cancel[j] = true;
                    if !flagged.contains(&(i, j)) {
                        flagged.push((i, j));
                    }
                }
            }
        }
        if !cancel.iter().any(|&c| c) {
            break;
        }
        for i in 0..n {
            if cancel[i] {
                proposed[i] = poses[i];
                moving[i] = false;
            }
        }
    }
    flagged.sort_unstable();
    let applied = proposed
        .iter()
        .zip(poses)
        .map(|(p, q)| VelocityCmd::new(p.x - q.x, p.y - q.y))
        .collect();
    MoveOutcome {
        poses: proposed,
        applied,
        flagged,
    }
}

/// Device coverage test. `Horizontal` compares the ground distance with
/// `r_max`; `Slant` includes the altitude difference.
pub fn in_coverage(uav: &Pose, device: &Pose, r_max: f64, metric: CoverageMetric) -> bool {
    let d_sq = match metric {
        CoverageMetric::Horizontal => uav.horizontal_distance_sq(device),
        CoverageMetric::Slant => uav.distance_sq(device),
    };
    d_sq <= r_max * r_max
}
