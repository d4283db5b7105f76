//! Execution-time accounting for the UAV and BS processors.

use serde::{Deserialize, Serialize};

use crate::scenario::Task;

/// CPU granted this slot, in cycles per millisecond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpuAllocation {
    /// Capacity used by each UAV for its own queue.
    pub f_uav: Vec<f64>,
    /// BS capacity reserved for tasks forwarded by each UAV.
    pub f_bs: Vec<f64>,
}

impl CpuAllocation {
    /// Scales per-UAV shares to capacities. UAV shares are clamped to
    /// `[0, 1]`; BS shares are normalized to sum to one (an all-zero vector
    /// grants nothing).
    pub fn from_shares(uav_share: &[f64], bs_share: &[f64], f_uav_max: f64, f_bs_max: f64) -> Self {
        let f_uav = uav_share.iter().map(|s| s.clamp(0.0, 1.0) * f_uav_max).collect();
        let total: f64 = bs_share.iter().map(|s| s.max(0.0)).sum();
        let f_bs = bs_share
            .iter()
            .map(|s| if total > 0.0 { s.max(0.0) / total * f_bs_max } else { 0.0 })
            .collect();
        Self { f_uav, f_bs }
    }
}

/// Time to run `cycles` at `capacity` cycles/ms; infinite without capacity.
pub fn exec_time(cycles: f64, capacity: f64) -> f64 {
    if cycles == 0.0 {
        0.0
    } else if capacity > 0.0 {
        cycles / capacity
    } else {
        f64::INFINITY
    }
}

/// Time for a UAV to run its share of every selected task. Each entry pairs
/// a task with its split ratio.
pub fn uav_exec_time<'a>(selected: impl IntoIterator<Item = (&'a Task, f64)>, f_uav: f64) -> f64 {
    let cycles = selected.into_iter().map(|(t, lambda)| t.uav_cycles(lambda)).sum();
    exec_time(cycles, f_uav)
}

/// Time for the BS to run the residual share of every selected task.
pub fn bs_exec_time<'a>(selected: impl IntoIterator<Item = (&'a Task, f64)>, f_bs: f64) -> f64 {
    let cycles = selected.into_iter().map(|(t, lambda)| t.bs_cycles(lambda)).sum();
    exec_time(cycles, f_bs)
}

/// Walks `items` in priority order and keeps each whose cost still fits the
/// remaining budget. Returns the kept positions.
pub fn first_fit(costs: impl IntoIterator<Item = f64>, budget: f64) -> Vec<usize> {
    let mut used = 0.0;
    let mut kept = Vec::new();
    for (i, c) in costs.into_iter().enumerate() {
        if used + c <= budget {
            used += c;
            kept.push(i);
        }
    }
    kept
}
