//! Per-hop Age-of-Information counters and the averaged objective.
//!
//! Each device carries three integer counters: `delta0` while its task waits
//! at the device, `delta_m` while a UAV holds it and `delta_b` while it waits
//! at the BS. Entering a hop seeds that hop's counter with the previous
//! one plus one; a counter whose hop the task has left stays frozen.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::Stage;

#[derive(Debug, Error, PartialEq)]
pub enum AgeError {
    #[error("device {device}: event {event:?} is impossible in stage {stage:?}")]
    Inconsistent { device: usize, stage: Stage, event: HopEvent },
    #[error("expected {expected} entries, got {got}")]
    Length { expected: usize, got: usize },
}

/// What happened to a device's task during one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HopEvent {
    /// No hop transition (waiting, or processed at the UAV).
    Idle,
    /// Uploaded to a UAV.
    Uploaded,
    /// Uploaded straight to the BS (no UAV tier).
    UploadedToBs,
    /// Forwarded from its UAV to the BS.
    Forwarded,
    /// Residual processing finished at the BS.
    Completed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgeState {
    pub delta0: Vec<u64>,
    pub delta_m: Vec<u64>,
    pub delta_b: Vec<u64>,
}

impl AgeState {
    pub fn new(devices: usize) -> Self {
        Self {
            delta0: vec![0; devices],
            delta_m: vec![0; devices],
            delta_b: vec![0; devices],
        }
    }

    pub fn devices(&self) -> usize {
        self.delta0.len()
    }

    /// Applies one slot of the recursions. `stages` are the stages each task
    /// held when the slot began.
    pub fn tick(&mut self, stages: &[Stage], events: &[HopEvent]) -> Result<(), AgeError> {
        let n = self.devices();
        for len in [stages.len(), events.len()] {
            if len != n {
                return Err(AgeError::Length { expected: n, got: len });
            }
        }
        for k in 0..n {
            let (stage, event) = (stages[k], events[k]);
            match (stage, event) {
                (Stage::AtDevice, HopEvent::Idle) => self.delta0[k] += 1,
                (Stage::AtDevice, HopEvent::Uploaded) => self.delta_m[k] = self.delta0[k] + 1,
                (Stage::AtDevice, HopEvent::UploadedToBs) => self.delta_b[k] = self.delta0[k] + 1,
                (Stage::AtUav { .. }, HopEvent::Idle) => self.delta_m[k] += 1,
                (Stage::AtUav { .. }, HopEvent::Forwarded) => self.delta_b[k] = self.delta_m[k] + 1,
                (Stage::AtBs { .. }, HopEvent::Idle) => self.delta_b[k] += 1,
                (Stage::AtBs { .. }, HopEvent::Completed) | (Stage::Done, HopEvent::Idle) => {}
                _ => return Err(AgeError::Inconsistent { device: k, stage, event }),
            }
        }
        Ok(())
    }

    /// Starts the age of a freshly generated task.
    pub fn reset_device(&mut self, k: usize) {
        self.delta0[k] = 0;
    }

    /// Ages charged to the UAV tier and the BS tier for device `k` given its
    /// current stage.
    ///
    /// A task not yet at a tier is charged its live age there, so leaving a
    /// task unserved is never cheaper than serving it. Once it is at the BS
    /// the UAV tier keeps the age it had on departure.
    pub fn hop_ages(&self, k: usize, stage: Stage) -> (u64, u64) {
        match stage {
            Stage::AtDevice => (self.delta0[k], self.delta0[k]),
            Stage::AtUav { .. } => (self.delta_m[k], self.delta_m[k]),
            Stage::AtBs { via: Some(_) } => (self.delta_m[k], self.delta_b[k]),
            Stage::AtBs { via: None } | Stage::Done => (self.delta_b[k], self.delta_b[k]),
        }
    }
}

/// Per-tier ages of every device after one slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopSample {
    pub uav: Vec<u64>,
    pub bs: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoiSummary {
    pub mean_m: f64,
    pub mean_b: f64,
    pub objective: f64,
}

impl AoiSummary {
    /// Summary from integer age totals over `samples` device-slots.
    pub fn from_sums(sum_m: u64, sum_b: u64, samples: usize, k1: f64, k2: f64) -> Self {
        if samples == 0 {
            return Self { mean_m: 0.0, mean_b: 0.0, objective: 0.0 };
        }
        let mean_m = sum_m as f64 / samples as f64;
        let mean_b = sum_b as f64 / samples as f64;
        Self { mean_m, mean_b, objective: k1 * mean_m + k2 * mean_b }
    }
}

/// Averages over devices and slots, `(1/KT) sum_t sum_k`, and the weighted
/// objective `k1 * mean_m + k2 * mean_b`.
pub fn mean_aoi(history: &[HopSample], k1: f64, k2: f64) -> AoiSummary {
    let sum_m: u64 = history.iter().flat_map(|s| &s.uav).sum();
    let sum_b: u64 = history.iter().flat_map(|s| &s.bs).sum();
    let samples = history.iter().map(|s| s.uav.len()).sum();
    AoiSummary::from_sums(sum_m, sum_b, samples, k1, k2)
}
