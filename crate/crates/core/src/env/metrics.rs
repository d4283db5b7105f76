//! Per-slot metrics rows and the AoI trace, both written as CSV.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::World;

/// One slot of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub episode: usize,
    pub slot: usize,
    pub mean_delta_m: f64,
    pub mean_delta_b: f64,
    pub objective: f64,
    /// UAV agents in index order, then the BS agent.
    pub rewards: Vec<f64>,
    pub violations: usize,
    /// Learner signalling volume; filled on the last slot of an episode.
    pub bytes_overhead: u64,
}

impl MetricsRecord {
    /// Column names for a run with `uavs` UAV agents.
    pub fn header(uavs: usize) -> Vec<String> {
        let mut h: Vec<String> = ["episode", "slot", "mean_delta_m", "mean_delta_b", "objective"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        h.extend((0..uavs).map(|m| format!("reward_uav{m}")));
        h.push("reward_bs".into());
        h.push("violations".into());
        h.push("bytes_overhead".into());
        h
    }

    pub fn fields(&self) -> Vec<String> {
        let mut v = vec![
            self.episode.to_string(),
            self.slot.to_string(),
            self.mean_delta_m.to_string(),
            self.mean_delta_b.to_string(),
            self.objective.to_string(),
        ];
        v.extend(self.rewards.iter().map(f64::to_string));
        v.push(self.violations.to_string());
        v.push(self.bytes_overhead.to_string());
        v
    }
}

/// Raw counters of one device after one slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub slot: usize,
    pub device: usize,
    pub delta0: u64,
    #[serde(rename = "deltaM")]
    pub delta_m: u64,
    #[serde(rename = "deltaB")]
    pub delta_b: u64,
    pub stage: String,
}

impl World {
    /// Raw counters of every device as they stand now, tagged with the
    /// slot just played.
    pub fn trace_rows(&self) -> Vec<TraceRow> {
        let slot = self.slot.saturating_sub(1);
        (0..self.config.devices)
            .map(|k| TraceRow {
                slot,
                device: k,
                delta0: self.ages.delta0[k],
                delta_m: self.ages.delta_m[k],
                delta_b: self.ages.delta_b[k],
                stage: self.tasks[k].stage.label().to_string(),
            })
            .collect()
    }
}

/// Writes trace rows as CSV with a header.
pub fn write_trace<W: Write>(out: W, rows: &[TraceRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
