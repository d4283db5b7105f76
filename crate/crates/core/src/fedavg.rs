//! Periodic averaging of UAV actor parameters through a doubly stochastic
//! mixing matrix.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learn::ParamSet;

#[derive(Debug, Error, PartialEq)]
pub enum FedError {
    #[error("agent {agent} has a different parameter layout")]
    ShapeMismatch { agent: usize },
    #[error("mixing matrix is for {expected} agents, got {got}")]
    AgentCount { expected: usize, got: usize },
    #[error("self-weight must lie in [0, 1], got {0}")]
    Weight(f64),
}

/// Mixing matrix with `w` on the diagonal and `(1 - w) / (M - 1)` elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixMatrix {
    pub agents: usize,
    pub w: f64,
}

impl MixMatrix {
    pub fn new(agents: usize, w: f64) -> Result<Self, FedError> {
        if !(0.0..=1.0).contains(&w) {
            return Err(FedError::Weight(w));
        }
        Ok(Self { agents, w })
    }

    pub fn off_diagonal(&self) -> f64 {
        if self.agents > 1 {
            (1.0 - self.w) / (self.agents - 1) as f64
        } else {
            0.0
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if self.agents == 1 {
            1.0
        } else if i == j {
            self.w
        } else {
            self.off_diagonal()
        }
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        (0..self.agents)
            .map(|i| (0..self.agents).map(|j| self.entry(i, j)).collect())
            .collect()
    }
}

/// `theta_i <- w theta_i + sum_{j != i} (1 - w)/(M - 1) theta_j`, elementwise.
pub fn aggregate(params: &[ParamSet], mix: &MixMatrix) -> Result<Vec<ParamSet>, FedError> {
    if params.len() != mix.agents {
        return Err(FedError::AgentCount { expected: mix.agents, got: params.len() });
    }
    let Some(first) = params.first() else {
        return Ok(Vec::new());
    };
    for (i, p) in params.iter().enumerate() {
        if !p.same_shape(first) || p.values.len() != first.values.len() {
            return Err(FedError::ShapeMismatch { agent: i });
        }
    }
    if mix.agents == 1 || mix.w == 1.0 {
        return Ok(params.to_vec());
    }
    // With w + (M - 1) o = 1 the rule equals mean + (w - o) (theta_i - mean),
    // which keeps the agent mean to rounding of the deviations.
    let n = first.values.len();
    let m = params.len() as f64;
    let mean: Vec<f64> = (0..n).map(|c| compensated_sum(params.iter().map(|p| p.values[c])) / m).collect();
    let c = mix.w - mix.off_diagonal();
    Ok(params
        .iter()
        .map(|p| ParamSet {
            shapes: p.shapes.clone(),
            values: p.values.iter().zip(&mean).map(|(&own, &mu)| mu + c * (own - mu)).collect(),
        })
        .collect())
}

/// Neumaier summation, so the agent mean is correctly rounded in practice.
fn compensated_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + comp
}

/// Whether aggregation happens after `epoch` (counted from 1).
pub fn schedule(epoch: usize, period: usize) -> bool {
    period >= 1 && epoch >= 2 && epoch.is_multiple_of(period)
}

/// Largest per-coordinate range across agents.
pub fn spread(params: &[ParamSet]) -> f64 {
    let Some(first) = params.first() else { return 0.0 };
    (0..first.values.len())
        .map(|c| {
            let (lo, hi) = params.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p.values[c]), hi.max(p.values[c]))
            });
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// One aggregation, as logged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FedEvent {
    pub epoch: usize,
    pub w: f64,
    pub period: usize,
    pub spread_before: f64,
    pub spread_after: f64,
}
