//! Gradient-descent rules.

use serde::{Deserialize, Serialize};

use super::nn::{Dense, Mlp};
use super::LearnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Optimizer state for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    /// Largest allowed gradient norm; larger gradients are scaled down.
    pub clip_norm: Option<f64>,
    m: Vec<Dense>,
    v: Vec<Dense>,
    t: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, net: &Mlp) -> Self {
        let zeros = || net.layers.iter().map(|l| Dense::zeros(l.w.nrows(), l.w.ncols())).collect();
        Self { kind, lr, clip_norm: None, m: zeros(), v: zeros(), t: 0 }
    }

    pub fn with_clip(mut self, clip_norm: Option<f64>) -> Self {
        self.clip_norm = clip_norm;
        self
    }

    /// Applies one descent step. Non-finite gradients abort without
    /// touching the network.
    pub fn step(&mut self, net: &mut Mlp, grads: &[Dense]) -> Result<(), LearnError> {
        let mut sq = 0.0;
        for g in grads {
            for &v in g.w.iter().chain(g.b.iter()) {
                sq += v * v;
            }
        }
        if !sq.is_finite() {
            return Err(LearnError::NonFiniteGradient);
        }
        let scale = match self.clip_norm {
            Some(c) if sq.sqrt() > c => c / sq.sqrt(),
            _ => 1.0,
        };
        match self.kind {
            OptimizerKind::Sgd => {
                let lr = self.lr * scale;
                for (l, g) in net.layers.iter_mut().zip(grads) {
                    l.w.scaled_add(-lr, &g.w);
                    l.b.scaled_add(-lr, &g.b);
                }
            }
            OptimizerKind::Adam => {
                self.t += 1;
                let c1 = 1.0 - BETA1.powi(self.t);
                let c2 = 1.0 - BETA2.powi(self.t);
                let lr = self.lr;
                let upd = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                    let g = g * scale;
                    *m = BETA1 * *m + (1.0 - BETA1) * g;
                    *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
                };
                for (((l, g), m), v) in net.layers.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
                    ndarray::Zip::from(&mut l.w)
                        .and(&mut m.w)
                        .and(&mut v.w)
                        .and(&g.w)
                        .for_each(|p, m, v, &g| upd(p, m, v, g));
                    ndarray::Zip::from(&mut l.b)
                        .and(&mut m.b)
                        .and(&mut v.b)
                        .and(&g.b)
                        .for_each(|p, m, v, &g| upd(p, m, v, g));
                }
            }
        }
        Ok(())
    }
}
