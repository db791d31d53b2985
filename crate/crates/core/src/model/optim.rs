use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    /// `W <- W - lr * grad`.
    Sgd,
    /// Adaptive moments with decoupled weight decay.
    AdamW,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr_peak: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Reuse the batch of step 0 at every step.
    pub fixed_batch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr_peak: 3e-3,
            warmup_steps: 50,
            total_steps: 500,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            batch_size: 16,
            seed: 0,
            optimizer: OptimizerKind::AdamW,
            fixed_batch: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.warmup_steps == 0 || self.warmup_steps > self.total_steps {
            return Err(Error::config(format!(
                "train.warmup_steps must be in 1..=train.total_steps ({}), got {}",
                self.total_steps, self.warmup_steps
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::config(format!("train.{name} must lie in (0, 1), got {b}")));
            }
        }
        if !(self.eps > 0.0) || !(self.lr_peak >= 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::config("train.eps must be positive, train.lr_peak and train.weight_decay non-negative"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size must be positive"));
        }
        Ok(())
    }
}

/// Linear warm-up from 0 to the peak, then linear decay to 0 at
/// `total_steps`; zero afterwards.
pub fn triangular_lr(step: usize, cfg: &TrainConfig) -> f64 {
    let (w, t) = (cfg.warmup_steps, cfg.total_steps);
    if step < w {
        cfg.lr_peak * step as f64 / w as f64
    } else if step >= t {
        if t == w && step == t {
            cfg.lr_peak
        } else {
            0.0
        }
    } else {
        cfg.lr_peak * (t - step) as f64 / (t - w) as f64
    }
}

/// Optimizer with its per-parameter state.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    m: ModelParams,
    v: ModelParams,
    t: i32,
}

impl Optimizer {
    pub fn new(cfg: &TrainConfig, params: &ModelParams) -> Self {
        Optimizer {
            kind: cfg.optimizer,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            weight_decay: cfg.weight_decay,
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// One update with learning rate `lr`. Weight decay skips biases and
    /// layer-norm parameters.
    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams, lr: f64) -> Result<()> {
        let decay: Vec<bool> = params.tensors().iter().map(|t| t.decay).collect();
        let gs: Vec<_> = grads.tensors().into_iter().map(|t| t.value).collect();
        let ws = params.tensors_mut();
        if ws.len() != gs.len() || ws.iter().zip(&gs).any(|(w, g)| w.dim() != g.dim()) {
            return Err(Error::shape("gradients do not match parameters"));
        }
        self.t += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (w, g) in ws.into_iter().zip(gs) {
                    w.scaled_add(-lr, g);
                }
            }
            OptimizerKind::AdamW => {
                let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
                let c1 = 1.0 - b1.powi(self.t);
                let c2 = 1.0 - b2.powi(self.t);
                let ms = self.m.tensors_mut();
                let vs = self.v.tensors_mut();
                for ((((w, g), m), v), dec) in ws.into_iter().zip(gs).zip(ms).zip(vs).zip(decay) {
                    let wd = if dec { self.weight_decay } else { 0.0 };
                    ndarray::Zip::from(w).and(g).and(m).and(v).for_each(|w, &g, m, v| {
                        *m = b1 * *m + (1.0 - b1) * g;
                        *v = b2 * *v + (1.0 - b2) * g * g;
                        let update = (*m / c1) / ((*v / c2).sqrt() + eps);
                        *w -= lr * (update + wd * *w);
                    });
                }
            }
        }
        Ok(())
    }
}
