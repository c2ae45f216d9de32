use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::ForwardTrace;
use crate::numerics::{bce_grad, bce_loss};
use crate::trials::TrialLabels;

/// Weight of the SASV term; the CM term gets `1 − lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub lambda: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { lambda: 0.5 }
    }
}

impl LossConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Config(format!("lambda must be in [0, 1], got {lambda}")));
        }
        Ok(LossConfig { lambda })
    }
}

/// Loss of one trial and its derivatives w.r.t. the SASV and CM logits.
///
/// A zero weight drops its term exactly, so an infinite BCE cannot leak in.
pub fn trial_loss(s_sasv_logit: f64, s_cm_logit: f64, labels: TrialLabels, cfg: LossConfig) -> (f64, f64, f64) {
    let lam = cfg.lambda;
    let mut loss = 0.0;
    let (mut d_sasv, mut d_cm) = (0.0, 0.0);
    if lam != 0.0 {
        loss += lam * bce_loss(s_sasv_logit, labels.y_sasv);
        d_sasv = lam * bce_grad(s_sasv_logit, labels.y_sasv);
    }
    if lam != 1.0 {
        loss += (1.0 - lam) * bce_loss(s_cm_logit, labels.y_cm);
        d_cm = (1.0 - lam) * bce_grad(s_cm_logit, labels.y_cm);
    }
    (loss, d_sasv, d_cm)
}

/// Per-batch loss with gradients of the batch mean.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub mean: f64,
    pub d_sasv: Vec<f64>,
    pub d_cm: Vec<f64>,
}

pub fn total_loss(trace: &ForwardTrace, labels: &[TrialLabels], cfg: LossConfig) -> Result<BatchLoss> {
    let n = trace.len();
    check_dim("batch labels", n, labels.len())?;
    if n == 0 {
        return Err(Error::contract("empty batch"));
    }
    let inv = 1.0 / n as f64;
    let mut out = BatchLoss {
        mean: 0.0,
        d_sasv: Vec::with_capacity(n),
        d_cm: Vec::with_capacity(n),
    };
    let mut sum = 0.0;
    for i in 0..n {
        let (l, ds, dc) = trial_loss(trace.s_sasv_logit[i], trace.s_cm_logit[i], labels[i], cfg);
        sum += l;
        out.d_sasv.push(ds * inv);
        out.d_cm.push(dc * inv);
    }
    out.mean = sum * inv;
    Ok(out)
}
