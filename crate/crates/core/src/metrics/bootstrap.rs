use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rates::{min_adcf, sasv_eer, ADcfConfig};
use super::ClassScores;
use crate::error::{Error, Result};
use crate::rng::{self, domain};
use crate::trials::TrialLabel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    SasvEer,
    MinAdcf(ADcfConfig),
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::SasvEer => "sasv_eer",
            Metric::MinAdcf(_) => "min_adcf",
        }
    }

    pub fn value(&self, c: &ClassScores) -> Result<f64> {
        Ok(match self {
            Metric::SasvEer => sasv_eer(c)?.value,
            Metric::MinAdcf(cfg) => min_adcf(c, cfg)?.value,
        })
    }

    fn needs(&self, c: &ClassScores) -> Vec<TrialLabel> {
        match self {
            Metric::MinAdcf(_) => TrialLabel::ALL.to_vec(),
            Metric::SasvEer => TrialLabel::ALL.into_iter().filter(|&l| l == TrialLabel::Target || !c.get(l).is_empty()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 1000,
            level: 0.95,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiResult {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub replicates: usize,
    pub level: f64,
}

/// One stratified resample: every class keeps its size.
pub fn resample(c: &ClassScores, seed: u64, replicate: u64) -> ClassScores {
    let mut rng = rng::stream(seed, &[domain::BOOTSTRAP, replicate]);
    let mut out = ClassScores::default();
    for l in TrialLabel::ALL {
        let src = c.get(l);
        let v = (0..src.len()).map(|_| src[rng.random_range(0..src.len())]).collect();
        out.set(l, v);
    }
    out
}

/// Linear interpolation at fractional index `q·(n−1)` of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap interval; replicate `r` draws from its own stream so
/// results do not depend on thread count.
pub fn bootstrap_ci(c: &ClassScores, metric: Metric, cfg: &BootstrapConfig) -> Result<CiResult> {
    if cfg.replicates == 0 {
        return Err(Error::Config("bootstrap needs at least one replicate".into()));
    }
    if !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(Error::Config(format!("confidence level must be in (0, 1), got {}", cfg.level)));
    }
    for l in metric.needs(c) {
        if c.get(l).len() < 2 {
            return Err(Error::contract(format!("bootstrap needs at least 2 {l} scores")));
        }
    }
    let point = metric.value(c)?;
    let mut values = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| metric.value(&resample(c, cfg.seed, r)))
        .collect::<Result<Vec<f64>>>()?;
    values.sort_by(f64::total_cmp);
    let alpha = (1.0 - cfg.level) / 2.0;
    Ok(CiResult {
        point,
        lower: percentile(&values, alpha),
        upper: percentile(&values, 1.0 - alpha),
        replicates: cfg.replicates,
        level: cfg.level,
    })
}
