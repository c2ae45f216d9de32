//! Alternating training: each iteration freezes either the ASV or the CM
//! branch and trains the rest on a small sample of the matching dataset.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::engine::{dropout_key, gradient_step, prepare, Prepared};
use super::loss::LossConfig;
use super::optim::OptimizerState;
use crate::data::EmbeddingStore;
use crate::error::{Error, Result};
use crate::model::{FusionModel, GroupSet, GroupTag};
use crate::rng::{self, domain};
use crate::trials::{sample_indices, AtmmDatasets, Trial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PSchedule {
    /// Fair coin per iteration from the seeded stream.
    Random,
    /// 0, 1, 0, 1, ...
    Alternate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtmmConfig {
    pub rounds: usize,
    pub iters_per_round: usize,
    pub sample_fraction: f64,
    /// Loss weight of CM-focused iterations (p = 0).
    pub lambda_cm_focus: f64,
    /// Loss weight of ASV-focused iterations (p = 1).
    pub lambda_asv_focus: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub schedule: PSchedule,
}

impl Default for AtmmConfig {
    fn default() -> Self {
        AtmmConfig {
            rounds: 5,
            iters_per_round: 100,
            sample_fraction: 0.01,
            lambda_cm_focus: 0.1,
            lambda_asv_focus: 0.9,
            batch_size: 128,
            seed: 0,
            schedule: PSchedule::Random,
        }
    }
}

impl AtmmConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, l) in [("lambda_cm_focus", self.lambda_cm_focus), ("lambda_asv_focus", self.lambda_asv_focus)] {
            if !(l > 0.0 && l < 1.0) {
                return Err(Error::Config(format!("{name} must be in (0, 1), got {l}")));
            }
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(Error::Config(format!("sample_fraction must be in (0, 1], got {}", self.sample_fraction)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Audit record of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct AtmmStep {
    pub round: u64,
    pub iteration: usize,
    pub p: u8,
    pub lambda_used: f64,
    pub frozen_group: GroupTag,
    /// Trials sampled for this iteration, in processing order.
    pub batch: Vec<Trial>,
    /// Group digests before and after, indexed CM path, ASV path, joint.
    pub pre_digests: [[u8; 32]; 3],
    pub post_digests: [[u8; 32]; 3],
    pub mean_loss: f64,
    pub updates: usize,
}

impl AtmmStep {
    pub fn changed(&self, tag: GroupTag) -> bool {
        let i = GroupTag::ALL.iter().position(|&t| t == tag).expect("known tag");
        self.pre_digests[i] != self.post_digests[i]
    }
}

fn digests(model: &FusionModel) -> [[u8; 32]; 3] {
    GroupTag::ALL.map(|t| model.digest(t))
}

/// Datasets resolved against the store, reusable across rounds.
pub struct PreparedAtmm<'a> {
    datasets: &'a AtmmDatasets,
    cm: Prepared,
    asv: Prepared,
}

impl<'a> PreparedAtmm<'a> {
    pub fn new(datasets: &'a AtmmDatasets, store: &EmbeddingStore) -> Result<Self> {
        if datasets.cm_dataset.is_empty() || datasets.asv_dataset.is_empty() {
            return Err(Error::contract("alternating training needs non-empty CM and ASV datasets"));
        }
        let unified = datasets.unified();
        // report every missing reference of both datasets at once
        prepare(store, &unified)?;
        Ok(PreparedAtmm {
            datasets,
            cm: prepare(store, &datasets.cm_dataset)?,
            asv: prepare(store, &datasets.asv_dataset)?,
        })
    }
}

/// Runs one round of `cfg.iters_per_round` iterations.
pub fn atmm_round(
    model: &mut FusionModel,
    datasets: &AtmmDatasets,
    store: &EmbeddingStore,
    cfg: &AtmmConfig,
    opt: &mut OptimizerState,
    round: u64,
) -> Result<Vec<AtmmStep>> {
    let prep = PreparedAtmm::new(datasets, store)?;
    atmm_round_prepared(model, &prep, store, cfg, opt, round)
}

pub fn atmm_round_prepared(
    model: &mut FusionModel,
    prep: &PreparedAtmm<'_>,
    store: &EmbeddingStore,
    cfg: &AtmmConfig,
    opt: &mut OptimizerState,
    round: u64,
) -> Result<Vec<AtmmStep>> {
    cfg.validate()?;
    let mut coin = rng::stream(cfg.seed, &[domain::ATMM, round]);
    let mut steps = Vec::with_capacity(cfg.iters_per_round);
    for it in 0..cfg.iters_per_round {
        let p: u8 = match cfg.schedule {
            PSchedule::Random => u8::from(coin.random_bool(0.5)),
            PSchedule::Alternate => (it % 2) as u8,
        };
        let (lambda, frozen_group, data, source) = if p == 0 {
            (cfg.lambda_cm_focus, GroupTag::AsvPath, &prep.cm, &prep.datasets.cm_dataset)
        } else {
            (cfg.lambda_asv_focus, GroupTag::CmPath, &prep.asv, &prep.datasets.asv_dataset)
        };
        let key = (round << 24) | it as u64;
        let sample = sample_indices(source.len(), cfg.sample_fraction, cfg.seed, key)?;
        let frozen = GroupSet::of(&[frozen_group]);
        let pre_digests = digests(model);
        let mut total = 0.0;
        let mut updates = 0;
        for (b, chunk) in sample.chunks(cfg.batch_size).enumerate() {
            total += gradient_step(model, store, data, chunk, LossConfig { lambda }, opt, frozen, dropout_key(1 + round, it as u64, b as u64))?;
            updates += 1;
        }
        steps.push(AtmmStep {
            round,
            iteration: it,
            p,
            lambda_used: lambda,
            frozen_group,
            batch: sample.iter().map(|&i| source[i].clone()).collect(),
            pre_digests,
            post_digests: digests(model),
            mean_loss: total / sample.len() as f64,
            updates,
        });
    }
    model.set_frozen(GroupSet::empty())?;
    Ok(steps)
}

/// All `cfg.rounds` rounds back to back.
pub fn train_atmm(model: &mut FusionModel, datasets: &AtmmDatasets, store: &EmbeddingStore, cfg: &AtmmConfig, opt: &mut OptimizerState) -> Result<Vec<AtmmStep>> {
    cfg.validate()?;
    let prep = PreparedAtmm::new(datasets, store)?;
    let mut all = Vec::with_capacity(cfg.rounds * cfg.iters_per_round);
    for r in 0..cfg.rounds {
        all.extend(atmm_round_prepared(model, &prep, store, cfg, opt, r as u64)?);
    }
    Ok(all)
}
