use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::engine::{dropout_key, gradient_step, prepare};
use super::loss::LossConfig;
use super::optim::OptimizerState;
use crate::data::EmbeddingStore;
use crate::error::{Error, Result};
use crate::model::{FusionModel, GroupSet};
use crate::rng::{self, domain};
use crate::trials::Trial;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConventionalConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for ConventionalConfig {
    fn default() -> Self {
        ConventionalConfig {
            epochs: 3,
            batch_size: 128,
            lambda: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub mean_loss: f64,
    pub updates: usize,
}

/// Plain multi-task minibatch training over one trial list, nothing frozen.
pub fn train_conventional(model: &mut FusionModel, trials: &[Trial], store: &EmbeddingStore, cfg: &ConventionalConfig, opt: &mut OptimizerState) -> Result<Vec<EpochReport>> {
    if trials.is_empty() {
        return Err(Error::contract("training dataset is empty"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let loss = LossConfig::new(cfg.lambda)?;
    let prep = prepare(store, trials)?;
    let mut reports = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..trials.len()).collect();
        order.shuffle(&mut rng::stream(cfg.seed, &[domain::SHUFFLE, epoch as u64]));
        let mut total = 0.0;
        let mut updates = 0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            total += gradient_step(model, store, &prep, chunk, loss, opt, GroupSet::empty(), dropout_key(0, epoch as u64, b as u64))?;
            updates += 1;
        }
        reports.push(EpochReport {
            epoch,
            mean_loss: total / trials.len() as f64,
            updates,
        });
    }
    Ok(reports)
}
