//! End-to-end pipeline pieces shared by the CLI and the acceptance tests:
//! speaker split, protocol construction, training, evaluation and the
//! BN × dropout × alternating-training ablation grid.

use std::fmt::Write as _;

use indexmap::IndexSet;
use rayon::prelude::*;

use crate::config::{EvalConfig, ExperimentConfig, ProtocolConfig};
use crate::data::EmbeddingStore;
use crate::error::{Error, Result};
use crate::metrics::{bootstrap_ci, min_adcf, sasv_eer, Metric, MetricRow, ScoreColumn, ScoreSet};
use crate::model::{FusionModel, ModelConfig, DEFAULT_DROPOUT};
use crate::training::{atmm_rows, epoch_rows, export_scores, train_atmm, train_conventional, AtmmStep, OptimizerState, ReportRow};
use crate::trials::{build_asv_trials, build_cm_trials, AtmmDatasets, Trial, UtteranceMeta};

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerSplit {
    pub train: Vec<UtteranceMeta>,
    pub eval: Vec<UtteranceMeta>,
}

/// Holds out the last `holdout` speakers in order of first appearance.
pub fn split_speakers(meta: &[UtteranceMeta], holdout: usize) -> Result<SpeakerSplit> {
    let speakers: IndexSet<&str> = meta.iter().map(|m| m.speaker_id.as_str()).collect();
    if holdout < 2 || speakers.len() < holdout + 2 {
        return Err(Error::Config(format!(
            "need at least 2 training and 2 held-out speakers; have {} speakers, holdout {holdout}",
            speakers.len()
        )));
    }
    let first_eval = speakers.len() - holdout;
    let (eval, train) = meta
        .iter()
        .cloned()
        .partition(|m| speakers.get_index_of(m.speaker_id.as_str()).expect("listed") >= first_eval);
    Ok(SpeakerSplit { train, eval })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentData {
    pub datasets: AtmmDatasets,
    pub eval_trials: Vec<Trial>,
}

pub fn build_protocols(meta: &[UtteranceMeta], p: &ProtocolConfig) -> Result<ExperimentData> {
    let split = split_speakers(meta, p.holdout_speakers)?;
    let cm = build_cm_trials(&split.train, &p.cm_pairing())?.trials;
    let asv = build_asv_trials(&split.train, &p.asv_pairing())?.trials;
    let eval_trials = build_cm_trials(&split.eval, &p.eval_pairing())?.trials;
    Ok(ExperimentData {
        datasets: AtmmDatasets::new(cm, asv)?,
        eval_trials,
    })
}

/// The configured model with its input widths taken from the store.
pub fn model_config_for(cfg: &ModelConfig, store: &EmbeddingStore) -> ModelConfig {
    ModelConfig {
        asv_dim: store.asv_dim(),
        cm_dim: store.cm_dim(),
        ..cfg.clone()
    }
}

pub struct TrainOutcome {
    pub model: FusionModel,
    pub report: Vec<ReportRow>,
    /// Audit trail of alternating training; empty for conventional training.
    pub steps: Vec<AtmmStep>,
}

pub fn train(cfg: &ExperimentConfig, store: &EmbeddingStore, datasets: &AtmmDatasets) -> Result<TrainOutcome> {
    let mut model = FusionModel::new(model_config_for(&cfg.model, store))?;
    let mut opt = OptimizerState::new(cfg.optimizer, &model)?;
    if cfg.training.atmm {
        let steps = train_atmm(&mut model, datasets, store, &cfg.atmm, &mut opt)?;
        Ok(TrainOutcome {
            model,
            report: atmm_rows(&steps),
            steps,
        })
    } else {
        let epochs = train_conventional(&mut model, &datasets.unified(), store, &cfg.training.conventional(), &mut opt)?;
        Ok(TrainOutcome {
            model,
            report: epoch_rows(&epochs, cfg.training.lambda),
            steps: Vec::new(),
        })
    }
}

/// SASV-EER and min a-DCF with bootstrap intervals.
pub fn evaluate(scores: &ScoreSet, eval: &EvalConfig) -> Result<Vec<MetricRow>> {
    let c = scores.class_scores(ScoreColumn::Sasv);
    let eer = sasv_eer(&c)?;
    let dcf = min_adcf(&c, &eval.adcf)?;
    let ci_eer = bootstrap_ci(&c, Metric::SasvEer, &eval.bootstrap)?;
    let ci_dcf = bootstrap_ci(&c, Metric::MinAdcf(eval.adcf), &eval.bootstrap)?;
    Ok(vec![
        MetricRow {
            metric: "sasv_eer".into(),
            point: eer.value,
            ci_lower: ci_eer.lower,
            ci_upper: ci_eer.upper,
            threshold: eer.threshold,
        },
        MetricRow {
            metric: "min_adcf".into(),
            point: dcf.value,
            ci_lower: ci_dcf.lower,
            ci_upper: ci_dcf.upper,
            threshold: dcf.threshold,
        },
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AblationRow {
    pub batchnorm: bool,
    pub dropout: bool,
    pub atmm: bool,
    pub sasv_eer: f64,
    pub min_adcf: f64,
}

/// All eight BN × dropout × alternating-training combinations, trained
/// independently from the same seeds and scored on the evaluation trials.
pub fn run_ablation(cfg: &ExperimentConfig, store: &EmbeddingStore, data: &ExperimentData) -> Result<Vec<AblationRow>> {
    let rate = if cfg.model.dropout_rate > 0.0 { cfg.model.dropout_rate } else { DEFAULT_DROPOUT };
    let grid: Vec<(bool, bool, bool)> = (0..8).map(|i| (i & 4 != 0, i & 2 != 0, i & 1 != 0)).collect();
    grid.into_par_iter()
        .map(|(bn, drop, atmm)| {
            let mut c = cfg.clone();
            c.model.use_batchnorm = bn;
            c.model.dropout_rate = if drop { rate } else { 0.0 };
            c.training.atmm = atmm;
            let out = train(&c, store, &data.datasets)?;
            let scores = export_scores(&out.model, &data.eval_trials, store)?;
            let cls = scores.class_scores(ScoreColumn::Sasv);
            Ok(AblationRow {
                batchnorm: bn,
                dropout: drop,
                atmm,
                sasv_eer: sasv_eer(&cls)?.value,
                min_adcf: min_adcf(&cls, &cfg.eval.adcf)?.value,
            })
        })
        .collect()
}

pub fn format_ablation(rows: &[AblationRow]) -> String {
    let flag = |b: bool| if b { "on" } else { "off" };
    let mut s = String::from("bn\tdropout\tatmm\tsasv_eer\tmin_adcf\n");
    for r in rows {
        let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}", flag(r.batchnorm), flag(r.dropout), flag(r.atmm), r.sasv_eer, r.min_adcf);
    }
    s
}
