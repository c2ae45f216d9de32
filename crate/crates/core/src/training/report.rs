use std::fmt::Write as _;
use std::path::Path;

use super::atmm::AtmmStep;
use super::conventional::EpochReport;
use crate::error::Result;
use crate::model::GroupTag;

const HEADER: &str = "step\tp\tlambda\tmean_loss\tfrozen_group";

/// One line of the training report. Conventional epochs have no `p` and
/// nothing frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub step: usize,
    pub p: Option<u8>,
    pub lambda: f64,
    pub mean_loss: f64,
    pub frozen: Option<GroupTag>,
}

pub fn atmm_rows(steps: &[AtmmStep]) -> Vec<ReportRow> {
    steps
        .iter()
        .enumerate()
        .map(|(i, s)| ReportRow {
            step: i,
            p: Some(s.p),
            lambda: s.lambda_used,
            mean_loss: s.mean_loss,
            frozen: Some(s.frozen_group),
        })
        .collect()
}

pub fn epoch_rows(epochs: &[EpochReport], lambda: f64) -> Vec<ReportRow> {
    epochs
        .iter()
        .map(|e| ReportRow {
            step: e.epoch,
            p: None,
            lambda,
            mean_loss: e.mean_loss,
            frozen: None,
        })
        .collect()
}

pub fn format_training_report(rows: &[ReportRow]) -> String {
    let mut s = String::from(HEADER);
    s.push('\n');
    for r in rows {
        let p = r.p.map_or("-".to_owned(), |p| p.to_string());
        let frozen = r.frozen.map_or("none", GroupTag::as_str);
        let _ = writeln!(s, "{}\t{p}\t{}\t{}\t{frozen}", r.step, r.lambda, r.mean_loss);
    }
    s
}

pub fn write_training_report(rows: &[ReportRow], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_training_report(rows))?;
    Ok(())
}
