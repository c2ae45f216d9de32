//! Detection metrics over SASV scores: the pooled equal error rate, the
//! minimum architecture-agnostic detection cost, bootstrap intervals and
//! per-class score histograms.

mod bootstrap;
mod histogram;
mod io;
mod rates;

pub use bootstrap::{bootstrap_ci, resample, BootstrapConfig, CiResult, Metric};
pub use histogram::{histogram, score_histograms, Histogram, ScoreHistograms};
pub use io::{
    format_histogram_csv, format_metric_report, format_scores, parse_metric_report, parse_scores, read_scores, write_histogram_csv, write_metric_report,
    write_scores, MetricRow,
};
pub use rates::{candidate_thresholds, error_rates_at, min_adcf, sasv_eer, ADcfConfig, ErrorRates, OperatingPoint};

use crate::error::{Error, Result};
use crate::trials::TrialLabel;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEntry {
    pub test_id: String,
    pub label: TrialLabel,
    pub s_sasv: f64,
    pub s_cm: f64,
}

/// Labelled scores of an evaluation run; all scores finite.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreSet {
    entries: Vec<ScoreEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreColumn {
    Sasv,
    Cm,
}

impl ScoreSet {
    pub fn new(entries: Vec<ScoreEntry>) -> Result<Self> {
        let mut s = ScoreSet::default();
        for e in entries {
            s.push(e)?;
        }
        Ok(s)
    }

    /// Builds a set from `(label, score)` pairs; the CM column is left at 0.
    pub fn from_scores(scores: impl IntoIterator<Item = (TrialLabel, f64)>) -> Result<Self> {
        ScoreSet::new(
            scores
                .into_iter()
                .map(|(label, s)| ScoreEntry {
                    test_id: String::new(),
                    label,
                    s_sasv: s,
                    s_cm: 0.0,
                })
                .collect(),
        )
    }

    pub fn push(&mut self, e: ScoreEntry) -> Result<()> {
        if !e.s_sasv.is_finite() || !e.s_cm.is_finite() {
            return Err(Error::contract(format!("non-finite score for {}", e.test_id)));
        }
        self.entries.push(e);
        Ok(())
    }

    pub fn entries(&self) -> &[ScoreEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `[target, nontarget, spoof]`.
    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for e in &self.entries {
            c[e.label.index()] += 1;
        }
        c
    }

    pub fn class_scores(&self, column: ScoreColumn) -> ClassScores {
        let mut c = ClassScores::default();
        for e in &self.entries {
            let s = match column {
                ScoreColumn::Sasv => e.s_sasv,
                ScoreColumn::Cm => e.s_cm,
            };
            c.by_label[e.label.index()].push(s);
        }
        c
    }

    /// Applies `f` to every SASV score.
    pub fn map_sasv(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        ScoreSet::new(
            self.entries
                .iter()
                .map(|e| ScoreEntry {
                    s_sasv: f(e.s_sasv),
                    ..e.clone()
                })
                .collect(),
        )
    }
}

/// Finite scores grouped by trial class.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassScores {
    by_label: [Vec<f64>; 3],
}

impl ClassScores {
    pub fn new(target: Vec<f64>, nontarget: Vec<f64>, spoof: Vec<f64>) -> Result<Self> {
        if target.iter().chain(&nontarget).chain(&spoof).any(|s| !s.is_finite()) {
            return Err(Error::contract("non-finite score"));
        }
        Ok(ClassScores {
            by_label: [target, nontarget, spoof],
        })
    }

    pub fn get(&self, label: TrialLabel) -> &[f64] {
        &self.by_label[label.index()]
    }

    pub fn target(&self) -> &[f64] {
        self.get(TrialLabel::Target)
    }

    pub fn nontarget(&self) -> &[f64] {
        self.get(TrialLabel::NonTarget)
    }

    pub fn spoof(&self) -> &[f64] {
        self.get(TrialLabel::Spoof)
    }

    pub fn counts(&self) -> [usize; 3] {
        [self.by_label[0].len(), self.by_label[1].len(), self.by_label[2].len()]
    }

    pub(crate) fn set(&mut self, label: TrialLabel, v: Vec<f64>) {
        self.by_label[label.index()] = v;
    }
}
