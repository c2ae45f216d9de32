use super::ClassScores;
use crate::error::{Error, Result};
use crate::trials::TrialLabel;

/// Probability-normalized densities over equal-width bins of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub density: Vec<f64>,
    /// Set when the class had no scores; densities are then all zero.
    pub empty: bool,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.density.len()
    }

    pub fn width(&self) -> f64 {
        1.0 / self.density.len() as f64
    }

    pub fn edges(&self, i: usize) -> (f64, f64) {
        let n = self.bins() as f64;
        (i as f64 / n, (i + 1) as f64 / n)
    }
}

/// Scores outside `[0, 1]` are counted in the nearest end bin.
pub fn histogram(c: &ClassScores, label: TrialLabel, bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::contract("histogram needs at least one bin"));
    }
    let scores = c.get(label);
    let mut counts = vec![0usize; bins];
    for &s in scores {
        let i = (s * bins as f64).floor();
        counts[(i.max(0.0) as usize).min(bins - 1)] += 1;
    }
    let width = 1.0 / bins as f64;
    let n = scores.len();
    Ok(Histogram {
        density: counts.iter().map(|&k| if n == 0 { 0.0 } else { k as f64 / (n as f64 * width) }).collect(),
        empty: n == 0,
    })
}

/// Histograms of all three classes on shared bins.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreHistograms {
    pub bins: usize,
    /// Indexed target, non-target, spoof.
    pub classes: [Histogram; 3],
}

pub fn score_histograms(c: &ClassScores, bins: usize) -> Result<ScoreHistograms> {
    Ok(ScoreHistograms {
        bins,
        classes: [
            histogram(c, TrialLabel::Target, bins)?,
            histogram(c, TrialLabel::NonTarget, bins)?,
            histogram(c, TrialLabel::Spoof, bins)?,
        ],
    })
}
