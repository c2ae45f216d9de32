//! Score files, metric reports and histogram tables.
//!
//! Floats are written with the shortest representation that parses back to
//! the same value.

use std::fmt::Write as _;
use std::path::Path;

use super::histogram::ScoreHistograms;
use super::{ScoreEntry, ScoreSet};
use crate::error::{Result, TextError};
use crate::trials::TrialLabel;

const SCORE_HEADER: &str = "test_id\tlabel\ts_sasv\ts_cm";
const REPORT_HEADER: &str = "metric\tpoint\tci_lower\tci_upper\tthreshold";
const HIST_HEADER: &str = "bin_left,bin_right,target,nontarget,spoof";

fn parse_f64(s: &str, what: &str, source: &'static str, line: usize) -> Result<f64, TextError> {
    let v: f64 = s.parse().map_err(|_| TextError::new(source, line, format!("{what}: not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(TextError::new(source, line, format!("{what}: non-finite value")));
    }
    Ok(v)
}

pub fn format_scores(scores: &ScoreSet) -> String {
    let mut s = String::with_capacity(32 * (scores.len() + 1));
    s.push_str(SCORE_HEADER);
    s.push('\n');
    for e in scores.entries() {
        let _ = writeln!(s, "{}\t{}\t{}\t{}", e.test_id, e.label, e.s_sasv, e.s_cm);
    }
    s
}

/// Accepts the header line, blank lines and `#` comments anywhere.
pub fn parse_scores(text: &str) -> Result<ScoreSet, TextError> {
    const SRC: &str = "scores";
    let mut out = ScoreSet::default();
    for (i, line) in text.lines().enumerate() {
        let no = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') || line == SCORE_HEADER {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(TextError::new(SRC, no, format!("expected 4 tab-separated fields, found {}", f.len())));
        }
        if f[0].is_empty() {
            return Err(TextError::new(SRC, no, "empty test id"));
        }
        let label = TrialLabel::parse(f[1]).ok_or_else(|| TextError::new(SRC, no, format!("unknown label {:?}", f[1])))?;
        let entry = ScoreEntry {
            test_id: f[0].to_owned(),
            label,
            s_sasv: parse_f64(f[2], "s_sasv", SRC, no)?,
            s_cm: parse_f64(f[3], "s_cm", SRC, no)?,
        };
        out.push(entry).map_err(|e| TextError::new(SRC, no, e.to_string()))?;
    }
    Ok(out)
}

pub fn write_scores(scores: &ScoreSet, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_scores(scores))?;
    Ok(())
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<ScoreSet> {
    Ok(parse_scores(&std::fs::read_to_string(path)?)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub metric: String,
    pub point: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub threshold: f64,
}

pub fn format_metric_report(rows: &[MetricRow]) -> String {
    let mut s = String::from(REPORT_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}", r.metric, r.point, r.ci_lower, r.ci_upper, r.threshold);
    }
    s
}

pub fn parse_metric_report(text: &str) -> Result<Vec<MetricRow>, TextError> {
    const SRC: &str = "metric report";
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == REPORT_HEADER => {}
        _ => return Err(TextError::new(SRC, 1, format!("expected header {REPORT_HEADER:?}"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let no = i + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(TextError::new(SRC, no, format!("expected 5 fields, found {}", f.len())));
        }
        let num = |j: usize, what: &str| f[j].parse::<f64>().map_err(|_| TextError::new(SRC, no, format!("{what}: not a number: {:?}", f[j])));
        out.push(MetricRow {
            metric: f[0].to_owned(),
            point: num(1, "point")?,
            ci_lower: num(2, "ci_lower")?,
            ci_upper: num(3, "ci_upper")?,
            threshold: num(4, "threshold")?,
        });
    }
    Ok(out)
}

pub fn write_metric_report(rows: &[MetricRow], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_metric_report(rows))?;
    Ok(())
}

/// Empty classes are listed in a trailing `#` comment.
pub fn format_histogram_csv(h: &ScoreHistograms) -> String {
    let mut s = String::from(HIST_HEADER);
    s.push('\n');
    for i in 0..h.bins {
        let (l, r) = h.classes[0].edges(i);
        let _ = writeln!(s, "{l},{r},{},{},{}", h.classes[0].density[i], h.classes[1].density[i], h.classes[2].density[i]);
    }
    let empty: Vec<&str> = TrialLabel::ALL.iter().filter(|l| h.classes[l.index()].empty).map(|l| l.as_str()).collect();
    if !empty.is_empty() {
        let _ = writeln!(s, "# empty: {}", empty.join(","));
    }
    s
}

pub fn write_histogram_csv(h: &ScoreHistograms, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_histogram_csv(h))?;
    Ok(())
}
