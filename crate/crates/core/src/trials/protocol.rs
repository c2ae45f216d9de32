//! Tab-separated protocol and metadata files.
//!
//! Protocol: `enroll_id1,enroll_id2,... <TAB> test_id <TAB> target|nontarget|spoof`.
//! Metadata: `utt_id <TAB> speaker_id <TAB> bonafide|spoof <TAB> attack_id|-`.
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use super::{Authenticity, Trial, TrialLabel, UtteranceMeta};
use crate::error::{Result, TextError};

fn fields<'a>(line: &'a str, n: usize, source: &'static str, lineno: usize) -> Result<Vec<&'a str>, TextError> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != n {
        return Err(TextError::new(source, lineno, format!("expected {n} tab-separated fields, found {}", f.len())));
    }
    if let Some(i) = f.iter().position(|s| s.is_empty()) {
        return Err(TextError::new(source, lineno, format!("field {} is empty", i + 1)));
    }
    Ok(f)
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

pub fn parse_protocol(text: &str) -> Result<Vec<Trial>, TextError> {
    const SRC: &str = "protocol";
    let mut out = Vec::new();
    for (no, line) in content_lines(text) {
        let f = fields(line, 3, SRC, no)?;
        let enroll_ids: Vec<String> = f[0].split(',').map(str::to_owned).collect();
        if enroll_ids.iter().any(String::is_empty) {
            return Err(TextError::new(SRC, no, "empty enrollment id"));
        }
        let label = TrialLabel::parse(f[2]).ok_or_else(|| TextError::new(SRC, no, format!("unknown label {:?}", f[2])))?;
        out.push(Trial {
            enroll_ids,
            test_id: f[1].to_owned(),
            label,
        });
    }
    Ok(out)
}

pub fn format_protocol(trials: &[Trial]) -> String {
    let mut s = String::new();
    for t in trials {
        let _ = writeln!(s, "{}\t{}\t{}", t.enroll_ids.join(","), t.test_id, t.label);
    }
    s
}

pub fn parse_metadata(text: &str) -> Result<Vec<UtteranceMeta>, TextError> {
    const SRC: &str = "metadata";
    let mut out = Vec::new();
    for (no, line) in content_lines(text) {
        let f = fields(line, 4, SRC, no)?;
        let authenticity = match f[2] {
            "bonafide" => Authenticity::BonaFide,
            "spoof" => Authenticity::Spoof,
            other => return Err(TextError::new(SRC, no, format!("expected bonafide|spoof, found {other:?}"))),
        };
        let attack_id = (f[3] != "-").then(|| f[3].to_owned());
        let meta = UtteranceMeta {
            utt_id: f[0].to_owned(),
            speaker_id: f[1].to_owned(),
            authenticity,
            attack_id,
        };
        if !meta.is_consistent() {
            return Err(TextError::new(SRC, no, "attack id must be given for spoofs and '-' for bona fide"));
        }
        out.push(meta);
    }
    Ok(out)
}

pub fn format_metadata(utts: &[UtteranceMeta]) -> String {
    let mut s = String::new();
    for u in utts {
        let auth = match u.authenticity {
            Authenticity::BonaFide => "bonafide",
            Authenticity::Spoof => "spoof",
        };
        let _ = writeln!(s, "{}\t{}\t{}\t{}", u.utt_id, u.speaker_id, auth, u.attack_id.as_deref().unwrap_or("-"));
    }
    s
}

pub fn read_protocol(path: impl AsRef<Path>) -> Result<Vec<Trial>> {
    Ok(parse_protocol(&std::fs::read_to_string(path)?)?)
}

pub fn write_protocol(trials: &[Trial], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_protocol(trials))?;
    Ok(())
}

pub fn read_metadata(path: impl AsRef<Path>) -> Result<Vec<UtteranceMeta>> {
    Ok(parse_metadata(&std::fs::read_to_string(path)?)?)
}

pub fn write_metadata(utts: &[UtteranceMeta], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_metadata(utts))?;
    Ok(())
}
