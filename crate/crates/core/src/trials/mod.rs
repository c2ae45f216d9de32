//! Trial construction: target, zero-effort non-target and spoof non-target
//! pairs, and the CM/ASV training datasets used by alternating training.

mod builder;
mod protocol;

pub use builder::{build_asv_trials, build_cm_trials, sample_fraction, sample_indices, sample_size, BuildOutcome, PairingConfig, DEFAULT_ENROLL_SIZE};
pub use protocol::{format_metadata, format_protocol, parse_metadata, parse_protocol, read_metadata, read_protocol, write_metadata, write_protocol};

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Authenticity {
    BonaFide,
    Spoof,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UtteranceMeta {
    pub utt_id: String,
    pub speaker_id: String,
    pub authenticity: Authenticity,
    /// Present exactly for spoofed utterances.
    pub attack_id: Option<String>,
}

impl UtteranceMeta {
    pub fn bona_fide(utt_id: impl Into<String>, speaker_id: impl Into<String>) -> Self {
        UtteranceMeta {
            utt_id: utt_id.into(),
            speaker_id: speaker_id.into(),
            authenticity: Authenticity::BonaFide,
            attack_id: None,
        }
    }

    pub fn spoof(utt_id: impl Into<String>, speaker_id: impl Into<String>, attack_id: impl Into<String>) -> Self {
        UtteranceMeta {
            utt_id: utt_id.into(),
            speaker_id: speaker_id.into(),
            authenticity: Authenticity::Spoof,
            attack_id: Some(attack_id.into()),
        }
    }

    pub fn is_bona_fide(&self) -> bool {
        self.authenticity == Authenticity::BonaFide
    }

    /// `attack_id` present iff spoofed.
    pub fn is_consistent(&self) -> bool {
        self.is_bona_fide() == self.attack_id.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrialLabel {
    Target,
    NonTarget,
    Spoof,
}

impl TrialLabel {
    pub const ALL: [TrialLabel; 3] = [TrialLabel::Target, TrialLabel::NonTarget, TrialLabel::Spoof];

    pub fn as_str(self) -> &'static str {
        match self {
            TrialLabel::Target => "target",
            TrialLabel::NonTarget => "nontarget",
            TrialLabel::Spoof => "spoof",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "target" => Some(TrialLabel::Target),
            "nontarget" => Some(TrialLabel::NonTarget),
            "spoof" => Some(TrialLabel::Spoof),
            _ => None,
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TrialLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Trial {
    /// Bona fide utterances of the claimed speaker.
    pub enroll_ids: Vec<String>,
    pub test_id: String,
    pub label: TrialLabel,
}

/// Binary targets of the two losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialLabels {
    pub y_sasv: bool,
    /// `true` for bona fide test speech.
    pub y_cm: bool,
}

pub fn labels_of(trial: &Trial) -> TrialLabels {
    labels_for(trial.label)
}

pub fn labels_for(label: TrialLabel) -> TrialLabels {
    match label {
        TrialLabel::Target => TrialLabels { y_sasv: true, y_cm: true },
        TrialLabel::NonTarget => TrialLabels { y_sasv: false, y_cm: true },
        TrialLabel::Spoof => TrialLabels { y_sasv: false, y_cm: false },
    }
}

/// The two training datasets of alternating training.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AtmmDatasets {
    /// All three classes; drives CM-focused steps.
    pub cm_dataset: Vec<Trial>,
    /// Target and non-target only; drives ASV-focused steps.
    pub asv_dataset: Vec<Trial>,
}

impl AtmmDatasets {
    pub fn new(cm_dataset: Vec<Trial>, asv_dataset: Vec<Trial>) -> crate::Result<Self> {
        if asv_dataset.iter().any(|t| t.label == TrialLabel::Spoof) {
            return Err(crate::Error::contract("the ASV dataset must not contain spoof trials"));
        }
        Ok(AtmmDatasets { cm_dataset, asv_dataset })
    }

    /// Both datasets concatenated, for conventional joint training.
    pub fn unified(&self) -> Vec<Trial> {
        self.cm_dataset.iter().chain(&self.asv_dataset).cloned().collect()
    }
}

/// Per-label counts `[target, nontarget, spoof]`.
pub fn class_counts(trials: &[Trial]) -> [usize; 3] {
    let mut c = [0; 3];
    for t in trials {
        c[t.label.index()] += 1;
    }
    c
}

/// Checks a trial's label against the metadata of its utterances.
pub fn trial_is_consistent(trial: &Trial, lookup: impl Fn(&str) -> Option<UtteranceMeta>) -> bool {
    let Some(test) = lookup(&trial.test_id) else {
        return false;
    };
    if trial.enroll_ids.is_empty() {
        return false;
    }
    let mut enroll_speaker: Option<String> = None;
    for id in &trial.enroll_ids {
        match lookup(id) {
            Some(m) if m.is_bona_fide() => match &enroll_speaker {
                None => enroll_speaker = Some(m.speaker_id),
                Some(s) if *s == m.speaker_id => {}
                Some(_) => return false,
            },
            _ => return false,
        }
    }
    let same = enroll_speaker.as_deref() == Some(test.speaker_id.as_str());
    match trial.label {
        TrialLabel::Target => same && test.is_bona_fide(),
        TrialLabel::NonTarget => !same && test.is_bona_fide(),
        TrialLabel::Spoof => !test.is_bona_fide(),
    }
}
