use std::collections::HashSet;

use indexmap::IndexMap;
use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::{Trial, TrialLabel, UtteranceMeta};
use crate::error::{Error, Result};
use crate::rng::{self, domain, StreamRng};

pub const DEFAULT_ENROLL_SIZE: usize = 3;

/// Above this many admissible enrollment sets we sample by rejection instead
/// of enumerating.
const ENUMERATE_LIMIT: u128 = 4096;

/// Per-utterance pairing quotas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairingConfig {
    pub per_utt_targets: usize,
    pub per_utt_nontargets: usize,
    pub per_utt_spoofs: usize,
    /// Enrollment set size; smaller when fewer utterances are available.
    pub enroll_size: usize,
    pub seed: u64,
}

impl PairingConfig {
    pub fn new(per_utt_targets: usize, per_utt_nontargets: usize, per_utt_spoofs: usize, seed: u64) -> Self {
        PairingConfig {
            per_utt_targets,
            per_utt_nontargets,
            per_utt_spoofs,
            enroll_size: DEFAULT_ENROLL_SIZE,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BuildOutcome {
    pub trials: Vec<Trial>,
    /// Spoofed utterances whose speaker has no bona fide enrollment.
    pub skipped_spoofs: usize,
}

#[derive(Default)]
struct Speaker<'a> {
    bona: Vec<&'a str>,
    spoof: Vec<&'a str>,
}

fn group_speakers(utts: &[UtteranceMeta]) -> IndexMap<&str, Speaker<'_>> {
    let mut map: IndexMap<&str, Speaker<'_>> = IndexMap::new();
    for u in utts {
        let s = map.entry(u.speaker_id.as_str()).or_default();
        if u.is_bona_fide() {
            s.bona.push(&u.utt_id);
        } else {
            s.spoof.push(&u.utt_id);
        }
    }
    map
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
        if acc > u64::MAX as u128 {
            return u64::MAX as u128;
        }
    }
    acc
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < n - k + i {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Draws up to `quota` distinct enrollment sets from the union of `pools`,
/// each set lying within one pool and having size `min(enroll_size, |pool|)`.
fn draw_enrollments(pools: &[Vec<&str>], enroll_size: usize, quota: usize, rng: &mut StreamRng) -> Vec<Vec<String>> {
    let sizes: Vec<usize> = pools.iter().map(|p| enroll_size.min(p.len())).collect();
    let counts: Vec<u128> = pools
        .iter()
        .zip(&sizes)
        .map(|(p, &k)| if k == 0 { 0 } else { binomial(p.len(), k) })
        .collect();
    let total: u128 = counts.iter().sum();
    let want = (quota as u128).min(total) as usize;
    if want == 0 {
        return Vec::new();
    }
    let render = |pool: usize, idx: &[usize]| idx.iter().map(|&i| pools[pool][i].to_owned()).collect::<Vec<_>>();

    if total <= ENUMERATE_LIMIT {
        let mut all: Vec<(usize, Vec<usize>)> = Vec::with_capacity(total as usize);
        for (p, pool) in pools.iter().enumerate() {
            if sizes[p] > 0 {
                all.extend(combinations(pool.len(), sizes[p]).into_iter().map(|c| (p, c)));
            }
        }
        let picked = index::sample(rng, all.len(), want);
        return picked.iter().map(|i| render(all[i].0, &all[i].1)).collect();
    }

    let mut seen: HashSet<(usize, Vec<usize>)> = HashSet::new();
    let mut out = Vec::with_capacity(want);
    while out.len() < want {
        // pool chosen in proportion to its number of sets: uniform over the union
        let mut r = rng.random_range(0..total);
        let mut p = 0;
        while r >= counts[p] {
            r -= counts[p];
            p += 1;
        }
        let mut idx = index::sample(rng, pools[p].len(), sizes[p]).into_vec();
        idx.sort_unstable();
        if seen.insert((p, idx.clone())) {
            out.push(render(p, &idx));
        }
    }
    out
}

fn push_trials(out: &mut Vec<Trial>, sets: Vec<Vec<String>>, test: &str, label: TrialLabel) {
    out.extend(sets.into_iter().map(|enroll_ids| Trial {
        enroll_ids,
        test_id: test.to_owned(),
        label,
    }));
}

fn check_metadata(utts: &[UtteranceMeta]) -> Result<()> {
    let mut ids = HashSet::new();
    for u in utts {
        if !u.is_consistent() {
            return Err(Error::contract(format!("utterance {} has inconsistent attack tag", u.utt_id)));
        }
        if !ids.insert(u.utt_id.as_str()) {
            return Err(Error::contract(format!("duplicate utterance id {}", u.utt_id)));
        }
    }
    Ok(())
}

/// Target and non-target trials for every bona fide test utterance.
fn bona_fide_trials(speakers: &IndexMap<&str, Speaker<'_>>, cfg: &PairingConfig, rng: &mut StreamRng, out: &mut Vec<Trial>) {
    for (si, (_, spk)) in speakers.iter().enumerate() {
        for (ui, &test) in spk.bona.iter().enumerate() {
            let others: Vec<&str> = spk
                .bona
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != ui)
                .map(|(_, &u)| u)
                .collect();
            let sets = draw_enrollments(&[others], cfg.enroll_size, cfg.per_utt_targets, rng);
            push_trials(out, sets, test, TrialLabel::Target);

            let impostors: Vec<Vec<&str>> = speakers
                .values()
                .enumerate()
                .filter(|&(sj, _)| sj != si)
                .map(|(_, s)| s.bona.clone())
                .collect();
            let sets = draw_enrollments(&impostors, cfg.enroll_size, cfg.per_utt_nontargets, rng);
            push_trials(out, sets, test, TrialLabel::NonTarget);
        }
    }
}

/// Trials for the CM-training dataset: targets, zero-effort non-targets and
/// spoofs (a spoofed test against its own speaker's bona fide enrollment).
pub fn build_cm_trials(utts: &[UtteranceMeta], cfg: &PairingConfig) -> Result<BuildOutcome> {
    check_metadata(utts)?;
    let speakers = group_speakers(utts);
    let mut rng = rng::stream(cfg.seed, &[domain::TRIALS, 0]);
    let mut outcome = BuildOutcome::default();
    bona_fide_trials(&speakers, cfg, &mut rng, &mut outcome.trials);
    for spk in speakers.values() {
        if spk.bona.is_empty() {
            outcome.skipped_spoofs += spk.spoof.len();
            continue;
        }
        for &test in &spk.spoof {
            let sets = draw_enrollments(&[spk.bona.clone()], cfg.enroll_size, cfg.per_utt_spoofs, &mut rng);
            push_trials(&mut outcome.trials, sets, test, TrialLabel::Spoof);
        }
    }
    Ok(outcome)
}

/// Trials for the ASV-training dataset: bona fide utterances only, so never
/// a spoof trial. `per_utt_spoofs` is ignored.
pub fn build_asv_trials(utts: &[UtteranceMeta], cfg: &PairingConfig) -> Result<BuildOutcome> {
    check_metadata(utts)?;
    let bona: Vec<UtteranceMeta> = utts.iter().filter(|u| u.is_bona_fide()).cloned().collect();
    let speakers = group_speakers(&bona);
    let mut rng = rng::stream(cfg.seed, &[domain::TRIALS, 1]);
    let mut outcome = BuildOutcome::default();
    bona_fide_trials(&speakers, cfg, &mut rng, &mut outcome.trials);
    Ok(outcome)
}

/// `⌈fraction · n⌉`, at least 1 for a non-empty list.
pub fn sample_size(n: usize, fraction: f64) -> usize {
    if n == 0 {
        return 0;
    }
    // guard against 0.07·100 = 7.000000000000001
    let k = (fraction * n as f64 - 1e-9).ceil();
    (k.max(1.0) as usize).min(n)
}

/// Indices of a uniform sample without replacement, deterministic in `(seed, step)`.
pub fn sample_indices(n: usize, fraction: f64, seed: u64, step: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::contract(format!("sample fraction must be in (0, 1], got {fraction}")));
    }
    let mut rng = rng::stream(seed, &[domain::SAMPLE, step]);
    let k = sample_size(n, fraction);
    let mut idx = index::sample(&mut rng, n, k).into_vec();
    if k == n {
        // index::sample may return a sorted identity for k == n
        idx.shuffle(&mut rng);
    }
    Ok(idx)
}

pub fn sample_fraction(trials: &[Trial], fraction: f64, seed: u64, step: u64) -> Result<Vec<Trial>> {
    Ok(sample_indices(trials.len(), fraction, seed, step)?
        .into_iter()
        .map(|i| trials[i].clone())
        .collect())
}
