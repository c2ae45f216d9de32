//! Synthetic embeddings with the geometry of the spoofing problem.
//!
//! Each speaker owns a random unit mean direction. Spoofs imitate that
//! direction in ASV space, while CM embeddings of bona fide and spoofed speech
//! sit on opposite sides of a shared artifact axis.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::store::EmbeddingStore;
use crate::error::{Error, Result};
use crate::numerics::Vector;
use crate::rng::{self, domain, StreamRng};
use crate::trials::UtteranceMeta;

const ATTACKS: [&str; 6] = ["A01", "A02", "A03", "A04", "A05", "A06"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_speakers: usize,
    pub utts_per_speaker: usize,
    pub spoofs_per_speaker: usize,
    pub asv_dim: usize,
    pub cm_dim: usize,
    /// Norm of the per-utterance ASV noise (spread evenly over coordinates).
    pub speaker_noise: f64,
    /// In `[0, 1]`; 1 makes spoofs indistinguishable from the speaker in ASV space.
    pub spoof_mimicry: f64,
    /// Distance between the bona fide and spoof CM cluster centres.
    pub cm_separation: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_speakers: 50,
            utts_per_speaker: 20,
            spoofs_per_speaker: 20,
            asv_dim: 32,
            cm_dim: 16,
            speaker_noise: 0.3,
            spoof_mimicry: 0.95,
            cm_separation: 4.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_speakers < 2 {
            return bad(format!("n_speakers must be at least 2, got {}", self.n_speakers));
        }
        if self.asv_dim == 0 || self.cm_dim == 0 {
            return bad("embedding dimensions must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.spoof_mimicry) {
            return bad(format!("spoof_mimicry must be in [0, 1], got {}", self.spoof_mimicry));
        }
        if !(self.cm_separation >= 0.0 && self.cm_separation.is_finite()) {
            return bad(format!("cm_separation must be finite and non-negative, got {}", self.cm_separation));
        }
        if !(self.speaker_noise >= 0.0 && self.speaker_noise.is_finite()) {
            return bad(format!("speaker_noise must be finite and non-negative, got {}", self.speaker_noise));
        }
        Ok(())
    }
}

/// The hidden structure behind a generated store.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthLatent {
    /// Unit vector in CM space.
    pub artifact_axis: Vector,
    /// Unit mean direction per speaker, in speaker order.
    pub speaker_means: Vec<Vector>,
}

fn gaussian(rng: &mut StreamRng, dim: usize, scale: f64) -> Vector {
    (0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit(rng: &mut StreamRng, dim: usize) -> Vector {
    loop {
        let v = gaussian(rng, dim, 1.0);
        let n = v.norm();
        if n > 1e-12 {
            return v.scale(1.0 / n);
        }
    }
}

fn normalize(v: Vector) -> Vector {
    let n = v.norm();
    if n > 1e-12 {
        v.scale(1.0 / n)
    } else {
        v
    }
}

pub fn speaker_id(s: usize) -> String {
    format!("spk{s:03}")
}

pub fn latent(cfg: &SynthConfig) -> Result<SynthLatent> {
    cfg.validate()?;
    let artifact_axis = unit(&mut rng::stream(cfg.seed, &[domain::SYNTH, 0]), cfg.cm_dim);
    let speaker_means = (0..cfg.n_speakers)
        .map(|s| unit(&mut rng::stream(cfg.seed, &[domain::SYNTH, 1, s as u64]), cfg.asv_dim))
        .collect();
    Ok(SynthLatent {
        artifact_axis,
        speaker_means,
    })
}

/// Generates a store; records are grouped by speaker, bona fide first.
pub fn generate(cfg: &SynthConfig) -> Result<EmbeddingStore> {
    let lat = latent(cfg)?;
    let noise = cfg.speaker_noise / (cfg.asv_dim as f64).sqrt();
    let half = cfg.cm_separation / 2.0;
    let cm_embed = |rng: &mut StreamRng, sign: f64| {
        let spread = gaussian(rng, cfg.cm_dim, 1.0);
        Vector::from_iter(
            lat.artifact_axis
                .as_slice()
                .iter()
                .zip(spread.as_slice())
                .map(|(a, e)| sign * half * a + e),
        )
    };

    let mut store = EmbeddingStore::new(cfg.asv_dim, cfg.cm_dim);
    for (s, mean) in lat.speaker_means.iter().enumerate() {
        let spk = speaker_id(s);
        let mut rng = rng::stream(cfg.seed, &[domain::SYNTH, 2, s as u64]);
        for u in 0..cfg.utts_per_speaker {
            let n = gaussian(&mut rng, cfg.asv_dim, noise);
            let asv = normalize(mean.as_slice().iter().zip(n.as_slice()).map(|(m, e)| m + e).collect());
            let cm = cm_embed(&mut rng, 1.0);
            store.insert(UtteranceMeta::bona_fide(format!("{spk}-b{u:03}"), spk.clone()), asv, cm)?;
        }
        let mu = cfg.spoof_mimicry;
        for u in 0..cfg.spoofs_per_speaker {
            let r = unit(&mut rng, cfg.asv_dim);
            let n = gaussian(&mut rng, cfg.asv_dim, noise);
            let asv = normalize(
                (0..cfg.asv_dim)
                    .map(|i| mu * mean[i] + (1.0 - mu) * r[i] + n[i])
                    .collect(),
            );
            let cm = cm_embed(&mut rng, -1.0);
            let attack = ATTACKS[u % ATTACKS.len()];
            store.insert(UtteranceMeta::spoof(format!("{spk}-s{u:03}"), spk.clone(), attack), asv, cm)?;
        }
    }
    Ok(store)
}
