use rayon::prelude::*;

use super::engine::{inputs, Prepared};
use crate::data::EmbeddingStore;
use crate::error::Result;
use crate::metrics::{ScoreEntry, ScoreSet};
use crate::model::{cosine_score, DropoutKey, FusionModel, Mode};
use crate::trials::{labels_of, Trial};

const CHUNK: usize = 512;

/// Inference-mode scores for every trial, in trial order.
///
/// Rows are scored independently in inference mode, so chunking does not
/// change any value.
pub fn export_scores(model: &FusionModel, trials: &[Trial], store: &EmbeddingStore) -> Result<ScoreSet> {
    let prep = Prepared {
        resolved: store.resolve(trials)?,
        labels: trials.iter().map(labels_of).collect(),
    };
    let idx: Vec<usize> = (0..trials.len()).collect();
    let chunks: Vec<Vec<(f64, f64)>> = idx
        .par_chunks(CHUNK)
        .map(|c| {
            let trace = model.forward_batch(&inputs(store, &prep, c)?, Mode::Infer, DropoutKey::default())?;
            Ok(trace.s_sasv.iter().copied().zip(trace.s_cm.iter().copied()).collect())
        })
        .collect::<Result<_>>()?;
    ScoreSet::new(
        trials
            .iter()
            .zip(chunks.into_iter().flatten())
            .map(|(t, (s_sasv, s_cm))| ScoreEntry {
                test_id: t.test_id.clone(),
                label: t.label,
                s_sasv,
                s_cm,
            })
            .collect(),
    )
}

/// The ASV-only baseline: cosine score between the averaged enrollment and
/// the test ASV embedding, with no countermeasure. The CM column is 0.
pub fn cosine_scores(trials: &[Trial], store: &EmbeddingStore) -> Result<ScoreSet> {
    let resolved = store.resolve(trials)?;
    let mut out = Vec::with_capacity(trials.len());
    for (t, r) in trials.iter().zip(&resolved) {
        let inp = store.input_for(r)?;
        out.push(ScoreEntry {
            test_id: t.test_id.clone(),
            label: t.label,
            s_sasv: cosine_score(&inp.enroll_asv, &inp.test_asv),
            s_cm: 0.0,
        });
    }
    ScoreSet::new(out)
}
