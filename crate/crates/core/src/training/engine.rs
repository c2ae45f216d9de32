use super::loss::{total_loss, LossConfig};
use super::optim::{apply_update, OptimizerState};
use crate::data::{EmbeddingStore, ResolvedTrial};
use crate::error::{Error, Result};
use crate::model::{DropoutKey, FusionModel, GroupSet, Mode, TrialInput};
use crate::trials::{labels_of, Trial, TrialLabels};

/// A trial list resolved against a store once, up front.
pub(crate) struct Prepared {
    pub resolved: Vec<ResolvedTrial>,
    pub labels: Vec<TrialLabels>,
}

const LISTED: usize = 5;

/// Fails with every unresolvable reference before any training happens.
pub(crate) fn prepare(store: &EmbeddingStore, trials: &[Trial]) -> Result<Prepared> {
    let missing = store.missing(trials);
    if !missing.is_empty() {
        let mut listing: Vec<String> = missing
            .iter()
            .take(LISTED)
            .map(|(i, u)| format!("trial {} ({}) -> {u}", i + 1, trials[*i].test_id))
            .collect();
        if missing.len() > LISTED {
            listing.push(format!("and {} more", missing.len() - LISTED));
        }
        return Err(Error::MissingUtterances {
            total: missing.len(),
            listing: listing.join("; "),
        });
    }
    Ok(Prepared {
        resolved: store.resolve(trials)?,
        labels: trials.iter().map(labels_of).collect(),
    })
}

pub(crate) fn inputs(store: &EmbeddingStore, prep: &Prepared, idx: &[usize]) -> Result<Vec<TrialInput>> {
    idx.iter().map(|&i| store.input_for(&prep.resolved[i])).collect()
}

/// Forward, backward and update on one minibatch; returns the summed loss.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gradient_step(
    model: &mut FusionModel,
    store: &EmbeddingStore,
    prep: &Prepared,
    idx: &[usize],
    loss: LossConfig,
    opt: &mut OptimizerState,
    frozen: GroupSet,
    key: DropoutKey,
) -> Result<f64> {
    model.set_frozen(frozen)?;
    let batch = inputs(store, prep, idx)?;
    let labels: Vec<TrialLabels> = idx.iter().map(|&i| prep.labels[i]).collect();
    let trace = model.forward_batch(&batch, Mode::Train, key)?;
    let l = total_loss(&trace, &labels, loss)?;
    let grads = model.backward(&trace, &l.d_sasv, &l.d_cm)?;
    model.update_running_stats(&trace, frozen)?;
    apply_update(model, &grads, opt, frozen)?;
    Ok(l.mean * idx.len() as f64)
}

/// Dropout stream key for minibatch `batch` of iteration `iter` in `phase`.
pub(crate) fn dropout_key(phase: u64, iter: u64, batch: u64) -> DropoutKey {
    DropoutKey {
        step: (phase << 40) | (iter << 20) | batch,
        first_trial: 0,
    }
}
