use indexmap::IndexMap;

use crate::error::{check_dim, Error, Result};
use crate::model::{enroll_aggregate, TrialInput};
use crate::numerics::Vector;
use crate::trials::{Trial, UtteranceMeta};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub meta: UtteranceMeta,
    pub asv: Vector,
    pub cm: Vector,
}

/// Per-utterance ASV and CM embeddings, in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    asv_dim: usize,
    cm_dim: usize,
    records: IndexMap<String, EmbeddingRecord>,
}

/// A trial with its utterances resolved to store positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedTrial {
    pub enroll: Vec<usize>,
    pub test: usize,
}

impl EmbeddingStore {
    pub fn new(asv_dim: usize, cm_dim: usize) -> Self {
        EmbeddingStore {
            asv_dim,
            cm_dim,
            records: IndexMap::new(),
        }
    }

    pub fn asv_dim(&self) -> usize {
        self.asv_dim
    }

    pub fn cm_dim(&self) -> usize {
        self.cm_dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn insert(&mut self, meta: UtteranceMeta, asv: Vector, cm: Vector) -> Result<()> {
        check_dim("store asv embedding", self.asv_dim, asv.dim())?;
        check_dim("store cm embedding", self.cm_dim, cm.dim())?;
        if !asv.is_finite() || !cm.is_finite() {
            return Err(Error::contract(format!("non-finite embedding for {}", meta.utt_id)));
        }
        if !meta.is_consistent() {
            return Err(Error::contract(format!("utterance {} has inconsistent attack tag", meta.utt_id)));
        }
        if self.records.contains_key(&meta.utt_id) {
            return Err(Error::contract(format!("duplicate utterance id {}", meta.utt_id)));
        }
        self.records.insert(meta.utt_id.clone(), EmbeddingRecord { meta, asv, cm });
        Ok(())
    }

    pub fn get(&self, utt_id: &str) -> Option<&EmbeddingRecord> {
        self.records.get(utt_id)
    }

    pub fn get_index(&self, i: usize) -> Option<&EmbeddingRecord> {
        self.records.get_index(i).map(|(_, r)| r)
    }

    pub fn records(&self) -> impl Iterator<Item = &EmbeddingRecord> {
        self.records.values()
    }

    pub fn metadata(&self) -> Vec<UtteranceMeta> {
        self.records.values().map(|r| r.meta.clone()).collect()
    }

    /// Resolves every trial; the error lists the first trial with an unknown
    /// utterance.
    pub fn resolve(&self, trials: &[Trial]) -> Result<Vec<ResolvedTrial>> {
        trials.iter().map(|t| self.resolve_one(t)).collect()
    }

    /// All trials referencing utterances missing from the store.
    pub fn missing(&self, trials: &[Trial]) -> Vec<(usize, String)> {
        let mut out = Vec::new();
        for (i, t) in trials.iter().enumerate() {
            for id in t.enroll_ids.iter().chain(std::iter::once(&t.test_id)) {
                if !self.records.contains_key(id) {
                    out.push((i, id.clone()));
                }
            }
        }
        out
    }

    fn resolve_one(&self, t: &Trial) -> Result<ResolvedTrial> {
        let find = |id: &String| {
            self.records.get_index_of(id).ok_or_else(|| Error::MissingUtterance {
                trial: format!("{}->{}", t.enroll_ids.join(","), t.test_id),
                utt: id.clone(),
            })
        };
        if t.enroll_ids.is_empty() {
            return Err(Error::contract(format!("trial with test {} has no enrollment", t.test_id)));
        }
        Ok(ResolvedTrial {
            enroll: t.enroll_ids.iter().map(find).collect::<Result<_>>()?,
            test: find(&t.test_id)?,
        })
    }

    /// Model input for a resolved trial: enrollment embeddings are averaged.
    pub fn input_for(&self, t: &ResolvedTrial) -> Result<TrialInput> {
        let rec = |i: usize| self.records.get_index(i).map(|(_, r)| r).ok_or_else(|| Error::contract("stale trial index"));
        let enroll: Vec<&EmbeddingRecord> = t.enroll.iter().map(|&i| rec(i)).collect::<Result<_>>()?;
        let test = rec(t.test)?;
        let asv: Vec<Vector> = enroll.iter().map(|r| r.asv.clone()).collect();
        let cm: Vec<Vector> = enroll.iter().map(|r| r.cm.clone()).collect();
        Ok(TrialInput {
            enroll_asv: enroll_aggregate(&asv)?,
            test_asv: test.asv.clone(),
            enroll_cm: enroll_aggregate(&cm)?,
            test_cm: test.cm.clone(),
        })
    }

    pub fn trial_input(&self, trial: &Trial) -> Result<TrialInput> {
        self.input_for(&self.resolve_one(trial)?)
    }
}
