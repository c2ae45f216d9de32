use std::fmt;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Parameter group used for selective freezing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupTag {
    CmPath,
    AsvPath,
    Joint,
}

impl GroupTag {
    pub const ALL: [GroupTag; 3] = [GroupTag::CmPath, GroupTag::AsvPath, GroupTag::Joint];

    pub fn as_str(self) -> &'static str {
        match self {
            GroupTag::CmPath => "cm_path",
            GroupTag::AsvPath => "asv_path",
            GroupTag::Joint => "joint",
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            GroupTag::CmPath => 0,
            GroupTag::AsvPath => 1,
            GroupTag::Joint => 2,
        }
    }
}

impl fmt::Display for GroupTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Small set of group tags.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct GroupSet([bool; 3]);

impl GroupSet {
    pub fn empty() -> Self {
        GroupSet::default()
    }

    pub fn of(tags: &[GroupTag]) -> Self {
        let mut s = GroupSet::empty();
        for &t in tags {
            s.insert(t);
        }
        s
    }

    pub fn insert(&mut self, tag: GroupTag) {
        self.0[tag.index()] = true;
    }

    pub fn contains(&self, tag: GroupTag) -> bool {
        self.0[tag.index()]
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }

    pub fn iter(&self) -> impl Iterator<Item = GroupTag> + '_ {
        GroupTag::ALL.into_iter().filter(|t| self.contains(*t))
    }
}

/// Kind of a stored tensor. Running statistics travel with the model but are
/// not touched by the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    Transform,
    BnScale,
    BnShift,
}

/// One trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: &'static str,
    pub group: GroupTag,
    pub kind: ParamKind,
    pub value: Matrix,
}

/// Batch-norm running statistics for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BnRunning {
    pub name: &'static str,
    pub group: GroupTag,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// View of one freeze group: which parameters it owns and whether it is frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGroup {
    pub tag: GroupTag,
    pub params: Vec<usize>,
    pub frozen: bool,
}

/// Gradients for every parameter, aligned index-for-index with the model's
/// parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub grads: Vec<Matrix>,
    /// Groups that were frozen on the model when these gradients were computed.
    pub flagged: GroupSet,
}

impl GradientSet {
    pub(crate) fn zeros_like(params: &[Param]) -> Self {
        GradientSet {
            grads: params
                .iter()
                .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
                .collect(),
            flagged: GroupSet::empty(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.grads
            .iter()
            .all(|g| g.as_slice().iter().all(|&v| v == 0.0))
    }

    /// All gradient entries in parameter order.
    pub fn flatten(&self) -> Vec<f64> {
        self.grads
            .iter()
            .flat_map(|g| g.as_slice().iter().copied())
            .collect()
    }

    pub fn scale(&mut self, c: f64) {
        for g in &mut self.grads {
            g.as_mut_slice().iter_mut().for_each(|v| *v *= c);
        }
    }

    pub fn check_compatible(&self, params: &[Param]) -> Result<()> {
        if self.grads.len() != params.len() {
            return Err(Error::Dimension {
                context: "gradient set length",
                expected: params.len(),
                found: self.grads.len(),
            });
        }
        for (g, p) in self.grads.iter().zip(params) {
            if g.rows() != p.value.rows() || g.cols() != p.value.cols() {
                return Err(Error::contract(format!(
                    "gradient for {} has shape {}x{}, parameter is {}x{}",
                    p.name,
                    g.rows(),
                    g.cols(),
                    p.value.rows(),
                    p.value.cols()
                )));
            }
        }
        Ok(())
    }
}

/// SHA-256 over the little-endian bytes of every value in a group
/// (parameters, then running statistics).
pub fn group_digest(params: &[Param], running: &[BnRunning], tag: GroupTag) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in params.iter().filter(|p| p.group == tag) {
        h.update(p.name.as_bytes());
        for v in p.value.as_slice() {
            h.update(v.to_le_bytes());
        }
    }
    for r in running.iter().filter(|r| r.group == tag) {
        h.update(r.name.as_bytes());
        for v in r.mean.iter().chain(&r.var) {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().into()
}
