use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FusionModel, GradientSet, GroupSet, GroupTag};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be finite and non-negative, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must be in [0, 1)".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config("Adam eps must be positive".into()));
        }
        Ok(())
    }
}

/// Optimizer moments, one slot per model parameter.
///
/// Each parameter keeps its own step count so that a group skipped while
/// frozen resumes with the right bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub cfg: OptimizerConfig,
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub steps: Vec<u64>,
}

impl OptimizerState {
    pub fn new(cfg: OptimizerConfig, model: &FusionModel) -> Result<Self> {
        cfg.validate()?;
        let zeros: Vec<Matrix> = model
            .params()
            .iter()
            .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
            .collect();
        Ok(OptimizerState {
            cfg,
            m: zeros.clone(),
            v: zeros,
            steps: vec![0; model.params().len()],
        })
    }
}

/// One optimizer step on every parameter outside `frozen`. Frozen parameters
/// and their moments are left untouched.
pub fn apply_update(model: &mut FusionModel, grads: &GradientSet, opt: &mut OptimizerState, frozen: GroupSet) -> Result<()> {
    if frozen.contains(GroupTag::Joint) {
        return Err(Error::contract("the joint group cannot be frozen"));
    }
    grads.check_compatible(model.params())?;
    if opt.steps.len() != model.params().len() {
        return Err(Error::contract("optimizer state does not match the model"));
    }
    let c = opt.cfg;
    for (i, p) in model.params_mut().iter_mut().enumerate() {
        if frozen.contains(p.group) {
            continue;
        }
        let g = grads.grads[i].as_slice();
        let w = p.value.as_mut_slice();
        match c.kind {
            OptimizerKind::Sgd => {
                for (w, g) in w.iter_mut().zip(g) {
                    *w -= c.learning_rate * g;
                }
            }
            OptimizerKind::Adam => {
                opt.steps[i] += 1;
                let t = opt.steps[i] as i32;
                let bc1 = 1.0 - c.beta1.powi(t);
                let bc2 = 1.0 - c.beta2.powi(t);
                let m = opt.m[i].as_mut_slice();
                let v = opt.v[i].as_mut_slice();
                for k in 0..w.len() {
                    m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
                    v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
                    let mh = m[k] / bc1;
                    let vh = v[k] / bc2;
                    w[k] -= c.learning_rate * mh / (vh.sqrt() + c.eps);
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, Strategy};

    fn model() -> FusionModel {
        FusionModel::new(ModelConfig::new(Strategy::S1, 6, 4)).unwrap()
    }

    fn ones(m: &FusionModel) -> GradientSet {
        let mut g = GradientSet {
            grads: m.params().iter().map(|p| Matrix::zeros(p.value.rows(), p.value.cols())).collect(),
            flagged: GroupSet::empty(),
        };
        for x in &mut g.grads {
            x.as_mut_slice().fill(0.5);
        }
        g
    }

    #[test]
    fn frozen_groups_are_bitwise_unchanged() {
        let mut m = model();
        let g = ones(&m);
        let mut opt = OptimizerState::new(OptimizerConfig::default(), &m).unwrap();
        let before: Vec<[u8; 32]> = GroupTag::ALL.iter().map(|&t| m.digest(t)).collect();
        apply_update(&mut m, &g, &mut opt, GroupSet::of(&[GroupTag::AsvPath])).unwrap();
        assert_eq!(m.digest(GroupTag::AsvPath), before[1]);
        assert_ne!(m.digest(GroupTag::CmPath), before[0]);
        assert_ne!(m.digest(GroupTag::Joint), before[2]);
        for (i, p) in m.params().iter().enumerate() {
            let frozen = p.group == GroupTag::AsvPath;
            assert_eq!(opt.steps[i] == 0, frozen);
            assert_eq!(opt.m[i].as_slice().iter().all(|&x| x == 0.0), frozen);
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op_and_joint_cannot_freeze() {
        let mut m = model();
        let before = m.flat_params();
        let mut g = ones(&m);
        g.scale(0.0);
        let mut opt = OptimizerState::new(OptimizerConfig::default(), &m).unwrap();
        apply_update(&mut m, &g, &mut opt, GroupSet::empty()).unwrap();
        assert_eq!(m.flat_params(), before);
        let err = apply_update(&mut m, &g, &mut opt, GroupSet::of(&[GroupTag::Joint]));
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn deterministic_and_sgd_rule() {
        let run = |kind| {
            let mut m = model();
            let g = ones(&m);
            let mut opt = OptimizerState::new(OptimizerConfig { kind, learning_rate: 0.1, ..Default::default() }, &m).unwrap();
            apply_update(&mut m, &g, &mut opt, GroupSet::empty()).unwrap();
            m.flat_params()
        };
        assert_eq!(run(OptimizerKind::Adam), run(OptimizerKind::Adam));
        let base = model().flat_params();
        for (a, b) in run(OptimizerKind::Sgd).iter().zip(&base) {
            assert_eq!(*a, b - 0.1 * 0.5);
        }
        // first Adam step moves each weight by about the learning rate
        for (a, b) in run(OptimizerKind::Adam).iter().zip(&base) {
            assert!(((b - a) - 0.1).abs() < 1e-6);
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut m = model();
        let mut g = ones(&m);
        g.grads.pop();
        let mut opt = OptimizerState::new(OptimizerConfig::default(), &m).unwrap();
        assert!(apply_update(&mut m, &g, &mut opt, GroupSet::empty()).is_err());
    }
}
