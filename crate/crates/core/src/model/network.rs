//! The fusion network: construction, batched forward pass and hand-written
//! reverse-mode gradients.
//!
//! Layer map (S1; rows are trials, `·ᵀ` is a weight applied to every row):
//!
//! ```text
//! CM path   x_cm ─ affine ─ [bn] ─ w_a ─ relu ─ [drop] ─ affine ─ [bn] ─ w_a ─ relu ─ [drop]
//!                 ─ affine ─ l2 ─ affine(→1) ─ σ = s_cm
//! ASV path  [enroll_asv | test_asv] ─ affine ─ [bn] ─ relu ─ [drop] ─ l2 = e_asv
//! gate      e_sasv = s_cm · e_asv
//! joint     e_sasv ─ affine ─ [bn] ─ relu ─ [drop] ─ affine(→1) ─ σ = s_sasv
//! ```
//!
//! S2 moves the gate after the joint hidden layer; S3 drops the ASV network and
//! fuses `((1 + cos)/2, s_cm)` with a single affine layer.

use std::hash::Hasher;

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::config::{CmInput, ModelConfig, Strategy};
use super::params::{group_digest, BnRunning, GradientSet, GroupSet, GroupTag, Param, ParamGroup, ParamKind};
use crate::error::{check_dim, Error, Result};
use crate::numerics::{dot, l2_normalize_backward, l2_normalize_in_place, norm, relu_grad, relu_scalar, sigmoid, Matrix, Vector};
use crate::rng::{self, domain, StreamRng};

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.9;

/// Embeddings of one trial. `enroll_*` are already aggregated over the
/// enrollment set.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialInput {
    pub enroll_asv: Vector,
    pub test_asv: Vector,
    pub enroll_cm: Vector,
    pub test_cm: Vector,
}

/// Mean of equally sized enrollment embeddings.
pub fn enroll_aggregate(embeddings: &[Vector]) -> Result<Vector> {
    let first = embeddings
        .first()
        .ok_or_else(|| Error::contract("enrollment set is empty"))?;
    let mut acc = vec![0.0; first.dim()];
    for e in embeddings {
        check_dim("enrollment embedding", first.dim(), e.dim())?;
        for (a, v) in acc.iter_mut().zip(e.as_slice()) {
            *a += v;
        }
    }
    let n = embeddings.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

/// `s_cm · e_asv`.
pub fn saga_gate(s_cm: f64, e_asv: &Vector) -> Vector {
    e_asv.scale(s_cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active, batch-norm uses batch statistics.
    Train,
    /// Deterministic; batch-norm uses running statistics.
    Infer,
}

/// Selects the dropout streams of a training forward pass. Row `i` of the
/// batch draws from the stream `(model seed, step, first_trial + i)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DropoutKey {
    pub step: u64,
    pub first_trial: u64,
}

#[derive(Debug, Clone, Copy)]
struct Dense {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct Bn {
    gamma: usize,
    beta: usize,
    running: usize,
}

#[derive(Debug, Clone, Copy)]
struct Hidden {
    dense: Dense,
    bn: Option<Bn>,
    transform: Option<usize>,
}

#[derive(Debug, Clone)]
struct Layout {
    cm1: Hidden,
    cm2: Hidden,
    cm3: Dense,
    cm_out: Dense,
    asv: Option<Hidden>,
    post: Option<Hidden>,
    out: Dense,
}

/// The SASV fusion network.
#[derive(Debug, Clone)]
pub struct FusionModel {
    cfg: ModelConfig,
    params: Vec<Param>,
    running: Vec<BnRunning>,
    layout: Layout,
    frozen: GroupSet,
    version: u64,
}

struct Builder<'a> {
    params: Vec<Param>,
    running: Vec<BnRunning>,
    rng: &'a mut StreamRng,
}

impl Builder<'_> {
    fn dense(&mut self, name_w: &'static str, name_b: &'static str, group: GroupTag, out: usize, inp: usize) -> Dense {
        let limit = (6.0 / (inp + out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite init bound");
        let data = (0..out * inp).map(|_| dist.sample(self.rng)).collect();
        let w = self.push(name_w, group, ParamKind::Weight, Matrix::from_vec(out, inp, data).expect("shape"));
        let b = self.push(name_b, group, ParamKind::Bias, Matrix::zeros(1, out));
        Dense { w, b }
    }

    fn bn(&mut self, names: [&'static str; 3], group: GroupTag, dim: usize) -> Bn {
        let mut ones = Matrix::zeros(1, dim);
        ones.as_mut_slice().fill(1.0);
        let gamma = self.push(names[0], group, ParamKind::BnScale, ones);
        let beta = self.push(names[1], group, ParamKind::BnShift, Matrix::zeros(1, dim));
        self.running.push(BnRunning {
            name: names[2],
            group,
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
        });
        Bn {
            gamma,
            beta,
            running: self.running.len() - 1,
        }
    }

    fn transform(&mut self, name: &'static str, dim: usize) -> usize {
        self.push(name, GroupTag::CmPath, ParamKind::Transform, Matrix::identity(dim))
    }

    fn push(&mut self, name: &'static str, group: GroupTag, kind: ParamKind, value: Matrix) -> usize {
        self.params.push(Param { name, group, kind, value });
        self.params.len() - 1
    }
}

impl FusionModel {
    /// Builds a freshly initialized model. Parameters are created (and drawn
    /// from the seeded stream) in group order: CM path, ASV path, joint.
    pub fn new(cfg: ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng::stream(cfg.seed, &[domain::MODEL_INIT]);
        let mut b = Builder {
            params: Vec::new(),
            running: Vec::new(),
            rng: &mut rng,
        };
        let (hc, bn) = (cfg.hidden_cm, cfg.use_batchnorm);
        let cm = GroupTag::CmPath;

        let cm1_dense = b.dense("cm1.w", "cm1.b", cm, hc, cfg.cm_input_dim());
        let cm1_bn = bn.then(|| b.bn(["cm1.bn.gamma", "cm1.bn.beta", "cm1.bn.running"], cm, hc));
        let wa1 = cfg.trelu.then(|| b.transform(if cfg.share_wa { "cm.w_a" } else { "cm1.w_a" }, hc));
        let cm2_dense = b.dense("cm2.w", "cm2.b", cm, hc, hc);
        let cm2_bn = bn.then(|| b.bn(["cm2.bn.gamma", "cm2.bn.beta", "cm2.bn.running"], cm, hc));
        let wa2 = match (cfg.trelu, cfg.share_wa) {
            (false, _) => None,
            (true, true) => wa1,
            (true, false) => Some(b.transform("cm2.w_a", hc)),
        };
        let cm3 = b.dense("cm3.w", "cm3.b", cm, hc, hc);
        let cm_out = b.dense("cm_out.w", "cm_out.b", cm, 1, hc);
        let cm1 = Hidden {
            dense: cm1_dense,
            bn: cm1_bn,
            transform: wa1,
        };
        let cm2 = Hidden {
            dense: cm2_dense,
            bn: cm2_bn,
            transform: wa2,
        };

        let (asv, post, out) = match cfg.strategy {
            Strategy::S1 | Strategy::S2 => {
                let asv = GroupTag::AsvPath;
                let dense = b.dense("asv.w", "asv.b", asv, cfg.hidden_asv, 2 * cfg.asv_dim);
                let abn = bn.then(|| b.bn(["asv.bn.gamma", "asv.bn.beta", "asv.bn.running"], asv, cfg.hidden_asv));
                let j = GroupTag::Joint;
                let pdense = b.dense("post.w", "post.b", j, cfg.hidden_post, cfg.hidden_asv);
                let pbn = bn.then(|| b.bn(["post.bn.gamma", "post.bn.beta", "post.bn.running"], j, cfg.hidden_post));
                let out = b.dense("out.w", "out.b", j, 1, cfg.hidden_post);
                (
                    Some(Hidden {
                        dense,
                        bn: abn,
                        transform: None,
                    }),
                    Some(Hidden {
                        dense: pdense,
                        bn: pbn,
                        transform: None,
                    }),
                    out,
                )
            }
            Strategy::S3 => {
                let out = b.dense("fusion.w", "fusion.b", GroupTag::Joint, 1, 2);
                (None, None, out)
            }
        };
        let Builder { params, running, .. } = b;
        Ok(FusionModel {
            cfg,
            params,
            running,
            layout: Layout {
                cm1,
                cm2,
                cm3,
                cm_out,
                asv,
                post,
                out,
            },
            frozen: GroupSet::empty(),
            version: 0,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn running_stats(&self) -> &[BnRunning] {
        &self.running
    }

    /// Number of scalar trainable parameters.
    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.as_slice().len()).sum()
    }

    /// Mutable access to the parameters. Invalidates outstanding traces.
    pub fn params_mut(&mut self) -> &mut [Param] {
        self.version += 1;
        &mut self.params
    }

    pub(crate) fn running_mut(&mut self) -> &mut [BnRunning] {
        self.version += 1;
        &mut self.running
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn groups(&self) -> Vec<ParamGroup> {
        GroupTag::ALL
            .into_iter()
            .map(|tag| ParamGroup {
                tag,
                params: (0..self.params.len())
                    .filter(|&i| self.params[i].group == tag)
                    .collect(),
                frozen: self.frozen.contains(tag),
            })
            .collect()
    }

    pub fn frozen(&self) -> GroupSet {
        self.frozen
    }

    /// The joint group can never be frozen.
    pub fn set_frozen(&mut self, frozen: GroupSet) -> Result<()> {
        if frozen.contains(GroupTag::Joint) {
            return Err(Error::contract("the joint group cannot be frozen"));
        }
        self.frozen = frozen;
        Ok(())
    }

    pub fn digest(&self, tag: GroupTag) -> [u8; 32] {
        group_digest(&self.params, &self.running, tag)
    }

    /// All parameter values in parameter order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.params
            .iter()
            .flat_map(|p| p.value.as_slice().iter().copied())
            .collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        check_dim("flat parameter vector", self.param_count(), flat.len())?;
        let mut off = 0;
        for p in self.params_mut() {
            let n = p.value.as_slice().len();
            p.value.as_mut_slice().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    fn p(&self, i: usize) -> &Matrix {
        &self.params[i].value
    }

    /// Single-trial forward pass.
    pub fn forward(&self, input: &TrialInput, mode: Mode) -> Result<ForwardTrace> {
        self.forward_batch(std::slice::from_ref(input), mode, DropoutKey::default())
    }

    /// Batched forward pass; row `i` of every trace field belongs to `inputs[i]`.
    pub fn forward_batch(&self, inputs: &[TrialInput], mode: Mode, key: DropoutKey) -> Result<ForwardTrace> {
        let cfg = &self.cfg;
        let n = inputs.len();
        let mut x_cm = Matrix::zeros(n, cfg.cm_input_dim());
        let mut x_asv = Matrix::zeros(n, 2 * cfg.asv_dim);
        for (i, t) in inputs.iter().enumerate() {
            check_dim("enroll_asv", cfg.asv_dim, t.enroll_asv.dim())?;
            check_dim("test_asv", cfg.asv_dim, t.test_asv.dim())?;
            check_dim("enroll_cm", cfg.cm_dim, t.enroll_cm.dim())?;
            check_dim("test_cm", cfg.cm_dim, t.test_cm.dim())?;
            let r = x_cm.row_mut(i);
            match cfg.cm_input {
                CmInput::Both => {
                    r[..cfg.cm_dim].copy_from_slice(t.enroll_cm.as_slice());
                    r[cfg.cm_dim..].copy_from_slice(t.test_cm.as_slice());
                }
                CmInput::TestOnly => r.copy_from_slice(t.test_cm.as_slice()),
            }
            let r = x_asv.row_mut(i);
            r[..cfg.asv_dim].copy_from_slice(t.enroll_asv.as_slice());
            r[cfg.asv_dim..].copy_from_slice(t.test_asv.as_slice());
        }

        let mut masks = (mode == Mode::Train && cfg.dropout_rate > 0.0).then(|| {
            (0..n as u64)
                .map(|i| rng::stream(cfg.seed, &[domain::DROPOUT, key.step, key.first_trial + i]))
                .collect::<Vec<_>>()
        });

        let l = &self.layout;
        let cm1 = self.hidden_forward(&l.cm1, &x_cm, mode, masks.as_deref_mut())?;
        let cm2 = self.hidden_forward(&l.cm2, &cm1.out, mode, masks.as_deref_mut())?;
        let mut n3 = self.dense_forward(l.cm3, &cm2.out)?;
        let norms3: Vec<f64> = (0..n).map(|i| l2_normalize_in_place(n3.row_mut(i))).collect();
        let s_cm_logit = self.dense_forward(l.cm_out, &n3)?.as_slice().to_vec();
        let s_cm: Vec<f64> = s_cm_logit.iter().map(|&z| sigmoid(z)).collect();

        let (tail, e_asv, e_sasv, s_sasv_logit, s_asv) = match cfg.strategy {
            Strategy::S1 | Strategy::S2 => {
                let asv_l = l.asv.as_ref().expect("asv layer");
                let post_l = l.post.as_ref().expect("post layer");
                let asv = self.hidden_forward(asv_l, &x_asv, mode, masks.as_deref_mut())?;
                let mut e_asv = asv.out.clone();
                let norms_asv: Vec<f64> = (0..n).map(|i| l2_normalize_in_place(e_asv.row_mut(i))).collect();
                let (post, e_sasv) = if cfg.strategy == Strategy::S1 {
                    let gated = gate_rows(&s_cm, &e_asv);
                    let post = self.hidden_forward(post_l, &gated, mode, masks.as_deref_mut())?;
                    (post, gated)
                } else {
                    let post = self.hidden_forward(post_l, &e_asv, mode, masks.as_deref_mut())?;
                    let gated = gate_rows(&s_cm, &post.out);
                    (post, gated)
                };
                let logit = match cfg.strategy {
                    Strategy::S1 => self.dense_forward(l.out, &post.out)?,
                    _ => self.dense_forward(l.out, &e_sasv)?,
                };
                let tail = Tail::Embedding {
                    x_asv,
                    asv,
                    norms_asv,
                    post,
                };
                (tail, e_asv, e_sasv, logit.as_slice().to_vec(), None)
            }
            Strategy::S3 => {
                let s_asv: Vec<f64> = inputs
                    .iter()
                    .map(|t| cosine_score(&t.enroll_asv, &t.test_asv))
                    .collect();
                let mut fused = Matrix::zeros(n, 2);
                for i in 0..n {
                    fused[(i, 0)] = s_asv[i];
                    fused[(i, 1)] = s_cm[i];
                }
                let logit = self.dense_forward(l.out, &fused)?;
                let tail = Tail::Score { fused };
                (tail, Matrix::zeros(n, 0), Matrix::zeros(n, 0), logit.as_slice().to_vec(), Some(s_asv))
            }
        };

        let s_sasv = s_sasv_logit.iter().map(|&z| sigmoid(z)).collect();
        Ok(ForwardTrace {
            s_cm,
            s_cm_logit,
            e_asv,
            e_sasv,
            s_sasv,
            s_sasv_logit,
            s_asv,
            mode,
            version: self.version,
            strategy: cfg.strategy,
            cache: Cache {
                x_cm,
                cm1,
                cm2,
                n3,
                norms3,
                tail,
            },
        })
    }

    fn dense_forward(&self, d: Dense, x: &Matrix) -> Result<Matrix> {
        let mut y = x.matmul_t(self.p(d.w))?;
        y.add_row_broadcast(self.p(d.b).as_slice())?;
        Ok(y)
    }

    fn hidden_forward(&self, h: &Hidden, x: &Matrix, mode: Mode, masks: Option<&mut [StreamRng]>) -> Result<HiddenCache> {
        let z = self.dense_forward(h.dense, x)?;
        let (normed, bn) = match h.bn {
            None => (z, None),
            Some(bn) => {
                let (y, cache) = self.bn_forward(bn, &z, mode);
                (y, Some(cache))
            }
        };
        let pre = match h.transform {
            Some(t) => normed.matmul_t(self.p(t))?,
            None => normed.clone(),
        };
        let mut out = pre.map(relu_scalar);
        let mask = match masks {
            Some(rngs) => {
                let keep = 1.0 - self.cfg.dropout_rate;
                let mut m = Matrix::zeros(out.rows(), out.cols());
                for (i, rng) in rngs.iter_mut().enumerate() {
                    for v in m.row_mut(i) {
                        *v = if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 };
                    }
                }
                out = out.zip_map(&m, |a, b| a * b)?;
                Some(m)
            }
            None => None,
        };
        Ok(HiddenCache {
            normed,
            bn,
            pre,
            mask,
            out,
        })
    }

    fn bn_forward(&self, bn: Bn, z: &Matrix, mode: Mode) -> (Matrix, BnCache) {
        let (n, d) = (z.rows(), z.cols());
        let (mean, var) = match mode {
            Mode::Train => {
                let mut mean = z.column_sums();
                mean.iter_mut().for_each(|m| *m /= n as f64);
                let mut var = vec![0.0; d];
                for i in 0..n {
                    for (k, v) in z.row(i).iter().enumerate() {
                        var[k] += (v - mean[k]).powi(2);
                    }
                }
                var.iter_mut().for_each(|v| *v /= n as f64);
                (mean, var)
            }
            Mode::Infer => {
                let r = &self.running[bn.running];
                (r.mean.clone(), r.var.clone())
            }
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let gamma = self.p(bn.gamma).as_slice();
        let beta = self.p(bn.beta).as_slice();
        let mut xhat = Matrix::zeros(n, d);
        let mut y = Matrix::zeros(n, d);
        for i in 0..n {
            for k in 0..d {
                let xh = (z[(i, k)] - mean[k]) * inv_std[k];
                xhat[(i, k)] = xh;
                y[(i, k)] = gamma[k] * xh + beta[k];
            }
        }
        (
            y,
            BnCache {
                xhat,
                inv_std,
                mean,
                var,
            },
        )
    }

    /// Reverse-mode gradients of `Σ_i (d_sasv[i]·s_sasv_logit[i] + d_cm[i]·s_cm_logit[i])`
    /// for every parameter.
    pub fn backward(&self, trace: &ForwardTrace, d_sasv_logit: &[f64], d_cm_logit: &[f64]) -> Result<GradientSet> {
        if trace.version != self.version || trace.strategy != self.cfg.strategy {
            return Err(Error::contract("trace was produced by a different model state"));
        }
        if trace.mode != Mode::Train {
            return Err(Error::contract("backward requires a Train-mode trace"));
        }
        let n = trace.len();
        check_dim("d_sasv_logit", n, d_sasv_logit.len())?;
        check_dim("d_cm_logit", n, d_cm_logit.len())?;
        let c = &trace.cache;
        let l = &self.layout;
        let mut g = GradientSet::zeros_like(&self.params);
        g.flagged = self.frozen;
        let d_sasv = Matrix::from_vec(n, 1, d_sasv_logit.to_vec())?;

        // gradient of the loss w.r.t. s_cm coming through the SASV branch
        let mut ds_cm = vec![0.0; n];
        match &c.tail {
            Tail::Embedding {
                x_asv,
                asv,
                norms_asv,
                post,
            } => {
                let post_l = l.post.as_ref().expect("post layer");
                let de_asv = match self.cfg.strategy {
                    Strategy::S1 => {
                        let d_post = self.dense_backward(l.out, &post.out, &d_sasv, &mut g)?;
                        let d_gated = self.hidden_backward(post_l, post, &trace.e_sasv, d_post, &mut g)?;
                        for (i, ds) in ds_cm.iter_mut().enumerate() {
                            *ds = dot(d_gated.row(i), trace.e_asv.row(i));
                        }
                        scale_rows(&trace.s_cm, &d_gated)
                    }
                    _ => {
                        let d_gated = self.dense_backward(l.out, &trace.e_sasv, &d_sasv, &mut g)?;
                        for (i, ds) in ds_cm.iter_mut().enumerate() {
                            *ds = dot(d_gated.row(i), post.out.row(i));
                        }
                        let d_post = scale_rows(&trace.s_cm, &d_gated);
                        self.hidden_backward(post_l, post, &trace.e_asv, d_post, &mut g)?
                    }
                };
                let mut d_asv_out = Matrix::zeros(n, de_asv.cols());
                for i in 0..n {
                    l2_normalize_backward(trace.e_asv.row(i), norms_asv[i], de_asv.row(i), d_asv_out.row_mut(i));
                }
                let asv_l = l.asv.as_ref().expect("asv layer");
                self.hidden_backward(asv_l, asv, x_asv, d_asv_out, &mut g)?;
            }
            Tail::Score { fused } => {
                let d_fused = self.dense_backward(l.out, fused, &d_sasv, &mut g)?;
                for (i, ds) in ds_cm.iter_mut().enumerate() {
                    *ds = d_fused[(i, 1)];
                }
            }
        }

        let mut d_cm = Matrix::zeros(n, 1);
        for i in 0..n {
            let s = trace.s_cm[i];
            d_cm[(i, 0)] = d_cm_logit[i] + ds_cm[i] * s * (1.0 - s);
        }
        let dn3 = self.dense_backward(l.cm_out, &c.n3, &d_cm, &mut g)?;
        let mut dz3 = Matrix::zeros(n, dn3.cols());
        for i in 0..n {
            l2_normalize_backward(c.n3.row(i), c.norms3[i], dn3.row(i), dz3.row_mut(i));
        }
        let d_cm2 = self.dense_backward(l.cm3, &c.cm2.out, &dz3, &mut g)?;
        let d_cm1 = self.hidden_backward(&l.cm2, &c.cm2, &c.cm1.out, d_cm2, &mut g)?;
        self.hidden_backward(&l.cm1, &c.cm1, &c.x_cm, d_cm1, &mut g)?;

        if self.cfg.diagonal_wa {
            for t in [l.cm1.transform, l.cm2.transform].into_iter().flatten() {
                let gm = &mut g.grads[t];
                for i in 0..gm.rows() {
                    for j in 0..gm.cols() {
                        if i != j {
                            gm[(i, j)] = 0.0;
                        }
                    }
                }
            }
        }
        Ok(g)
    }

    /// Accumulates weight/bias gradients of `y = x·wᵀ + b`; returns `dL/dx`.
    fn dense_backward(&self, d: Dense, x: &Matrix, dy: &Matrix, g: &mut GradientSet) -> Result<Matrix> {
        let dw = dy.t_matmul(x)?;
        accumulate(&mut g.grads[d.w], &dw);
        let db = dy.column_sums();
        for (a, v) in g.grads[d.b].as_mut_slice().iter_mut().zip(db) {
            *a += v;
        }
        dy.matmul(self.p(d.w))
    }

    fn hidden_backward(&self, h: &Hidden, c: &HiddenCache, x: &Matrix, d_out: Matrix, g: &mut GradientSet) -> Result<Matrix> {
        let mut d = d_out;
        if let Some(m) = &c.mask {
            d = d.zip_map(m, |a, b| a * b)?;
        }
        let d_pre = d.zip_map(&c.pre, |a, u| a * relu_grad(u))?;
        let d_normed = match h.transform {
            Some(t) => {
                let dw = d_pre.t_matmul(&c.normed)?;
                accumulate(&mut g.grads[t], &dw);
                d_pre.matmul(self.p(t))?
            }
            None => d_pre,
        };
        let dz = match (h.bn, &c.bn) {
            (Some(bn), Some(cache)) => self.bn_backward(bn, cache, &d_normed, g),
            _ => d_normed,
        };
        self.dense_backward(h.dense, x, &dz, g)
    }

    fn bn_backward(&self, bn: Bn, c: &BnCache, dy: &Matrix, g: &mut GradientSet) -> Matrix {
        let (n, d) = (dy.rows(), dy.cols());
        let gamma = self.p(bn.gamma).as_slice();
        let nf = n as f64;
        let mut dz = Matrix::zeros(n, d);
        for k in 0..d {
            let mut sum_dy = 0.0;
            let mut sum_dy_xhat = 0.0;
            for i in 0..n {
                sum_dy += dy[(i, k)];
                sum_dy_xhat += dy[(i, k)] * c.xhat[(i, k)];
            }
            g.grads[bn.gamma].as_mut_slice()[k] += sum_dy_xhat;
            g.grads[bn.beta].as_mut_slice()[k] += sum_dy;
            // d xhat = dy·γ; dz = inv_std/N · (N·dxhat − Σdxhat − xhat·Σ(dxhat·xhat))
            for i in 0..n {
                let dxh = dy[(i, k)] * gamma[k];
                dz[(i, k)] = c.inv_std[k] / nf * (nf * dxh - gamma[k] * sum_dy - c.xhat[(i, k)] * gamma[k] * sum_dy_xhat);
            }
        }
        dz
    }

    /// Folds the batch statistics of a Train-mode trace into the running
    /// statistics of every batch-norm layer outside `frozen`.
    pub fn update_running_stats(&mut self, trace: &ForwardTrace, frozen: GroupSet) -> Result<()> {
        if trace.version != self.version || trace.mode != Mode::Train {
            return Err(Error::contract("running statistics need a current Train-mode trace"));
        }
        let c = &trace.cache;
        let l = &self.layout;
        let mut pairs: Vec<(Bn, &BnCache)> = Vec::new();
        let mut hiddens: Vec<(&Hidden, &HiddenCache)> = vec![(&l.cm1, &c.cm1), (&l.cm2, &c.cm2)];
        if let (Tail::Embedding { asv, post, .. }, Some(la), Some(lp)) = (&c.tail, &l.asv, &l.post) {
            hiddens.push((la, asv));
            hiddens.push((lp, post));
        }
        for (h, hc) in hiddens {
            if let (Some(bn), Some(cache)) = (h.bn, &hc.bn) {
                pairs.push((bn, cache));
            }
        }
        if pairs.is_empty() {
            return Ok(());
        }
        for (bn, cache) in pairs {
            let r = &mut self.running[bn.running];
            if frozen.contains(r.group) {
                continue;
            }
            for k in 0..r.mean.len() {
                r.mean[k] = BN_MOMENTUM * r.mean[k] + (1.0 - BN_MOMENTUM) * cache.mean[k];
                r.var[k] = BN_MOMENTUM * r.var[k] + (1.0 - BN_MOMENTUM) * cache.var[k];
            }
        }
        self.version += 1;
        Ok(())
    }
}

/// `(1 + cos(a, b)) / 2`, with the zero vector scoring 0.5.
pub fn cosine_score(a: &Vector, b: &Vector) -> f64 {
    let na = norm(a.as_slice());
    let nb = norm(b.as_slice());
    if na == 0.0 || nb == 0.0 {
        return 0.5;
    }
    (1.0 + dot(a.as_slice(), b.as_slice()) / (na * nb)) / 2.0
}

fn gate_rows(s: &[f64], e: &Matrix) -> Matrix {
    scale_rows(s, e)
}

fn scale_rows(s: &[f64], m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for (i, &si) in s.iter().enumerate() {
        out.row_mut(i).iter_mut().for_each(|v| *v *= si);
    }
    out
}

fn accumulate(acc: &mut Matrix, m: &Matrix) {
    for (a, v) in acc.as_mut_slice().iter_mut().zip(m.as_slice()) {
        *a += v;
    }
}

#[derive(Debug, Clone)]
struct BnCache {
    xhat: Matrix,
    inv_std: Vec<f64>,
    mean: Vec<f64>,
    var: Vec<f64>,
}

#[derive(Debug, Clone)]
struct HiddenCache {
    /// affine output after batch-norm (input of the transform)
    normed: Matrix,
    bn: Option<BnCache>,
    /// ReLU input
    pre: Matrix,
    mask: Option<Matrix>,
    out: Matrix,
}

#[derive(Debug, Clone)]
enum Tail {
    Embedding {
        x_asv: Matrix,
        asv: HiddenCache,
        norms_asv: Vec<f64>,
        post: HiddenCache,
    },
    Score {
        fused: Matrix,
    },
}

#[derive(Debug, Clone)]
struct Cache {
    x_cm: Matrix,
    cm1: HiddenCache,
    cm2: HiddenCache,
    n3: Matrix,
    norms3: Vec<f64>,
    tail: Tail,
}

/// Everything one forward pass produced, row `i` per trial.
///
/// For S1 `e_sasv` is the gated ASV embedding; for S2 it is the gated hidden
/// activation feeding the output layer; for S3 both embedding fields are empty.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub s_cm: Vec<f64>,
    pub s_cm_logit: Vec<f64>,
    pub e_asv: Matrix,
    pub e_sasv: Matrix,
    pub s_sasv: Vec<f64>,
    pub s_sasv_logit: Vec<f64>,
    /// Fused cosine ASV score (S3 only).
    pub s_asv: Option<Vec<f64>>,
    pub mode: Mode,
    version: u64,
    strategy: Strategy,
    cache: Cache,
}

impl ForwardTrace {
    pub fn len(&self) -> usize {
        self.s_cm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_cm.is_empty()
    }

    /// Fingerprint of the on/off state of every ReLU unit; used to exclude
    /// finite differences that cross a kink.
    pub fn activation_pattern(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        let c = &self.cache;
        let mut feed = |m: &Matrix| {
            for &v in m.as_slice() {
                h.write_u8((v > 0.0) as u8);
            }
        };
        feed(&c.cm1.pre);
        feed(&c.cm2.pre);
        if let Tail::Embedding { asv, post, .. } = &c.tail {
            feed(&asv.pre);
            feed(&post.pre);
        }
        h.finish()
    }
}
