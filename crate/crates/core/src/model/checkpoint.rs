//! Binary model checkpoints.
//!
//! Layout (little-endian):
//!
//! ```text
//! "SAGA" | u32 version
//! config: u8 strategy | u32 asv_dim cm_dim hidden_cm hidden_asv hidden_post
//!         u8 batchnorm | f64 dropout | u64 seed | u8 cm_input share_wa diagonal_wa trelu
//! u32 n_params, then per parameter (CM path, ASV path, joint):
//!         u8 group | u16 name len + name | u32 rows | u32 cols | rows·cols f64
//! u32 n_running, then per batch-norm layer:
//!         u8 group | u16 name len + name | u32 dim | dim f64 mean | dim f64 var
//! ```

use std::path::Path;

use super::config::{CmInput, ModelConfig, Strategy};
use super::network::FusionModel;
use super::params::GroupTag;
use crate::codec::{put_string, Reader};
use crate::error::{DecodeError, DecodeErrorKind, Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"SAGA";
pub const CHECKPOINT_VERSION: u32 = 1;

fn group_code(tag: GroupTag) -> u8 {
    tag.index() as u8
}

fn group_from(code: u8) -> Option<GroupTag> {
    GroupTag::ALL.get(code as usize).copied()
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::contract("value exceeds u32"))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn encode_checkpoint(model: &FusionModel) -> Result<Vec<u8>> {
    let cfg = model.config();
    let mut out = Vec::with_capacity(64 + 8 * model.param_count());
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.push(cfg.strategy.code());
    for d in [cfg.asv_dim, cfg.cm_dim, cfg.hidden_cm, cfg.hidden_asv, cfg.hidden_post] {
        put_u32(&mut out, d)?;
    }
    out.push(cfg.use_batchnorm as u8);
    out.extend_from_slice(&cfg.dropout_rate.to_le_bytes());
    out.extend_from_slice(&cfg.seed.to_le_bytes());
    out.push(match cfg.cm_input {
        CmInput::Both => 0,
        CmInput::TestOnly => 1,
    });
    out.push(cfg.share_wa as u8);
    out.push(cfg.diagonal_wa as u8);
    out.push(cfg.trelu as u8);

    put_u32(&mut out, model.params().len())?;
    for p in model.params() {
        out.push(group_code(p.group));
        put_string(&mut out, p.name)?;
        put_u32(&mut out, p.value.rows())?;
        put_u32(&mut out, p.value.cols())?;
        for v in p.value.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    put_u32(&mut out, model.running_stats().len())?;
    for r in model.running_stats() {
        out.push(group_code(r.group));
        put_string(&mut out, r.name)?;
        put_u32(&mut out, r.mean.len())?;
        for v in r.mean.iter().chain(&r.var) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn flag(r: &mut Reader<'_>, field: &'static str) -> Result<bool, DecodeError> {
    let at = r.offset();
    match r.u8()? {
        0 => Ok(false),
        1 => Ok(true),
        v => Err(Reader::err_at(at, DecodeErrorKind::InvalidTag { field, value: v })),
    }
}

fn dim(r: &mut Reader<'_>) -> Result<usize, DecodeError> {
    Ok(r.u32()? as usize)
}

/// Number of scalars a model with this config stores, if it fits in `usize`.
fn expected_scalars(cfg: &ModelConfig) -> Option<usize> {
    let dense = |o: usize, i: usize| o.checked_mul(i)?.checked_add(o);
    let bn = |d: usize| if cfg.use_batchnorm { d.checked_mul(2) } else { Some(0) };
    let hc = cfg.hidden_cm;
    let wa = if cfg.trelu { hc.checked_mul(hc)? } else { 0 };
    let mut total = dense(hc, cfg.cm_dim.checked_mul(2)?)?;
    for part in [
        bn(hc)?,
        wa,
        dense(hc, hc)?,
        bn(hc)?,
        if cfg.share_wa { 0 } else { wa },
        dense(hc, hc)?,
        dense(1, hc)?,
    ] {
        total = total.checked_add(part)?;
    }
    if cfg.cm_input == CmInput::TestOnly {
        total = total.checked_sub(hc.checked_mul(cfg.cm_dim)?)?;
    }
    let tail = match cfg.strategy {
        Strategy::S1 | Strategy::S2 => {
            let (ha, hp) = (cfg.hidden_asv, cfg.hidden_post);
            [dense(ha, cfg.asv_dim.checked_mul(2)?)?, bn(ha)?, dense(hp, ha)?, bn(hp)?, dense(1, hp)?]
                .into_iter()
                .try_fold(0usize, |a, b| a.checked_add(b))?
        }
        Strategy::S3 => 3,
    };
    total.checked_add(tail)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<FusionModel> {
    let mut r = Reader::new(bytes);
    r.magic(CHECKPOINT_MAGIC)?;
    let at = r.offset();
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Reader::err_at(at, DecodeErrorKind::UnsupportedVersion(version)).into());
    }
    let at = r.offset();
    let code = r.u8()?;
    let strategy = Strategy::from_code(code).ok_or_else(|| Reader::err_at(at, DecodeErrorKind::InvalidTag { field: "strategy", value: code }))?;
    let mut cfg = ModelConfig::new(strategy, 1, 1);
    cfg.asv_dim = dim(&mut r)?;
    cfg.cm_dim = dim(&mut r)?;
    cfg.hidden_cm = dim(&mut r)?;
    cfg.hidden_asv = dim(&mut r)?;
    cfg.hidden_post = dim(&mut r)?;
    cfg.use_batchnorm = flag(&mut r, "batchnorm")?;
    let at = r.offset();
    cfg.dropout_rate = r.f64()?;
    cfg.seed = r.u64()?;
    let at_in = r.offset();
    cfg.cm_input = match r.u8()? {
        0 => CmInput::Both,
        1 => CmInput::TestOnly,
        v => return Err(Reader::err_at(at_in, DecodeErrorKind::InvalidTag { field: "cm_input", value: v }).into()),
    };
    cfg.share_wa = flag(&mut r, "share_wa")?;
    cfg.diagonal_wa = flag(&mut r, "diagonal_wa")?;
    cfg.trelu = flag(&mut r, "trelu")?;
    if let Err(e) = cfg.validate() {
        return Err(Reader::err_at(at, DecodeErrorKind::Dimension(e.to_string())).into());
    }

    // Read every block before building the model so allocations are bounded
    // by the bytes actually present.
    struct Block {
        at: usize,
        group: GroupTag,
        name: String,
        rows: usize,
        cols: usize,
        values: Vec<f64>,
    }
    let read_group = |r: &mut Reader<'_>| -> Result<GroupTag, DecodeError> {
        let at = r.offset();
        let g = r.u8()?;
        group_from(g).ok_or_else(|| Reader::err_at(at, DecodeErrorKind::InvalidTag { field: "group", value: g }))
    };
    let n_params = r.u32()? as usize;
    let mut blocks = Vec::new();
    let mut scalars = 0usize;
    for _ in 0..n_params {
        let at = r.offset();
        let group = read_group(&mut r)?;
        let name = r.string()?;
        let rows = dim(&mut r)?;
        let cols = dim(&mut r)?;
        let n = rows.checked_mul(cols).filter(|n| n.checked_mul(8).is_some_and(|b| b <= r.remaining()));
        let Some(n) = n else {
            return Err(r.err(DecodeErrorKind::Truncated {
                needed: rows.saturating_mul(cols).saturating_mul(8),
                available: r.remaining(),
            }).into());
        };
        let values = (0..n).map(|_| r.finite()).collect::<Result<Vec<_>, _>>()?;
        scalars += n;
        blocks.push(Block { at, group, name, rows, cols, values });
    }
    if expected_scalars(&cfg) != Some(scalars) {
        return Err(Reader::err_at(at, DecodeErrorKind::Dimension(format!(
            "config implies {:?} parameters, file holds {scalars}",
            expected_scalars(&cfg)
        ))).into());
    }
    let mut model = FusionModel::new(cfg)?;
    if blocks.len() != model.params().len() {
        return Err(r.err(DecodeErrorKind::Dimension(format!(
            "expected {} parameter blocks, found {}",
            model.params().len(),
            blocks.len()
        ))).into());
    }
    for (p, b) in model.params_mut().iter_mut().zip(&blocks) {
        if p.name != b.name || p.group != b.group || p.value.rows() != b.rows || p.value.cols() != b.cols {
            return Err(Reader::err_at(b.at, DecodeErrorKind::Inconsistent(format!(
                "block {:?} ({}x{}) does not match parameter {:?} ({}x{})",
                b.name,
                b.rows,
                b.cols,
                p.name,
                p.value.rows(),
                p.value.cols()
            ))).into());
        }
        p.value.as_mut_slice().copy_from_slice(&b.values);
    }

    let at = r.offset();
    let n_running = r.u32()? as usize;
    if n_running != model.running_stats().len() {
        return Err(Reader::err_at(at, DecodeErrorKind::Dimension(format!(
            "expected {} batch-norm blocks, found {n_running}",
            model.running_stats().len()
        ))).into());
    }
    for i in 0..n_running {
        let at = r.offset();
        let group = read_group(&mut r)?;
        let name = r.string()?;
        let d = dim(&mut r)?;
        let (exp_name, exp_group, exp_dim) = {
            let s = &model.running_stats()[i];
            (s.name, s.group, s.mean.len())
        };
        if name != exp_name || group != exp_group || d != exp_dim {
            return Err(Reader::err_at(at, DecodeErrorKind::Inconsistent(format!(
                "running block {name:?} does not match {exp_name:?}"
            ))).into());
        }
        let mean = (0..d).map(|_| r.finite()).collect::<Result<Vec<_>, _>>()?;
        let var = (0..d).map(|_| r.finite()).collect::<Result<Vec<_>, _>>()?;
        let s = &mut model.running_mut()[i];
        s.mean = mean;
        s.var = var;
    }
    r.finish()?;
    Ok(model)
}

pub fn write_checkpoint(model: &FusionModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_checkpoint(model)?)?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<FusionModel> {
    decode_checkpoint(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn models() -> Vec<FusionModel> {
        let mut out = Vec::new();
        for s in [Strategy::S1, Strategy::S2, Strategy::S3] {
            let mut cfg = ModelConfig::new(s, 5, 3);
            cfg.seed = 9;
            out.push(FusionModel::new(cfg.clone()).unwrap());
            cfg.use_batchnorm = true;
            cfg.dropout_rate = 0.2;
            cfg.share_wa = false;
            cfg.cm_input = CmInput::TestOnly;
            out.push(FusionModel::new(cfg.clone()).unwrap());
            cfg.trelu = false;
            out.push(FusionModel::new(cfg).unwrap());
        }
        out
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for m in models() {
            let bytes = encode_checkpoint(&m).unwrap();
            let back = decode_checkpoint(&bytes).unwrap();
            assert_eq!(back.config(), m.config());
            assert_eq!(back.params(), m.params());
            assert_eq!(back.running_stats(), m.running_stats());
            assert_eq!(encode_checkpoint(&back).unwrap(), bytes);
            assert_eq!(expected_scalars(m.config()), Some(m.param_count()));
        }
    }

    #[test]
    fn corrupt_inputs_fail_with_declared_errors() {
        let m = &models()[1];
        let bytes = encode_checkpoint(m).unwrap();
        let kind = |b: &[u8]| match decode_checkpoint(b) {
            Err(Error::Decode(e)) => e,
            other => panic!("expected decode error, got {other:?}"),
        };
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(kind(&bad).kind, DecodeErrorKind::BadMagic { .. }));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert_eq!(kind(&bad).kind, DecodeErrorKind::UnsupportedVersion(9));
        let e = kind(&bytes[..bytes.len() - 3]);
        assert!(matches!(e.kind, DecodeErrorKind::Truncated { .. }));
        let mut bad = bytes.clone();
        bad.push(0);
        assert!(matches!(kind(&bad).kind, DecodeErrorKind::TrailingBytes(1)));
        // asv_dim is the first u32 after the strategy byte
        let mut bad = bytes.clone();
        bad[9] = bad[9].wrapping_add(1);
        assert!(matches!(kind(&bad).kind, DecodeErrorKind::Dimension(_) | DecodeErrorKind::Truncated { .. }));
    }
}
