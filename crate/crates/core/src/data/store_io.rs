//! Binary embedding store.
//!
//! ```text
//! "SGEM" | u32 version=1 | u32 asv_dim | u32 cm_dim | u64 record count
//! record: u16 len + utt id | u16 len + speaker id | u8 authenticity (0 bona fide, 1 spoof)
//!         | u16 len + attack tag (0 if none) | asv_dim f64 | cm_dim f64
//! ```
//!
//! All integers and floats little-endian, strings UTF-8.

use std::path::Path;

use super::store::EmbeddingStore;
use crate::codec::{put_string, Reader};
use crate::error::{DecodeErrorKind, Error, Result};
use crate::numerics::Vector;
use crate::trials::{Authenticity, UtteranceMeta};

pub const STORE_MAGIC: [u8; 4] = *b"SGEM";
pub const STORE_VERSION: u32 = 1;

pub fn encode_store(store: &EmbeddingStore) -> Result<Vec<u8>> {
    let dim = |d: usize| u32::try_from(d).map_err(|_| Error::contract("dimension exceeds u32"));
    let rec_floats = store.asv_dim() + store.cm_dim();
    let mut out = Vec::with_capacity(24 + store.len() * (32 + 8 * rec_floats));
    out.extend_from_slice(&STORE_MAGIC);
    out.extend_from_slice(&STORE_VERSION.to_le_bytes());
    out.extend_from_slice(&dim(store.asv_dim())?.to_le_bytes());
    out.extend_from_slice(&dim(store.cm_dim())?.to_le_bytes());
    out.extend_from_slice(&(store.len() as u64).to_le_bytes());
    for r in store.records() {
        put_string(&mut out, &r.meta.utt_id)?;
        put_string(&mut out, &r.meta.speaker_id)?;
        out.push(match r.meta.authenticity {
            Authenticity::BonaFide => 0,
            Authenticity::Spoof => 1,
        });
        put_string(&mut out, r.meta.attack_id.as_deref().unwrap_or(""))?;
        for v in r.asv.as_slice().iter().chain(r.cm.as_slice()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_store(bytes: &[u8]) -> Result<EmbeddingStore> {
    let mut r = Reader::new(bytes);
    r.magic(STORE_MAGIC)?;
    let at = r.offset();
    let version = r.u32()?;
    if version != STORE_VERSION {
        return Err(Reader::err_at(at, DecodeErrorKind::UnsupportedVersion(version)).into());
    }
    let at = r.offset();
    let asv_dim = r.u32()? as usize;
    let cm_dim = r.u32()? as usize;
    if asv_dim == 0 || cm_dim == 0 {
        return Err(Reader::err_at(at, DecodeErrorKind::Dimension(format!("asv_dim={asv_dim}, cm_dim={cm_dim}; both must be positive"))).into());
    }
    let count_at = r.offset();
    let count = r.u64()?;
    // smallest possible record: three empty strings, the tag byte and the vectors
    let min_record = 7u128 + 8 * (asv_dim as u128 + cm_dim as u128);
    if count as u128 * min_record > r.remaining() as u128 {
        return Err(Reader::err_at(
            count_at,
            DecodeErrorKind::Truncated {
                needed: (count as u128 * min_record).min(usize::MAX as u128) as usize,
                available: r.remaining(),
            },
        )
        .into());
    }

    let mut store = EmbeddingStore::new(asv_dim, cm_dim);
    for _ in 0..count {
        let rec_at = r.offset();
        let utt_id = r.string()?;
        let speaker_id = r.string()?;
        let tag_at = r.offset();
        let authenticity = match r.u8()? {
            0 => Authenticity::BonaFide,
            1 => Authenticity::Spoof,
            v => return Err(Reader::err_at(tag_at, DecodeErrorKind::InvalidTag { field: "authenticity", value: v }).into()),
        };
        let attack = r.string()?;
        let attack_id = (!attack.is_empty()).then_some(attack);
        let meta = UtteranceMeta {
            utt_id,
            speaker_id,
            authenticity,
            attack_id,
        };
        if !meta.is_consistent() {
            return Err(Reader::err_at(tag_at, DecodeErrorKind::Inconsistent("attack tag must be present exactly for spoofs".into())).into());
        }
        let asv: Vector = (0..asv_dim).map(|_| r.finite()).collect::<Result<Vec<_>, _>>()?.into();
        let cm: Vector = (0..cm_dim).map(|_| r.finite()).collect::<Result<Vec<_>, _>>()?.into();
        if store.get(&meta.utt_id).is_some() {
            return Err(Reader::err_at(rec_at, DecodeErrorKind::DuplicateId(meta.utt_id)).into());
        }
        store.insert(meta, asv, cm)?;
    }
    r.finish()?;
    Ok(store)
}

pub fn write_store(store: &EmbeddingStore, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_store(store)?)?;
    Ok(())
}

pub fn read_store(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    decode_store(&std::fs::read(path)?)
}
