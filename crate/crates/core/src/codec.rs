//! Little-endian primitives shared by the binary formats.

use crate::error::{DecodeError, DecodeErrorKind};

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn err(&self, kind: DecodeErrorKind) -> DecodeError {
        DecodeError {
            kind,
            offset: self.pos,
        }
    }

    pub fn err_at(offset: usize, kind: DecodeErrorKind) -> DecodeError {
        DecodeError { kind, offset }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.remaining() < n {
            return Err(self.err(DecodeErrorKind::Truncated {
                needed: n,
                available: self.remaining(),
            }));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub fn magic(&mut self, expected: [u8; 4]) -> Result<(), DecodeError> {
        let at = self.pos;
        let found = self.array::<4>()?;
        if found != expected {
            return Err(Self::err_at(at, DecodeErrorKind::BadMagic { expected, found }));
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.array::<1>()?[0])
    }

    pub fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub fn f64(&mut self) -> Result<f64, DecodeError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    /// A finite f64.
    pub fn finite(&mut self) -> Result<f64, DecodeError> {
        let at = self.pos;
        let v = self.f64()?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Self::err_at(at, DecodeErrorKind::NonFinite))
        }
    }

    /// `u16` length prefix followed by UTF-8 bytes.
    pub fn string(&mut self) -> Result<String, DecodeError> {
        let len = self.u16()? as usize;
        let at = self.pos;
        let bytes = self.take(len)?;
        std::str::from_utf8(bytes)
            .map(str::to_owned)
            .map_err(|_| Self::err_at(at, DecodeErrorKind::InvalidUtf8))
    }

    pub fn finish(&self) -> Result<(), DecodeError> {
        if self.remaining() > 0 {
            Err(self.err(DecodeErrorKind::TrailingBytes(self.remaining())))
        } else {
            Ok(())
        }
    }
}

pub(crate) fn put_string(out: &mut Vec<u8>, s: &str) -> Result<(), crate::Error> {
    let len = u16::try_from(s.len())
        .map_err(|_| crate::Error::contract(format!("string of {} bytes exceeds u16 length prefix", s.len())))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}
