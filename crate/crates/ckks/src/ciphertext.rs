use base64::engine::general_purpose::STANDARD;
use base64::Engine;

use crate::codec::{Reader, Writer};
use crate::error::{HeError, Result};
use crate::ring::Residues;

const FORMAT_VERSION: u16 = 1;

/// A ciphertext in coefficient form over the first `level + 1` primes of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Ciphertext {
    pub(crate) parts: Vec<Residues>,
    pub(crate) level: usize,
    pub(crate) scale: f64,
    pub(crate) slot_count: usize,
}

impl Ciphertext {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn slot_count(&self) -> usize {
        self.slot_count
    }

    pub fn poly_degree(&self) -> usize {
        self.slot_count * 2
    }

    /// Canonical encoding.
    ///
    /// Header: version `u16`, N `u32`, level `u32`, scale `f64`, part count
    /// `u32`; then for each part, for each prime in order, N coefficients as
    /// `u64`. All integers little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.poly_degree();
        let mut w = Writer::new();
        w.buf.reserve(22 + self.parts.len() * (self.level + 1) * n * 8);
        w.u16(FORMAT_VERSION);
        w.u32(n as u32);
        w.u32(self.level as u32);
        w.f64(self.scale);
        w.u32(self.parts.len() as u32);
        for part in &self.parts {
            for residue in part {
                w.words(residue);
            }
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            return Err(HeError::Malformed(format!("unknown version {version}")));
        }
        let n = r.u32()? as usize;
        if !n.is_power_of_two() || n < 2 {
            return Err(HeError::Malformed(format!("bad ring degree {n}")));
        }
        let level = r.u32()? as usize;
        if level > 64 {
            return Err(HeError::Malformed(format!("implausible level {level}")));
        }
        let scale = r.f64()?;
        if !(scale.is_finite() && scale > 0.0) {
            return Err(HeError::Malformed(format!("bad scale {scale}")));
        }
        let part_count = r.u32()? as usize;
        if part_count != 2 {
            return Err(HeError::Malformed(format!(
                "expected 2 parts, found {part_count}"
            )));
        }
        let mut parts = Vec::with_capacity(part_count);
        for _ in 0..part_count {
            let mut residues = Vec::with_capacity(level + 1);
            for _ in 0..=level {
                residues.push(r.words(n)?);
            }
            parts.push(residues);
        }
        r.finish()?;
        Ok(Ciphertext {
            parts,
            level,
            scale,
            slot_count: n / 2,
        })
    }

    pub fn to_base64(&self) -> String {
        STANDARD.encode(self.to_bytes())
    }

    pub fn from_base64(text: &str) -> Result<Self> {
        let bytes = STANDARD
            .decode(text)
            .map_err(|e| HeError::Malformed(format!("base64: {e}")))?;
        Self::from_bytes(&bytes)
    }
}
