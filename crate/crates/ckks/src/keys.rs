use std::collections::BTreeMap;

use crate::codec::{Reader, Writer};
use crate::error::{HeError, Result};
use crate::ring::Residues;

/// Ternary secret `s ∈ {-1, 0, 1}^N`.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey {
    pub(crate) coeffs: Vec<i8>,
}

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SecretKey").field("degree", &self.coeffs.len()).finish_non_exhaustive()
    }
}

impl SecretKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.coeffs.len() as u32);
        w.buf.extend(self.coeffs.iter().map(|&c| c as u8));
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let n = r.u32()? as usize;
        if bytes.len() != 4 + n {
            return Err(HeError::Malformed("secret key length".into()));
        }
        let coeffs: Vec<i8> = bytes[4..].iter().map(|&b| b as i8).collect();
        if coeffs.iter().any(|c| !(-1..=1).contains(c)) {
            return Err(HeError::Malformed("secret key is not ternary".into()));
        }
        Ok(SecretKey { coeffs })
    }
}

/// Encryption key `(b, a) = (-a·s + e, a)`, stored in the NTT domain over the full chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PublicKey {
    pub(crate) b: Residues,
    pub(crate) a: Residues,
}

impl PublicKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        write_pair(&mut w, &self.b, &self.a);
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let (b, a) = read_pair(&mut r)?;
        r.finish()?;
        Ok(PublicKey { b, a })
    }
}

/// Key-switching key from some `s'` to `s`, one `(b_i, a_i)` pair per chain prime,
/// NTT domain over the chain plus the special prime.
#[derive(Debug, Clone, PartialEq)]
pub struct KeySwitchKey {
    pub(crate) digits: Vec<(Residues, Residues)>,
}

impl KeySwitchKey {
    fn write(&self, w: &mut Writer) {
        w.u32(self.digits.len() as u32);
        for (b, a) in &self.digits {
            write_pair(w, b, a);
        }
    }

    fn read(r: &mut Reader<'_>) -> Result<Self> {
        let count = r.u32()? as usize;
        let mut digits = Vec::with_capacity(count);
        for _ in 0..count {
            digits.push(read_pair(r)?);
        }
        Ok(KeySwitchKey { digits })
    }
}

/// Relinearization key (switches `s²` to `s`).
#[derive(Debug, Clone, PartialEq)]
pub struct RelinKey(pub(crate) KeySwitchKey);

impl RelinKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.0.write(&mut w);
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let k = KeySwitchKey::read(&mut r)?;
        r.finish()?;
        Ok(RelinKey(k))
    }
}

/// Rotation keys indexed by left-rotation step (powers of two).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GaloisKeys {
    pub(crate) keys: BTreeMap<usize, KeySwitchKey>,
}

impl GaloisKeys {
    pub fn steps(&self) -> impl Iterator<Item = usize> + '_ {
        self.keys.keys().copied()
    }

    pub fn contains(&self, step: usize) -> bool {
        self.keys.contains_key(&step)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.keys.len() as u32);
        for (&step, key) in &self.keys {
            w.u64(step as u64);
            key.write(&mut w);
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let count = r.u32()? as usize;
        let mut keys = BTreeMap::new();
        for _ in 0..count {
            let step = r.u64()? as usize;
            keys.insert(step, KeySwitchKey::read(&mut r)?);
        }
        r.finish()?;
        Ok(GaloisKeys { keys })
    }
}

/// Everything derived from one secret.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyMaterial {
    pub public_key: PublicKey,
    pub secret_key: SecretKey,
    pub relin_key: RelinKey,
    pub galois_keys: GaloisKeys,
}

impl KeyMaterial {
    /// The parts that may be handed to anyone computing on ciphertexts.
    pub fn evaluation_keys(&self) -> EvaluationKeys {
        EvaluationKeys {
            public_key: self.public_key.clone(),
            relin_key: self.relin_key.clone(),
            galois_keys: self.galois_keys.clone(),
        }
    }
}

/// Public key plus relinearization and rotation keys; contains no secret.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationKeys {
    pub public_key: PublicKey,
    pub relin_key: RelinKey,
    pub galois_keys: GaloisKeys,
}

fn write_pair(w: &mut Writer, b: &Residues, a: &Residues) {
    let n = b.first().map_or(0, Vec::len);
    w.u32(b.len() as u32);
    w.u32(n as u32);
    for r in b.iter().chain(a) {
        w.words(r);
    }
}

fn read_pair(r: &mut Reader<'_>) -> Result<(Residues, Residues)> {
    let primes = r.u32()? as usize;
    let n = r.u32()? as usize;
    if primes > 64 || n > 1 << 17 {
        return Err(HeError::Malformed("implausible key dimensions".into()));
    }
    let read_poly = |r: &mut Reader<'_>| -> Result<Residues> {
        (0..primes).map(|_| r.words(n)).collect()
    };
    let b = read_poly(r)?;
    let a = read_poly(r)?;
    Ok((b, a))
}
