use crate::arith::{is_prime, ntt_primes_above};
use crate::error::{HeError, Result};

/// Ring and modulus parameters.
///
/// `modulus_chain[0]` is the base prime that survives every rescale; the
/// remaining primes are consumed from the top, one per multiplication.
/// `special_modulus` is only used inside key switching and never carries
/// ciphertext data.
#[derive(Debug, Clone, PartialEq)]
pub struct HeParams {
    pub poly_degree: usize,
    pub modulus_chain: Vec<u64>,
    pub special_modulus: u64,
    pub scale: f64,
    pub noise_stddev: f64,
}

impl HeParams {
    /// Default chain for ring dimension `poly_degree`: one 60-bit base prime,
    /// three 40-bit rescaling primes, a 61-bit special prime, scale `2^40`
    /// and noise σ = 3.2.
    pub fn with_degree(poly_degree: usize) -> Result<Self> {
        Self::with_levels(poly_degree, 3)
    }

    /// Like [`HeParams::with_degree`] with `rescale_primes` 40-bit primes above the base.
    pub fn with_levels(poly_degree: usize, rescale_primes: usize) -> Result<Self> {
        if !poly_degree.is_power_of_two() || poly_degree < MIN_POLY_DEGREE {
            return Err(HeError::InvalidParams(format!(
                "poly_degree {poly_degree} must be a power of two >= {MIN_POLY_DEGREE}"
            )));
        }
        let base = ntt_primes_above(59, 1, poly_degree, &[])[0];
        let mut chain = vec![base];
        chain.extend(ntt_primes_above(40, rescale_primes, poly_degree, &[]));
        let special = ntt_primes_above(60, 1, poly_degree, &chain)[0];
        let params = HeParams {
            poly_degree,
            modulus_chain: chain,
            special_modulus: special,
            scale: 2f64.powi(40),
            noise_stddev: 3.2,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn slot_count(&self) -> usize {
        self.poly_degree / 2
    }

    /// Index of the top level (fresh ciphertexts live here).
    pub fn max_level(&self) -> usize {
        self.modulus_chain.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.poly_degree;
        if !n.is_power_of_two() || n < MIN_POLY_DEGREE {
            return Err(HeError::InvalidParams(format!(
                "poly_degree {n} must be a power of two >= {MIN_POLY_DEGREE}"
            )));
        }
        if self.modulus_chain.len() < 3 {
            return Err(HeError::InvalidParams(format!(
                "modulus chain needs at least 3 primes, got {}",
                self.modulus_chain.len()
            )));
        }
        let mut all = self.modulus_chain.clone();
        all.push(self.special_modulus);
        for &q in &all {
            if q >= 1 << 62 || !is_prime(q) || (q - 1) % (2 * n as u64) != 0 {
                return Err(HeError::InvalidParams(format!(
                    "modulus {q} must be a prime below 2^62 congruent to 1 mod 2N"
                )));
            }
        }
        let mut sorted = all.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != all.len() {
            return Err(HeError::InvalidParams("moduli must be distinct".into()));
        }
        let smallest = *self.modulus_chain.iter().min().unwrap() as f64;
        if !(self.scale > 1.0 && self.scale < smallest) {
            return Err(HeError::InvalidParams(format!(
                "scale {} must lie in (1, smallest modulus)",
                self.scale
            )));
        }
        if !(self.noise_stddev > 0.0 && self.noise_stddev.is_finite()) {
            return Err(HeError::InvalidParams("noise_stddev must be positive".into()));
        }
        Ok(())
    }
}

pub const MIN_POLY_DEGREE: usize = 1024;

/// Number of ciphertexts needed to pack `param_count` values with
/// `poly_degree / 2` slots each: `floor(param_count / slots) + 1`.
///
/// The `+ 1` is applied even when the division is exact.
pub fn cipher_count(param_count: usize, poly_degree: usize) -> usize {
    param_count / (poly_degree / 2) + 1
}
