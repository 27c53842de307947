use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::arith::{add_mod, centered, inv_mod, mul_mod, reduce_i64, sub_mod, NttTable};
use crate::ciphertext::Ciphertext;
use crate::encoding::Encoder;
use crate::error::{HeError, Result};
use crate::keys::{GaloisKeys, KeyMaterial, KeySwitchKey, PublicKey, RelinKey, SecretKey};
use crate::params::HeParams;
use crate::ring::{self, Residues};

/// Relative tolerance when comparing ciphertext scales.
const SCALE_TOLERANCE: f64 = 1e-9;

/// Precomputed tables for one parameter set. Every homomorphic operation goes through here.
///
/// Table index `j < L` is chain prime `j`; index `L` is the special prime.
#[derive(Debug)]
pub struct CkksContext {
    params: HeParams,
    tables: Vec<NttTable>,
    encoder: Encoder,
    /// `special^{-1} mod q_j`
    special_inv: Vec<u64>,
    /// `rescale_inv[l][j] = q_l^{-1} mod q_j` for `j < l`
    rescale_inv: Vec<Vec<u64>>,
}

impl CkksContext {
    pub fn new(params: HeParams) -> Result<Self> {
        params.validate()?;
        let n = params.poly_degree;
        let mut tables: Vec<NttTable> = params
            .modulus_chain
            .iter()
            .map(|&q| NttTable::new(q, n))
            .collect();
        tables.push(NttTable::new(params.special_modulus, n));
        let p = params.special_modulus;
        let special_inv = params
            .modulus_chain
            .iter()
            .map(|&q| inv_mod(p % q, q))
            .collect();
        let rescale_inv = (0..params.modulus_chain.len())
            .map(|l| {
                let ql = params.modulus_chain[l];
                params.modulus_chain[..l]
                    .iter()
                    .map(|&q| inv_mod(ql % q, q))
                    .collect()
            })
            .collect();
        Ok(CkksContext {
            encoder: Encoder::new(n),
            params,
            tables,
            special_inv,
            rescale_inv,
        })
    }

    pub fn params(&self) -> &HeParams {
        &self.params
    }

    pub fn slot_count(&self) -> usize {
        self.params.slot_count()
    }

    fn n(&self) -> usize {
        self.params.poly_degree
    }

    fn special_index(&self) -> usize {
        self.params.modulus_chain.len()
    }

    /// Tables of chain primes `0..=level`.
    fn level_tables(&self, level: usize) -> Vec<&NttTable> {
        self.tables[..=level].iter().collect()
    }

    /// Tables of chain primes `0..=level` followed by the special prime.
    fn extended_tables(&self, level: usize) -> Vec<&NttTable> {
        self.tables[..=level]
            .iter()
            .chain(std::iter::once(&self.tables[self.special_index()]))
            .collect()
    }

    fn all_tables(&self) -> Vec<&NttTable> {
        self.tables.iter().collect()
    }

    // ------------------------------------------------------------------ keys

    /// Deterministic key generation: the same `(params, seed)` gives identical keys.
    pub fn keygen(&self, seed: u64) -> KeyMaterial {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let n = self.n();
        let top = self.params.max_level();
        let sigma = self.params.noise_stddev;

        let s_signed = ring::sample_ternary(&mut rng, n);
        let secret_key = SecretKey {
            coeffs: s_signed.iter().map(|&c| c as i8).collect(),
        };

        let chain = self.level_tables(top);
        let mut s_chain = ring::from_signed(&s_signed, &chain);
        ring::to_ntt(&mut s_chain, &chain);
        let a = ring::sample_uniform(&mut rng, n, &chain);
        let mut e = ring::from_signed(&ring::sample_gaussian(&mut rng, n, sigma), &chain);
        ring::to_ntt(&mut e, &chain);
        let mut b = ring::mul_ntt(&a, &s_chain, &chain);
        ring::negate(&mut b, &chain);
        ring::add_assign(&mut b, &e, &chain);
        let public_key = PublicKey { b, a };

        // s² as the relinearization target
        let all = self.all_tables();
        let mut s_all = ring::from_signed(&s_signed, &all);
        ring::to_ntt(&mut s_all, &all);
        let s_squared = ring::mul_ntt(&s_all, &s_all, &all);
        let relin_key = RelinKey(self.switching_key(&mut rng, &s_all, &s_squared));

        let mut keys = BTreeMap::new();
        let slots = self.slot_count();
        let mut step = 1;
        while step < slots {
            let g = self.galois_element(step);
            let rotated = ring::automorphism(
                &ring::from_signed(&s_signed, &all),
                g,
                &all,
            );
            let mut rotated_ntt = rotated;
            ring::to_ntt(&mut rotated_ntt, &all);
            keys.insert(step, self.switching_key(&mut rng, &s_all, &rotated_ntt));
            step <<= 1;
        }

        KeyMaterial {
            public_key,
            secret_key,
            relin_key,
            galois_keys: GaloisKeys { keys },
        }
    }

    /// Key switching from `s_from` to `s` (both NTT over every table).
    fn switching_key(&self, rng: &mut ChaCha20Rng, s: &Residues, s_from: &Residues) -> KeySwitchKey {
        let n = self.n();
        let all = self.all_tables();
        let special = self.params.special_modulus;
        let digits = (0..self.params.modulus_chain.len())
            .map(|i| {
                let a = ring::sample_uniform(rng, n, &all);
                let mut e = ring::from_signed(
                    &ring::sample_gaussian(rng, n, self.params.noise_stddev),
                    &all,
                );
                ring::to_ntt(&mut e, &all);
                let mut b = ring::mul_ntt(&a, s, &all);
                ring::negate(&mut b, &all);
                ring::add_assign(&mut b, &e, &all);
                // + P·s_from on the i-th prime only; the gadget factor vanishes elsewhere.
                let q = all[i].q;
                let p_mod = special % q;
                for (bk, &sk) in b[i].iter_mut().zip(&s_from[i]) {
                    *bk = add_mod(*bk, mul_mod(p_mod, sk, q), q);
                }
                (b, a)
            })
            .collect();
        KeySwitchKey { digits }
    }

    fn galois_element(&self, step: usize) -> usize {
        let two_n = 2 * self.n();
        let mut g = 1usize;
        for _ in 0..step {
            g = g * 5 % two_n;
        }
        g
    }

    // ------------------------------------------------------- encode/encrypt

    /// Plaintext residues of `values` at `level`, encoded with `scale`.
    fn encode_at(&self, values: &[f64], scale: f64, level: usize) -> Result<Residues> {
        if values.len() > self.slot_count() {
            return Err(HeError::VectorTooLong {
                len: values.len(),
                slots: self.slot_count(),
            });
        }
        let coeffs = self.encoder.encode(values, scale);
        Ok(ring::from_signed(&coeffs, &self.level_tables(level)))
    }

    /// Fresh encryption at the top level with the default scale. Shorter vectors are zero-padded.
    pub fn encrypt<R: Rng + ?Sized>(
        &self,
        values: &[f64],
        pk: &PublicKey,
        rng: &mut R,
    ) -> Result<Ciphertext> {
        let top = self.params.max_level();
        let tables = self.level_tables(top);
        if pk.b.len() != tables.len() {
            return Err(HeError::ContextMismatch("public key basis".into()));
        }
        let n = self.n();
        let scale = self.params.scale;
        let m = self.encode_at(values, scale, top)?;
        let sigma = self.params.noise_stddev;

        let mut v = ring::from_signed(&ring::sample_ternary(rng, n), &tables);
        ring::to_ntt(&mut v, &tables);
        let mut c0 = ring::mul_ntt(&v, &pk.b, &tables);
        let mut c1 = ring::mul_ntt(&v, &pk.a, &tables);
        ring::from_ntt(&mut c0, &tables);
        ring::from_ntt(&mut c1, &tables);
        let e0 = ring::from_signed(&ring::sample_gaussian(rng, n, sigma), &tables);
        let e1 = ring::from_signed(&ring::sample_gaussian(rng, n, sigma), &tables);
        ring::add_assign(&mut c0, &e0, &tables);
        ring::add_assign(&mut c0, &m, &tables);
        ring::add_assign(&mut c1, &e1, &tables);

        Ok(Ciphertext {
            parts: vec![c0, c1],
            level: top,
            scale,
            slot_count: self.slot_count(),
        })
    }

    pub fn decrypt(&self, ct: &Ciphertext, sk: &SecretKey) -> Result<Vec<f64>> {
        self.check(ct)?;
        if sk.coeffs.len() != self.n() {
            return Err(HeError::ContextMismatch("secret key degree".into()));
        }
        // Only the two lowest primes are needed: the message is far below q0·q1.
        let used = ct.level.min(1);
        let tables = self.level_tables(used);
        let s_signed: Vec<i128> = sk.coeffs.iter().map(|&c| c as i128).collect();
        let mut s = ring::from_signed(&s_signed, &tables);
        ring::to_ntt(&mut s, &tables);
        let mut c1: Residues = ct.parts[1][..=used].to_vec();
        ring::to_ntt(&mut c1, &tables);
        let mut m = ring::mul_ntt(&c1, &s, &tables);
        ring::from_ntt(&mut m, &tables);
        let c0: Residues = ct.parts[0][..=used].to_vec();
        ring::add_assign(&mut m, &c0, &tables);

        let coeffs: Vec<f64> = if used == 0 {
            let q0 = tables[0].q;
            m[0].iter().map(|&x| centered(x, q0) as f64).collect()
        } else {
            let q0 = tables[0].q;
            let q1 = tables[1].q;
            let q0_inv = inv_mod(q0 % q1, q1);
            let modulus = q0 as u128 * q1 as u128;
            m[0].iter()
                .zip(&m[1])
                .map(|(&r0, &r1)| {
                    // Garner: x = r0 + q0·((r1 - r0)·q0⁻¹ mod q1)
                    let t = mul_mod(sub_mod(r1, r0 % q1, q1), q0_inv, q1);
                    let x = r0 as u128 + q0 as u128 * t as u128;
                    if x > modulus / 2 {
                        -((modulus - x) as f64)
                    } else {
                        x as f64
                    }
                })
                .collect()
        };
        Ok(self.encoder.decode(&coeffs, ct.scale))
    }

    fn check(&self, ct: &Ciphertext) -> Result<()> {
        if ct.slot_count != self.slot_count() {
            return Err(HeError::ContextMismatch(format!(
                "ciphertext has {} slots, context {}",
                ct.slot_count,
                self.slot_count()
            )));
        }
        if ct.level > self.params.max_level() {
            return Err(HeError::ContextMismatch(format!("level {} beyond chain", ct.level)));
        }
        if ct.parts.len() != 2
            || ct.parts.iter().any(|p| {
                p.len() != ct.level + 1 || p.iter().any(|r| r.len() != self.n())
            })
        {
            return Err(HeError::ContextMismatch("malformed residues".into()));
        }
        for (j, t) in self.tables[..=ct.level].iter().enumerate() {
            if ct.parts.iter().any(|p| p[j].iter().any(|&x| x >= t.q)) {
                return Err(HeError::ContextMismatch("coefficient out of range".into()));
            }
        }
        if !(ct.scale.is_finite() && ct.scale > 0.0) {
            return Err(HeError::ScaleMismatch {
                left: ct.scale,
                right: self.params.scale,
            });
        }
        Ok(())
    }

    fn check_pair(&self, a: &Ciphertext, b: &Ciphertext) -> Result<()> {
        self.check(a)?;
        self.check(b)?;
        if a.level != b.level {
            return Err(HeError::LevelMismatch {
                left: a.level,
                right: b.level,
            });
        }
        if ((a.scale - b.scale) / a.scale).abs() > SCALE_TOLERANCE {
            return Err(HeError::ScaleMismatch {
                left: a.scale,
                right: b.scale,
            });
        }
        Ok(())
    }

    // ------------------------------------------------------------ arithmetic

    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.check_pair(a, b)?;
        let tables = self.level_tables(a.level);
        let mut out = a.clone();
        for (pa, pb) in out.parts.iter_mut().zip(&b.parts) {
            ring::add_assign(pa, pb, &tables);
        }
        Ok(out)
    }

    /// Slot-wise product, relinearized and rescaled; consumes one level.
    pub fn multiply(&self, a: &Ciphertext, b: &Ciphertext, rk: &RelinKey) -> Result<Ciphertext> {
        self.check_pair(a, b)?;
        if a.level == 0 {
            return Err(HeError::LevelExhausted);
        }
        let tables = self.level_tables(a.level);
        let to_ntt = |p: &Residues| {
            let mut p = p.clone();
            ring::to_ntt(&mut p, &tables);
            p
        };
        let (a0, a1) = (to_ntt(&a.parts[0]), to_ntt(&a.parts[1]));
        let (b0, b1) = (to_ntt(&b.parts[0]), to_ntt(&b.parts[1]));
        let mut d0 = ring::mul_ntt(&a0, &b0, &tables);
        let mut d1 = ring::mul_ntt(&a0, &b1, &tables);
        ring::mul_acc_ntt(&mut d1, &a1, &b0, &tables);
        let mut d2 = ring::mul_ntt(&a1, &b1, &tables);
        ring::from_ntt(&mut d0, &tables);
        ring::from_ntt(&mut d1, &tables);
        ring::from_ntt(&mut d2, &tables);

        let (k0, k1) = self.key_switch(&d2, &rk.0)?;
        ring::add_assign(&mut d0, &k0, &tables);
        ring::add_assign(&mut d1, &k1, &tables);
        let product = Ciphertext {
            parts: vec![d0, d1],
            level: a.level,
            scale: a.scale * b.scale,
            slot_count: a.slot_count,
        };
        Ok(self.rescale(product))
    }

    /// Slot-wise product with a plaintext vector encoded at `plain_scale`, then rescaled.
    ///
    /// Encoding at `plain_scale = q_level` leaves the ciphertext scale unchanged.
    pub fn multiply_plain(&self, a: &Ciphertext, values: &[f64], plain_scale: f64) -> Result<Ciphertext> {
        self.check(a)?;
        if a.level == 0 {
            return Err(HeError::LevelExhausted);
        }
        let tables = self.level_tables(a.level);
        let mut m = self.encode_at(values, plain_scale, a.level)?;
        ring::to_ntt(&mut m, &tables);
        let parts = a
            .parts
            .iter()
            .map(|p| {
                let mut p = p.clone();
                ring::to_ntt(&mut p, &tables);
                let mut prod = ring::mul_ntt(&p, &m, &tables);
                ring::from_ntt(&mut prod, &tables);
                prod
            })
            .collect();
        Ok(self.rescale(Ciphertext {
            parts,
            level: a.level,
            scale: a.scale * plain_scale,
            slot_count: a.slot_count,
        }))
    }

    /// The top prime of the ciphertext's current level.
    pub fn level_modulus(&self, level: usize) -> u64 {
        self.params.modulus_chain[level]
    }

    /// Divides by the top prime with rounding.
    fn rescale(&self, mut ct: Ciphertext) -> Ciphertext {
        let l = ct.level;
        let ql = self.params.modulus_chain[l];
        for part in ct.parts.iter_mut() {
            let last = part.pop().expect("level >= 1");
            for (j, residue) in part.iter_mut().enumerate() {
                let table = &self.tables[j];
                let q = table.q;
                let inv = self.rescale_inv[l][j];
                for (x, &top) in residue.iter_mut().zip(&last) {
                    let r = reduce_i64(centered(top, ql), q);
                    *x = table.mul(sub_mod(*x, r, q), inv);
                }
            }
        }
        ct.level -= 1;
        ct.scale /= ql as f64;
        ct
    }

    /// Drops primes down to `level` without changing the scale.
    pub fn mod_drop(&self, ct: &Ciphertext, level: usize) -> Result<Ciphertext> {
        self.check(ct)?;
        if level > ct.level {
            return Err(HeError::LevelMismatch {
                left: ct.level,
                right: level,
            });
        }
        let mut out = ct.clone();
        for p in out.parts.iter_mut() {
            p.truncate(level + 1);
        }
        out.level = level;
        Ok(out)
    }

    /// Hybrid key switching with the special prime: returns `(k0, k1)` with
    /// `k0 + k1·s ≈ d·s'` over the primes of `d`.
    fn key_switch(&self, d: &Residues, key: &KeySwitchKey) -> Result<(Residues, Residues)> {
        let level = d.len() - 1;
        if key.digits.len() < level + 1 {
            return Err(HeError::ContextMismatch("switching key too short".into()));
        }
        let n = self.n();
        let special_idx = self.special_index();
        let ext = self.extended_tables(level);
        // key rows for chain primes 0..=level and the special prime
        let key_row = |t: usize| if t <= level { t } else { special_idx };
        let mut acc0: Residues = vec![vec![0u64; n]; level + 2];
        let mut acc1: Residues = vec![vec![0u64; n]; level + 2];
        for (i, digit) in d.iter().enumerate() {
            let qi = self.tables[i].q;
            let signed: Vec<i64> = digit.iter().map(|&x| centered(x, qi)).collect();
            let (kb, ka) = &key.digits[i];
            for (t, table) in ext.iter().enumerate() {
                let qt = table.q;
                let mut tmp: Vec<u64> = if t == i {
                    digit.clone()
                } else {
                    signed.iter().map(|&c| reduce_i64(c, qt)).collect()
                };
                table.forward(&mut tmp);
                let row = key_row(t);
                let (b_row, a_row) = (&kb[row], &ka[row]);
                for k in 0..n {
                    acc0[t][k] = add_mod(acc0[t][k], table.mul(tmp[k], b_row[k]), qt);
                    acc1[t][k] = add_mod(acc1[t][k], table.mul(tmp[k], a_row[k]), qt);
                }
            }
        }
        ring::from_ntt(&mut acc0, &ext);
        ring::from_ntt(&mut acc1, &ext);
        Ok((self.mod_down(acc0), self.mod_down(acc1)))
    }

    /// Divides an extended-basis polynomial by the special prime with rounding.
    fn mod_down(&self, mut poly: Residues) -> Residues {
        let p = self.params.special_modulus;
        let last = poly.pop().expect("special residue");
        for (j, residue) in poly.iter_mut().enumerate() {
            let table = &self.tables[j];
            let q = table.q;
            let inv = self.special_inv[j];
            for (x, &top) in residue.iter_mut().zip(&last) {
                let r = reduce_i64(centered(top, p), q);
                *x = table.mul(sub_mod(*x, r, q), inv);
            }
        }
        poly
    }

    /// Cyclic left rotation of the slots by `k`, composed from power-of-two steps.
    pub fn rotate(&self, ct: &Ciphertext, k: usize, gk: &GaloisKeys) -> Result<Ciphertext> {
        self.check(ct)?;
        let k = k % self.slot_count();
        let mut out = ct.clone();
        let mut bit = 1;
        while bit < self.slot_count() {
            if k & bit != 0 {
                out = self.rotate_step(&out, bit, gk)?;
            }
            bit <<= 1;
        }
        Ok(out)
    }

    fn rotate_step(&self, ct: &Ciphertext, step: usize, gk: &GaloisKeys) -> Result<Ciphertext> {
        let key = gk.keys.get(&step).ok_or(HeError::MissingGaloisKey(step))?;
        let g = self.galois_element(step);
        let tables = self.level_tables(ct.level);
        let mut c0 = ring::automorphism(&ct.parts[0], g, &tables);
        let c1 = ring::automorphism(&ct.parts[1], g, &tables);
        let (k0, k1) = self.key_switch(&c1, key)?;
        ring::add_assign(&mut c0, &k0, &tables);
        Ok(Ciphertext {
            parts: vec![c0, k1],
            level: ct.level,
            scale: ct.scale,
            slot_count: ct.slot_count,
        })
    }

    /// Rotate-and-add folding: afterwards every slot holds the sum of all input slots.
    pub fn sum_slots(&self, ct: &Ciphertext, gk: &GaloisKeys) -> Result<Ciphertext> {
        self.check(ct)?;
        let mut acc = ct.clone();
        let mut step = 1;
        while step < self.slot_count() {
            let rotated = self.rotate_step(&acc, step, gk)?;
            acc = self.add(&acc, &rotated)?;
            step <<= 1;
        }
        Ok(acc)
    }
}
