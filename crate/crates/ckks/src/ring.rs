//! Residue-number-system polynomials: one coefficient vector per prime.

use crate::arith::{add_mod, reduce_i128, sub_mod, NttTable};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// `residues[j]` holds the polynomial modulo the `j`-th prime of whatever basis it lives in.
pub type Residues = Vec<Vec<u64>>;

pub fn from_signed(coeffs: &[i128], tables: &[&NttTable]) -> Residues {
    tables
        .iter()
        .map(|t| coeffs.iter().map(|&c| reduce_i128(c, t.q)).collect())
        .collect()
}

pub fn to_ntt(poly: &mut Residues, tables: &[&NttTable]) {
    for (r, t) in poly.iter_mut().zip(tables) {
        t.forward(r);
    }
}

pub fn from_ntt(poly: &mut Residues, tables: &[&NttTable]) {
    for (r, t) in poly.iter_mut().zip(tables) {
        t.inverse(r);
    }
}

pub fn add_assign(a: &mut Residues, b: &Residues, tables: &[&NttTable]) {
    for ((x, y), t) in a.iter_mut().zip(b).zip(tables) {
        for (xi, &yi) in x.iter_mut().zip(y) {
            *xi = add_mod(*xi, yi, t.q);
        }
    }
}

/// Pointwise product of two NTT-domain polynomials.
pub fn mul_ntt(a: &Residues, b: &Residues, tables: &[&NttTable]) -> Residues {
    a.iter()
        .zip(b)
        .zip(tables)
        .map(|((x, y), t)| x.iter().zip(y).map(|(&p, &q)| t.mul(p, q)).collect())
        .collect()
}

/// `acc += a ⊙ b` in the NTT domain.
pub fn mul_acc_ntt(acc: &mut Residues, a: &Residues, b: &Residues, tables: &[&NttTable]) {
    for (((z, x), y), t) in acc.iter_mut().zip(a).zip(b).zip(tables) {
        for ((zi, &xi), &yi) in z.iter_mut().zip(x).zip(y) {
            *zi = add_mod(*zi, t.mul(xi, yi), t.q);
        }
    }
}

pub fn negate(a: &mut Residues, tables: &[&NttTable]) {
    for (x, t) in a.iter_mut().zip(tables) {
        for xi in x.iter_mut() {
            *xi = sub_mod(0, *xi, t.q);
        }
    }
}

/// Applies `X -> X^galois` to a coefficient-form polynomial.
pub fn automorphism(poly: &Residues, galois: usize, tables: &[&NttTable]) -> Residues {
    let n = poly[0].len();
    let two_n = 2 * n;
    poly.iter()
        .zip(tables)
        .map(|(r, t)| {
            let mut out = vec![0u64; n];
            for (i, &c) in r.iter().enumerate() {
                let k = i * galois % two_n;
                if k < n {
                    out[k] = c;
                } else {
                    out[k - n] = sub_mod(0, c, t.q);
                }
            }
            out
        })
        .collect()
}

pub fn sample_ternary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<i128> {
    (0..n).map(|_| rng.gen_range(-1i128..=1)).collect()
}

pub fn sample_gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize, sigma: f64) -> Vec<i128> {
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    (0..n).map(|_| normal.sample(rng).round() as i128).collect()
}

pub fn sample_uniform<R: Rng + ?Sized>(rng: &mut R, n: usize, tables: &[&NttTable]) -> Residues {
    tables
        .iter()
        .map(|t| (0..n).map(|_| rng.gen_range(0..t.q)).collect())
        .collect()
}
