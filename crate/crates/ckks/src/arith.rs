//! Word-sized modular arithmetic, prime search and the negacyclic NTT.

#[inline]
pub fn mul_mod(a: u64, b: u64, q: u64) -> u64 {
    ((a as u128 * b as u128) % q as u128) as u64
}

#[inline]
pub fn add_mod(a: u64, b: u64, q: u64) -> u64 {
    let s = a + b;
    if s >= q {
        s - q
    } else {
        s
    }
}

#[inline]
pub fn sub_mod(a: u64, b: u64, q: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + q - b
    }
}

pub fn pow_mod(mut base: u64, mut exp: u64, q: u64) -> u64 {
    let mut acc = 1u64 % q;
    base %= q;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, q);
        }
        base = mul_mod(base, base, q);
        exp >>= 1;
    }
    acc
}

/// Inverse modulo a prime.
pub fn inv_mod(a: u64, q: u64) -> u64 {
    pow_mod(a, q - 2, q)
}

/// Maps a signed integer into `[0, q)`.
#[inline]
pub fn reduce_i128(x: i128, q: u64) -> u64 {
    let r = x.rem_euclid(q as i128);
    r as u64
}

/// Maps a signed word into `[0, q)`.
#[inline]
pub fn reduce_i64(x: i64, q: u64) -> u64 {
    let r = x.unsigned_abs() % q;
    if x < 0 && r != 0 {
        q - r
    } else {
        r
    }
}

/// Centered representative of `x mod q` in `(-q/2, q/2]`.
#[inline]
pub fn centered(x: u64, q: u64) -> i64 {
    if x > q / 2 {
        -((q - x) as i64)
    } else {
        x as i64
    }
}

/// Deterministic Miller-Rabin, exact for every 64-bit input.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &p in &BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        r += 1;
    }
    'outer: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// The `count` smallest primes `p > 2^bits` with `p ≡ 1 (mod 2n)`, skipping any in `exclude`.
pub fn ntt_primes_above(bits: u32, count: usize, n: usize, exclude: &[u64]) -> Vec<u64> {
    let step = 2 * n as u64;
    let mut candidate = ((1u64 << bits) / step + 1) * step + 1;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        if is_prime(candidate) && !exclude.contains(&candidate) {
            out.push(candidate);
        }
        candidate += step;
    }
    out
}

fn bit_reverse(mut x: usize, bits: u32) -> usize {
    let mut r = 0;
    for _ in 0..bits {
        r = (r << 1) | (x & 1);
        x >>= 1;
    }
    r
}

/// Shoup precomputation `floor(w * 2^64 / q)`.
#[inline]
fn shoup(w: u64, q: u64) -> u64 {
    (((w as u128) << 64) / q as u128) as u64
}

#[inline]
fn mul_shoup(a: u64, w: u64, w_shoup: u64, q: u64) -> u64 {
    let hi = ((a as u128 * w_shoup as u128) >> 64) as u64;
    let r = a.wrapping_mul(w).wrapping_sub(hi.wrapping_mul(q));
    if r >= q {
        r - q
    } else {
        r
    }
}

/// Precomputed tables for the negacyclic NTT modulo one prime `q ≡ 1 (mod 2n)`.
#[derive(Debug, Clone)]
pub struct NttTable {
    pub q: u64,
    n: usize,
    psi_rev: Vec<u64>,
    psi_rev_shoup: Vec<u64>,
    psi_inv_rev: Vec<u64>,
    psi_inv_rev_shoup: Vec<u64>,
    n_inv: u64,
    n_inv_shoup: u64,
    /// `floor(2^128 / q)` for Barrett reduction.
    barrett: u128,
}

impl NttTable {
    pub fn new(q: u64, n: usize) -> Self {
        assert!(n.is_power_of_two());
        assert_eq!((q - 1) % (2 * n as u64), 0, "prime must be 1 mod 2n");
        let psi = primitive_root_2n(q, n);
        let psi_inv = inv_mod(psi, q);
        let log_n = n.trailing_zeros();
        let mut psi_rev = vec![0u64; n];
        let mut psi_inv_rev = vec![0u64; n];
        let mut pw = 1u64;
        let mut pw_inv = 1u64;
        for i in 0..n {
            let r = bit_reverse(i, log_n);
            psi_rev[r] = pw;
            psi_inv_rev[r] = pw_inv;
            pw = mul_mod(pw, psi, q);
            pw_inv = mul_mod(pw_inv, psi_inv, q);
        }
        let psi_rev_shoup = psi_rev.iter().map(|&w| shoup(w, q)).collect();
        let psi_inv_rev_shoup = psi_inv_rev.iter().map(|&w| shoup(w, q)).collect();
        let n_inv = inv_mod(n as u64, q);
        NttTable {
            q,
            n,
            psi_rev,
            psi_rev_shoup,
            psi_inv_rev,
            psi_inv_rev_shoup,
            n_inv,
            n_inv_shoup: shoup(n_inv, q),
            barrett: u128::MAX / q as u128,
        }
    }

    /// `a·b mod q` by Barrett reduction; both inputs must be below `q`.
    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        let q = self.q;
        let x = a as u128 * b as u128;
        let (x0, x1) = (x as u64 as u128, x >> 64);
        let (m0, m1) = (self.barrett as u64 as u128, self.barrett >> 64);
        let mid = ((x0 * m0) >> 64) + x0 * m1 + x1 * m0;
        let est = (mid >> 64) + x1 * m1;
        let mut r = (x as u64).wrapping_sub((est as u64).wrapping_mul(q));
        while r >= q {
            r -= q;
        }
        r
    }

    /// In-place forward transform; output is in bit-reversed evaluation order.
    pub fn forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let q = self.q;
        let mut t = self.n;
        let mut m = 1;
        while m < self.n {
            t >>= 1;
            for i in 0..m {
                let j1 = 2 * i * t;
                let w = self.psi_rev[m + i];
                let ws = self.psi_rev_shoup[m + i];
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = mul_shoup(a[j + t], w, ws, q);
                    a[j] = add_mod(u, v, q);
                    a[j + t] = sub_mod(u, v, q);
                }
            }
            m <<= 1;
        }
    }

    pub fn inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let q = self.q;
        let mut t = 1;
        let mut m = self.n;
        while m > 1 {
            let h = m >> 1;
            let mut j1 = 0;
            for i in 0..h {
                let w = self.psi_inv_rev[h + i];
                let ws = self.psi_inv_rev_shoup[h + i];
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = a[j + t];
                    a[j] = add_mod(u, v, q);
                    a[j + t] = mul_shoup(sub_mod(u, v, q), w, ws, q);
                }
                j1 += 2 * t;
            }
            t <<= 1;
            m = h;
        }
        for x in a.iter_mut() {
            *x = mul_shoup(*x, self.n_inv, self.n_inv_shoup, q);
        }
    }
}

fn primitive_root_2n(q: u64, n: usize) -> u64 {
    let order = 2 * n as u64;
    let exp = (q - 1) / order;
    for g in 2..q {
        let psi = pow_mod(g, exp, q);
        // psi has order exactly 2n iff psi^n = -1
        if pow_mod(psi, n as u64, q) == q - 1 {
            return psi;
        }
    }
    unreachable!("no primitive 2n-th root for a prime that is 1 mod 2n")
}
