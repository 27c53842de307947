//! Canonical-embedding encoder: `N/2` real slots packed into a ring element.
//!
//! Slot `j` is the evaluation at `ζ^(5^j)` with `ζ = exp(iπ/N)`, so the
//! Galois map `X -> X^(5^k)` rotates slots left by `k`.

use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct Encoder {
    n: usize,
    slots: usize,
    rot_group: Vec<usize>,
    ksi_pows: Vec<Complex64>,
}

impl Encoder {
    pub fn new(n: usize) -> Self {
        let m = 2 * n;
        let slots = n / 2;
        let mut rot_group = Vec::with_capacity(slots);
        let mut g = 1usize;
        for _ in 0..slots {
            rot_group.push(g);
            g = g * 5 % m;
        }
        let ksi_pows = (0..=m)
            .map(|k| {
                let angle = 2.0 * PI * k as f64 / m as f64;
                Complex64::new(angle.cos(), angle.sin())
            })
            .collect();
        Encoder {
            n,
            slots,
            rot_group,
            ksi_pows,
        }
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    /// Integer coefficients of `scale · σ⁻¹(values)`; missing slots are zero.
    pub fn encode(&self, values: &[f64], scale: f64) -> Vec<i128> {
        assert!(values.len() <= self.slots);
        let mut z: Vec<Complex64> = (0..self.slots)
            .map(|i| Complex64::new(values.get(i).copied().unwrap_or(0.0), 0.0))
            .collect();
        self.fft_special_inv(&mut z);
        let mut coeffs = vec![0i128; self.n];
        for (i, c) in z.iter().enumerate() {
            coeffs[i] = (c.re * scale).round() as i128;
            coeffs[i + self.slots] = (c.im * scale).round() as i128;
        }
        coeffs
    }

    /// Real parts of the slot values of a centered coefficient vector.
    pub fn decode(&self, coeffs: &[f64], scale: f64) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.n);
        let mut z: Vec<Complex64> = (0..self.slots)
            .map(|i| Complex64::new(coeffs[i] / scale, coeffs[i + self.slots] / scale))
            .collect();
        self.fft_special(&mut z);
        z.into_iter().map(|c| c.re).collect()
    }

    fn fft_special(&self, vals: &mut [Complex64]) {
        let size = vals.len();
        let m = 2 * self.n;
        bit_reverse_permute(vals);
        let mut len = 2;
        while len <= size {
            let lenh = len >> 1;
            let lenq = len << 2;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (self.rot_group[j] % lenq) * m / lenq;
                    let u = vals[i + j];
                    let v = vals[i + j + lenh] * self.ksi_pows[idx];
                    vals[i + j] = u + v;
                    vals[i + j + lenh] = u - v;
                }
            }
            len <<= 1;
        }
    }

    fn fft_special_inv(&self, vals: &mut [Complex64]) {
        let size = vals.len();
        let m = 2 * self.n;
        let mut len = size;
        while len >= 2 {
            let lenh = len >> 1;
            let lenq = len << 2;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (lenq - (self.rot_group[j] % lenq)) * m / lenq;
                    let u = vals[i + j] + vals[i + j + lenh];
                    let v = (vals[i + j] - vals[i + j + lenh]) * self.ksi_pows[idx];
                    vals[i + j] = u;
                    vals[i + j + lenh] = v;
                }
            }
            len >>= 1;
        }
        bit_reverse_permute(vals);
        let inv = 1.0 / size as f64;
        for v in vals.iter_mut() {
            *v *= inv;
        }
    }
}

fn bit_reverse_permute<T>(vals: &mut [T]) {
    let n = vals.len();
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j ^= bit;
        if i < j {
            vals.swap(i, j);
        }
    }
}
