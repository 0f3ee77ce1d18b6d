//! Randomized Sylvester-Hadamard ±1 sensing operator.
//!
//! `A[k, perm[l]] = H[rows[k], l] · sign[l]` where `H` is the order-n
//! Sylvester-Hadamard matrix. Applying `A` costs one permutation, one sign
//! flip and one in-place fast Walsh-Hadamard transform.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// In-place unnormalized fast Walsh-Hadamard transform (Sylvester order).
///
/// Panics if `data.len()` is not a power of two.
pub fn fwht(data: &mut [f64]) {
    let n = data.len();
    assert!(n.is_power_of_two(), "fwht length must be a power of two, got {n}");
    let mut h = 1;
    while h < n {
        for block in data.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// Entry `H[row, col]` of the Sylvester-Hadamard matrix.
#[inline]
pub fn hadamard_entry(row: usize, col: usize) -> f64 {
    if (row & col).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    n: usize,
    rows: Vec<usize>,
    perm: Vec<usize>,
    signs: Vec<f64>,
}

impl SensingMatrix {
    /// Plain Sylvester rows `0..m`, no randomization.
    pub fn sylvester(n: usize, m: usize) -> Result<Self> {
        check_dims(n, m)?;
        Ok(SensingMatrix {
            n,
            rows: (0..m).collect(),
            perm: (0..n).collect(),
            signs: vec![1.0; n],
        })
    }

    /// Seeded randomized operator: uniform pixel permutation, per-pixel sign
    /// flip and a uniformly shuffled row order. Row 0 (all ones) is ordered
    /// last so it only appears when `m == n`.
    pub fn randomized(n: usize, m: usize, seed: u64) -> Result<Self> {
        check_dims(n, m)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let signs = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        let mut order: Vec<usize> = (1..n).collect();
        order.shuffle(&mut rng);
        order.push(0);
        order.truncate(m);
        Ok(SensingMatrix {
            n,
            rows: order,
            perm,
            signs,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// The operator made of the first `m` rows.
    pub fn prefix(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.m() {
            return Err(Error::param("m", format!("prefix length must be in 1..={}, got {m}", self.m())));
        }
        Ok(SensingMatrix {
            n: self.n,
            rows: self.rows[..m].to_vec(),
            perm: self.perm.clone(),
            signs: self.signs.clone(),
        })
    }

    /// Entry `A[k, pixel]`.
    pub fn entry(&self, k: usize, pixel: usize) -> f64 {
        // perm maps transform slot -> pixel; invert on the fly.
        let slot = self.perm.iter().position(|&p| p == pixel).expect("pixel in range");
        hadamard_entry(self.rows[k], slot) * self.signs[slot]
    }

    /// Row `k` as a dense ±1 vector over pixels.
    pub fn row(&self, k: usize) -> Result<Vec<f64>> {
        if k >= self.m() {
            return Err(Error::IndexOutOfRange { index: k, len: self.m() });
        }
        let r = self.rows[k];
        let mut out = vec![0.0; self.n];
        for (slot, &pixel) in self.perm.iter().enumerate() {
            out[pixel] = hadamard_entry(r, slot) * self.signs[slot];
        }
        Ok(out)
    }

    /// Dense `m × n` materialization, row-major. Intended for small `n`.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.m()).map(|k| self.row(k).expect("row in range")).collect()
    }

    /// `A·x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: x.len(),
            });
        }
        let mut z: Vec<f64> = self.perm.iter().zip(&self.signs).map(|(&p, &s)| s * x[p]).collect();
        fwht(&mut z);
        Ok(self.rows.iter().map(|&r| z[r]).collect())
    }

    /// `Aᵀ·y`.
    pub fn apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.m() {
            return Err(Error::LengthMismatch {
                expected: self.m(),
                actual: y.len(),
            });
        }
        let mut t = vec![0.0; self.n];
        for (&r, &v) in self.rows.iter().zip(y) {
            t[r] = v;
        }
        fwht(&mut t);
        let mut out = vec![0.0; self.n];
        for (slot, &pixel) in self.perm.iter().enumerate() {
            out[pixel] = self.signs[slot] * t[slot];
        }
        Ok(out)
    }

    /// The two DMD detector masks for row `k`: `+1` pixels and `−1` pixels.
    pub fn split_pattern(&self, k: usize) -> Result<(Vec<bool>, Vec<bool>)> {
        let row = self.row(k)?;
        let pos: Vec<bool> = row.iter().map(|&v| v > 0.0).collect();
        let neg = pos.iter().map(|&p| !p).collect();
        Ok((pos, neg))
    }
}

fn check_dims(n: usize, m: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::param("n", format!("pixel count must be a power of two, got {n}")));
    }
    if m == 0 || m > n {
        return Err(Error::param("m", format!("must be in 1..={n}, got {m}")));
    }
    Ok(())
}
