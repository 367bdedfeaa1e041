//! Banded LU factorization with partial pivoting.
//!
//! Row `r` stores columns `r - kl ..= r + ku + kl`; the extra `kl` super
//! diagonals hold fill produced by row interchanges. Row swaps are applied to
//! the trailing columns only, so multipliers stay where they were computed and
//! the forward solve replays the interchanges in order.

use crate::error::{Result, WaveError};

#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn idx(&self, row: usize, col: usize) -> usize {
        debug_assert!(col + self.kl >= row && col <= row + self.ku + self.kl);
        row * self.width + (col + self.kl - row)
    }

    #[inline]
    pub fn in_band(&self, row: usize, col: usize) -> bool {
        row < self.n && col < self.n && col + self.kl >= row && col <= row + self.ku
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        if self.in_band(row, col) {
            self.data[self.idx(row, col)]
        } else {
            0.0
        }
    }

    /// Adds `v` to entry `(row, col)`; panics outside the declared band.
    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        assert!(
            self.in_band(row, col),
            "entry ({row}, {col}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let k = self.idx(row, col);
        self.data[k] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|r| {
                let lo = r.saturating_sub(self.kl);
                let hi = (r + self.ku).min(self.n - 1);
                (lo..=hi).map(|c| self.data[self.idx(r, c)] * x[c]).sum()
            })
            .collect()
    }

    /// Factorizes in place, consuming the matrix.
    pub fn factorize(mut self) -> Result<BandedLu> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut piv = vec![0usize; n];
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = scale * f64::EPSILON * 1e-3;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + ku + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.data[self.idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            piv[k] = p;
            if !(best > tiny) {
                return Err(WaveError::Singular(k));
            }
            if p != k {
                for c in k..=last_col {
                    let a = self.idx(k, c);
                    let b = self.idx(p, c);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for r in k + 1..=last_row {
                let irk = self.idx(r, k);
                let l = self.data[irk] / pivot;
                self.data[irk] = l;
                if l != 0.0 {
                    for c in k + 1..=last_col {
                        let ikc = self.idx(k, c);
                        let irc = self.idx(r, c);
                        self.data[irc] -= l * self.data[ikc];
                    }
                }
            }
        }
        Ok(BandedLu { a: self, piv })
    }
}

#[derive(Clone, Debug)]
pub struct BandedLu {
    a: BandedMatrix,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn dim(&self) -> usize {
        self.a.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let a = &self.a;
        let n = a.n;
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for r in k + 1..=(k + a.kl).min(n - 1) {
                    b[r] -= a.data[a.idx(r, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for c in k + 1..=(k + a.ku + a.kl).min(n - 1) {
                s -= a.data[a.idx(k, c)] * b[c];
            }
            b[k] = s / a.data[a.idx(k, k)];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
