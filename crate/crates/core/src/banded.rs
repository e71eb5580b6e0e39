//! Symmetric positive-definite band matrices and their Cholesky factors.
//!
//! The weighted normal matrix `Z^T W Z + c D_m^T D_m` of a degree-`p` spline
//! has half-bandwidth `max(p, m)`, so factorization costs `O(d bw^2)`.

use crate::error::{Error, Result};
use crate::penalty::PenaltyOperator;

/// Lower band of a symmetric matrix; entry `(i, j)` with `i - bw <= j <= i`
/// lives at `data[i * (bw + 1) + j + bw - i]`.
#[derive(Debug, Clone)]
pub(crate) struct BandedSpd {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        let bw = bw.min(n.saturating_sub(1));
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.bw + 1) + j + self.bw - i
    }

    /// Entry `(i, j)` of the symmetric matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Adds `w z z^T` where `z` is zero outside `start..start + vals.len()`.
    pub fn add_outer(&mut self, start: usize, vals: &[f64], w: f64) {
        for (a, va) in vals.iter().enumerate() {
            let wa = w * va;
            if wa == 0.0 {
                continue;
            }
            for (b, vb) in vals.iter().enumerate().take(a + 1) {
                let k = self.idx(start + a, start + b);
                self.data[k] += wa * vb;
            }
        }
    }

    /// Adds `scale * D_m^T D_m`.
    pub fn add_penalty(&mut self, op: &PenaltyOperator, scale: f64) {
        debug_assert!(op.bandwidth() <= self.bw && op.dim() == self.n);
        let gram = op.gram();
        for i in 0..self.n {
            for j in i.saturating_sub(op.bandwidth())..=i {
                let k = self.idx(i, j);
                self.data[k] += scale * gram[(i, j)];
            }
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn factor(&self) -> Result<BandedCholesky> {
        let (n, bw) = (self.n, self.bw);
        let mut l = self.data.clone();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = l[self.idx(i, j)];
                let klo = lo.max(j.saturating_sub(bw));
                for k in klo..j {
                    s -= l[self.idx(i, k)] * l[self.idx(j, k)];
                }
                if i == j {
                    let diag = self.data[self.idx(i, i)];
                    if !(s > 1e-13 * diag.abs()) || !s.is_finite() {
                        return Err(Error::Singular(format!(
                            "nonpositive pivot at column {i} of the normal matrix"
                        )));
                    }
                    l[self.idx(i, i)] = s.sqrt();
                } else {
                    l[self.idx(i, j)] = s / l[self.idx(j, j)];
                }
            }
        }
        Ok(BandedCholesky { n, bw, l })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.l[i * (self.bw + 1) + j + self.bw - i]
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(self.bw)..i {
                s -= self.at(i, k) * b[k];
            }
            b[i] = s / self.at(i, i);
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n.min(i + self.bw + 1) {
                s -= self.at(k, i) * b[k];
            }
            b[i] = s / self.at(i, i);
        }
    }

    #[cfg(test)]
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Dense inverse, row-major.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            self.solve_in_place(&mut e);
            for i in 0..n {
                inv[i * n + j] = e[i];
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn solves_against_dense_cholesky() {
        let n = 15;
        let bw = 3;
        let mut band = BandedSpd::zeros(n, bw);
        for r in 0..40 {
            let start = (r * 7) % (n - bw);
            let vals: Vec<f64> = (0..=bw).map(|k| ((r + k) as f64 * 0.31).sin() + 1.1).collect();
            band.add_outer(start, &vals, 0.5 + (r % 3) as f64);
        }
        band.add_penalty(&PenaltyOperator::new(2, n).unwrap(), 0.7);
        let dense = DMatrix::from_fn(n, n, |i, j| band.get(i, j));
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let chol = band.factor().unwrap();
        let x = chol.solve(&rhs);
        let dense_chol = dense.cholesky().unwrap();
        let expect = dense_chol.solve(&DVector::from_vec(rhs));
        for (a, b) in x.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
        let inv = chol.inverse();
        let dense_inv = dense_chol.inverse();
        for i in 0..n {
            for j in 0..n {
                assert!((inv[i * n + j] - dense_inv[(i, j)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn detects_empty_column() {
        let mut band = BandedSpd::zeros(4, 1);
        band.add_outer(0, &[1.0, 0.5], 1.0);
        band.add_outer(2, &[0.0, 1.0], 1.0);
        assert!(matches!(band.factor(), Err(Error::Singular(_))));
    }
}
