//! Difference penalties on adjacent spline coefficients.

use nalgebra::DMatrix;

use crate::error::{domain, Error, Result};

/// The `m`-th order difference matrix `D_m` ((d - m) × d) and its Gram
/// matrix `D_m^T D_m`.
///
/// Every row of `D_m` is the same stencil shifted by one column, so only the
/// stencil is stored. The Gram matrix is banded with half-bandwidth `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyOperator {
    order: usize,
    dim: usize,
    stencil: Vec<i64>,
    gram: DMatrix<f64>,
}

impl PenaltyOperator {
    pub fn new(order: usize, dim: usize) -> Result<Self> {
        if order < 1 {
            return domain("difference order must be at least 1");
        }
        if order >= dim {
            return domain(format!(
                "difference order {order} must be smaller than the dimension {dim}"
            ));
        }
        // m-fold composition of the first difference (-1, 1)
        let mut stencil = vec![1i64];
        for _ in 0..order {
            let mut next = vec![0i64; stencil.len() + 1];
            for (j, c) in stencil.iter().enumerate() {
                next[j] -= c;
                next[j + 1] += c;
            }
            stencil = next;
        }
        let rows = dim - order;
        let mut gram_int = vec![0i64; dim * dim];
        for r in 0..rows {
            for (a, ca) in stencil.iter().enumerate() {
                for (b, cb) in stencil.iter().enumerate() {
                    gram_int[(r + a) * dim + r + b] += ca * cb;
                }
            }
        }
        let gram = DMatrix::from_fn(dim, dim, |i, j| gram_int[i * dim + j] as f64);
        Ok(Self {
            order,
            dim,
            stencil,
            gram,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Half-bandwidth of the Gram matrix.
    pub fn bandwidth(&self) -> usize {
        self.order
    }

    /// Row stencil of `D_m`: `(-1)^(m-j) C(m, j)` for `j = 0..=m`.
    pub fn stencil(&self) -> &[i64] {
        &self.stencil
    }

    /// Dense `D_m`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let rows = self.dim - self.order;
        DMatrix::from_fn(rows, self.dim, |r, c| {
            if c >= r && c - r <= self.order {
                self.stencil[c - r] as f64
            } else {
                0.0
            }
        })
    }

    /// `D_m^T D_m`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    fn check_len(&self, coef: &[f64]) -> Result<()> {
        if coef.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: coef.len(),
            });
        }
        Ok(())
    }

    /// `D_m coef`.
    pub fn apply(&self, coef: &[f64]) -> Result<Vec<f64>> {
        self.check_len(coef)?;
        Ok(coef
            .windows(self.order + 1)
            .map(|w| w.iter().zip(&self.stencil).map(|(v, s)| v * *s as f64).sum())
            .collect())
    }

    /// `D_m^T D_m coef`.
    pub fn gram_mul(&self, coef: &[f64]) -> Result<Vec<f64>> {
        self.check_len(coef)?;
        let diffs = self.apply(coef)?;
        let mut out = vec![0.0; self.dim];
        for (r, dv) in diffs.iter().enumerate() {
            for (j, s) in self.stencil.iter().enumerate() {
                out[r + j] += *s as f64 * dv;
            }
        }
        Ok(out)
    }

    /// `(λ/2) coef^T D_m^T D_m coef`.
    pub fn value(&self, coef: &[f64], lambda: f64) -> Result<f64> {
        if lambda == 0.0 {
            self.check_len(coef)?;
            return Ok(0.0);
        }
        let diffs = self.apply(coef)?;
        Ok(0.5 * lambda * diffs.iter().map(|v| v * v).sum::<f64>())
    }
}

/// Shorthand for [`PenaltyOperator::new`].
pub fn difference_matrix(order: usize, dim: usize) -> Result<PenaltyOperator> {
    PenaltyOperator::new(order, dim)
}

/// Shorthand for [`PenaltyOperator::value`].
pub fn penalty_value(op: &PenaltyOperator, coef: &[f64], lambda: f64) -> Result<f64> {
    op.value(coef, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: i64, k: i64) -> i64 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn first_and_second_difference_patterns() {
        let d1 = difference_matrix(1, 4).unwrap().matrix();
        assert_eq!(d1.nrows(), 3);
        for r in 0..3 {
            assert_eq!(d1[(r, r)], -1.0);
            assert_eq!(d1[(r, r + 1)], 1.0);
        }
        let d2 = difference_matrix(2, 5).unwrap();
        assert_eq!(d2.stencil(), &[1, -2, 1]);
        assert_eq!(d2.matrix().nrows(), 3);
        let lin = d2.apply(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(lin, vec![0.0; 3]);
    }

    #[test]
    fn stencil_is_signed_binomial() {
        for m in 1..=6 {
            let op = difference_matrix(m, m + 3).unwrap();
            for (j, s) in op.stencil().iter().enumerate() {
                assert_eq!(s.abs(), binomial(m as i64, j as i64));
            }
            for w in op.stencil().windows(2) {
                assert!(w[0] * w[1] < 0);
            }
        }
    }

    #[test]
    fn rejects_bad_orders() {
        assert!(matches!(difference_matrix(4, 4), Err(Error::Domain(_))));
        assert!(matches!(difference_matrix(0, 4), Err(Error::Domain(_))));
        let op = difference_matrix(2, 5).unwrap();
        assert!(matches!(op.value(&[1.0; 4], 1.0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn penalty_values() {
        let op = difference_matrix(2, 3).unwrap();
        assert_eq!(op.value(&[1.0, 2.0, 4.0], 2.0).unwrap(), 1.0);
        assert_eq!(op.value(&[1.0, 2.0, 4.0], 0.0).unwrap(), 0.0);
        for m in 1..=4 {
            let op = difference_matrix(m, 9).unwrap();
            assert_eq!(op.value(&[1.0; 9], 3.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn annihilates_low_degree_polynomials() {
        for m in 1..=5 {
            let d = 12;
            let op = difference_matrix(m, d).unwrap();
            for q in 0..m {
                let seq: Vec<f64> = (1..=d)
                    .map(|i| (0..=q).map(|t| (i as f64).powi(t as i32) / (t + 1) as f64).sum())
                    .collect();
                for v in op.apply(&seq).unwrap() {
                    assert!(v.abs() < 1e-9, "m={m} q={q} v={v}");
                }
            }
        }
    }

    #[test]
    fn gram_null_space_has_dimension_m() {
        for m in 1..=4 {
            for d in (m + 1)..=12 {
                let op = difference_matrix(m, d).unwrap();
                let g = op.gram().clone();
                assert_eq!(g, g.transpose());
                let eig = g.symmetric_eigen().eigenvalues;
                let max = eig.iter().cloned().fold(0.0f64, f64::max);
                let zeros = eig.iter().filter(|&&e| e.abs() < 1e-10 * max).count();
                assert!(eig.iter().all(|&e| e > -1e-10 * max));
                assert_eq!(zeros, m, "m={m} d={d}");
            }
        }
    }

    #[test]
    fn gram_matches_dense_product_and_sign_flip() {
        let op = difference_matrix(3, 10).unwrap();
        let dm = op.matrix();
        assert_eq!(&(dm.transpose() * &dm), op.gram());
        let flipped = -dm;
        assert_eq!(&(flipped.transpose() * &flipped), op.gram());
        let coef: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).cos()).collect();
        let gm = op.gram_mul(&coef).unwrap();
        let dense = op.gram() * nalgebra::DVector::from_vec(coef);
        for (a, b) in gm.iter().zip(dense.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn composition_of_first_differences() {
        for d in 3..=12 {
            let d1 = difference_matrix(1, d).unwrap().matrix();
            for m in 2..d {
                let dm = difference_matrix(m, d).unwrap().matrix();
                // D_m = D_1^(d-m+1) ... D_1^(d), each step shrinking by one row
                let mut composed = d1.clone();
                for step in 1..m {
                    let first = difference_matrix(1, d - step).unwrap().matrix();
                    composed = first * composed;
                }
                assert_eq!(composed, dm);
            }
        }
    }
}
