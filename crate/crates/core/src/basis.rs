//! Equidistant B-spline bases on `[0, 1]`.
//!
//! A basis of degree `p` with `K` interior intervals has `K + p` functions
//! `B_{-p+1}, ..., B_K`, where `B_k` is supported on `(κ_{k-1}, κ_{k+p}]` and
//! the knots are `κ_k = k / K`. Column `j` of a design matrix holds
//! `B_{j-p+1}`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::penalty::PenaltyOperator;

/// Largest supported spline degree.
pub const MAX_DEGREE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BasisSpec {
    degree: usize,
    interior_count: usize,
}

impl BasisSpec {
    pub fn new(degree: usize, interior_count: usize) -> Result<Self> {
        if degree > MAX_DEGREE {
            return domain(format!("degree {degree} exceeds the cap of {MAX_DEGREE}"));
        }
        if interior_count < 1 {
            return domain("interior knot count must be at least 1");
        }
        Ok(Self {
            degree,
            interior_count,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn interior_count(&self) -> usize {
        self.interior_count
    }

    /// Number of basis functions, `K + p`.
    pub fn dim(&self) -> usize {
        self.interior_count + self.degree
    }

    /// Knot `κ_k = k / K`, computed directly from the rational position.
    pub fn knot(&self, k: i64) -> f64 {
        k as f64 / self.interior_count as f64
    }

    /// The extended knot vector `κ_{-p}, ..., κ_{K+p}` (all knots touched by
    /// the support of some basis function).
    pub fn knots(&self) -> Vec<f64> {
        let p = self.degree as i64;
        let k = self.interior_count as i64;
        (-p..=k + p).map(|i| self.knot(i)).collect()
    }

    /// 1-based index `j` of the interval `(κ_{j-1}, κ_j]` holding `x`; the
    /// first interval is closed at 0.
    pub fn interval_of(&self, x: f64) -> usize {
        let kk = self.interior_count;
        let mut j = ((x * kk as f64).ceil() as i64).clamp(1, kk as i64) as usize;
        while j > 1 && x <= self.knot(j as i64 - 1) {
            j -= 1;
        }
        while j < kk && x > self.knot(j as i64) {
            j += 1;
        }
        j
    }

    fn check_domain(x: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&x) {
            return domain(format!("x = {x} lies outside [0, 1]"));
        }
        Ok(())
    }

    /// Writes the `p + 1` basis values that can be nonzero at `x` into
    /// `out[..=p]` and returns the column of the first one.
    ///
    /// Triangular Cox-de Boor scheme; `x` must already be in `[0, 1]`.
    pub(crate) fn eval_local(&self, x: f64, out: &mut [f64]) -> usize {
        let p = self.degree;
        let j = self.interval_of(x) as i64;
        let mut left = [0.0; MAX_DEGREE + 1];
        let mut right = [0.0; MAX_DEGREE + 1];
        out[0] = 1.0;
        for d in 1..=p {
            left[d] = x - self.knot(j - d as i64);
            right[d] = self.knot(j - 1 + d as i64) - x;
            let mut saved = 0.0;
            for r in 0..d {
                let temp = out[r] / (right[r + 1] + left[d - r]);
                out[r] = saved + right[r + 1] * temp;
                saved = left[d - r] * temp;
            }
            out[d] = saved;
        }
        (j - 1) as usize
    }

    /// All `K + p` basis values `(B_{-p+1}(x), ..., B_K(x))`.
    pub fn eval(&self, x: f64) -> Result<Vec<f64>> {
        Self::check_domain(x)?;
        let mut local = [0.0; MAX_DEGREE + 1];
        let start = self.eval_local(x, &mut local);
        let mut values = vec![0.0; self.dim()];
        values[start..=start + self.degree].copy_from_slice(&local[..=self.degree]);
        Ok(values)
    }

    /// Design matrix with rows `B(x_i)^T`.
    pub fn design(&self, xs: &[f64]) -> Result<DesignMatrix> {
        let width = self.degree + 1;
        let mut starts = Vec::with_capacity(xs.len());
        let mut values = vec![0.0; xs.len() * width];
        for (i, &x) in xs.iter().enumerate() {
            Self::check_domain(x)?;
            let start = self.eval_local(x, &mut values[i * width..(i + 1) * width]);
            starts.push(start);
        }
        Ok(DesignMatrix {
            ncols: self.dim(),
            width,
            starts,
            values,
        })
    }
}

/// Shorthand for [`BasisSpec::new`].
pub fn build_basis(degree: usize, interior_count: usize) -> Result<BasisSpec> {
    BasisSpec::new(degree, interior_count)
}

/// Shorthand for [`BasisSpec::eval`].
pub fn eval_basis(spec: &BasisSpec, x: f64) -> Result<Vec<f64>> {
    spec.eval(x)
}

/// Row-banded design matrix: row `i` has `width` consecutive entries
/// starting at column `starts[i]`, all other entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    ncols: usize,
    width: usize,
    starts: Vec<usize>,
    values: Vec<f64>,
}

impl DesignMatrix {
    /// Builds a design from explicit row blocks.
    pub fn from_rows(ncols: usize, width: usize, starts: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if values.len() != starts.len() * width {
            return Err(Error::DimensionMismatch {
                expected: starts.len() * width,
                got: values.len(),
            });
        }
        if starts.iter().any(|&s| s + width > ncols) {
            return domain("row block extends past the last column");
        }
        Ok(Self {
            ncols,
            width,
            starts,
            values,
        })
    }

    pub fn nrows(&self) -> usize {
        self.starts.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Number of stored entries per row.
    pub fn width(&self) -> usize {
        self.width
    }

    /// `(first column, entries)` of row `i`.
    pub fn row(&self, i: usize) -> (usize, &[f64]) {
        (self.starts[i], &self.values[i * self.width..(i + 1) * self.width])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (start, vals) = self.row(i);
        if j >= start && j < start + self.width {
            vals[j - start]
        } else {
            0.0
        }
    }

    pub fn row_dot(&self, i: usize, coef: &[f64]) -> f64 {
        let (start, vals) = self.row(i);
        vals.iter().zip(&coef[start..]).map(|(a, b)| a * b).sum()
    }

    pub fn mul_vec(&self, coef: &[f64]) -> Vec<f64> {
        (0..self.nrows()).map(|i| self.row_dot(i, coef)).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.nrows(), self.ncols, |i, j| self.get(i, j))
    }
}

/// Value of the spline `B(x)^T coef` or of its derivative of order
/// `deriv_order`, using `s^(m)(x) = K^m B^[p-m](x)^T D_m coef`.
pub fn spline_value(spec: &BasisSpec, coef: &[f64], x: f64, deriv_order: usize) -> Result<f64> {
    if coef.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: coef.len(),
        });
    }
    if deriv_order > spec.degree() {
        return domain(format!(
            "derivative order {deriv_order} exceeds degree {}",
            spec.degree()
        ));
    }
    BasisSpec::check_domain(x)?;
    if deriv_order == 0 {
        let mut local = [0.0; MAX_DEGREE + 1];
        let start = spec.eval_local(x, &mut local);
        return Ok(dot_local(&local[..=spec.degree()], &coef[start..]));
    }
    let lower = BasisSpec::new(spec.degree() - deriv_order, spec.interior_count())?;
    let diffs = PenaltyOperator::new(deriv_order, spec.dim())?.apply(coef)?;
    let mut local = [0.0; MAX_DEGREE + 1];
    let start = lower.eval_local(x, &mut local);
    let scale = (spec.interior_count() as f64).powi(deriv_order as i32);
    Ok(scale * dot_local(&local[..=lower.degree()], &diffs[start..]))
}

fn dot_local(local: &[f64], coef: &[f64]) -> f64 {
    local.iter().zip(coef).map(|(a, b)| a * b).sum()
}

/// Coefficients (ascending powers) of the Bernoulli polynomial of the given
/// degree, built from `Br_0 = 1`, `Br_n' = n Br_{n-1}`, `∫_0^1 Br_n = 0`.
fn bernoulli_coefficients(degree: usize) -> Vec<f64> {
    let mut coeffs = vec![1.0];
    for n in 1..=degree {
        // antiderivative of n * Br_{n-1}
        let mut next = vec![0.0; n + 1];
        for (k, c) in coeffs.iter().enumerate() {
            next[k + 1] = n as f64 * c / (k + 1) as f64;
        }
        // fix the constant so that the integral over [0, 1] vanishes
        let integral: f64 = next
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c / (k + 1) as f64)
            .sum();
        next[0] = -integral;
        coeffs = next;
    }
    coeffs
}

/// Bernoulli polynomial `Br_degree(x)`.
pub fn bernoulli_poly(degree: usize, x: f64) -> f64 {
    bernoulli_coefficients(degree)
        .iter()
        .rev()
        .fold(0.0, |acc, c| acc * x + c)
}
