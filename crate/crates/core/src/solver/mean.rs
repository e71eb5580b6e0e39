use super::quantile::check_penalty;
use crate::banded::BandedSpd;
use crate::basis::{BasisSpec, DesignMatrix};
use crate::data::Sample;
use crate::error::Result;
use crate::penalty::PenaltyOperator;

pub(crate) fn normal_matrix(
    design: &DesignMatrix,
    weights: Option<&[f64]>,
    penalty: Option<&PenaltyOperator>,
    scale: f64,
) -> BandedSpd {
    let bw = (design.width() - 1).max(penalty.map_or(0, |p| p.bandwidth()));
    let mut a = BandedSpd::zeros(design.ncols(), bw);
    for i in 0..design.nrows() {
        let (start, vals) = design.row(i);
        a.add_outer(start, vals, weights.map_or(1.0, |w| w[i]));
    }
    if let (Some(op), true) = (penalty, scale > 0.0) {
        a.add_penalty(op, scale);
    }
    a
}

/// Penalized least-squares coefficients `(Z^T Z + μ D_m^T D_m)^{-1} Z^T y`.
pub fn fit_penalized_mean(
    sample: &Sample,
    spec: &BasisSpec,
    penalty: Option<&PenaltyOperator>,
    mu: f64,
) -> Result<Vec<f64>> {
    check_penalty(spec, penalty, mu)?;
    let design = spec.design(sample.x())?;
    mean_with_design(sample, &design, penalty, mu)
}

pub(crate) fn mean_with_design(
    sample: &Sample,
    design: &DesignMatrix,
    penalty: Option<&PenaltyOperator>,
    mu: f64,
) -> Result<Vec<f64>> {
    let chol = normal_matrix(design, None, penalty, mu).factor()?;
    let mut rhs = vec![0.0; design.ncols()];
    for (i, y) in sample.y().iter().enumerate() {
        let (start, vals) = design.row(i);
        for (k, v) in vals.iter().enumerate() {
            rhs[start + k] += v * y;
        }
    }
    chol.solve_in_place(&mut rhs);
    Ok(rhs)
}
