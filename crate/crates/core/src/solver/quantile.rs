use serde::Serialize;

use super::irls::{IrlsConfig, Problem};
use super::loss::check_tau;
use crate::basis::{spline_value, BasisSpec, DesignMatrix};
use crate::data::Sample;
use crate::error::{domain, Error, Result};
use crate::penalty::PenaltyOperator;

/// A fitted penalized spline quantile curve `η̂_τ(x) = B(x)^T b̂(τ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileFit {
    pub spec: BasisSpec,
    pub coef: Vec<f64>,
    pub tau: f64,
    pub lambda: f64,
    /// Difference order `m` of the penalty, 0 for an unpenalized fit.
    pub penalty_order: usize,
    pub iterations: usize,
    pub converged: bool,
    /// IRLS weights `ψ_τ(r_i) / (2 r_i)` (capped) of the last reweighting.
    pub final_weights: Vec<f64>,
    /// `Σ ρ_τ(y_i - η̂_τ(x_i)) + (λ/2) b̂^T D_m^T D_m b̂`.
    pub objective: f64,
    /// Smoothing radius used by the last IRLS stage.
    pub alpha: f64,
}

impl QuantileFit {
    pub fn predict(&self, x: f64) -> Result<f64> {
        spline_value(&self.spec, &self.coef, x, 0)
    }

    pub fn derivative(&self, x: f64, order: usize) -> Result<f64> {
        spline_value(&self.spec, &self.coef, x, order)
    }

    /// Fitted values at the sample points.
    pub fn fitted(&self, sample: &Sample) -> Result<Vec<f64>> {
        Ok(self.spec.design(sample.x())?.mul_vec(&self.coef))
    }

    /// The penalty operator the fit was computed with.
    pub fn penalty(&self) -> Result<Option<PenaltyOperator>> {
        if self.penalty_order == 0 {
            Ok(None)
        } else {
            PenaltyOperator::new(self.penalty_order, self.spec.dim()).map(Some)
        }
    }
}

pub(crate) fn check_penalty(spec: &BasisSpec, penalty: Option<&PenaltyOperator>, lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return domain(format!("lambda = {lambda} must be finite and nonnegative"));
    }
    match penalty {
        Some(op) => {
            if op.dim() != spec.dim() {
                return Err(Error::DimensionMismatch {
                    expected: spec.dim(),
                    got: op.dim(),
                });
            }
            if op.order() > spec.degree() + 1 {
                return domain(format!(
                    "penalty order {} exceeds degree + 1 = {}",
                    op.order(),
                    spec.degree() + 1
                ));
            }
        }
        None if lambda > 0.0 => {
            return Err(Error::InvalidConfig(
                "a positive lambda needs a penalty operator".into(),
            ))
        }
        None => {}
    }
    Ok(())
}

/// Minimizes `Σ ρ_τ(y_i - B(x_i)^T b) + (λ/2) b^T D_m^T D_m b` by IRLS.
///
/// `penalty = None` fits an unpenalized regression spline (`λ` must be 0).
pub fn fit_penalized_quantile(
    sample: &Sample,
    tau: f64,
    spec: &BasisSpec,
    penalty: Option<&PenaltyOperator>,
    lambda: f64,
    cfg: &IrlsConfig,
) -> Result<QuantileFit> {
    check_tau(tau)?;
    check_penalty(spec, penalty, lambda)?;
    let design = spec.design(sample.x())?;
    fit_with_design(sample, &design, tau, spec, penalty, lambda, cfg)
}

pub(crate) fn fit_with_design(
    sample: &Sample,
    design: &DesignMatrix,
    tau: f64,
    spec: &BasisSpec,
    penalty: Option<&PenaltyOperator>,
    lambda: f64,
    cfg: &IrlsConfig,
) -> Result<QuantileFit> {
    let problem = Problem {
        design,
        y: sample.y(),
        case_weights: None,
        penalty,
        lambda,
        tau,
    };
    let sol = problem.solve(cfg)?;
    Ok(QuantileFit {
        spec: *spec,
        coef: sol.coef,
        tau,
        lambda,
        penalty_order: penalty.map_or(0, |p| p.order()),
        iterations: sol.iterations,
        converged: sol.converged,
        final_weights: sol.weights,
        objective: sol.objective,
        alpha: sol.alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use crate::solver::loss::rho;

    fn uniform_xs(n: usize) -> Vec<f64> {
        (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
    }

    #[test]
    fn sample_median_on_single_bin() {
        let s = Sample::new(vec![0.1, 0.3, 0.5, 0.7, 0.9], vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let spec = build_basis(0, 1).unwrap();
        let fit = fit_penalized_quantile(&s, 0.5, &spec, None, 0.0, &IrlsConfig::default()).unwrap();
        // brute force over a fine grid of constants
        let grid_best = (0..=6000)
            .map(|i| i as f64 / 1000.0)
            .map(|b| (b, s.y().iter().map(|y| rho(y - b, 0.5)).sum::<f64>()))
            .fold((0.0, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
        assert!((grid_best.0 - 3.0).abs() < 1e-12);
        assert!((fit.coef[0] - 3.0).abs() < 1e-10);
        assert!(fit.converged);
    }

    #[test]
    fn noiseless_line_recovered_for_any_lambda_and_tau() {
        let x = uniform_xs(60);
        let y: Vec<f64> = x.iter().map(|x| 2.0 * x + 1.0).collect();
        let s = Sample::new(x, y).unwrap();
        for p in 1..=3 {
            let spec = build_basis(p, 7).unwrap();
            let op = PenaltyOperator::new(2, spec.dim()).unwrap();
            for lambda in [0.0, 1e-3, 1.0, 1e3] {
                for tau in [0.1, 0.5, 0.9] {
                    let fit = fit_penalized_quantile(&s, tau, &spec, Some(&op), lambda, &IrlsConfig::default()).unwrap();
                    for i in 0..=20 {
                        let x = i as f64 / 20.0;
                        assert!((fit.predict(x).unwrap() - (2.0 * x + 1.0)).abs() < 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn objective_matches_stored_coefficients() {
        let x = uniform_xs(80);
        let y: Vec<f64> = x.iter().enumerate().map(|(i, x)| (6.0 * x).sin() + 0.3 * ((i * 37 % 11) as f64 / 11.0 - 0.5)).collect();
        let s = Sample::new(x, y).unwrap();
        let spec = build_basis(3, 8).unwrap();
        let op = PenaltyOperator::new(2, spec.dim()).unwrap();
        let fit = fit_penalized_quantile(&s, 0.3, &spec, Some(&op), 0.5, &IrlsConfig::default()).unwrap();
        let fitted = fit.fitted(&s).unwrap();
        let loss: f64 = s.y().iter().zip(&fitted).map(|(y, f)| rho(y - f, 0.3)).sum();
        let expect = loss + op.value(&fit.coef, 0.5).unwrap();
        assert!((fit.objective - expect).abs() < 1e-12 * expect.max(1.0));
        assert!(fit.final_weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn assumption_four_and_lambda_guards() {
        let s = Sample::new(uniform_xs(20), vec![0.0; 20]).unwrap();
        let spec = build_basis(1, 5).unwrap();
        let op3 = PenaltyOperator::new(3, spec.dim()).unwrap();
        assert!(matches!(
            fit_penalized_quantile(&s, 0.5, &spec, Some(&op3), 1.0, &IrlsConfig::default()),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            fit_penalized_quantile(&s, 0.5, &spec, None, 1.0, &IrlsConfig::default()),
            Err(Error::InvalidConfig(_))
        ));
        assert!(fit_penalized_quantile(&s, 1.0, &spec, None, 0.0, &IrlsConfig::default()).is_err());
    }

    #[test]
    fn empty_bin_without_penalty_is_singular() {
        let s = Sample::new(vec![0.1, 0.2, 0.3, 0.4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let spec = build_basis(1, 4).unwrap();
        assert!(matches!(
            fit_penalized_quantile(&s, 0.5, &spec, None, 0.0, &IrlsConfig::default()),
            Err(Error::Singular(_))
        ));
    }
}
