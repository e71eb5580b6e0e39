//! Kernel-weighted local linear quantile fits.

use super::irls::{IrlsConfig, Problem};
use super::loss::check_tau;
use crate::basis::DesignMatrix;
use crate::data::Sample;
use crate::error::{domain, Error, Result};

#[inline]
pub(crate) fn gaussian_kernel(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[derive(Debug, Clone)]
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) struct LocalFit {
    pub intercept: f64,
    pub slope: f64,
    /// Final IRLS weights including the kernel factors.
    pub weights: Vec<f64>,
    /// `(A^{-1})_{00}` for `A = Σ v_j X_j X_j^T` at the final weights.
    pub inverse_00: f64,
}

pub(crate) fn local_linear(sample: &Sample, tau: f64, x0: f64, h: f64, cfg: &IrlsConfig) -> Result<LocalFit> {
    check_tau(tau)?;
    if !(h > 0.0 && h.is_finite()) {
        return domain(format!("bandwidth h = {h} must be positive"));
    }
    let n = sample.len();
    let kernel: Vec<f64> = sample.x().iter().map(|x| gaussian_kernel((x - x0) / h)).collect();
    if kernel.iter().filter(|&&k| k > 0.0).count() < 2 {
        return Err(Error::Unevaluable(format!(
            "fewer than two observations carry kernel weight at x0 = {x0}"
        )));
    }
    let values: Vec<f64> = sample.x().iter().flat_map(|x| [1.0, x - x0]).collect();
    let design = DesignMatrix::from_rows(2, 2, vec![0; n], values)?;
    let mut cfg = cfg.clone();
    if cfg.alpha.is_none() {
        cfg.alpha = Some(cfg.resolve_alpha(sample.y()));
    }
    let problem = Problem {
        design: &design,
        y: sample.y(),
        case_weights: Some(&kernel),
        penalty: None,
        lambda: 0.0,
        tau,
    };
    let sol = problem.solve(&cfg)?;
    let (mut a00, mut a01, mut a11) = (0.0, 0.0, 0.0);
    for (x, v) in sample.x().iter().zip(&sol.weights) {
        let u = x - x0;
        a00 += v;
        a01 += v * u;
        a11 += v * u * u;
    }
    let det = a00 * a11 - a01 * a01;
    Ok(LocalFit {
        intercept: sol.coef[0],
        slope: sol.coef[1],
        weights: sol.weights,
        inverse_00: a11 / det,
    })
}

/// Intercept `â` of the kernel-weighted check-loss line
/// `min Σ K((x_i - x0)/h) ρ_τ(y_i - a - b (x_i - x0))` with a Gaussian kernel.
pub fn fit_local_linear_quantile(sample: &Sample, tau: f64, x0: f64, h: f64, cfg: &IrlsConfig) -> Result<f64> {
    local_linear(sample, tau, x0, h, cfg).map(|f| f.intercept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::loss::rho;

    fn scattered(n: usize) -> Sample {
        let x: Vec<f64> = (0..n).map(|i| ((i * 7919) % 997) as f64 / 997.0).collect();
        let y = x
            .iter()
            .enumerate()
            .map(|(i, x)| 0.5 + x - x * x + 0.3 * (((i * 104_729) % 89) as f64 / 89.0 - 0.5))
            .collect();
        Sample::new(x, y).unwrap()
    }

    #[test]
    fn constant_data() {
        let x: Vec<f64> = (0..25).map(|i| i as f64 / 24.0).collect();
        let s = Sample::new(x, vec![1.7; 25]).unwrap();
        for x0 in [0.0, 0.3, 1.0] {
            for h in [0.05, 0.5] {
                let a = fit_local_linear_quantile(&s, 0.3, x0, h, &IrlsConfig::default()).unwrap();
                assert!((a - 1.7).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn huge_bandwidth_is_global_linear_fit() {
        let s = scattered(30);
        let tau = 0.4;
        // an optimal check-loss line interpolates two observations
        let objective = |a: f64, b: f64, x0: f64| -> f64 {
            s.x().iter().zip(s.y()).map(|(x, y)| rho(y - a - b * (x - x0), tau)).sum()
        };
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..s.len() {
            for j in 0..i {
                let (xi, yi, xj, yj) = (s.x()[i], s.y()[i], s.x()[j], s.y()[j]);
                if xi == xj {
                    continue;
                }
                let b = (yi - yj) / (xi - xj);
                let a = yi - b * xi;
                let obj = objective(a, b, 0.0);
                if obj < best.0 {
                    best = (obj, a, b);
                }
            }
        }
        let x0 = 0.4;
        let fit = local_linear(&s, tau, x0, 1e6, &IrlsConfig::default()).unwrap();
        let oracle = best.1 + best.2 * x0;
        assert!((fit.intercept - oracle).abs() < 1e-7, "{} vs {}", fit.intercept, oracle);
        assert!((objective(fit.intercept, fit.slope, x0) - best.0).abs() < 1e-9);
    }

    #[test]
    fn guards() {
        let s = scattered(10);
        assert!(fit_local_linear_quantile(&s, 0.5, 0.5, 0.0, &IrlsConfig::default()).is_err());
        assert!(matches!(
            fit_local_linear_quantile(&s, 0.5, 500.0, 1e-3, &IrlsConfig::default()),
            Err(Error::Unevaluable(_))
        ));
    }
}
