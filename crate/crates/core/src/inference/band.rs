//! Plug-in variance and bias estimates and bias-corrected confidence bands.

use nalgebra::DMatrix;
use serde::Serialize;

use super::density::ConditionalDensity;
use super::normal::normal_quantile;
use crate::basis::{bernoulli_poly, BasisSpec, DesignMatrix};
use crate::data::{quantile, Sample};
use crate::error::{domain, Error, Result};
use crate::penalty::PenaltyOperator;
use crate::solver::{check_tau, fit_penalized_quantile, normal_matrix, IrlsConfig, QuantileFit};

/// Relative floor for the estimated conditional densities in `R̂`.
pub const DENSITY_FLOOR: f64 = 1e-3;

/// Sandwich and shrinkage plug-ins for one fitted curve.
///
/// With `R̂ = diag(f̂(η̂_τ(x_i) | x_i))` and `M = Z^T R̂ Z + λ D_m^T D_m`,
/// `Φ̂_τ(x) = τ(1-τ) B(x)^T M^{-1} Z^T Z M^{-1} B(x)` and
/// `b̂^λ_τ(x) = -λ B(x)^T M^{-1} D_m^T D_m b̂(τ)`.
#[derive(Debug, Clone)]
pub struct PlugIn {
    spec: BasisSpec,
    tau: f64,
    sandwich: DMatrix<f64>,
    shrinkage: Vec<f64>,
    densities: Vec<f64>,
}

impl PlugIn {
    pub fn new(sample: &Sample, fit: &QuantileFit, density: &ConditionalDensity) -> Result<Self> {
        let design = fit.spec.design(sample.x())?;
        let fitted = design.mul_vec(&fit.coef);
        let mut densities = sample
            .x()
            .iter()
            .zip(&fitted)
            .map(|(x, eta)| density.eval(*x, *eta))
            .collect::<Result<Vec<f64>>>()?;
        let floor = DENSITY_FLOOR * quantile(&densities, 0.5);
        if !(floor > 0.0) {
            return Err(Error::Singular("estimated conditional densities vanish at the fit".into()));
        }
        densities.iter_mut().for_each(|f| *f = f.max(floor));
        let penalty = fit.penalty()?;
        Self::from_densities(&design, fit, penalty.as_ref(), densities)
    }

    pub(crate) fn from_densities(
        design: &DesignMatrix,
        fit: &QuantileFit,
        penalty: Option<&PenaltyOperator>,
        densities: Vec<f64>,
    ) -> Result<Self> {
        let m = normal_matrix(design, Some(&densities), penalty, fit.lambda).to_dense();
        let m_inv = m
            .cholesky()
            .ok_or_else(|| Error::Singular("Z^T R Z + lambda P is not positive definite".into()))?
            .inverse();
        let gram = normal_matrix(design, None, None, 0.0).to_dense();
        let sandwich = &m_inv * gram * &m_inv;
        let shrinkage = match penalty {
            Some(op) if fit.lambda > 0.0 => {
                let pb = nalgebra::DVector::from_vec(op.gram_mul(&fit.coef)?);
                (&m_inv * pb).iter().map(|v| -fit.lambda * v).collect()
            }
            _ => vec![0.0; fit.spec.dim()],
        };
        Ok(Self {
            spec: fit.spec,
            tau: fit.tau,
            sandwich,
            shrinkage,
            densities,
        })
    }

    /// The floored diagonal of `R̂`.
    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    /// `Φ̂_τ(x)`.
    pub fn variance(&self, x: f64) -> Result<f64> {
        let mut b = [0.0; crate::basis::MAX_DEGREE + 1];
        let start = local_basis(&self.spec, x, &mut b)?;
        let w = self.spec.degree() + 1;
        let mut q = 0.0;
        for i in 0..w {
            for j in 0..w {
                q += b[i] * self.sandwich[(start + i, start + j)] * b[j];
            }
        }
        Ok((self.tau * (1.0 - self.tau) * q).max(0.0))
    }

    /// `b̂^λ_τ(x)`.
    pub fn shrinkage_bias(&self, x: f64) -> Result<f64> {
        let mut b = [0.0; crate::basis::MAX_DEGREE + 1];
        let start = local_basis(&self.spec, x, &mut b)?;
        Ok((0..=self.spec.degree()).map(|i| b[i] * self.shrinkage[start + i]).sum())
    }
}

fn local_basis(spec: &BasisSpec, x: f64, out: &mut [f64]) -> Result<usize> {
    if !(0.0..=1.0).contains(&x) {
        return domain(format!("x = {x} lies outside [0, 1]"));
    }
    Ok(spec.eval_local(x, out))
}

/// `Φ̂_τ(x)` for a fitted curve.
pub fn variance_estimate(sample: &Sample, fit: &QuantileFit, density: &ConditionalDensity, x: f64) -> Result<f64> {
    PlugIn::new(sample, fit, density)?.variance(x)
}

/// `b̂^λ_τ(x)` for a fitted curve.
pub fn shrinkage_bias_estimate(sample: &Sample, fit: &QuantileFit, density: &ConditionalDensity, x: f64) -> Result<f64> {
    PlugIn::new(sample, fit, density)?.shrinkage_bias(x)
}

/// Position of `x` within its knot interval, on the left-closed convention
/// `κ_{k-1} <= x < κ_k` (with `x = 1` kept in the last interval).
fn interval_fraction(spec: &BasisSpec, x: f64) -> f64 {
    let k = spec.interior_count() as f64;
    let t = x * k;
    if x >= 1.0 {
        1.0
    } else {
        t - t.floor()
    }
}

/// `b^a_τ(x) = -η^{(p+1)}(x) / (K^{p+1} (p+1)!) · Br_{p+1}((x - κ_{k-1}) K)`
/// given the value of `η^{(p+1)}(x)`.
pub fn approx_bias_from_derivative(spec: &BasisSpec, derivative: f64, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return domain(format!("x = {x} lies outside [0, 1]"));
    }
    let order = spec.degree() + 1;
    let factorial: f64 = (1..=order).map(|i| i as f64).product();
    let kp = (spec.interior_count() as f64).powi(order as i32);
    Ok(-derivative / (kp * factorial) * bernoulli_poly(order, interval_fraction(spec, x)))
}

/// Pilot fit of degree `p + 2` on the same knots with the same `λ` and `m`,
/// whose `(p+1)`-th derivative estimates `η_τ^{(p+1)}`.
pub fn pilot_fit(sample: &Sample, fit: &QuantileFit, pilot_lambda: f64, cfg: &IrlsConfig) -> Result<QuantileFit> {
    let spec = BasisSpec::new(fit.spec.degree() + 2, fit.spec.interior_count())?;
    let penalty = match fit.penalty_order {
        0 => None,
        m => Some(PenaltyOperator::new(m, spec.dim())?),
    };
    let lambda = if penalty.is_some() { pilot_lambda } else { 0.0 };
    fit_penalized_quantile(sample, fit.tau, &spec, penalty.as_ref(), lambda, cfg)
}

/// `b̂^a_τ(x)` from a degree-`p + 2` pilot fit with smoothing `pilot_lambda`
/// and penalty order `penalty_order` (0 for none).
pub fn approx_bias_estimate(
    sample: &Sample,
    tau: f64,
    spec: &BasisSpec,
    x: f64,
    pilot_lambda: f64,
    penalty_order: usize,
    cfg: &IrlsConfig,
) -> Result<f64> {
    check_tau(tau)?;
    let pilot_spec = BasisSpec::new(spec.degree() + 2, spec.interior_count())?;
    let penalty = match penalty_order {
        0 => None,
        m => Some(PenaltyOperator::new(m, pilot_spec.dim())?),
    };
    let lambda = if penalty.is_some() { pilot_lambda } else { 0.0 };
    let pilot = fit_penalized_quantile(sample, tau, &pilot_spec, penalty.as_ref(), lambda, cfg)?;
    approx_bias_from_derivative(spec, pilot.derivative(x, spec.degree() + 1)?, x)
}

/// Pointwise confidence bands on a grid. Entries are `None` where a plug-in
/// could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferenceReport {
    pub grid: Vec<f64>,
    pub eta_hat: Vec<f64>,
    pub b_a_hat: Vec<Option<f64>>,
    pub b_lambda_hat: Vec<Option<f64>>,
    pub phi_hat: Vec<Option<f64>>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
    pub lower_uncorrected: Vec<Option<f64>>,
    pub upper_uncorrected: Vec<Option<f64>>,
    pub alpha_level: f64,
    pub z: f64,
}

impl InferenceReport {
    pub const COLUMNS: [&'static str; 9] = [
        "x",
        "eta_hat",
        "b_a_hat",
        "b_lambda_hat",
        "phi_hat",
        "lower",
        "upper",
        "lower_uncorrected",
        "upper_uncorrected",
    ];

    /// Writes the report as CSV; gaps become empty fields.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::COLUMNS)?;
        let cell = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for i in 0..self.grid.len() {
            w.write_record([
                self.grid[i].to_string(),
                self.eta_hat[i].to_string(),
                cell(self.b_a_hat[i]),
                cell(self.b_lambda_hat[i]),
                cell(self.phi_hat[i]),
                cell(self.lower[i]),
                cell(self.upper[i]),
                cell(self.lower_uncorrected[i]),
                cell(self.upper_uncorrected[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Ingredients of a confidence band beyond the fit itself.
#[derive(Debug, Clone)]
pub struct BandConfig {
    /// Nominal non-coverage `α`; the band uses `z_{1-α/2}`.
    pub alpha_level: f64,
    /// Multiplier on the main fit's `λ` for the pilot fit.
    pub pilot_lambda_scale: f64,
    pub irls: IrlsConfig,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self {
            alpha_level: 0.05,
            pilot_lambda_scale: 1.0,
            irls: IrlsConfig::default(),
        }
    }
}

/// Corrected band `η̂ - b̂^a - b̂^λ ± z √Φ̂` and uncorrected band `η̂ ± z √Φ̂`.
pub fn confidence_band(sample: &Sample, fit: &QuantileFit, grid: &[f64], cfg: &BandConfig) -> Result<InferenceReport> {
    if !(cfg.alpha_level > 0.0 && cfg.alpha_level < 1.0) {
        return domain(format!("alpha level {} must lie in (0, 1)", cfg.alpha_level));
    }
    let z = normal_quantile(1.0 - cfg.alpha_level / 2.0)?;
    let eta_hat = grid.iter().map(|&x| fit.predict(x)).collect::<Result<Vec<f64>>>()?;
    let plugin = ConditionalDensity::around_fit(sample, fit).and_then(|d| PlugIn::new(sample, fit, &d));
    let pilot = pilot_fit(sample, fit, fit.lambda * cfg.pilot_lambda_scale, &cfg.irls);
    let order = fit.spec.degree() + 1;
    let mut report = InferenceReport {
        grid: grid.to_vec(),
        eta_hat,
        b_a_hat: vec![],
        b_lambda_hat: vec![],
        phi_hat: vec![],
        lower: vec![],
        upper: vec![],
        lower_uncorrected: vec![],
        upper_uncorrected: vec![],
        alpha_level: cfg.alpha_level,
        z,
    };
    for (i, &x) in grid.iter().enumerate() {
        let b_a = pilot
            .as_ref()
            .ok()
            .and_then(|p| p.derivative(x, order).ok())
            .and_then(|d| approx_bias_from_derivative(&fit.spec, d, x).ok());
        let (b_l, phi) = match &plugin {
            Ok(p) => (p.shrinkage_bias(x).ok(), p.variance(x).ok()),
            Err(_) => (None, None),
        };
        let eta = report.eta_hat[i];
        let half = phi.map(|v| z * v.sqrt());
        let center = b_a.zip(b_l).map(|(a, l)| eta - a - l);
        report.b_a_hat.push(b_a);
        report.b_lambda_hat.push(b_l);
        report.phi_hat.push(phi);
        report.lower.push(center.zip(half).map(|(c, h)| c - h));
        report.upper.push(center.zip(half).map(|(c, h)| c + h));
        report.lower_uncorrected.push(half.map(|h| eta - h));
        report.upper_uncorrected.push(half.map(|h| eta + h));
    }
    Ok(report)
}
