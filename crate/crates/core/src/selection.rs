//! Smoothing parameter selection: GACV over `(K, λ)` for quantile fits and
//! GCV over `μ` for mean fits.

use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{BasisSpec, DesignMatrix};
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::penalty::PenaltyOperator;
use crate::solver::{check_penalty, fit_with_design, mean_with_design, normal_matrix, rho, Init, IrlsConfig, QuantileFit};

/// `trace(A^{-1} Z^T W Z)` with `A = Z^T W Z + scale · D^T D`.
pub(crate) fn hat_trace(
    design: &DesignMatrix,
    weights: Option<&[f64]>,
    penalty: Option<&PenaltyOperator>,
    scale: f64,
) -> Result<f64> {
    let d = design.ncols();
    let inv = normal_matrix(design, weights, penalty, scale).factor()?.inverse();
    let mut trace = 0.0;
    for i in 0..design.nrows() {
        let w = weights.map_or(1.0, |w| w[i]);
        if w == 0.0 {
            continue;
        }
        let (start, vals) = design.row(i);
        let mut q = 0.0;
        for (a, va) in vals.iter().enumerate() {
            let row = &inv[(start + a) * d + start..];
            q += va * vals.iter().zip(row).map(|(vb, ab)| vb * ab).sum::<f64>();
        }
        trace += w * q;
    }
    Ok(trace)
}

/// Effective degrees of freedom `trace[Z (Z^T W Z + (λ/2) D^T D)^{-1} Z^T W]`
/// of the converged IRLS hat operator, with `W` the final IRLS weights.
pub fn effective_df(
    fit: &QuantileFit,
    design: &DesignMatrix,
    penalty: Option<&PenaltyOperator>,
    lambda: f64,
) -> Result<f64> {
    if fit.final_weights.len() != design.nrows() {
        return Err(Error::DimensionMismatch {
            expected: design.nrows(),
            got: fit.final_weights.len(),
        });
    }
    if design.ncols() != fit.spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: fit.spec.dim(),
            got: design.ncols(),
        });
    }
    let scale = if penalty.is_some() { 0.5 * lambda } else { 0.0 };
    hat_trace(design, Some(&fit.final_weights), penalty, scale)
}

fn check_df(n: usize, df: f64) -> Result<f64> {
    let n = n as f64;
    if !(n - df > 1e-8 * n) {
        return Err(Error::InvalidConfig(format!(
            "effective degrees of freedom {df:.6} leave no residual freedom for n = {n}"
        )));
    }
    Ok(n - df)
}

fn gacv_of_fit(sample: &Sample, fit: &QuantileFit, design: &DesignMatrix, penalty: Option<&PenaltyOperator>) -> Result<f64> {
    let df = effective_df(fit, design, penalty, fit.lambda)?;
    let denom = check_df(sample.len(), df)?;
    let fitted = design.mul_vec(&fit.coef);
    let loss: f64 = sample.y().iter().zip(&fitted).map(|(y, f)| rho(y - f, fit.tau)).sum();
    Ok(loss / denom)
}

/// GACV criterion `Σ ρ_τ(y_i - η̂_τ(x_i)) / (n - df)`.
pub fn gacv_score(
    sample: &Sample,
    tau: f64,
    spec: &BasisSpec,
    penalty: Option<&PenaltyOperator>,
    lambda: f64,
    cfg: &IrlsConfig,
) -> Result<f64> {
    check_penalty(spec, penalty, lambda)?;
    let design = spec.design(sample.x())?;
    let fit = fit_with_design(sample, &design, tau, spec, penalty, lambda, cfg)?;
    gacv_of_fit(sample, &fit, &design, penalty)
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}

/// The candidate cells of a GACV sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionConfig {
    pub degree: usize,
    /// Difference order `m`; 0 sweeps unpenalized regression splines and
    /// requires `lambda_values == [0]`.
    pub penalty_order: usize,
    pub k_values: Vec<usize>,
    pub lambda_values: Vec<f64>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            degree: 3,
            penalty_order: 2,
            k_values: vec![5, 10, 20, 40],
            lambda_values: log_grid(1e-6, 1e3, 30),
        }
    }
}

impl SelectionConfig {
    /// Drops knot counts above `√n`, a finite-sample reading of the
    /// `K_n = o(n^{1/2})` rate. The smallest candidate is kept when every
    /// candidate exceeds the cap.
    pub fn with_knot_cap(&self, n: usize) -> Self {
        let cap = (n as f64).sqrt();
        let mut k_values: Vec<usize> = self.k_values.iter().copied().filter(|&k| k as f64 <= cap).collect();
        if k_values.is_empty() {
            k_values.extend(self.k_values.iter().copied().min());
        }
        Self {
            k_values,
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k_values.is_empty() || self.lambda_values.is_empty() {
            return Err(Error::InvalidConfig("selection grids must be nonempty".into()));
        }
        if self.penalty_order == 0 && self.lambda_values.iter().any(|&l| l != 0.0) {
            return Err(Error::InvalidConfig(
                "an unpenalized sweep only admits lambda = 0".into(),
            ));
        }
        Ok(())
    }
}

/// Scores of a `(K, λ)` sweep and the selected fit.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionGrid {
    pub k_values: Vec<usize>,
    pub lambda_values: Vec<f64>,
    /// `scores[a][b]` for `(k_values[a], lambda_values[b])`; `None` marks an
    /// excluded cell.
    pub scores: Vec<Vec<Option<f64>>>,
    /// Why each excluded cell failed.
    pub failures: Vec<String>,
    pub best: (usize, f64),
    pub best_score: f64,
    pub best_fit: QuantileFit,
    /// `fits[a][b]` is the fit behind `scores[a][b]`.
    pub fits: Vec<Vec<Option<QuantileFit>>>,
}

struct Column {
    scores: Vec<Option<f64>>,
    failures: Vec<String>,
    fits: Vec<Option<QuantileFit>>,
}

fn sweep_column(sample: &Sample, tau: f64, grid: &SelectionConfig, kk: usize, cfg: &IrlsConfig) -> Column {
    let nl = grid.lambda_values.len();
    let mut col = Column {
        scores: vec![None; nl],
        failures: vec![],
        fits: vec![None; nl],
    };
    let setup = || -> Result<(BasisSpec, DesignMatrix, Option<PenaltyOperator>)> {
        let spec = BasisSpec::new(grid.degree, kk)?;
        let design = spec.design(sample.x())?;
        let penalty = match grid.penalty_order {
            0 => None,
            m => Some(PenaltyOperator::new(m, spec.dim())?),
        };
        Ok((spec, design, penalty))
    };
    let (spec, design, penalty) = match setup() {
        Ok(s) => s,
        Err(e) => {
            col.failures.push(format!("K = {kk}: {e}"));
            return col;
        }
    };
    // visit λ in increasing order so each fit warm-starts from a neighbour
    let mut order: Vec<usize> = (0..nl).collect();
    order.sort_by(|&a, &b| grid.lambda_values[a].total_cmp(&grid.lambda_values[b]));
    let mut warm: Option<Vec<f64>> = None;
    for b in order {
        let lambda = grid.lambda_values[b];
        let mut cell_cfg = cfg.clone();
        if let Some(c) = &warm {
            cell_cfg.init = Init::Given(c.clone());
        }
        let result = check_penalty(&spec, penalty.as_ref(), lambda)
            .and_then(|_| fit_with_design(sample, &design, tau, &spec, penalty.as_ref(), lambda, &cell_cfg))
            .and_then(|fit| gacv_of_fit(sample, &fit, &design, penalty.as_ref()).map(|s| (fit, s)));
        match result {
            Ok((fit, score)) if score.is_finite() => {
                warm = Some(fit.coef.clone());
                col.scores[b] = Some(score);
                col.fits[b] = Some(fit);
            }
            Ok((fit, score)) => {
                warm = Some(fit.coef.clone());
                col.failures.push(format!("K = {kk}, lambda = {lambda:e}: score {score}"));
            }
            Err(e) => col.failures.push(format!("K = {kk}, lambda = {lambda:e}: {e}")),
        }
    }
    col
}

/// Index of the minimal score; ties go to the smaller `K`, then the smaller `λ`.
fn argmin_cell(k_values: &[usize], lambda_values: &[f64], scores: &[Vec<Option<f64>>]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for (a, row) in scores.iter().enumerate() {
        for (b, s) in row.iter().enumerate() {
            let Some(s) = *s else { continue };
            let better = match best {
                None => true,
                Some((ba, bb)) => {
                    let bs = scores[ba][bb].unwrap();
                    s.total_cmp(&bs)
                        .then(k_values[a].cmp(&k_values[ba]))
                        .then(lambda_values[b].total_cmp(&lambda_values[bb]))
                        .is_lt()
                }
            };
            if better {
                best = Some((a, b));
            }
        }
    }
    best
}

/// Fits every `(K, λ)` cell and returns the GACV minimizer.
///
/// Failed cells are recorded and excluded; the sweep only fails when no cell
/// survives.
pub fn select_model(sample: &Sample, tau: f64, grid: &SelectionConfig, cfg: &IrlsConfig) -> Result<SelectionGrid> {
    grid.validate()?;
    crate::solver::check_tau(tau)?;
    cfg.validate()?;
    let mut cfg = cfg.clone();
    if cfg.alpha.is_none() {
        cfg.alpha = Some(cfg.resolve_alpha(sample.y()));
    }
    let columns: Vec<Column> = grid
        .k_values
        .par_iter()
        .map(|&kk| sweep_column(sample, tau, grid, kk, &cfg))
        .collect();
    let scores: Vec<Vec<Option<f64>>> = columns.iter().map(|c| c.scores.clone()).collect();
    let failures: Vec<String> = columns.iter().flat_map(|c| c.failures.iter().cloned()).collect();
    let (a, b) = argmin_cell(&grid.k_values, &grid.lambda_values, &scores).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "every selection cell failed: {}",
            failures.first().map_or("", |s| s.as_str())
        ))
    })?;
    let fits: Vec<Vec<Option<QuantileFit>>> = columns.into_iter().map(|c| c.fits).collect();
    let best_fit = fits[a][b].clone().expect("scored cell keeps its fit");
    Ok(SelectionGrid {
        k_values: grid.k_values.clone(),
        lambda_values: grid.lambda_values.clone(),
        best: (grid.k_values[a], grid.lambda_values[b]),
        best_score: scores[a][b].unwrap(),
        scores,
        failures,
        best_fit,
        fits,
    })
}

/// GCV criterion `n · RSS / (n - df)^2` of the penalized mean fit.
pub fn gcv_score(sample: &Sample, spec: &BasisSpec, penalty: Option<&PenaltyOperator>, mu: f64) -> Result<f64> {
    check_penalty(spec, penalty, mu)?;
    let design = spec.design(sample.x())?;
    gcv_with_design(sample, &design, penalty, mu).map(|(s, _)| s)
}

fn gcv_with_design(
    sample: &Sample,
    design: &DesignMatrix,
    penalty: Option<&PenaltyOperator>,
    mu: f64,
) -> Result<(f64, Vec<f64>)> {
    let df = hat_trace(design, None, penalty, mu)?;
    let denom = check_df(sample.len(), df)?;
    let coef = mean_with_design(sample, design, penalty, mu)?;
    let fitted = design.mul_vec(&coef);
    let rss: f64 = sample.y().iter().zip(&fitted).map(|(y, f)| (y - f).powi(2)).sum();
    Ok((sample.len() as f64 * rss / (denom * denom), coef))
}

/// Result of a GCV sweep over `μ`.
#[derive(Debug, Clone, Serialize)]
pub struct MeanSelection {
    pub mu_values: Vec<f64>,
    pub scores: Vec<Option<f64>>,
    pub best_mu: f64,
    pub coef: Vec<f64>,
}

/// Selects `μ` for the penalized mean fit by GCV; ties go to the smaller `μ`.
pub fn select_mean_penalty(
    sample: &Sample,
    spec: &BasisSpec,
    penalty: &PenaltyOperator,
    mu_values: &[f64],
) -> Result<MeanSelection> {
    if mu_values.is_empty() {
        return Err(Error::InvalidConfig("mu grid must be nonempty".into()));
    }
    check_penalty(spec, Some(penalty), 0.0)?;
    let design = spec.design(sample.x())?;
    let mut scores = vec![None; mu_values.len()];
    let mut best: Option<(usize, Vec<f64>)> = None;
    for (i, &mu) in mu_values.iter().enumerate() {
        if let Ok((s, coef)) = check_penalty(spec, Some(penalty), mu).and_then(|_| gcv_with_design(sample, &design, Some(penalty), mu)) {
            scores[i] = Some(s);
            let better = match &best {
                None => true,
                Some((j, _)) => s.total_cmp(&scores[*j].unwrap()).then(mu.total_cmp(&mu_values[*j])).is_lt(),
            };
            if better {
                best = Some((i, coef));
            }
        }
    }
    let (i, coef) = best.ok_or_else(|| Error::InvalidConfig("every mu cell failed".into()))?;
    Ok(MeanSelection {
        mu_values: mu_values.to_vec(),
        scores,
        best_mu: mu_values[i],
        coef,
    })
}
