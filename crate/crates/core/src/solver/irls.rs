//! Iteratively reweighted least squares for penalized check-loss problems.
//!
//! Each step solves the weighted ridge system
//! `(Z^T W Z + (λ/2) D_m^T D_m) b = Z^T W y` with `w_i = ψ_τ(r_i) / (2 r_i)`.
//! Its fixed points are the stationary points of the smoothed objective
//! `Σ ρ_τ(r_i) + (λ/2) b^T D_m^T D_m b`, where the smoothing only touches
//! residuals with `|r_i| <= α`.
//!
//! On top of plain IRLS the engine runs an exact finishing step: the
//! observations with `|r_i| <= α` are taken as the interpolated set of the
//! nonsmooth problem, the optimality conditions are solved for the
//! coefficient correction and the subgradients of that set, and the result is
//! accepted only if every condition holds. A passing step certifies an exact
//! minimizer. When it does not pass, `α` is shrunk and IRLS continues from the
//! current iterate.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::loss::{psi_unchecked, rho};
use crate::banded::BandedSpd;
use crate::basis::DesignMatrix;
use crate::data::interquartile_range;
use crate::error::{domain, Error, Result};
use crate::penalty::PenaltyOperator;

/// How the IRLS weights treat residuals with `|r| <= α`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WeightMode {
    /// Continuous cap `τ/(2α)` for `r >= 0`, `(1-τ)/(2α)` for `r < 0`.
    Capped,
    /// `τ r / α` for `0 <= r <= α` and `(1-τ) r / α` for `-α <= r <= 0`,
    /// exactly as in the original three-branch display. These weights vanish
    /// at `r = 0` and turn negative for `r < 0`, so the weighted system can
    /// lose definiteness.
    PaperVerbatim,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Init {
    /// Start from the penalized least-squares fit (`W = I`).
    PenalizedLeastSquares,
    /// Start from the given coefficients.
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrlsConfig {
    /// Smoothing radius in response units; `None` uses `1e-4 × IQR(y)`.
    pub alpha: Option<f64>,
    /// Sup-norm coefficient change that ends an IRLS stage.
    pub tol: f64,
    /// Iteration budget per stage.
    pub max_iter: usize,
    pub weight_mode: WeightMode,
    pub init: Init,
    /// Run the exact finishing step.
    pub polish: bool,
    /// Number of extra stages, each with `α` shrunk by `1e-3`, tried when
    /// the finishing step fails.
    pub refine_stages: usize,
}

impl Default for IrlsConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            tol: 1e-8,
            max_iter: 200,
            weight_mode: WeightMode::Capped,
            init: Init::PenalizedLeastSquares,
            polish: true,
            refine_stages: 2,
        }
    }
}

impl IrlsConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return domain(format!("alpha = {a} must be positive"));
            }
        }
        if !(self.tol > 0.0) {
            return domain(format!("tol = {} must be positive", self.tol));
        }
        if self.max_iter < 1 {
            return domain("max_iter must be at least 1");
        }
        Ok(())
    }

    pub(crate) fn resolve_alpha(&self, y: &[f64]) -> f64 {
        self.alpha.unwrap_or_else(|| default_alpha(y))
    }
}

/// `1e-4 × IQR(y)`, falling back to the largest deviation from the median
/// (and then to 1) for degenerate samples.
pub fn default_alpha(y: &[f64]) -> f64 {
    let mut scale = interquartile_range(y);
    if !(scale > 0.0) {
        let med = crate::data::quantile(y, 0.5);
        scale = y.iter().map(|v| (v - med).abs()).fold(0.0, f64::max);
    }
    if !(scale > 0.0) {
        scale = 1.0;
    }
    1e-4 * scale
}

#[inline]
fn weight(r: f64, tau: f64, alpha: f64, mode: WeightMode) -> f64 {
    if r.abs() > alpha {
        return psi_unchecked(r, tau) / (2.0 * r);
    }
    match mode {
        WeightMode::Capped => {
            if r >= 0.0 {
                tau / (2.0 * alpha)
            } else {
                (1.0 - tau) / (2.0 * alpha)
            }
        }
        WeightMode::PaperVerbatim => {
            if r >= 0.0 {
                tau * r / alpha
            } else {
                (1.0 - tau) * r / alpha
            }
        }
    }
}

/// IRLS weights for the given residuals.
pub fn irls_weights(residuals: &[f64], tau: f64, alpha: f64, mode: WeightMode) -> Result<Vec<f64>> {
    super::loss::check_tau(tau)?;
    if !(alpha > 0.0) {
        return domain(format!("alpha = {alpha} must be positive"));
    }
    Ok(residuals
        .iter()
        .map(|&r| weight(r, tau, alpha, mode))
        .collect())
}

pub(crate) struct Problem<'a> {
    pub design: &'a DesignMatrix,
    pub y: &'a [f64],
    /// Nonnegative case weights multiplying each check-loss term.
    pub case_weights: Option<&'a [f64]>,
    pub penalty: Option<&'a PenaltyOperator>,
    pub lambda: f64,
    pub tau: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub coef: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// IRLS weights (times case weights) of the last reweighting step.
    pub weights: Vec<f64>,
    pub objective: f64,
    /// Smoothing radius of the last stage.
    pub alpha: f64,
}

const POLISH_EVERY: usize = 16;
const MAX_PIVOTS: usize = 12;

impl Problem<'_> {
    fn n(&self) -> usize {
        self.y.len()
    }

    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn case_weight(&self, i: usize) -> f64 {
        self.case_weights.map_or(1.0, |k| k[i])
    }

    fn penalty_scale(&self) -> f64 {
        if self.penalty.is_some() {
            0.5 * self.lambda
        } else {
            0.0
        }
    }

    pub fn residuals(&self, coef: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|i| self.y[i] - self.design.row_dot(i, coef))
            .collect()
    }

    /// `Σ k_i ρ_τ(r_i) + (λ/2) b^T D^T D b`.
    pub fn objective(&self, coef: &[f64]) -> f64 {
        let loss: f64 = (0..self.n())
            .map(|i| self.case_weight(i) * rho(self.y[i] - self.design.row_dot(i, coef), self.tau))
            .sum();
        let pen = match self.penalty {
            Some(op) if self.lambda > 0.0 => op.value(coef, self.lambda).unwrap_or(f64::INFINITY),
            _ => 0.0,
        };
        loss + pen
    }

    fn bandwidth(&self) -> usize {
        let pen = self.penalty.map_or(0, |p| p.bandwidth());
        (self.design.width() - 1).max(pen)
    }

    /// Solves `(Z^T W Z + (λ/2) D^T D) b = Z^T W y`.
    pub fn weighted_solve(&self, weights: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut a = BandedSpd::zeros(d, self.bandwidth());
        let mut rhs = vec![0.0; d];
        for (i, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let (start, vals) = self.design.row(i);
            a.add_outer(start, vals, w);
            for (k, v) in vals.iter().enumerate() {
                rhs[start + k] += w * v * self.y[i];
            }
        }
        if let Some(op) = self.penalty {
            if self.lambda > 0.0 {
                a.add_penalty(op, self.penalty_scale());
            }
        }
        let chol = a.factor()?;
        chol.solve_in_place(&mut rhs);
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("non-finite solution of the weighted system".into()));
        }
        Ok(rhs)
    }

    fn initial(&self, cfg: &IrlsConfig) -> Result<Vec<f64>> {
        match &cfg.init {
            Init::Given(c) => {
                if c.len() != self.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim(),
                        got: c.len(),
                    });
                }
                Ok(c.clone())
            }
            Init::PenalizedLeastSquares => {
                let w: Vec<f64> = (0..self.n()).map(|i| self.case_weight(i)).collect();
                self.weighted_solve(&w)
            }
        }
    }

    /// Solves the optimality system for the interpolated set `active`, with
    /// the other observations held at the residual signs `sign`. Returns the
    /// coefficient correction and the subgradients of `active`.
    fn kkt_step(&self, coef: &[f64], r: &[f64], active: &[usize], sign: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let d = self.dim();
        let e = active.len();
        let size = d + e;
        let mut m = DMatrix::<f64>::zeros(size, size);
        let mut rhs = DVector::<f64>::zeros(size);
        // interpolation rows: z_i^T Δ = r_i
        for (row, &i) in active.iter().enumerate() {
            let (start, vals) = self.design.row(i);
            for (k, v) in vals.iter().enumerate() {
                m[(row, start + k)] = *v;
            }
            rhs[row] = r[i];
        }
        // stationarity rows: λ D^T D Δ - Z_E^T g = Σ_{i∉E} k_i ψ_i z_i - λ D^T D b
        let lam = if self.penalty.is_some() { self.lambda } else { 0.0 };
        if let (Some(op), true) = (self.penalty, lam > 0.0) {
            let gram = op.gram();
            for j in 0..d {
                for c in j.saturating_sub(op.bandwidth())..(j + op.bandwidth() + 1).min(d) {
                    m[(e + j, c)] = lam * gram[(j, c)];
                }
            }
            let pb = op.gram_mul(coef).ok()?;
            for j in 0..d {
                rhs[e + j] -= lam * pb[j];
            }
        }
        for (col, &i) in active.iter().enumerate() {
            let (start, vals) = self.design.row(i);
            for (k, v) in vals.iter().enumerate() {
                m[(e + start + k, d + col)] = -v;
            }
        }
        for i in 0..self.n() {
            if sign[i] == 0.0 {
                continue;
            }
            let g = self.case_weight(i) * if sign[i] > 0.0 { self.tau } else { self.tau - 1.0 };
            if g == 0.0 {
                continue;
            }
            let (start, vals) = self.design.row(i);
            for (k, v) in vals.iter().enumerate() {
                rhs[e + start + k] += g * v;
            }
        }
        let sol = match m.clone().lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => {
                let svd = m.clone().svd(true, true);
                let smax = svd.singular_values.max();
                svd.solve(&rhs, 1e-12 * smax).ok()?
            }
        };
        // a min-norm solution of an inconsistent system is no certificate
        let scale = rhs.amax().max(m.amax() * sol.amax()).max(1e-300);
        if (&m * &sol - &rhs).amax() > 1e-9 * scale {
            return None;
        }
        Some((sol.rows(0, d).iter().cloned().collect(), sol.rows(d, e).iter().cloned().collect()))
    }

    /// Exact finishing step around `coef`; returns certified coefficients.
    ///
    /// Starts from the observations with `|r_i| <= threshold` as the
    /// interpolated set and pivots one observation at a time: a residual that
    /// changes sign joins the set at its first crossing, a subgradient that
    /// leaves `k_i [τ-1, τ]` releases its observation to the side it points to.
    pub fn polish(&self, coef: &[f64], threshold: f64) -> Option<Vec<f64>> {
        let d = self.dim();
        let r = self.residuals(coef);
        let mut active: Vec<usize> = (0..self.n())
            .filter(|&i| r[i].abs() <= threshold && self.case_weight(i) > 0.0)
            .collect();
        if active.len() > 2 * d + 2 {
            return None;
        }
        let mut sign: Vec<f64> = r
            .iter()
            .enumerate()
            .map(|(i, v)| if self.case_weight(i) > 0.0 { v.signum() } else { 0.0 })
            .collect();
        for &i in &active {
            sign[i] = 0.0;
        }
        let yscale = self.y.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        let rtol = 1e-9 * yscale;
        for _ in 0..MAX_PIVOTS {
            let Some((delta, g)) = self.kkt_step(coef, &r, &active, &sign) else {
                // too few interpolated observations for a consistent system:
                // take the nearest remaining one if it is already almost
                // interpolated (IRLS stalls on nearly flat directions) and let
                // the pivots sort it out
                let nearest = (0..self.n())
                    .filter(|&i| sign[i] != 0.0)
                    .min_by(|&a, &b| r[a].abs().total_cmp(&r[b].abs()))?;
                if r[nearest].abs() > 1e-6 * yscale {
                    return None;
                }
                sign[nearest] = 0.0;
                active.push(nearest);
                continue;
            };
            let new_coef: Vec<f64> = coef.iter().zip(&delta).map(|(c, s)| c + s).collect();
            let new_r = self.residuals(&new_coef);
            if active.iter().any(|&i| new_r[i].abs() > rtol) {
                return None;
            }
            // worst subgradient outside its interval
            let mut release: Option<(usize, f64, f64)> = None;
            for (col, &i) in active.iter().enumerate() {
                let k = self.case_weight(i);
                let slack = 1e-9 * k;
                let (excess, side) = if g[col] > k * self.tau + slack {
                    (g[col] - k * self.tau, 1.0)
                } else if g[col] < k * (self.tau - 1.0) - slack {
                    (k * (self.tau - 1.0) - g[col], -1.0)
                } else {
                    continue;
                };
                if release.is_none_or(|(_, e, _)| excess > e) {
                    release = Some((col, excess, side));
                }
            }
            // first sign change along the segment from coef to new_coef
            let mut enter: Option<(usize, f64)> = None;
            for i in 0..self.n() {
                if sign[i] != 0.0 && new_r[i] * sign[i] < -rtol {
                    let t = r[i] / (r[i] - new_r[i]);
                    if enter.is_none_or(|(_, s)| t < s) {
                        enter = Some((i, t));
                    }
                }
            }
            match (enter, release) {
                (None, None) => return Some(new_coef),
                (Some((i, _)), _) => {
                    sign[i] = 0.0;
                    active.push(i);
                }
                (None, Some((col, _, side))) => {
                    let i = active.swap_remove(col);
                    sign[i] = side;
                }
            }
        }
        None
    }

    pub fn solve(&self, cfg: &IrlsConfig) -> Result<Solution> {
        cfg.validate()?;
        if self.n() != self.design.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.design.nrows(),
                got: self.n(),
            });
        }
        let alpha0 = cfg.resolve_alpha(self.y);
        let mut coef = self.initial(cfg)?;
        let mut best = coef.clone();
        let mut best_obj = self.objective(&coef);
        let mut weights = vec![0.0; self.n()];
        let mut iterations = 0;
        let mut converged = false;
        let mut certified: Option<Vec<f64>> = None;
        let mut alpha = alpha0;

        'stages: for stage in 0..=cfg.refine_stages {
            if stage > 0 {
                alpha *= 1e-3;
            }
            converged = false;
            for it in 0..cfg.max_iter {
                iterations += 1;
                for (i, w) in weights.iter_mut().enumerate() {
                    let r = self.y[i] - self.design.row_dot(i, &coef);
                    *w = self.case_weight(i) * weight(r, self.tau, alpha, cfg.weight_mode);
                }
                let next = self.weighted_solve(&weights)?;
                let change = next
                    .iter()
                    .zip(&coef)
                    .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
                coef = next;
                let obj = self.objective(&coef);
                if obj < best_obj {
                    best_obj = obj;
                    best.clone_from(&coef);
                }
                if change < cfg.tol {
                    converged = true;
                    break;
                }
                if cfg.polish && (it + 1) % POLISH_EVERY == 0 {
                    if let Some(c) = self.polish(&coef, alpha * 1.0001) {
                        certified = Some(c);
                        break 'stages;
                    }
                }
            }
            if !cfg.polish {
                break;
            }
            if let Some(c) = self
                .polish(&best, alpha * 1.0001)
                .or_else(|| self.polish(&best, alpha * 2.0))
            {
                certified = Some(c);
                break;
            }
            coef.clone_from(&best);
        }

        if let Some(c) = certified {
            let obj = self.objective(&c);
            if obj <= best_obj + 1e-12 * best_obj.abs().max(1e-300) {
                best_obj = obj;
                best = c;
                converged = true;
            }
        }
        Ok(Solution {
            coef: best,
            iterations,
            converged,
            weights,
            objective: best_obj,
            alpha,
        })
    }
}
