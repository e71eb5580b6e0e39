//! Seeded Monte Carlo harness: data generation from `y = η(x) + ε`, MISE
//! tables for the spline and kernel estimators, and the studentized-error
//! normality study.
//!
//! Every repetition draws from its own ChaCha20 stream keyed by the master
//! seed, the sample size and the repetition index, so results do not depend
//! on scheduling and any single repetition can be replayed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Cauchy, Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::BasisSpec;
use crate::data::Sample;
use crate::error::{domain, Error, Result};
use crate::inference::{kernel_density, ks_distance_to_normal, normal_pdf, sj_bandwidth, ConditionalDensity, PlugIn};
use crate::selection::{log_grid, select_model, SelectionConfig};
use crate::solver::{check_tau, fit_penalized_quantile, local_linear, rho, IrlsConfig, QuantileFit};

/// Noise distribution of the simulation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorLaw {
    /// `N(0, 0.1^2)`.
    Normal,
    /// Exponential with mean 2.
    Exponential,
    /// Cauchy with location 0 and scale 0.01.
    Cauchy,
    /// No noise; for exact-recovery checks.
    Noiseless,
}

impl ErrorLaw {
    /// `F_ε^{-1}(τ)`.
    pub fn quantile(&self, tau: f64) -> f64 {
        match self {
            ErrorLaw::Normal => 0.1 * crate::inference::normal_quantile(tau).unwrap_or(f64::NAN),
            ErrorLaw::Exponential => -2.0 * (1.0 - tau).ln(),
            ErrorLaw::Cauchy => 0.01 * (std::f64::consts::PI * (tau - 0.5)).tan(),
            ErrorLaw::Noiseless => 0.0,
        }
    }

    fn draw(&self, rng: &mut ChaCha20Rng) -> f64 {
        match self {
            ErrorLaw::Normal => Normal::new(0.0, 0.1).unwrap().sample(rng),
            ErrorLaw::Exponential => Exp::new(0.5).unwrap().sample(rng),
            ErrorLaw::Cauchy => Cauchy::new(0.0, 0.01).unwrap().sample(rng),
            ErrorLaw::Noiseless => 0.0,
        }
    }
}

impl std::str::FromStr for ErrorLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(ErrorLaw::Normal),
            "exponential" => Ok(ErrorLaw::Exponential),
            "cauchy" => Ok(ErrorLaw::Cauchy),
            "noiseless" => Ok(ErrorLaw::Noiseless),
            _ => Err(Error::InvalidConfig(format!(
                "unknown error law '{s}' (expected normal, exponential or cauchy)"
            ))),
        }
    }
}

/// Regression function `η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Signal {
    /// `sin(2πx)`.
    Sine,
    /// `a + b x`.
    Linear(f64, f64),
}

impl Signal {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Signal::Sine => (2.0 * std::f64::consts::PI * x).sin(),
            Signal::Linear(a, b) => a + b * x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimModel {
    pub signal: Signal,
    pub law: ErrorLaw,
    pub n: usize,
    pub seed: u64,
}

impl SimModel {
    pub fn new(law: ErrorLaw, n: usize, seed: u64) -> Self {
        Self {
            signal: Signal::Sine,
            law,
            n,
            seed,
        }
    }

    fn rng(&self, repetition: u64) -> ChaCha20Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&(self.n as u64).to_le_bytes());
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(repetition);
        rng
    }
}

/// `η_τ(x) = η(x) + F_ε^{-1}(τ)`.
pub fn true_quantile(model: &SimModel, tau: f64, x: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(model.signal.eval(x) + model.law.quantile(tau))
}

/// Draws repetition `repetition` of the model: `x ~ U[0, 1]`, `y = η(x) + ε`.
pub fn generate_dataset(model: &SimModel, repetition: u64) -> Result<Sample> {
    if model.n == 0 {
        return domain("sample size must be positive");
    }
    let mut rng = model.rng(repetition);
    let mut x = Vec::with_capacity(model.n);
    let mut y = Vec::with_capacity(model.n);
    for _ in 0..model.n {
        let xi: f64 = rng.random();
        x.push(xi);
        y.push(model.signal.eval(xi) + model.law.draw(&mut rng));
    }
    Sample::new(x, y)
}

/// The evaluation grid `z_j = j/100`, `j = 1..=100`.
pub fn evaluation_grid() -> Vec<f64> {
    (1..=100).map(|j| j as f64 / 100.0).collect()
}

/// The three estimators of the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Estimator {
    /// Cubic P-spline, `m = 2`, `(K, λ)` by GACV.
    PCubic,
    /// Unpenalized linear regression spline, `K` by GACV.
    RLinear,
    /// Local linear quantile fit, bandwidth by GACV.
    LLinear,
}

impl Estimator {
    pub fn label(&self) -> &'static str {
        match self {
            Estimator::PCubic => "P-cubic",
            Estimator::RLinear => "R-linear",
            Estimator::LLinear => "L-linear",
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p-cubic" | "pcubic" => Ok(Estimator::PCubic),
            "r-linear" | "rlinear" => Ok(Estimator::RLinear),
            "l-linear" | "llinear" => Ok(Estimator::LLinear),
            _ => Err(Error::InvalidConfig(format!("unknown estimator '{s}'"))),
        }
    }
}

/// Whether tuning parameters are chosen on every repetition or once per
/// cell (on repetition 0) and reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SelectionMode {
    PerRepetition,
    PerCell,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyConfig {
    pub law: ErrorLaw,
    pub signal: Signal,
    pub n: usize,
    pub reps: usize,
    pub taus: Vec<f64>,
    pub estimators: Vec<Estimator>,
    pub master_seed: u64,
    pub selection_mode: SelectionMode,
    /// Sweep for the P-cubic estimator.
    pub p_grid: SelectionConfig,
    /// Knot counts for the R-linear estimator.
    pub r_knots: Vec<usize>,
    /// Bandwidths for the L-linear estimator.
    pub l_bandwidths: Vec<f64>,
    /// Number of observations at which the L-linear GACV is evaluated.
    pub l_gacv_points: usize,
    /// Restrict spline knot counts to `K ≤ √n` (see `SelectionConfig::with_knot_cap`).
    pub cap_knots: bool,
    pub irls: IrlsConfig,
}

impl StudyConfig {
    pub fn new(law: ErrorLaw, n: usize, reps: usize, taus: Vec<f64>, master_seed: u64) -> Self {
        Self {
            law,
            signal: Signal::Sine,
            n,
            reps,
            taus,
            estimators: vec![Estimator::PCubic, Estimator::RLinear, Estimator::LLinear],
            master_seed,
            selection_mode: SelectionMode::PerRepetition,
            p_grid: SelectionConfig::default(),
            r_knots: vec![2, 3, 4, 5, 6, 8, 10, 13, 16, 20],
            l_bandwidths: log_grid(0.02, 0.3, 10),
            l_gacv_points: 100,
            cap_knots: true,
            irls: IrlsConfig::default(),
        }
    }

    fn model(&self) -> SimModel {
        SimModel {
            signal: self.signal,
            law: self.law,
            n: self.n,
            seed: self.master_seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidConfig("repetitions must be positive".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidConfig("sample size must be positive".into()));
        }
        if self.taus.is_empty() || self.estimators.is_empty() {
            return Err(Error::InvalidConfig("tau and estimator lists must be nonempty".into()));
        }
        for &t in &self.taus {
            check_tau(t)?;
        }
        Ok(())
    }
}

/// Tuning parameters chosen for one fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Tuning {
    Spline { k: usize, lambda: f64 },
    Bandwidth(f64),
}

fn r_linear_grid(cfg: &StudyConfig) -> SelectionConfig {
    SelectionConfig {
        degree: 1,
        penalty_order: 0,
        k_values: cfg.r_knots.clone(),
        lambda_values: vec![0.0],
    }
}

fn spline_grid(cfg: &StudyConfig, est: Estimator) -> SelectionConfig {
    let grid = match est {
        Estimator::PCubic => cfg.p_grid.clone(),
        _ => r_linear_grid(cfg),
    };
    if cfg.cap_knots {
        grid.with_knot_cap(cfg.n)
    } else {
        grid
    }
}

/// Spline fit at fixed tuning, or GACV-selected when `tuning` is `None`.
fn spline_fit(
    sample: &Sample,
    tau: f64,
    grid: &SelectionConfig,
    tuning: Option<Tuning>,
    irls: &IrlsConfig,
) -> Result<(QuantileFit, Tuning)> {
    match tuning {
        Some(Tuning::Spline { k, lambda }) => {
            let single = SelectionConfig {
                k_values: vec![k],
                lambda_values: vec![lambda],
                ..grid.clone()
            };
            let spec = BasisSpec::new(single.degree, k)?;
            let penalty = match single.penalty_order {
                0 => None,
                m => Some(crate::penalty::PenaltyOperator::new(m, spec.dim())?),
            };
            let fit = fit_penalized_quantile(sample, tau, &spec, penalty.as_ref(), lambda, irls)?;
            Ok((fit, Tuning::Spline { k, lambda }))
        }
        _ => {
            let sel = select_model(sample, tau, grid, irls)?;
            Ok((sel.best_fit, Tuning::Spline {
                k: sel.best.0,
                lambda: sel.best.1,
            }))
        }
    }
}

/// GACV of the local linear estimator on a subset of observations:
/// `Σ ρ_τ(y_i - â(x_i)) / (m - Σ v_i (A_i^{-1})_{00})`.
fn local_gacv(sample: &Sample, tau: f64, h: f64, points: &[usize], irls: &IrlsConfig) -> Result<f64> {
    let (mut loss, mut leverage) = (0.0, 0.0);
    for &i in points {
        let fit = local_linear(sample, tau, sample.x()[i], h, irls)?;
        loss += rho(sample.y()[i] - fit.intercept, tau);
        leverage += fit.weights[i] * fit.inverse_00;
    }
    let denom = points.len() as f64 - leverage;
    if !(denom > 0.0) {
        return Err(Error::InvalidConfig(format!("bandwidth {h} leaves no residual freedom")));
    }
    Ok(loss / denom)
}

fn gacv_points(sample: &Sample, count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sample.len()).collect();
    order.sort_by(|&a, &b| sample.x()[a].total_cmp(&sample.x()[b]));
    if count >= order.len() {
        return order;
    }
    (0..count).map(|j| order[(2 * j + 1) * order.len() / (2 * count)]).collect()
}

/// Selects the local linear bandwidth by GACV; ties go to the larger `h`.
pub fn select_bandwidth(sample: &Sample, tau: f64, bandwidths: &[f64], points: usize, irls: &IrlsConfig) -> Result<f64> {
    let idx = gacv_points(sample, points);
    let mut best: Option<(f64, f64)> = None;
    for &h in bandwidths {
        if let Ok(score) = local_gacv(sample, tau, h, &idx, irls) {
            if best.is_none_or(|(s, bh)| score < s || (score == s && h > bh)) {
                best = Some((score, h));
            }
        }
    }
    best.map(|(_, h)| h)
        .ok_or_else(|| Error::InvalidConfig("no admissible bandwidth".into()))
}

fn estimate_curve(
    sample: &Sample,
    tau: f64,
    est: Estimator,
    cfg: &StudyConfig,
    tuning: Option<Tuning>,
    grid: &[f64],
) -> Result<(Vec<f64>, Tuning)> {
    let mut irls = cfg.irls.clone();
    if irls.alpha.is_none() {
        irls.alpha = Some(irls.resolve_alpha(sample.y()));
    }
    match est {
        Estimator::PCubic | Estimator::RLinear => {
            let (fit, t) = spline_fit(sample, tau, &spline_grid(cfg, est), tuning, &irls)?;
            let curve = grid.iter().map(|&z| fit.predict(z)).collect::<Result<Vec<f64>>>()?;
            Ok((curve, t))
        }
        Estimator::LLinear => {
            let h = match tuning {
                Some(Tuning::Bandwidth(h)) => h,
                _ => select_bandwidth(sample, tau, &cfg.l_bandwidths, cfg.l_gacv_points, &irls)?,
            };
            let curve = grid
                .iter()
                .map(|&z| local_linear(sample, tau, z, h, &irls).map(|f| f.intercept))
                .collect::<Result<Vec<f64>>>()?;
            Ok((curve, Tuning::Bandwidth(h)))
        }
    }
}

/// MISE of one `(estimator, τ)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiseCell {
    pub estimator: Estimator,
    pub tau: f64,
    /// Mean of `mse` over the grid.
    pub mise: f64,
    /// `MSE_j = (1/R) Σ_r (η̂_{τ,r}(z_j) - η_τ(z_j))^2` over successful repetitions.
    pub mse: Vec<f64>,
    pub successes: usize,
    pub failures: usize,
    /// First failure message, if any.
    pub first_failure: Option<String>,
    /// Tuning used on each successful repetition.
    pub tunings: Vec<Tuning>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiseReport {
    pub config: StudyConfig,
    pub grid: Vec<f64>,
    pub cells: Vec<MiseCell>,
}

impl MiseReport {
    pub fn cell(&self, est: Estimator, tau: f64) -> Option<&MiseCell> {
        self.cells.iter().find(|c| c.estimator == est && c.tau == tau)
    }

    /// One row per cell: estimator, tau, n, reps, mise, failures.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["estimator", "law", "n", "tau", "reps", "successes", "failures", "mise"])?;
        for c in &self.cells {
            w.write_record([
                c.estimator.label().to_string(),
                format!("{:?}", self.config.law).to_lowercase(),
                self.config.n.to_string(),
                c.tau.to_string(),
                self.config.reps.to_string(),
                c.successes.to_string(),
                c.failures.to_string(),
                if c.successes > 0 { c.mise.to_string() } else { String::new() },
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Pointwise MSE: one row per grid point, one column per cell.
    pub fn write_mse_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["z".to_string()];
        header.extend(self.cells.iter().map(|c| format!("{}_tau{}", c.estimator.label(), c.tau)));
        w.write_record(&header)?;
        for (j, z) in self.grid.iter().enumerate() {
            let mut row = vec![z.to_string()];
            row.extend(self.cells.iter().map(|c| c.mse.get(j).map_or(String::new(), |v| v.to_string())));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs every `(estimator, τ)` cell over `reps` repetitions.
pub fn run_mise_study(cfg: &StudyConfig) -> Result<MiseReport> {
    cfg.validate()?;
    let model = cfg.model();
    let grid = evaluation_grid();
    let mut cells = vec![];
    for &est in &cfg.estimators {
        for &tau in &cfg.taus {
            let truth = grid.iter().map(|&z| true_quantile(&model, tau, z)).collect::<Result<Vec<f64>>>()?;
            let fixed = match cfg.selection_mode {
                SelectionMode::PerRepetition => None,
                SelectionMode::PerCell => generate_dataset(&model, 0)
                    .and_then(|s| estimate_curve(&s, tau, est, cfg, None, &grid))
                    .ok()
                    .map(|(_, t)| t),
            };
            let runs: Vec<Result<(Vec<f64>, Tuning)>> = (0..cfg.reps as u64)
                .into_par_iter()
                .map(|r| {
                    let sample = generate_dataset(&model, r)?;
                    estimate_curve(&sample, tau, est, cfg, fixed, &grid)
                })
                .collect();
            let mut mse = vec![0.0; grid.len()];
            let (mut successes, mut failures, mut first_failure, mut tunings) = (0, 0, None, vec![]);
            for run in runs {
                match run {
                    Ok((curve, t)) if curve.iter().all(|v| v.is_finite()) => {
                        successes += 1;
                        tunings.push(t);
                        for (j, (c, e)) in curve.iter().zip(&truth).enumerate() {
                            mse[j] += (c - e).powi(2);
                        }
                    }
                    Ok(_) => {
                        failures += 1;
                        first_failure.get_or_insert_with(|| "non-finite estimate".to_string());
                    }
                    Err(e) => {
                        failures += 1;
                        first_failure.get_or_insert_with(|| e.to_string());
                    }
                }
            }
            if successes > 0 {
                mse.iter_mut().for_each(|v| *v /= successes as f64);
            } else {
                mse.iter_mut().for_each(|v| *v = f64::NAN);
            }
            let mise = mse.iter().sum::<f64>() / mse.len() as f64;
            cells.push(MiseCell {
                estimator: est,
                tau,
                mise,
                mse,
                successes,
                failures,
                first_failure,
                tunings,
            });
        }
    }
    Ok(MiseReport {
        config: cfg.clone(),
        grid,
        cells,
    })
}

/// Studentized errors `U_{τ,r}(x) = (η̂_{τ,r}(x) - η_τ(x)) / √Φ̂_{τ,r}(x)` at one `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityReport {
    pub n: usize,
    pub tau: f64,
    pub x: f64,
    pub u: Vec<f64>,
    pub excluded: usize,
    pub first_failure: Option<String>,
    pub kde_bandwidth: Option<f64>,
    pub kde_grid: Vec<f64>,
    pub kde: Vec<f64>,
    pub ks: f64,
}

impl NormalityReport {
    /// Density of `U` beside the standard normal density.
    pub fn write_density_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["u", "density", "normal_density"])?;
        for (u, f) in self.kde_grid.iter().zip(&self.kde) {
            w.write_record([u.to_string(), f.to_string(), normal_pdf(*u).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityConfig {
    pub law: ErrorLaw,
    pub tau: f64,
    pub x: f64,
    pub ns: Vec<usize>,
    pub reps: usize,
    pub master_seed: u64,
    pub selection_mode: SelectionMode,
    pub grid: SelectionConfig,
    /// Restrict knot counts to `K ≤ √n` for each sample size.
    pub cap_knots: bool,
    pub irls: IrlsConfig,
}

impl NormalityConfig {
    pub fn new(law: ErrorLaw, tau: f64, ns: Vec<usize>, reps: usize, master_seed: u64) -> Self {
        Self {
            law,
            tau,
            x: 0.5,
            ns,
            reps,
            master_seed,
            selection_mode: SelectionMode::PerRepetition,
            grid: SelectionConfig::default(),
            cap_knots: true,
            irls: IrlsConfig::default(),
        }
    }
}

fn studentized(sample: &Sample, model: &SimModel, cfg: &NormalityConfig, tuning: Option<Tuning>) -> Result<(f64, Tuning)> {
    let mut irls = cfg.irls.clone();
    irls.alpha = Some(irls.resolve_alpha(sample.y()));
    let grid = if cfg.cap_knots {
        cfg.grid.with_knot_cap(sample.len())
    } else {
        cfg.grid.clone()
    };
    let (fit, t) = spline_fit(sample, cfg.tau, &grid, tuning, &irls)?;
    let density = ConditionalDensity::around_fit(sample, &fit)?;
    let phi = PlugIn::new(sample, &fit, &density)?.variance(cfg.x)?;
    if !(phi > 0.0) {
        return Err(Error::Unevaluable(format!("variance estimate {phi} at x = {}", cfg.x)));
    }
    let u = (fit.predict(cfg.x)? - true_quantile(model, cfg.tau, cfg.x)?) / phi.sqrt();
    Ok((u, t))
}

/// Kernel density estimate and KS distance of `U` for each sample size.
pub fn normality_study(cfg: &NormalityConfig) -> Result<Vec<NormalityReport>> {
    check_tau(cfg.tau)?;
    if cfg.reps == 0 || cfg.ns.is_empty() {
        return Err(Error::InvalidConfig("repetitions and sample sizes must be nonempty".into()));
    }
    if !(0.0..=1.0).contains(&cfg.x) {
        return domain(format!("x = {} lies outside [0, 1]", cfg.x));
    }
    let mut reports = vec![];
    for &n in &cfg.ns {
        let model = SimModel::new(cfg.law, n, cfg.master_seed);
        let fixed = match cfg.selection_mode {
            SelectionMode::PerRepetition => None,
            SelectionMode::PerCell => generate_dataset(&model, 0)
                .and_then(|s| studentized(&s, &model, cfg, None))
                .ok()
                .map(|(_, t)| t),
        };
        let runs: Vec<Result<f64>> = (0..cfg.reps as u64)
            .into_par_iter()
            .map(|r| {
                let sample = generate_dataset(&model, r)?;
                studentized(&sample, &model, cfg, fixed).map(|(u, _)| u)
            })
            .collect();
        let mut u = vec![];
        let (mut excluded, mut first_failure) = (0, None);
        for run in runs {
            match run {
                Ok(v) if v.is_finite() => u.push(v),
                Ok(_) => excluded += 1,
                Err(e) => {
                    excluded += 1;
                    first_failure.get_or_insert_with(|| e.to_string());
                }
            }
        }
        let kde_bandwidth = sj_bandwidth(&u).ok();
        let kde_grid: Vec<f64> = (0..=160).map(|i| -4.0 + i as f64 * 0.05).collect();
        let kde = match kde_bandwidth {
            Some(h) => kde_grid.iter().map(|&t| kernel_density(&u, h, t)).collect(),
            None => vec![f64::NAN; kde_grid.len()],
        };
        let ks = if u.is_empty() { f64::NAN } else { ks_distance_to_normal(&u) };
        reports.push(NormalityReport {
            n,
            tau: cfg.tau,
            x: cfg.x,
            u,
            excluded,
            first_failure,
            kde_bandwidth,
            kde_grid,
            kde,
            ks,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn true_quantiles() {
        let x = 0.3;
        let eta = (2.0 * std::f64::consts::PI * x).sin();
        let m = |law| SimModel::new(law, 10, 0);
        assert!((true_quantile(&m(ErrorLaw::Normal), 0.5, x).unwrap() - eta).abs() < 1e-15);
        assert!((true_quantile(&m(ErrorLaw::Exponential), 0.5, x).unwrap() - eta - 2.0 * 2f64.ln()).abs() < 1e-14);
        assert!((true_quantile(&m(ErrorLaw::Cauchy), 0.5, x).unwrap() - eta).abs() < 1e-15);
        let q = true_quantile(&m(ErrorLaw::Cauchy), 0.75, x).unwrap() - eta;
        assert!((q - 0.01).abs() < 1e-12);
        assert!(true_quantile(&m(ErrorLaw::Normal), 1.0, x).is_err());
    }

    #[test]
    fn datasets_are_reproducible_and_well_formed() {
        let model = SimModel::new(ErrorLaw::Normal, 500, 42);
        let a = generate_dataset(&model, 3).unwrap();
        assert_eq!(a, generate_dataset(&model, 3).unwrap());
        assert_ne!(a, generate_dataset(&model, 4).unwrap());
        assert_ne!(a, generate_dataset(&SimModel::new(ErrorLaw::Normal, 500, 43), 3).unwrap());
        assert!(a.check_unit_interval().is_ok());

        let big = generate_dataset(&SimModel::new(ErrorLaw::Normal, 100_000, 1), 0).unwrap();
        let mean = big
            .x()
            .iter()
            .zip(big.y())
            .map(|(x, y)| y - (2.0 * std::f64::consts::PI * x).sin())
            .sum::<f64>()
            / 1e5;
        assert!(mean.abs() < 3.0 * 0.1 / 1e5f64.sqrt());

        let exp = generate_dataset(&SimModel::new(ErrorLaw::Exponential, 2000, 1), 0).unwrap();
        assert!(exp
            .x()
            .iter()
            .zip(exp.y())
            .all(|(x, y)| y - (2.0 * std::f64::consts::PI * x).sin() >= 0.0));
        assert!(generate_dataset(&SimModel::new(ErrorLaw::Normal, 0, 1), 0).is_err());
    }

    #[test]
    fn noiseless_linear_study_has_zero_mise() {
        let mut cfg = StudyConfig::new(ErrorLaw::Noiseless, 60, 1, vec![0.5], 3);
        cfg.signal = Signal::Linear(0.5, -1.5);
        cfg.estimators = vec![Estimator::PCubic];
        cfg.p_grid.k_values = vec![5, 10];
        cfg.p_grid.lambda_values = log_grid(1e-3, 1e2, 4);
        let rep = run_mise_study(&cfg).unwrap();
        let cell = rep.cell(Estimator::PCubic, 0.5).unwrap();
        assert_eq!(cell.successes, 1);
        assert!(cell.mise < 1e-16, "{}", cell.mise);
    }

    #[test]
    fn study_guards() {
        let cfg = StudyConfig::new(ErrorLaw::Normal, 50, 0, vec![0.5], 3);
        assert!(run_mise_study(&cfg).is_err());
        assert!("laplace".parse::<ErrorLaw>().is_err());
        assert_eq!("cauchy".parse::<ErrorLaw>().unwrap(), ErrorLaw::Cauchy);
    }

    #[test]
    fn gacv_points_spread_over_x() {
        let s = generate_dataset(&SimModel::new(ErrorLaw::Normal, 1000, 2), 0).unwrap();
        let idx = gacv_points(&s, 10);
        let xs: Vec<f64> = idx.iter().map(|&i| s.x()[i]).collect();
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
        assert!(xs[0] < 0.1 && xs[9] > 0.9);
    }
}
