//! Sheather-Jones bandwidths and Gaussian kernel density estimates.

use crate::data::{interquartile_range, std_dev, Sample};
use crate::error::{domain, Error, Result};
use crate::solver::{gaussian_kernel, QuantileFit};

const BINS: usize = 1000;
const DELTA_MAX: f64 = 1000.0;

/// Pair-difference counts of `values` on `BINS` equal bins; returns the bin
/// width and the counts indexed by bin distance.
fn pair_counts(values: &[f64]) -> (f64, Vec<f64>) {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) * 1.01 / BINS as f64;
    let mut occupancy = vec![0.0; BINS];
    for v in values {
        let b = (((v - lo) / width) as usize).min(BINS - 1);
        occupancy[b] += 1.0;
    }
    let filled: Vec<(usize, f64)> = occupancy.iter().cloned().enumerate().filter(|(_, c)| *c > 0.0).collect();
    let mut counts = vec![0.0; BINS];
    for (a, &(ia, ca)) in filled.iter().enumerate() {
        counts[0] += ca * (ca - 1.0) / 2.0;
        for &(ib, cb) in &filled[..a] {
            counts[ia - ib] += ca * cb;
        }
    }
    (width, counts)
}

/// Binned estimate of the density functional `∫ f^{(r)} f` for `r = 4, 6`.
fn phi(n: f64, width: f64, counts: &[f64], h: f64, order: u8) -> f64 {
    let mut sum = 0.0;
    for (i, c) in counts.iter().enumerate() {
        let delta = (i as f64 * width / h).powi(2);
        if delta >= DELTA_MAX {
            break;
        }
        let herm = match order {
            4 => delta * delta - 6.0 * delta + 3.0,
            _ => delta * delta * delta - 15.0 * delta * delta + 45.0 * delta - 15.0,
        };
        sum += (-delta / 2.0).exp() * herm * c;
    }
    let (diag, power) = match order {
        4 => (3.0, 5),
        _ => (-15.0, 7),
    };
    let sum = 2.0 * sum + n * diag;
    sum / (n * (n - 1.0) * h.powi(power) * (2.0 * std::f64::consts::PI).sqrt())
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || (hi - lo) <= 1e-12 * mid {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sheather-Jones solve-the-equation plug-in bandwidth for a Gaussian kernel.
pub fn sj_bandwidth(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 10 {
        return domain(format!("bandwidth selection needs at least 10 values, got {n}"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return domain("bandwidth selection needs finite values");
    }
    let sd = std_dev(values);
    let iqr = interquartile_range(values) / 1.349;
    let scale = if iqr > 0.0 { sd.min(iqr) } else { sd };
    if !(scale > 0.0) {
        return domain("bandwidth selection needs a sample with positive spread");
    }
    let nf = n as f64;
    let (width, counts) = pair_counts(values);
    let a = 1.24 * scale * nf.powf(-1.0 / 7.0);
    let b = 1.23 * scale * nf.powf(-1.0 / 9.0);
    let c1 = 1.0 / (2.0 * std::f64::consts::PI.sqrt() * nf);
    let td = -phi(nf, width, &counts, b, 6);
    if !(td > 0.0 && td.is_finite()) {
        return Err(Error::Unevaluable("sample is too sparse for the sixth-derivative functional".into()));
    }
    let sd_a = phi(nf, width, &counts, a, 4);
    let alpha2 = 1.357 * (sd_a / td).powf(1.0 / 7.0);
    let equation = |h: f64| (c1 / phi(nf, width, &counts, alpha2 * h.powf(5.0 / 7.0), 4)).powf(0.2) - h;
    let hmax = 1.144 * scale * nf.powf(-0.2);
    let (mut lo, mut hi) = (0.1 * hmax, hmax);
    for _ in 0..99 {
        if equation(lo) * equation(hi) <= 0.0 {
            break;
        }
        lo /= 1.2;
        hi *= 1.2;
    }
    if equation(lo) * equation(hi) > 0.0 {
        return Err(Error::Unevaluable("no sign change for the bandwidth equation".into()));
    }
    Ok(bisect(equation, lo, hi))
}

/// Gaussian kernel density estimate with bandwidth `h` at `t`.
pub fn kernel_density(values: &[f64], h: f64, t: f64) -> f64 {
    values.iter().map(|v| gaussian_kernel((t - v) / h)).sum::<f64>() / (values.len() as f64 * h)
}

/// Kernel estimate `f̂(y | x) = Σ K_hx(x_i - x) K_hy(y_i - y) / Σ K_hx(x_i - x)`.
///
/// A fit-centred estimate replaces `y_i` by `y_i - η̂(x_i) + η̂(x)`, so the
/// x-window pools residuals instead of smearing the trend into the density.
#[derive(Debug, Clone)]
pub struct ConditionalDensity {
    x_bandwidth: f64,
    y_bandwidth: f64,
    sample: Sample,
    location: Option<QuantileFit>,
}

impl ConditionalDensity {
    pub fn new(sample: Sample, x_bandwidth: f64, y_bandwidth: f64) -> Result<Self> {
        if !(x_bandwidth > 0.0 && y_bandwidth > 0.0 && x_bandwidth.is_finite() && y_bandwidth.is_finite()) {
            return domain("kernel bandwidths must be positive");
        }
        Ok(Self {
            x_bandwidth,
            y_bandwidth,
            sample,
            location: None,
        })
    }

    /// Fit-centred estimate with Sheather-Jones bandwidths on `x` and on the
    /// residuals of `fit`.
    pub fn around_fit(sample: &Sample, fit: &QuantileFit) -> Result<Self> {
        let residuals: Vec<f64> = sample.y().iter().zip(fit.fitted(sample)?).map(|(y, f)| y - f).collect();
        let hx = sj_bandwidth(sample.x())?;
        let hy = sj_bandwidth(&residuals)?;
        let mut cd = Self::new(Sample::new(sample.x().to_vec(), residuals)?, hx, hy)?;
        cd.location = Some(fit.clone());
        Ok(cd)
    }

    /// Sheather-Jones bandwidths on `x` and on the fit residuals.
    pub fn with_residuals(sample: &Sample, residuals: &[f64]) -> Result<Self> {
        let hx = sj_bandwidth(sample.x())?;
        let hy = sj_bandwidth(residuals)?;
        Self::new(sample.clone(), hx, hy)
    }

    pub fn x_bandwidth(&self) -> f64 {
        self.x_bandwidth
    }

    pub fn y_bandwidth(&self) -> f64 {
        self.y_bandwidth
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        let (hx, hy) = (self.x_bandwidth, self.y_bandwidth);
        let y = match &self.location {
            Some(fit) => y - fit.predict(x).map_err(|e| Error::Unevaluable(e.to_string()))?,
            None => y,
        };
        let (mut num, mut den) = (0.0, 0.0);
        for (xi, yi) in self.sample.x().iter().zip(self.sample.y()) {
            let kx = gaussian_kernel((xi - x) / hx);
            if kx == 0.0 {
                continue;
            }
            den += kx;
            num += kx * gaussian_kernel((yi - y) / hy);
        }
        if !(den > 0.0) {
            return Err(Error::Unevaluable(format!("no kernel mass near x = {x}")));
        }
        Ok(num / (den * hy))
    }
}

/// Shorthand for [`ConditionalDensity::eval`].
pub fn conditional_density(estimate: &ConditionalDensity, x: f64, y: f64) -> Result<f64> {
    estimate.eval(x, y)
}
