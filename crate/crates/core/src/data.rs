//! Paired `(x, y)` observations.

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Sample {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        if x.is_empty() {
            return domain("sample is empty");
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return domain("sample contains non-finite values");
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Fails unless every `x` lies in `[0, 1]`.
    pub fn check_unit_interval(&self) -> Result<()> {
        match self.x.iter().position(|x| !(0.0..=1.0).contains(x)) {
            Some(i) => domain(format!(
                "x[{i}] = {} lies outside [0, 1]",
                self.x[i]
            )),
            None => Ok(()),
        }
    }

    /// Min-max rescaling of `x` onto `[0, 1]`; returns the new sample and the
    /// original `(min, max)`.
    pub fn rescaled(&self) -> Result<(Sample, (f64, f64))> {
        let lo = self.x.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            return domain("cannot rescale x: all values are equal");
        }
        let x = self
            .x
            .iter()
            .map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
            .collect();
        Ok((
            Sample {
                x,
                y: self.y.clone(),
            },
            (lo, hi),
        ))
    }

    /// The sample with `y` replaced by `f(x, y)`.
    pub fn map_y(&self, f: impl Fn(f64, f64) -> f64) -> Sample {
        let y = self.x.iter().zip(&self.y).map(|(&x, &y)| f(x, y)).collect();
        Sample {
            x: self.x.clone(),
            y,
        }
    }
}

/// Linearly interpolated sample quantile (Hyndman-Fan type 7).
pub(crate) fn quantile(values: &[f64], prob: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    quantile_sorted(&v, prob)
}

pub(crate) fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub(crate) fn interquartile_range(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25)
}

pub(crate) fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Sample::new(vec![0.1], vec![1.0, 2.0]).is_err());
        assert!(Sample::new(vec![], vec![]).is_err());
        assert!(Sample::new(vec![f64::NAN], vec![1.0]).is_err());
        let s = Sample::new(vec![0.0, 0.5, 1.2], vec![1.0, 2.0, 3.0]).unwrap();
        assert!(s.check_unit_interval().is_err());
        let (r, range) = s.rescaled().unwrap();
        assert_eq!(range, (0.0, 1.2));
        assert!(r.check_unit_interval().is_ok());
        assert_eq!(r.x()[2], 1.0);
    }

    #[test]
    fn quantiles() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(interquartile_range(&v), 2.0);
        assert_eq!(quantile(&v, 0.1), 1.4);
    }
}
