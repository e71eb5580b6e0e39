//! Check loss and its subgradient.

use crate::error::{domain, Result};

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return domain(format!("tau = {tau} must lie in (0, 1)"));
    }
    Ok(())
}

#[inline]
pub(crate) fn rho(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        u * (tau - 1.0)
    } else {
        u * tau
    }
}

#[inline]
pub(crate) fn psi_unchecked(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        tau - 1.0
    } else {
        tau
    }
}

/// `ρ_τ(u) = u (τ - I(u < 0))`.
pub fn check_loss(u: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(rho(u, tau))
}

/// `ψ_τ(u) = τ - I(u < 0)`.
pub fn psi(u: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(psi_unchecked(u, tau))
}
