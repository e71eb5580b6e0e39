//! Penalized check-loss fitting: spline quantile curves by IRLS, the
//! penalized mean estimator, and the local linear quantile baseline.

mod irls;
mod local;
mod loss;
mod mean;
mod quantile;

pub use irls::{default_alpha, irls_weights, Init, IrlsConfig, WeightMode};
pub use local::fit_local_linear_quantile;
pub use loss::{check_loss, psi};
pub use mean::fit_penalized_mean;
pub use quantile::{fit_penalized_quantile, QuantileFit};

pub(crate) use local::{gaussian_kernel, local_linear};
pub(crate) use loss::{check_tau, rho};
pub(crate) use mean::{mean_with_design, normal_matrix};
pub(crate) use quantile::{check_penalty, fit_with_design};
