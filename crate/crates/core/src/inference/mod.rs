//! Plug-in asymptotic inference for penalized spline quantile fits.

mod band;
mod density;
mod normal;

pub use band::{
    approx_bias_estimate, approx_bias_from_derivative, confidence_band, pilot_fit, shrinkage_bias_estimate,
    variance_estimate, BandConfig, InferenceReport, PlugIn, DENSITY_FLOOR,
};
pub use density::{conditional_density, kernel_density, sj_bandwidth, ConditionalDensity};
pub use normal::{ks_distance_to_normal, normal_cdf, normal_pdf, normal_quantile};
