//! Exact recovery of polynomial signals by the spline quantile estimator.

use qspline::selection::SelectionConfig;
use qspline::{build_basis, fit_penalized_quantile, IrlsConfig, PenaltyOperator, Sample};

fn uniform_sample(n: usize, f: impl Fn(f64) -> f64) -> Sample {
    let x: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let y = x.iter().map(|&v| f(v)).collect();
    Sample::new(x, y).unwrap()
}

fn poly(q: i32) -> impl Fn(f64) -> f64 {
    move |x| (0..=q).map(|j| (1.0 + j as f64) * (x - 0.4).powi(j)).sum()
}

fn max_error(fit: &qspline::QuantileFit, f: &impl Fn(f64) -> f64) -> f64 {
    (0..=100)
        .map(|i| i as f64 / 100.0)
        .map(|t| (fit.predict(t).unwrap() - f(t)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn penalty_null_space_is_exact_for_every_lambda() {
    for m in 1..=3 {
        let spec = build_basis(3, 10).unwrap();
        let op = PenaltyOperator::new(m, spec.dim()).unwrap();
        for q in 0..m as i32 {
            let f = poly(q);
            let sample = uniform_sample(200, &f);
            for &lambda in &SelectionConfig::default().lambda_values {
                for tau in [0.1, 0.5, 0.9] {
                    let fit = fit_penalized_quantile(&sample, tau, &spec, Some(&op), lambda, &IrlsConfig::default()).unwrap();
                    let err = max_error(&fit, &f);
                    assert!(err < 1e-6, "m={m} q={q} lambda={lambda} tau={tau}: {err}");
                }
            }
        }
    }
}

#[test]
fn regression_spline_is_exact_up_to_its_degree() {
    for p in 0..=3usize {
        let spec = build_basis(p, 8).unwrap();
        for q in 0..=p as i32 {
            let f = poly(q);
            let sample = uniform_sample(150, &f);
            for tau in [0.1, 0.5, 0.9] {
                let fit = fit_penalized_quantile(&sample, tau, &spec, None, 0.0, &IrlsConfig::default()).unwrap();
                let err = max_error(&fit, &f);
                assert!(err < 1e-6, "p={p} q={q} tau={tau}: {err}");
            }
        }
    }
}

#[test]
fn small_penalties_keep_higher_degrees_exact() {
    // below the exact-penalty threshold the interpolant stays optimal
    let spec = build_basis(3, 10).unwrap();
    let op = PenaltyOperator::new(2, spec.dim()).unwrap();
    for q in 2..=3 {
        let f = poly(q);
        let sample = uniform_sample(200, &f);
        for lambda in [1e-6, 1e-3, 1e-1] {
            for tau in [0.1, 0.5, 0.9] {
                let fit = fit_penalized_quantile(&sample, tau, &spec, Some(&op), lambda, &IrlsConfig::default()).unwrap();
                let err = max_error(&fit, &f);
                assert!(err < 1e-6, "q={q} lambda={lambda} tau={tau}: {err}");
            }
        }
    }
}

#[test]
fn large_penalties_bias_curved_signals() {
    // a noiseless quadratic is not a fixed point once λ P b is outside the
    // subgradient polytope of the loss
    let spec = build_basis(3, 10).unwrap();
    let op = PenaltyOperator::new(2, spec.dim()).unwrap();
    let f = poly(2);
    let sample = uniform_sample(200, &f);
    let fit = fit_penalized_quantile(&sample, 0.1, &spec, Some(&op), 1e3, &IrlsConfig::default()).unwrap();
    let exact: Vec<f64> = sample.x().iter().map(|&x| f(x)).collect();
    let loss = |v: &[f64]| {
        sample.y().iter().zip(v).map(|(y, g)| qspline::check_loss(y - g, 0.1).unwrap()).sum::<f64>()
    };
    // objective of the interpolating coefficients, computed by an unpenalized fit
    let interp = fit_penalized_quantile(&sample, 0.1, &spec, None, 0.0, &IrlsConfig::default()).unwrap();
    let interp_obj = loss(&exact) + op.value(&interp.coef, 1e3).unwrap();
    assert!(fit.objective < interp_obj - 1e-6, "{} vs {interp_obj}", fit.objective);
    assert!(max_error(&fit, &f) > 1e-3);
}
