//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! with status 1 if any criterion fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qspline::inference::{confidence_band, normal_quantile, BandConfig};
use qspline::selection::{effective_df, SelectionConfig};
use qspline::sim::{
    generate_dataset, normality_study, run_mise_study, ErrorLaw, Estimator, NormalityConfig, SimModel, StudyConfig,
};
use qspline::{
    bernoulli_poly, build_basis, check_loss, fit_penalized_quantile, psi, IrlsConfig, PenaltyOperator, Sample,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn uniform_xs(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
}

fn grid101() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

/// Minimizer interval of `Σ ρ_τ(y_i - c)` over `c` by enumeration of the
/// data values (the loss is convex and piecewise linear with kinks there).
fn quantile_interval(ys: &[f64], tau: f64) -> (f64, f64) {
    let loss = |c: f64| ys.iter().map(|y| check_loss(y - c, tau).unwrap()).sum::<f64>();
    let values: Vec<f64> = ys.iter().map(|&c| loss(c)).collect();
    let best = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * best.abs().max(1.0);
    let minimizers: Vec<f64> = ys.iter().zip(&values).filter(|(_, v)| **v <= best + tol).map(|(y, _)| *y).collect();
    let lo = minimizers.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = minimizers.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut instances = 0;
    while instances < 50 {
        let n = rng.random_range(2..=50usize);
        let k = rng.random_range(1..=5usize);
        let tau = rng.random_range(0.05..0.95);
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        // bins are right-closed, the first one also holds x = 0
        let bin = |x: f64| ((x * k as f64).ceil() as usize).clamp(1, k) - 1;
        let mut members = vec![vec![]; k];
        let y: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.3) { rng.random_range(0..4) as f64 } else { rng.random_range(-3.0..3.0) })
            .collect();
        for (xi, yi) in x.iter().zip(&y) {
            members[bin(*xi)].push(*yi);
        }
        if members.iter().any(|m| m.is_empty()) {
            continue;
        }
        instances += 1;
        let sample = Sample::new(x, y).unwrap();
        let spec = build_basis(0, k).unwrap();
        let fit = fit_penalized_quantile(&sample, tau, &spec, None, 0.0, &IrlsConfig::default()).unwrap();
        for (c, m) in fit.coef.iter().zip(&members) {
            let (lo, hi) = quantile_interval(m, tau);
            worst = worst.max(lo - c).max(c - hi);
        }
    }
    outcome(worst <= 1e-8, format!("50 instances, worst distance outside the minimizer interval {:.2e}", worst.max(0.0)))
}

fn criterion_2() -> Outcome {
    let x = uniform_xs(200);
    let lambdas = SelectionConfig::default().lambda_values;
    let spec = build_basis(3, 10).unwrap();
    let op = PenaltyOperator::new(2, spec.dim()).unwrap();
    let mut worst_by_degree = vec![];
    let mut failing = vec![];
    for q in 0..=3i32 {
        let poly = |x: f64| (0..=q).map(|j| (1.0 + j as f64) * (x - 0.4).powi(j)).sum::<f64>();
        let y: Vec<f64> = x.iter().map(|&v| poly(v)).collect();
        let sample = Sample::new(x.clone(), y).unwrap();
        let mut worst = 0.0f64;
        for &lambda in &lambdas {
            for tau in [0.1, 0.5, 0.9] {
                let fit = fit_penalized_quantile(&sample, tau, &spec, Some(&op), lambda, &IrlsConfig::default()).unwrap();
                let err = grid101()
                    .iter()
                    .map(|&t| (fit.predict(t).unwrap() - poly(t)).abs())
                    .fold(0.0, f64::max);
                if err >= 1e-6 {
                    failing.push(format!("q={q} lambda={lambda:.2e} tau={tau} err={err:.2e}"));
                }
                worst = worst.max(err);
            }
        }
        worst_by_degree.push(format!("q={q}: {worst:.2e}"));
    }
    let mut detail = format!("p=3 K=10 n=200, max grid error {}", worst_by_degree.join(", "));
    if !failing.is_empty() {
        detail += &format!("; {} of {} cases >= 1e-6, first {}", failing.len(), 4 * lambdas.len() * 3, failing[0]);
    }
    outcome(failing.is_empty(), detail)
}

fn criterion_3() -> Outcome {
    let sample = generate_dataset(&SimModel::new(ErrorLaw::Normal, 200, 3), 0).unwrap();
    let spec = build_basis(3, 10).unwrap();
    let mut worst = 0.0f64;
    for m in 1..=3 {
        let op = PenaltyOperator::new(m, spec.dim()).unwrap();
        for lambda in [1e-3, 1.0, 100.0] {
            for tau in [0.1, 0.5, 0.9] {
                let base = fit_penalized_quantile(&sample, tau, &spec, Some(&op), lambda, &IrlsConfig::default()).unwrap();
                for c in [-5.0, 3.7] {
                    let shifted = sample.map_y(|_, y| y + c);
                    let fit = fit_penalized_quantile(&shifted, tau, &spec, Some(&op), lambda, &IrlsConfig::default()).unwrap();
                    let a = base.fitted(&sample).unwrap();
                    let b = fit.fitted(&shifted).unwrap();
                    for (u, v) in a.iter().zip(&b) {
                        worst = worst.max((v - u - c).abs());
                    }
                }
            }
        }
    }
    outcome(worst < 1e-8, format!("m in 1..=3, 3 lambdas, 3 taus, worst |shift error| {worst:.2e}"))
}

/// `∫_0^v {I(u <= s) - I(u <= 0)} ds` in closed form.
fn knight_integral(u: f64, v: f64) -> f64 {
    if v >= 0.0 {
        if u > 0.0 { (v - u).max(0.0) } else { 0.0 }
    } else if u <= 0.0 {
        (u - v).max(0.0)
    } else {
        0.0
    }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let u: f64 = rng.random_range(-10.0..10.0);
        let v: f64 = rng.random_range(-10.0..10.0);
        let tau: f64 = rng.random_range(0.001..0.999);
        let lhs = check_loss(u - v, tau).unwrap() - check_loss(u, tau).unwrap();
        let rhs = -v * psi(u, tau).unwrap() + knight_integral(u, v);
        worst = worst.max((lhs - rhs).abs());
    }
    outcome(worst <= 1e-12, format!("10^4 triples, worst residual {worst:.2e}"))
}

fn criterion_5() -> Outcome {
    let mut cfg = StudyConfig::new(ErrorLaw::Normal, 100, 100, vec![0.5], 2024);
    cfg.estimators = vec![Estimator::PCubic];
    let report = run_mise_study(&cfg).unwrap();
    let cell = report.cell(Estimator::PCubic, 0.5).unwrap();
    outcome(
        cell.failures == 0 && (1.4e-3..=5.8e-3).contains(&cell.mise),
        format!("P-cubic MISE {:.3e} over {} repetitions ({} failed), target [1.4e-3, 5.8e-3]", cell.mise, cell.successes, cell.failures),
    )
}

fn criterion_6() -> Outcome {
    let mut wins = 0;
    let mut pairs = vec![];
    for seed in 1..=5u64 {
        let mut cfg = StudyConfig::new(ErrorLaw::Normal, 1000, 100, vec![0.5], 600 + seed);
        cfg.estimators = vec![Estimator::PCubic, Estimator::RLinear];
        let report = run_mise_study(&cfg).unwrap();
        let p = report.cell(Estimator::PCubic, 0.5).unwrap().mise;
        let r = report.cell(Estimator::RLinear, 0.5).unwrap().mise;
        wins += (p < r) as usize;
        pairs.push(format!("{p:.2e}/{r:.2e}"));
    }
    outcome(wins >= 4, format!("P-cubic < R-linear in {wins} of 5 (P/R: {})", pairs.join(", ")))
}

fn criterion_7() -> Outcome {
    let mut wins = 0;
    let mut pairs = vec![];
    for seed in 1..=10u64 {
        let cfg = NormalityConfig::new(ErrorLaw::Normal, 0.5, vec![100, 1000], 100, 700 + seed);
        let reports = normality_study(&cfg).unwrap();
        let (small, large) = (reports[0].ks, reports[1].ks);
        wins += (large < small) as usize;
        pairs.push(format!("{small:.3}/{large:.3}"));
    }
    outcome(wins >= 8, format!("KS(n=1000) < KS(n=100) in {wins} of 10 (KS 100/1000: {})", pairs.join(", ")))
}

fn criterion_8() -> Outcome {
    let sample = generate_dataset(&SimModel::new(ErrorLaw::Normal, 300, 8), 0).unwrap();
    let spec = build_basis(3, 10).unwrap();
    let op = PenaltyOperator::new(2, spec.dim()).unwrap();
    let fit = fit_penalized_quantile(&sample, 0.5, &spec, Some(&op), 0.1, &IrlsConfig::default()).unwrap();
    let report = confidence_band(&sample, &fit, &grid101(), &BandConfig::default()).unwrap();
    let z = normal_quantile(0.975).unwrap();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for j in 0..report.grid.len() {
        let phi = report.phi_hat[j].unwrap();
        for (lo, hi) in [(report.lower[j], report.upper[j]), (report.lower_uncorrected[j], report.upper_uncorrected[j])] {
            if let (Some(lo), Some(hi)) = (lo, hi) {
                worst = worst.max((0.5 * (hi - lo) - z * phi.sqrt()).abs());
                checked += 1;
            }
        }
    }
    let rounds = (z * 100.0).round() / 100.0 == 1.96;
    outcome(
        worst <= 1e-6 && rounds && checked > 0,
        format!("z = {z:.6} (rounds to 1.96: {rounds}), {checked} half-widths, worst |hw - z sqrt(phi)| {worst:.2e}"),
    )
}

fn criterion_9() -> Outcome {
    let n = 100_000;
    let values: Vec<(f64, f64)> = (0..=n).map(|i| i as f64 / n as f64).map(|x| (x, bernoulli_poly(2, x))).collect();
    let (xmax, vmax) = values.iter().cloned().fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let (xmin, vmin) = values.iter().cloned().fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let sup = values.iter().map(|v| v.1.abs()).fold(0.0, f64::max);
    let ends = (bernoulli_poly(2, 0.0) - 1.0 / 6.0).abs() < 1e-15 && (bernoulli_poly(2, 1.0) - 1.0 / 6.0).abs() < 1e-15;
    let pass = (vmax - 1.0 / 6.0).abs() < 1e-15
        && (xmax == 0.0 || xmax == 1.0)
        && ends
        && (vmin + 1.0 / 12.0).abs() < 1e-15
        && xmin == 0.5
        && sup < 0.2;
    outcome(pass, format!("max {vmax:.6} at x={xmax}, min {vmin:.6} at x={xmin}, sup {sup:.6}"))
}

fn criterion_10() -> Outcome {
    let sample = generate_dataset(&SimModel::new(ErrorLaw::Normal, 200, 10), 0).unwrap();
    let (k, p) = (10, 3);
    let spec = build_basis(p, k).unwrap();
    let design = spec.design(sample.x()).unwrap();
    let mut ok = true;
    let mut parts = vec![];
    for m in 1..=3 {
        let op = PenaltyOperator::new(m, spec.dim()).unwrap();
        for (lambda, target) in [(1e-10, (k + p) as f64), (1e12, m as f64)] {
            let fit = fit_penalized_quantile(&sample, 0.5, &spec, Some(&op), lambda, &IrlsConfig::default()).unwrap();
            let df = effective_df(&fit, &design, Some(&op), lambda).unwrap();
            ok &= (df - target).abs() < 0.01;
            parts.push(format!("m={m} lambda={lambda:e}: {df:.4} (target {target})"));
        }
    }
    outcome(ok, parts.join(", "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("oracle equivalence", criterion_1),
        ("polynomial exactness", criterion_2),
        ("shift equivariance", criterion_3),
        ("Knight's identity", criterion_4),
        ("P-cubic MISE at n=100", criterion_5),
        ("P-cubic beats R-linear at n=1000", criterion_6),
        ("normality improves with n", criterion_7),
        ("band multiplier", criterion_8),
        ("Bernoulli constant", criterion_9),
        ("df limits", criterion_10),
    ];
    let mut failed = vec![];
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let status = if result.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} {name}: {status} [{:.1}s] {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            result.detail
        );
        if !result.pass {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 10 criteria PASS");
    } else {
        println!("acceptance: FAIL on criteria {failed:?}");
        std::process::exit(1);
    }
}
