//! Command-line front end: `fit`, `band`, `select` and `simulate`.
//!
//! Exit statuses: 0 on success, 2 for usage and data errors, 3 for numerical
//! failures. All outputs are written to temporary files and renamed into
//! place only after every computation has succeeded.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::basis::BasisSpec;
use crate::data::Sample;
use crate::error::Error;
use crate::inference::{confidence_band, BandConfig, InferenceReport};
use crate::penalty::PenaltyOperator;
use crate::selection::{select_model, SelectionConfig, SelectionGrid};
use crate::sim::{normality_study, run_mise_study, ErrorLaw, Estimator, NormalityConfig, SelectionMode, StudyConfig};
use crate::solver::{fit_penalized_quantile, IrlsConfig, QuantileFit};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "qspline", version, about = "Penalized B-spline quantile regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit quantile curves and write them on a 101-point grid.
    Fit(FitArgs),
    /// Fit one quantile curve and write bias-corrected and uncorrected bands.
    Band(BandArgs),
    /// Write the GACV score table of a (K, lambda) sweep.
    Select(ModelArgs),
    /// Run the Monte Carlo study.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Quantile levels, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub tau: Vec<f64>,
    /// Spline degree p.
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    /// Difference order m of the penalty (0 for an unpenalized fit).
    #[arg(long, default_value_t = 2)]
    pub penalty_order: usize,
    /// Interior knot counts K, comma separated; more than one is chosen by
    /// GACV. Defaults to those of 5,10,20,40 not exceeding sqrt(n).
    #[arg(long, value_delimiter = ',')]
    pub knots: Option<Vec<usize>>,
    /// Smoothing parameter, or "gacv" for the default log-spaced sweep.
    #[arg(long, default_value = "gacv")]
    pub lambda: String,
    /// Rescale x onto [0, 1] by min-max instead of requiring it.
    #[arg(long)]
    pub rescale: bool,
    /// Manifest path (default: OUTPUT with ".json" appended).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Also render the output as an SVG line chart.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Input CSV with columns x, y (header optional).
    pub input: PathBuf,
    /// Output CSV.
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BandArgs {
    /// Nominal non-coverage; the band uses the (1 - alpha/2) normal quantile.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Multiplier on the fitted lambda for the bias pilot fit.
    #[arg(long, default_value_t = 1.0)]
    pub pilot_lambda_scale: f64,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LawArg {
    Normal,
    Exponential,
    Cauchy,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SelectionArg {
    PerRep,
    PerCell,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub law: LawArg,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "100")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub tau: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Estimators, comma separated: p-cubic, r-linear, l-linear.
    #[arg(long, value_delimiter = ',', default_value = "p-cubic,r-linear,l-linear")]
    pub estimators: Vec<String>,
    /// Tune once per cell instead of on every repetition.
    #[arg(long, value_enum, default_value = "per-rep")]
    pub selection: SelectionArg,
    /// Also run the normality study of the studentized P-cubic error.
    #[arg(long)]
    pub normality: bool,
    /// Evaluation point of the normality study.
    #[arg(long, default_value_t = 0.5)]
    pub x: f64,
    /// Directory receiving the reports.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// A failure with its exit status.
#[derive(Debug)]
pub struct CliError {
    pub status: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            status: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Singular(_) | Error::Unevaluable(_) => EXIT_NUMERIC,
            _ => EXIT_USAGE,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name), runs the command and returns
/// the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Band(a) => cmd_band(&a),
        Command::Select(a) => cmd_select(&a),
        Command::Simulate(a) => cmd_simulate(&a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.status
        }
    }
}

/// Reads `x, y` pairs. A first row that does not parse as numbers is taken as
/// a header; a header naming `x` and `y` selects those columns.
pub fn read_sample(path: &Path) -> CliResult<Sample> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let (mut x, mut y) = (vec![], vec![]);
    let mut cols = (0usize, 1usize);
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parse = |c: usize| record.get(c).and_then(|f| f.parse::<f64>().ok());
        if idx == 0 && (parse(0).is_none() || parse(1).is_none()) {
            let names: Vec<String> = record.iter().map(|f| f.to_ascii_lowercase()).collect();
            if let (Some(ix), Some(iy)) = (
                names.iter().position(|n| n == "x"),
                names.iter().position(|n| n == "y"),
            ) {
                cols = (ix, iy);
            }
            continue;
        }
        match (parse(cols.0), parse(cols.1)) {
            (Some(a), Some(b)) if a.is_finite() && b.is_finite() => {
                x.push(a);
                y.push(b);
            }
            _ => {
                return Err(CliError::usage(format!(
                    "{}:{line}: expected two numeric fields, found {:?}",
                    path.display(),
                    record.iter().collect::<Vec<_>>()
                )))
            }
        }
    }
    if x.is_empty() {
        return Err(CliError::usage(format!("{}: no data rows", path.display())));
    }
    Ok(Sample::new(x, y)?)
}

/// Writes `bytes` to a temporary sibling of `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| CliError::usage(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let io = |e: std::io::Error| CliError::usage(format!("{}: {e}", path.display()));
    std::fs::write(&tmp, bytes).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        io(e)
    })
}

fn write_all(files: &[(PathBuf, Vec<u8>)]) -> CliResult<()> {
    for (p, b) in files {
        write_atomic(p, b)?;
    }
    Ok(())
}

fn manifest_path(args: &ModelArgs) -> PathBuf {
    args.manifest.clone().unwrap_or_else(|| {
        let mut s = args.output.clone().into_os_string();
        s.push(".json");
        PathBuf::from(s)
    })
}

/// Data on `[0, 1]` plus the map back to original `x` units.
struct Prepared {
    sample: Sample,
    range: Option<(f64, f64)>,
}

impl Prepared {
    fn load(args: &ModelArgs) -> CliResult<Self> {
        let raw = read_sample(&args.input)?;
        if args.rescale {
            let (sample, range) = raw.rescaled()?;
            Ok(Self {
                sample,
                range: Some(range),
            })
        } else {
            raw.check_unit_interval()
                .map_err(|e| CliError::usage(format!("{e}; pass --rescale to map x onto [0, 1]")))?;
            Ok(Self {
                sample: raw,
                range: None,
            })
        }
    }

    fn original_x(&self, t: f64) -> f64 {
        match self.range {
            Some((lo, hi)) => lo + t * (hi - lo),
            None => t,
        }
    }
}

fn output_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

fn validate_model(args: &ModelArgs) -> CliResult<SelectionConfig> {
    if args.tau.is_empty() || args.tau.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(CliError::usage("every tau must lie in (0, 1)"));
    }
    if let Some(k) = &args.knots {
        if k.is_empty() || k.contains(&0) {
            return Err(CliError::usage("knot counts must be positive"));
        }
    }
    if args.penalty_order > args.degree + 1 {
        return Err(CliError::usage(format!(
            "penalty order {} exceeds degree + 1 = {}",
            args.penalty_order,
            args.degree + 1
        )));
    }
    let lambda_values = if args.lambda.eq_ignore_ascii_case("gacv") {
        if args.penalty_order == 0 {
            vec![0.0]
        } else {
            SelectionConfig::default().lambda_values
        }
    } else {
        let l: f64 = args
            .lambda
            .parse()
            .map_err(|_| CliError::usage(format!("--lambda expects a number or 'gacv', got '{}'", args.lambda)))?;
        if !(l >= 0.0 && l.is_finite()) || (args.penalty_order == 0 && l != 0.0) {
            return Err(CliError::usage(format!("invalid lambda {l} for penalty order {}", args.penalty_order)));
        }
        vec![l]
    };
    Ok(SelectionConfig {
        degree: args.degree,
        penalty_order: args.penalty_order,
        k_values: args.knots.clone().unwrap_or_else(|| SelectionConfig::default().k_values),
        lambda_values,
    })
}

/// The sweep for a loaded sample: the default knot grid is capped at `√n`.
fn model_grid(args: &ModelArgs, n: usize) -> CliResult<SelectionConfig> {
    let grid = validate_model(args)?;
    Ok(if args.knots.is_none() { grid.with_knot_cap(n) } else { grid })
}

/// The fit for one τ and, when a sweep ran, its score table.
fn fit_one(sample: &Sample, tau: f64, grid: &SelectionConfig) -> CliResult<(QuantileFit, Option<SelectionGrid>)> {
    let irls = IrlsConfig::default();
    if grid.k_values.len() == 1 && grid.lambda_values.len() == 1 {
        let spec = BasisSpec::new(grid.degree, grid.k_values[0])?;
        let penalty = match grid.penalty_order {
            0 => None,
            m => Some(PenaltyOperator::new(m, spec.dim())?),
        };
        let fit = fit_penalized_quantile(sample, tau, &spec, penalty.as_ref(), grid.lambda_values[0], &irls)?;
        Ok((fit, None))
    } else {
        let sel = select_model(sample, tau, grid, &irls)?;
        Ok((sel.best_fit.clone(), Some(sel)))
    }
}

fn fit_summary(fit: &QuantileFit, sel: Option<&SelectionGrid>) -> serde_json::Value {
    json!({
        "tau": fit.tau,
        "degree": fit.spec.degree(),
        "knots": fit.spec.interior_count(),
        "penalty_order": fit.penalty_order,
        "lambda": fit.lambda,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "objective": fit.objective,
        "alpha": fit.alpha,
        "gacv": sel.map(|s| s.best_score),
        "excluded_cells": sel.map_or(0, |s| s.failures.len()),
        "coefficients": fit.coef,
    })
}

fn base_manifest(command: &str, args: &ModelArgs, prep: &Prepared, grid: &SelectionConfig) -> serde_json::Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "input": args.input.display().to_string(),
        "output": args.output.display().to_string(),
        "n": prep.sample.len(),
        "tau": args.tau,
        "degree": args.degree,
        "penalty_order": args.penalty_order,
        "knots": grid.k_values,
        "lambda": args.lambda,
        "rescale": prep.range.map(|(lo, hi)| json!({"min": lo, "max": hi})),
    })
}

fn to_json_bytes(v: &impl Serialize) -> CliResult<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v).map_err(|e| CliError::usage(e.to_string()))?;
    b.push(b'\n');
    Ok(b)
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::usage(format!("cannot format CSV: {e}"))
}

pub fn cmd_fit(args: &FitArgs) -> CliResult<()> {
    let a = &args.model;
    validate_model(a)?;
    let prep = Prepared::load(a)?;
    let grid = model_grid(a, prep.sample.len())?;
    let mut fits = vec![];
    for &tau in &a.tau {
        fits.push(fit_one(&prep.sample, tau, &grid)?);
    }
    let t_grid = output_grid();
    let mut w = csv::Writer::from_writer(vec![]);
    let mut header = vec!["x".to_string()];
    header.extend(a.tau.iter().map(|t| format!("eta_tau{t}")));
    w.write_record(&header).map_err(csv_error)?;
    let mut curves = vec![];
    for (fit, _) in &fits {
        curves.push(t_grid.iter().map(|&t| fit.predict(t)).collect::<crate::Result<Vec<f64>>>()?);
    }
    for (j, &t) in t_grid.iter().enumerate() {
        let mut row = vec![prep.original_x(t).to_string()];
        row.extend(curves.iter().map(|c| c[j].to_string()));
        w.write_record(&row).map_err(csv_error)?;
    }
    let csv_bytes = w.into_inner().map_err(|e| CliError::usage(e.to_string()))?;
    let mut manifest = base_manifest("fit", a, &prep, &grid);
    manifest["fits"] = fits.iter().map(|(f, s)| fit_summary(f, s.as_ref())).collect();
    let mut files = vec![(a.output.clone(), csv_bytes), (manifest_path(a), to_json_bytes(&manifest)?)];
    if let Some(svg) = &a.svg {
        let xs: Vec<f64> = t_grid.iter().map(|&t| prep.original_x(t)).collect();
        let series: Vec<Series> = curves
            .iter()
            .zip(&a.tau)
            .map(|(c, t)| Series::new(format!("tau = {t}"), c.iter().map(|v| Some(*v)).collect(), false))
            .collect();
        files.push((svg.clone(), render_svg(&xs, &series, Some(&prep)).into_bytes()));
    }
    write_all(&files)
}

pub fn cmd_band(args: &BandArgs) -> CliResult<()> {
    let a = &args.model;
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::usage(format!("--alpha {} must lie in (0, 1)", args.alpha)));
    }
    if a.tau.len() != 1 {
        return Err(CliError::usage("band takes exactly one tau"));
    }
    if !(args.pilot_lambda_scale >= 0.0 && args.pilot_lambda_scale.is_finite()) {
        return Err(CliError::usage("--pilot-lambda-scale must be nonnegative"));
    }
    validate_model(a)?;
    let prep = Prepared::load(a)?;
    let grid = model_grid(a, prep.sample.len())?;
    let (fit, sel) = fit_one(&prep.sample, a.tau[0], &grid)?;
    let cfg = BandConfig {
        alpha_level: args.alpha,
        pilot_lambda_scale: args.pilot_lambda_scale,
        irls: IrlsConfig::default(),
    };
    let mut report = confidence_band(&prep.sample, &fit, &output_grid(), &cfg)?;
    let t_grid = std::mem::take(&mut report.grid);
    report.grid = t_grid.iter().map(|&t| prep.original_x(t)).collect();
    let mut csv_bytes = vec![];
    report.write_csv(&mut csv_bytes).map_err(csv_error)?;
    let gaps = report.phi_hat.iter().filter(|v| v.is_none()).count()
        + report.b_a_hat.iter().filter(|v| v.is_none()).count();
    let mut manifest = base_manifest("band", a, &prep, &grid);
    manifest["alpha"] = json!(args.alpha);
    manifest["z"] = json!(report.z);
    manifest["pilot_lambda_scale"] = json!(args.pilot_lambda_scale);
    manifest["fits"] = json!([fit_summary(&fit, sel.as_ref())]);
    manifest["gaps"] = json!(gaps);
    let mut files = vec![(a.output.clone(), csv_bytes), (manifest_path(a), to_json_bytes(&manifest)?)];
    if let Some(svg) = &a.svg {
        files.push((svg.clone(), band_svg(&report, &prep).into_bytes()));
    }
    write_all(&files)
}

pub fn cmd_select(args: &ModelArgs) -> CliResult<()> {
    validate_model(args)?;
    let prep = Prepared::load(args)?;
    let grid = model_grid(args, prep.sample.len())?;
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(["tau", "K", "lambda", "gacv", "selected"]).map_err(csv_error)?;
    let mut summaries = vec![];
    for &tau in &args.tau {
        let sel = select_model(&prep.sample, tau, &grid, &IrlsConfig::default())?;
        for (a, k) in sel.k_values.iter().enumerate() {
            for (b, l) in sel.lambda_values.iter().enumerate() {
                let chosen = (*k, *l) == sel.best;
                w.write_record([
                    tau.to_string(),
                    k.to_string(),
                    l.to_string(),
                    sel.scores[a][b].map_or(String::new(), |s| s.to_string()),
                    (chosen as u8).to_string(),
                ])
                .map_err(csv_error)?;
            }
        }
        let mut s = fit_summary(&sel.best_fit, Some(&sel));
        s["failures"] = json!(sel.failures);
        summaries.push(s);
    }
    let csv_bytes = w.into_inner().map_err(|e| CliError::usage(e.to_string()))?;
    let mut manifest = base_manifest("select", args, &prep, &grid);
    manifest["lambda_values"] = json!(grid.lambda_values);
    manifest["fits"] = json!(summaries);
    write_all(&[(args.output.clone(), csv_bytes), (manifest_path(args), to_json_bytes(&manifest)?)])
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    if args.reps == 0 {
        return Err(CliError::usage("--reps must be positive"));
    }
    if args.n.is_empty() || args.n.contains(&0) {
        return Err(CliError::usage("--n must list positive sample sizes"));
    }
    if args.tau.is_empty() || args.tau.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(CliError::usage("every tau must lie in (0, 1)"));
    }
    let law = match args.law {
        LawArg::Normal => ErrorLaw::Normal,
        LawArg::Exponential => ErrorLaw::Exponential,
        LawArg::Cauchy => ErrorLaw::Cauchy,
    };
    let estimators = args
        .estimators
        .iter()
        .map(|s| s.parse::<Estimator>())
        .collect::<crate::Result<Vec<_>>>()?;
    let mode = match args.selection {
        SelectionArg::PerRep => SelectionMode::PerRepetition,
        SelectionArg::PerCell => SelectionMode::PerCell,
    };
    let mut table = csv::Writer::from_writer(vec![]);
    table
        .write_record(["estimator", "law", "n", "tau", "reps", "successes", "failures", "mise"])
        .map_err(csv_error)?;
    let mut files = vec![];
    let mut studies = vec![];
    for &n in &args.n {
        let mut cfg = StudyConfig::new(law, n, args.reps, args.tau.clone(), args.seed);
        cfg.estimators = estimators.clone();
        cfg.selection_mode = mode;
        let report = run_mise_study(&cfg)?;
        for c in &report.cells {
            table
                .write_record([
                    c.estimator.label().to_string(),
                    format!("{law:?}").to_lowercase(),
                    n.to_string(),
                    c.tau.to_string(),
                    args.reps.to_string(),
                    c.successes.to_string(),
                    c.failures.to_string(),
                    if c.successes > 0 { c.mise.to_string() } else { String::new() },
                ])
                .map_err(csv_error)?;
            println!(
                "{:<9} n={n:<6} tau={:<5} MISE={:.6e} failures={}",
                c.estimator.label(),
                c.tau,
                c.mise,
                c.failures
            );
        }
        let mut mse = vec![];
        report.write_mse_csv(&mut mse).map_err(csv_error)?;
        files.push((args.out_dir.join(format!("mse_n{n}.csv")), mse));
        studies.push(json!({
            "n": n,
            "cells": report.cells.iter().map(|c| json!({
                "estimator": c.estimator.label(),
                "tau": c.tau,
                "mise": c.mise,
                "successes": c.successes,
                "failures": c.failures,
                "first_failure": c.first_failure,
                "tunings": c.tunings,
            })).collect::<Vec<_>>(),
        }));
    }
    let table = table.into_inner().map_err(|e| CliError::usage(e.to_string()))?;
    files.push((args.out_dir.join("mise.csv"), table));
    let mut normality = vec![];
    if args.normality {
        let mut summary = csv::Writer::from_writer(vec![]);
        summary
            .write_record(["tau", "n", "x", "reps", "excluded", "kde_bandwidth", "ks"])
            .map_err(csv_error)?;
        for &tau in &args.tau {
            let mut cfg = NormalityConfig::new(law, tau, args.n.clone(), args.reps, args.seed);
            cfg.x = args.x;
            cfg.selection_mode = mode;
            for r in normality_study(&cfg)? {
                summary
                    .write_record([
                        tau.to_string(),
                        r.n.to_string(),
                        r.x.to_string(),
                        args.reps.to_string(),
                        r.excluded.to_string(),
                        r.kde_bandwidth.map_or(String::new(), |h| h.to_string()),
                        r.ks.to_string(),
                    ])
                    .map_err(csv_error)?;
                let mut dens = vec![];
                r.write_density_csv(&mut dens).map_err(csv_error)?;
                files.push((args.out_dir.join(format!("u_density_tau{tau}_n{}.csv", r.n)), dens));
                println!("normality tau={tau} n={} KS={:.4} excluded={}", r.n, r.ks, r.excluded);
                normality.push(json!({
                    "tau": tau,
                    "n": r.n,
                    "ks": r.ks,
                    "excluded": r.excluded,
                    "first_failure": r.first_failure,
                    "kde_bandwidth": r.kde_bandwidth,
                    "u": r.u,
                }));
            }
        }
        files.push((
            args.out_dir.join("normality.csv"),
            summary.into_inner().map_err(|e| CliError::usage(e.to_string()))?,
        ));
    }
    let default_cfg = StudyConfig::new(law, 0, args.reps, args.tau.clone(), args.seed);
    let manifest = json!({
        "command": "simulate",
        "version": env!("CARGO_PKG_VERSION"),
        "law": format!("{law:?}").to_lowercase(),
        "n": args.n,
        "reps": args.reps,
        "tau": args.tau,
        "seed": args.seed,
        "estimators": estimators.iter().map(|e| e.label()).collect::<Vec<_>>(),
        "selection": format!("{mode:?}"),
        "normality_x": args.normality.then_some(args.x),
        "p_cubic_grid": default_cfg.p_grid,
        "knot_cap": "K <= sqrt(n)",
        "r_linear_knots": default_cfg.r_knots,
        "l_linear_bandwidths": default_cfg.l_bandwidths,
        "l_linear_gacv_points": default_cfg.l_gacv_points,
        "studies": studies,
        "normality": normality,
    });
    files.push((args.out_dir.join("manifest.json"), to_json_bytes(&manifest)?));
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::usage(format!("{}: {e}", args.out_dir.display())))?;
    write_all(&files)
}

struct Series {
    label: String,
    values: Vec<Option<f64>>,
    dashed: bool,
}

impl Series {
    fn new(label: String, values: Vec<Option<f64>>, dashed: bool) -> Self {
        Self { label, values, dashed }
    }
}

fn band_svg(report: &InferenceReport, prep: &Prepared) -> String {
    let series = vec![
        Series::new("estimate".into(), report.eta_hat.iter().map(|v| Some(*v)).collect(), false),
        Series::new("corrected band".into(), report.lower.clone(), false),
        Series::new(String::new(), report.upper.clone(), false),
        Series::new("uncorrected band".into(), report.lower_uncorrected.clone(), true),
        Series::new(String::new(), report.upper_uncorrected.clone(), true),
    ];
    render_svg(&report.grid, &series, Some(prep))
}

/// A minimal line chart; gaps in a series break its line.
fn render_svg(xs: &[f64], series: &[Series], prep: Option<&Prepared>) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 40.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#d62728", "#2ca02c", "#2ca02c", "#9467bd"];
    let values = series.iter().flat_map(|s| s.values.iter().flatten());
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if let Some(p) = prep {
        for y in p.sample.y() {
            lo = lo.min(*y);
            hi = hi.max(*y);
        }
    }
    if !(hi > lo) {
        hi = lo + 1.0;
    }
    let (x0, x1) = (xs.first().copied().unwrap_or(0.0), xs.last().copied().unwrap_or(1.0));
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0).max(f64::MIN_POSITIVE) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - lo) / (hi - lo) * (H - 2.0 * PAD);
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r##"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="#888"/>"##,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    if let Some(p) = prep {
        for (x, y) in p.sample.x().iter().zip(p.sample.y()) {
            let _ = writeln!(
                svg,
                r##"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="#999"/>"##,
                sx(p.original_x(*x)),
                sy(*y)
            );
        }
    }
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let dash = if s.dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let mut run = String::new();
        let flush = |run: &mut String, svg: &mut String| {
            if !run.is_empty() {
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
                    run.trim_end()
                );
                run.clear();
            }
        };
        for (x, v) in xs.iter().zip(&s.values) {
            match v {
                Some(v) => {
                    let _ = write!(run, "{:.2},{:.2} ", sx(*x), sy(*v));
                }
                None => flush(&mut run, &mut svg),
            }
        }
        flush(&mut run, &mut svg);
        if !s.label.is_empty() {
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
                PAD + 5.0,
                PAD + 14.0 * (k as f64 + 1.0),
                s.label
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}
