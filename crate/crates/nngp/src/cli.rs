//! Command-line workflows: fit a model from CSV data, predict on a query
//! grid, or run the benchmark experiments. Outputs are CSV tables and JSON
//! model/summary files suitable for external plotting.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::benchmark::{
    self, ExperimentReport, Histogram, TargetFunction, TrialConfig,
};
use crate::constrained::{
    minimize_constrained, minimize_unconstrained, ConstraintSpec, RestartPolicy, DEFAULT_THETA0,
};
use crate::error::Error;
use crate::gp::{self, TrainingSet};
use crate::kernel::{Hyperparameters, InputPoint};
use crate::stats::norm_ppf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT_ERROR: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Fit,
    Predict,
    Benchmark,
}

/// Flags mirror the experiment defaults: cdf factor -2 (eta = 2.2%),
/// eps = 0.03, 1000 test points, 100 trials, per-example constraint counts.
#[derive(Debug, Parser)]
#[command(name = "nngp", about = "GP regression with non-negativity constraints")]
pub struct RunConfig {
    #[arg(long, value_enum)]
    pub mode: Mode,

    /// Benchmark example id (1, 2, or 3).
    #[arg(long)]
    pub example: Option<usize>,

    /// Training data CSV (header row, d coordinate columns, then one
    /// observation column).
    #[arg(long)]
    pub data: Option<PathBuf>,

    /// Fit with the non-negativity constraint system (default).
    #[arg(long, conflicts_with = "unconstrained")]
    pub constrained: bool,

    /// Fit by plain NLL minimization.
    #[arg(long)]
    pub unconstrained: bool,

    /// Number of constraint points.
    #[arg(long)]
    pub m: Option<usize>,

    #[arg(long = "test-points")]
    pub test_points: Option<usize>,

    #[arg(long)]
    pub trials: Option<usize>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Violation probability; overrides the default CDF factor of -2.
    #[arg(long)]
    pub eta: Option<f64>,

    /// Data-fit tolerance.
    #[arg(long)]
    pub eps: Option<f64>,

    #[arg(long, default_value = "out")]
    pub out: PathBuf,

    /// Model JSON produced by fit mode (predict mode).
    #[arg(long)]
    pub model: Option<PathBuf>,

    /// Query CSV (predict mode; header row, d coordinate columns).
    #[arg(long)]
    pub query: Option<PathBuf>,
}

#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub code: i32,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoFeasibleSolution { .. } => EXIT_INFEASIBLE,
            _ => EXIT_INPUT_ERROR,
        };
        CliError {
            message: e.to_string(),
            code,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            message: e.to_string(),
            code: EXIT_INPUT_ERROR,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError {
            message: e.to_string(),
            code: EXIT_INPUT_ERROR,
        }
    }
}

fn input_error(message: impl Into<String>) -> CliError {
    CliError {
        message: message.into(),
        code: EXIT_INPUT_ERROR,
    }
}

/// Serialized fit outcome. `theta` is stored in log-space.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub theta: Hyperparameters,
    pub training: TrainingSet,
    pub spec: Option<ConstraintSpec>,
    pub constrained: bool,
    pub feasible: bool,
    pub nll: f64,
    pub max_violation: f64,
    pub restarts_used: usize,
}

pub fn run(config: &RunConfig) -> Result<(), CliError> {
    match config.mode {
        Mode::Fit => cmd_fit(config),
        Mode::Predict => cmd_predict(config),
        Mode::Benchmark => cmd_benchmark(config),
    }
}

fn cdf_factor(config: &RunConfig) -> Result<f64, CliError> {
    match config.eta {
        Some(eta) => Ok(norm_ppf(eta)?),
        None => Ok(ConstraintSpec::DEFAULT_CDF_FACTOR),
    }
}

fn load_training_csv(path: &Path) -> Result<TrainingSet, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    let width = reader
        .headers()
        .map_err(|e| input_error(format!("{}: bad header: {e}", path.display())))?
        .len();
    if width < 2 {
        return Err(input_error(format!(
            "{}: need at least one coordinate column and one observation column",
            path.display()
        )));
    }
    let mut points = Vec::new();
    let mut obs = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record
            .map_err(|e| input_error(format!("{}: row {}: {e}", path.display(), row_idx + 2)))?;
        if record.len() != width {
            return Err(input_error(format!(
                "{}: row {}: expected {} columns, found {}",
                path.display(),
                row_idx + 2,
                width,
                record.len()
            )));
        }
        let mut values = Vec::with_capacity(width);
        for (col_idx, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                input_error(format!(
                    "{}: row {}, column {}: not a number: {field:?}",
                    path.display(),
                    row_idx + 2,
                    col_idx + 1
                ))
            })?;
            values.push(v);
        }
        let y = values.pop().unwrap();
        points.push(InputPoint::new(values).map_err(|e| {
            input_error(format!("{}: row {}: {e}", path.display(), row_idx + 2))
        })?);
        obs.push(y);
    }
    if points.is_empty() {
        return Err(input_error(format!("{}: no data rows", path.display())));
    }
    Ok(TrainingSet::new(points, obs)?)
}

fn fit_training_data(config: &RunConfig) -> Result<TrainingSet, CliError> {
    match (&config.data, config.example) {
        (Some(path), _) => load_training_csv(path),
        (None, Some(id)) => {
            let target = TargetFunction::from_example_id(id)?;
            Ok(benchmark::make_training_set(target, config.seed)?)
        }
        (None, None) => Err(input_error("fit mode needs --data or --example")),
    }
}

fn constraint_grid(config: &RunConfig, training: &TrainingSet) -> Result<Vec<InputPoint>, CliError> {
    let (a, b) = match config.example {
        Some(id) => TargetFunction::from_example_id(id)?.domain(),
        None => {
            if training.dim() != 1 {
                return Err(input_error(
                    "constraint grids are generated only for 1-D inputs",
                ));
            }
            let xs: Vec<f64> = training.points.iter().map(|p| p.coords()[0]).collect();
            (
                xs.iter().cloned().fold(f64::INFINITY, f64::min),
                xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            )
        }
    };
    let m = config.m.unwrap_or_else(|| {
        config
            .example
            .and_then(|id| TargetFunction::from_example_id(id).ok())
            .map(|t| t.default_constraint_points())
            .unwrap_or(30)
    });
    Ok(benchmark::equidistant_grid(a, b, m)
        .into_iter()
        .map(InputPoint::scalar)
        .collect())
}

fn write_model(path: &Path, model: &ModelFile) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(model)
        .map_err(|e| input_error(format!("serialization failed: {e}")))?;
    fs::write(path, json)?;
    Ok(())
}

fn cmd_fit(config: &RunConfig) -> Result<(), CliError> {
    let training = fit_training_data(config)?;
    let theta0 = Hyperparameters::from_array(DEFAULT_THETA0)?;
    fs::create_dir_all(&config.out)?;
    let model_path = config.out.join("model.json");

    let eps = config.eps.unwrap_or(ConstraintSpec::DEFAULT_DATA_FIT_EPS);
    let spec = ConstraintSpec::new(constraint_grid(config, &training)?, cdf_factor(config)?, eps)?;

    if config.unconstrained {
        let res = minimize_unconstrained(&training, &theta0, Some(&spec))?;
        write_model(
            &model_path,
            &ModelFile {
                theta: res.theta,
                training,
                spec: Some(spec),
                constrained: false,
                feasible: res.feasible,
                nll: res.nll,
                max_violation: res.max_violation,
                restarts_used: res.restarts_used,
            },
        )?;
        println!("wrote {}", model_path.display());
        return Ok(());
    }

    let policy = RestartPolicy {
        max_restarts: 20,
        seed: config.seed,
    };
    match minimize_constrained(&training, &spec, &theta0, &policy) {
        Ok(res) => {
            write_model(
                &model_path,
                &ModelFile {
                    theta: res.theta,
                    training,
                    spec: Some(spec),
                    constrained: true,
                    feasible: true,
                    nll: res.nll,
                    max_violation: res.max_violation,
                    restarts_used: res.restarts_used,
                },
            )?;
            println!("wrote {}", model_path.display());
            Ok(())
        }
        Err(Error::NoFeasibleSolution {
            restarts,
            max_violation,
            best_theta,
            best_nll,
        }) => {
            // Still write the best-found point, flagged infeasible.
            write_model(
                &model_path,
                &ModelFile {
                    theta: best_theta,
                    training,
                    spec: Some(spec),
                    constrained: true,
                    feasible: false,
                    nll: best_nll,
                    max_violation,
                    restarts_used: restarts,
                },
            )?;
            Err(CliError {
                message: format!(
                    "no feasible solution after {restarts} restarts (best violation {max_violation:.3e}); wrote {}",
                    model_path.display()
                ),
                code: EXIT_INFEASIBLE,
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn load_query_csv(path: &Path, dim: usize) -> Result<Vec<InputPoint>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record
            .map_err(|e| input_error(format!("{}: row {}: {e}", path.display(), row_idx + 2)))?;
        if record.len() != dim {
            return Err(input_error(format!(
                "{}: row {}: model expects {} coordinates, found {}",
                path.display(),
                row_idx + 2,
                dim,
                record.len()
            )));
        }
        let coords: Vec<f64> = record
            .iter()
            .enumerate()
            .map(|(col_idx, f)| {
                f.trim().parse().map_err(|_| {
                    input_error(format!(
                        "{}: row {}, column {}: not a number: {f:?}",
                        path.display(),
                        row_idx + 2,
                        col_idx + 1
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        points.push(InputPoint::new(coords)?);
    }
    Ok(points)
}

fn cmd_predict(config: &RunConfig) -> Result<(), CliError> {
    let model_path = config
        .model
        .as_ref()
        .ok_or_else(|| input_error("predict mode needs --model"))?;
    let query_path = config
        .query
        .as_ref()
        .ok_or_else(|| input_error("predict mode needs --query"))?;
    let model: ModelFile = serde_json::from_str(&fs::read_to_string(model_path)?)
        .map_err(|e| input_error(format!("{}: {e}", model_path.display())))?;
    let queries = load_query_csv(query_path, model.training.dim())?;

    let fitted = gp::fit(&model.training, &model.theta)?;
    fs::create_dir_all(&config.out)?;
    let out_path = config.out.join("predictions.csv");
    let mut w = csv::Writer::from_path(&out_path)?;
    let mut header: Vec<String> = (0..model.training.dim()).map(|i| format!("x{i}")).collect();
    header.extend(
        ["mean", "std", "mean_minus_2std", "mean_plus_2std"]
            .iter()
            .map(|s| s.to_string()),
    );
    w.write_record(&header)?;
    for q in &queries {
        let p = gp::predict(&fitted, q)?;
        let std = p.std();
        let mut row: Vec<String> = q.coords().iter().map(|c| format!("{c}")).collect();
        row.push(format!("{}", p.mean));
        row.push(format!("{std}"));
        row.push(format!("{}", p.mean - 2.0 * std));
        row.push(format!("{}", p.mean + 2.0 * std));
        w.write_record(&row)?;
    }
    w.flush()?;
    println!("wrote {}", out_path.display());
    Ok(())
}

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn write_trials_csv(path: &Path, report: &ExperimentReport) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "seed",
        "rel_error_constrained",
        "rel_error_unconstrained",
        "violation_pct_constrained",
        "violation_pct_unconstrained",
        "feasible",
        "restarts_used",
        "nll_constrained",
        "nll_unconstrained",
    ])?;
    for t in &report.trials {
        w.write_record([
            format!("{}", t.seed),
            opt_field(t.rel_error_constrained),
            format!("{}", t.rel_error_unconstrained),
            opt_field(t.violation_pct_constrained),
            format!("{}", t.violation_pct_unconstrained),
            format!("{}", t.feasible),
            format!("{}", t.restarts_used),
            opt_field(t.nll_constrained),
            format!("{}", t.nll_unconstrained),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_histogram_csv(path: &Path, hist: &Histogram) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bin_left", "bin_right", "mass", "density"])?;
    for (i, edge_pair) in hist.edges.windows(2).enumerate() {
        w.write_record([
            format!("{}", edge_pair[0]),
            format!("{}", edge_pair[1]),
            format!("{}", hist.mass[i]),
            format!("{}", hist.density[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_benchmark(config: &RunConfig) -> Result<(), CliError> {
    let example = config
        .example
        .ok_or_else(|| input_error("benchmark mode needs --example {1,2,3}"))?;
    let target = TargetFunction::from_example_id(example)?;

    let mut trial = TrialConfig::for_target(target, config.seed);
    if let Some(m) = config.m {
        trial.n_constraint_points = m;
    }
    if let Some(nt) = config.test_points {
        trial.n_test_points = nt;
    }
    trial.cdf_factor = cdf_factor(config)?;
    if let Some(eps) = config.eps {
        trial.data_fit_eps = eps;
    }
    let n_trials = config.trials.unwrap_or(100);

    let report = benchmark::run_experiment(&trial, n_trials)?;

    fs::create_dir_all(&config.out)?;
    write_trials_csv(&config.out.join("trials.csv"), &report)?;
    write_histogram_csv(
        &config.out.join("hist_error_constrained.csv"),
        &report.error_hist_constrained,
    )?;
    write_histogram_csv(
        &config.out.join("hist_error_unconstrained.csv"),
        &report.error_hist_unconstrained,
    )?;
    write_histogram_csv(
        &config.out.join("hist_violation_constrained.csv"),
        &report.violation_hist_constrained,
    )?;
    write_histogram_csv(
        &config.out.join("hist_violation_unconstrained.csv"),
        &report.violation_hist_unconstrained,
    )?;
    let summary = serde_json::to_string_pretty(&report.summary)
        .map_err(|e| input_error(format!("serialization failed: {e}")))?;
    fs::write(config.out.join("summary.json"), summary)?;
    println!(
        "wrote {} trial rows and histograms to {}",
        report.trials.len(),
        config.out.display()
    );
    Ok(())
}
