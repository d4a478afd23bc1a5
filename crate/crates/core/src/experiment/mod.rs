//! Experiment runner: configuration, run directories, reports and error grids.
//!
//! A run directory holds `config.json` (resolved), `dataset.csv`,
//! `trace.csv`, `checkpoint.json`, `params.csv`, `metrics.json`,
//! `timing.json` and one `error_<field>.csv` grid per field (per time slice in
//! 2D).

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

pub use config::{
    parse_config, preset, suggest, Case, CollocationConfig, DataConfig, ExperimentConfig,
    ModeSelection, TrainSettings, PRESETS,
};

use crate::analytic::{
    generate_dataset, l2_relative_error, linspace, AnalyticCase, AnalyticError, Dataset, GridSpec,
};
use crate::physics::{Dimension, MaterialParams};
use crate::trainer::{
    predict, sub_seed, train_observed, Checkpoint, Mode, TraceRecord, TrainError, Trained,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("{dir}: missing artifacts {missing:?}")]
    Incomplete { dir: PathBuf, missing: Vec<String> },
    #[error("unknown field `{name}`; available: {available}")]
    UnknownField { name: String, available: String },
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const REQUIRED_ARTIFACTS: [&str; 6] = [
    "config.json",
    "trace.csv",
    "checkpoint.json",
    "params.csv",
    "metrics.json",
    "dataset.csv",
];

/// One row of the parameter table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRow {
    pub name: String,
    pub estimate: f64,
    pub truth: f64,
    /// `100 |estimate - truth| / |truth|`.
    pub rel_error_pct: f64,
}

/// Deterministic summary of a run (no timing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub case: Case,
    pub mode: Mode,
    pub seed: u64,
    pub iterations: usize,
    pub lambda: MaterialParams,
    pub params: Vec<ParamRow>,
    /// `(field, l2 relative error)` on the test grid.
    pub field_errors: Vec<(String, f64)>,
    pub final_loss: Option<[f64; 4]>,
    pub loss_i_peak: f64,
    pub loss_i_final: f64,
    pub empty_split_iterations: usize,
}

/// What [`run`] produced for one method.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub metrics: Metrics,
    pub seconds: f64,
}

fn file_err(path: &Path, e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), ExperimentError> {
    fs::write(path, contents).map_err(|e| file_err(path, e))
}

fn read(path: &Path) -> Result<String, ExperimentError> {
    fs::read_to_string(path).map_err(|e| file_err(path, e))
}

pub fn analytic_case(case: Case) -> AnalyticCase {
    AnalyticCase::for_dimension(case.dim())
}

/// Ground-truth description written next to the resolved configuration.
pub fn analytic_notes(case: Case) -> serde_json::Value {
    match analytic_case(case) {
        AnalyticCase::OneD(c) => json!({
            "true_lambda": c.params,
            "frequency": c.frequency,
            "wavenumbers": [c.wavenumber1, c.wavenumber2],
            "amplitudes": {"incident": c.incident, "reflected": c.reflected, "transmitted": c.transmitted},
            "resolutions": [
                "reflected wave uses phase 0.1t + 0.1x - 1 (leftward travelling); with -0.1x the field violates the PDE and continuity at x = 10"
            ],
        }),
        AnalyticCase::TwoD(c) => json!({
            "true_lambda": c.params,
            "kx": [c.kx1, c.kx2],
            "ky": c.ky,
            "omega": c.omega,
            "resolutions": [
                "omega^2 = (kx^2 + ky^2) / (mu eps), giving omega = 2 in both media; omega = (kx^2 + ky^2) / (mu eps) leaves a nonzero residual"
            ],
        }),
    }
}

/// Loads the training measurements described by `config`.
pub fn load_dataset(config: &ExperimentConfig) -> Result<Dataset, ExperimentError> {
    let case = analytic_case(config.case);
    match &config.data.path {
        Some(p) => {
            let ds = Dataset::load(p).map_err(|e| file_err(p, e))?;
            if ds.dim != config.case.dim() {
                return Err(file_err(p, "dataset dimension does not match the case"));
            }
            Ok(ds)
        }
        None => Ok(generate_dataset(
            &case,
            config.data.n,
            sub_seed(config.seed, 0),
            config.data.noise_sd,
        )?),
    }
}

pub fn parameter_table(lambda: &MaterialParams, truth: &MaterialParams) -> Vec<ParamRow> {
    MaterialParams::NAMES
        .iter()
        .zip(lambda.to_array().iter().zip(truth.to_array()))
        .map(|(n, (&e, t))| ParamRow {
            name: n.to_string(),
            estimate: e,
            truth: t,
            rel_error_pct: 100.0
                * l2_relative_error(&[t], &[e]).expect("true parameters are nonzero"),
        })
        .collect()
}

/// l2 relative error of each field on `grid`.
pub fn field_errors(
    model: &Trained,
    case: &AnalyticCase,
    grid: &GridSpec,
) -> Result<Vec<(String, f64)>, ExperimentError> {
    let geometry = case.geometry();
    let points = grid.points(&geometry);
    let pred = predict(model, &points, &geometry)?;
    let truth = points
        .iter()
        .map(|p| case.eval(p))
        .collect::<Result<Vec<_>, _>>()?;
    let names = geometry.dim.field_names();
    names
        .iter()
        .enumerate()
        .map(|(j, n)| {
            let u: Vec<f64> = truth.iter().map(|v| v[j]).collect();
            let uh: Vec<f64> = pred.iter().map(|v| v[j]).collect();
            Ok((n.to_string(), l2_relative_error(&u, &uh)?))
        })
        .collect()
}

fn params_csv(rows: &[ParamRow]) -> String {
    let mut s = String::from("name,estimate,true,rel_error_pct\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.name, r.estimate, r.truth, r.rel_error_pct
        );
    }
    s
}

/// Parses `params.csv`.
pub fn read_params(path: &Path) -> Result<Vec<ParamRow>, ExperimentError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| file_err(path, e))?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| file_err(path, e))?;
        let num = |i: usize| -> Result<f64, ExperimentError> {
            rec.get(i)
                .unwrap_or_default()
                .parse()
                .map_err(|e| file_err(path, e))
        };
        rows.push(ParamRow {
            name: rec.get(0).unwrap_or_default().to_string(),
            estimate: num(1)?,
            truth: num(2)?,
            rel_error_pct: num(3)?,
        });
    }
    Ok(rows)
}

pub fn render_param_table(rows: &[ParamRow]) -> String {
    let mut s = format!(
        "{:<6} {:>14} {:>10} {:>14}\n",
        "param", "estimate", "true", "rel.err (%)"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<6} {:>14.6} {:>10.6} {:>14.6e}",
            r.name, r.estimate, r.truth, r.rel_error_pct
        );
    }
    s
}

/// Writes the run artifacts of one trained model into `dir`.
pub fn write_run(
    dir: &Path,
    config: &ExperimentConfig,
    dataset: &Dataset,
    trained: &Trained,
    seconds: f64,
) -> Result<Metrics, ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| file_err(dir, e))?;
    let case = analytic_case(config.case);
    let mut echo = config.clone();
    echo.mode = match trained.mode {
        Mode::DaPinn => ModeSelection::DaPinn,
        Mode::Baseline => ModeSelection::Baseline,
    };
    echo.out = dir.to_path_buf();
    echo.analytic = Some(analytic_notes(config.case));
    write(
        &dir.join("config.json"),
        serde_json::to_string_pretty(&echo).expect("config serializes"),
    )?;
    dataset.save(dir.join("dataset.csv"))?;
    let mut trace = Vec::new();
    trained.trace.write_csv(&mut trace)?;
    write(&dir.join("trace.csv"), trace)?;
    write(&dir.join("checkpoint.json"), trained.checkpoint().to_json())?;
    let params = parameter_table(&trained.lambda, &case.true_params());
    write(&dir.join("params.csv"), params_csv(&params))?;

    let errors = field_errors(trained, &case, &config.grid)?;
    let recs = &trained.trace.records;
    let metrics = Metrics {
        case: config.case,
        mode: trained.mode,
        seed: config.seed,
        iterations: recs.len(),
        lambda: trained.lambda,
        params,
        field_errors: errors,
        final_loss: recs.last().map(|r| [r.loss_d, r.loss_p, r.loss_i, r.total]),
        loss_i_peak: recs.iter().map(|r| r.loss_i).fold(0.0, f64::max),
        loss_i_final: recs.last().map_or(0.0, |r| r.loss_i),
        empty_split_iterations: trained.trace.empty_split_iterations().len(),
    };
    write(
        &dir.join("metrics.json"),
        serde_json::to_string_pretty(&metrics).expect("metrics serialize"),
    )?;
    let ms: Vec<f64> = recs.iter().map(|r| r.ms).collect();
    write(
        &dir.join("timing.json"),
        serde_json::to_string_pretty(&json!({
            "seconds": seconds,
            "ms_per_iteration": if ms.is_empty() { 0.0 } else { ms.iter().sum::<f64>() / ms.len() as f64 },
        }))
        .expect("timing serializes"),
    )?;
    for field in case.dim().field_names() {
        for (name, grid) in error_grids(trained, &case, field, &config.grid)? {
            write(&dir.join(name), grid)?;
        }
    }
    Ok(metrics)
}

/// Trains every configured method and writes its run directory. With two
/// methods the directories are `out/da-pinn` and `out/baseline`, plus
/// `out/comparison.csv`.
pub fn run(config: &ExperimentConfig) -> Result<Vec<RunArtifacts>, ExperimentError> {
    run_observed(config, &mut |_, _| {})
}

/// Like [`run`], passing every trace record to `observe` during training.
pub fn run_observed(
    config: &ExperimentConfig,
    observe: &mut (dyn FnMut(Mode, &TraceRecord) + Send),
) -> Result<Vec<RunArtifacts>, ExperimentError> {
    config.validate()?;
    let dataset = load_dataset(config)?;
    let geometry = analytic_case(config.case).geometry();
    let modes = config.mode.modes();
    let mut out = Vec::new();
    for &mode in &modes {
        let dir = if modes.len() > 1 {
            config.out.join(mode.name())
        } else {
            config.out.clone()
        };
        let start = Instant::now();
        let result = train_observed(
            &config.train_config(mode),
            &config.sampler_config(dataset.len()),
            &dataset.points,
            &geometry,
            &mut |r| observe(mode, r),
        );
        let trained = match result {
            Ok(t) => t,
            Err(TrainError::Aborted {
                iteration,
                source,
                last_good,
            }) => {
                fs::create_dir_all(&dir).map_err(|e| file_err(&dir, e))?;
                write(&dir.join("checkpoint.json"), last_good.to_json())?;
                return Err(TrainError::Aborted {
                    iteration,
                    source,
                    last_good,
                }
                .into());
            }
            Err(e) => return Err(e.into()),
        };
        let seconds = start.elapsed().as_secs_f64();
        let metrics = write_run(&dir, config, &dataset, &trained, seconds)?;
        out.push(RunArtifacts {
            dir,
            metrics,
            seconds,
        });
    }
    if out.len() > 1 {
        let dirs: Vec<PathBuf> = out.iter().map(|r| r.dir.clone()).collect();
        let table = report(&dirs)?;
        write(&config.out.join("comparison.csv"), table.to_csv())?;
    }
    Ok(out)
}

/// Loads the model and configuration stored in a run directory.
pub fn load_run(dir: &Path) -> Result<(ExperimentConfig, Trained), ExperimentError> {
    let missing: Vec<String> = REQUIRED_ARTIFACTS
        .iter()
        .filter(|f| !dir.join(f).is_file())
        .map(|f| f.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ExperimentError::Incomplete {
            dir: dir.to_path_buf(),
            missing,
        });
    }
    let cfg_path = dir.join("config.json");
    let config: ExperimentConfig =
        serde_json::from_str(&read(&cfg_path)?).map_err(|e| file_err(&cfg_path, e))?;
    let ck = Checkpoint::from_json(&read(&dir.join("checkpoint.json"))?)?;
    let mut model = ck.model()?;
    let trace_path = dir.join("trace.csv");
    model.trace = crate::trainer::TrainTrace::read_csv(
        fs::File::open(&trace_path).map_err(|e| file_err(&trace_path, e))?,
    )?;
    Ok((config, model))
}

/// One `(method, field)` entry of a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub run: String,
    pub method: String,
    pub field: String,
    pub l2_error: f64,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("run,method,field,l2_error,best\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.run, r.method, r.field, r.l2_error, r.best
            );
        }
        s
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "{:<28} {:<9} {:<5} {:>12}\n",
            "run", "method", "field", "l2 error"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<28} {:<9} {:<5} {:>12.4e}{}",
                r.run,
                r.method,
                r.field,
                r.l2_error,
                if r.best { "  *" } else { "" }
            );
        }
        s
    }
}

/// Compares runs field by field on their stored test-grid errors,
/// recomputing them from the checkpoints. The lowest error per field is
/// flagged.
pub fn report(dirs: &[PathBuf]) -> Result<Report, ExperimentError> {
    if dirs.is_empty() {
        return Err(ExperimentError::Config(
            "report needs at least one run directory".into(),
        ));
    }
    let mut rows = Vec::new();
    for dir in dirs {
        let (config, model) = load_run(dir)?;
        let case = analytic_case(config.case);
        for (field, err) in field_errors(&model, &case, &config.grid)? {
            rows.push(ReportRow {
                run: dir.display().to_string(),
                method: model.mode.name().to_string(),
                field,
                l2_error: err,
                best: false,
            });
        }
    }
    let fields: Vec<String> = rows.iter().map(|r| r.field.clone()).collect();
    for f in fields {
        let best = rows
            .iter()
            .filter(|r| r.field == f)
            .map(|r| r.l2_error)
            .fold(f64::INFINITY, f64::min);
        for r in rows.iter_mut().filter(|r| r.field == f) {
            r.best = r.l2_error == best;
        }
    }
    Ok(Report { rows })
}

fn field_index(dim: Dimension, field: &str) -> Result<usize, ExperimentError> {
    dim.field_names()
        .iter()
        .position(|f| *f == field)
        .ok_or_else(|| ExperimentError::UnknownField {
            name: field.to_string(),
            available: dim.field_names().join(", "),
        })
}

/// `|u - u_hat|` of one field on `grid`, as `(file name, csv)` pairs: one
/// `t x x` grid in 1D, one `x x y` grid per time slice in 2D. The first row
/// and column carry the axis values.
pub fn error_grids(
    model: &Trained,
    case: &AnalyticCase,
    field: &str,
    grid: &GridSpec,
) -> Result<Vec<(String, String)>, ExperimentError> {
    let geometry = case.geometry();
    let j = field_index(geometry.dim, field)?;
    let abs_err = |points: &[Vec<f64>]| -> Result<Vec<f64>, ExperimentError> {
        let pred = predict(model, points, &geometry)?;
        points
            .iter()
            .zip(&pred)
            .map(|(p, u)| Ok((case.eval(p)?[j] - u[j]).abs()))
            .collect()
    };
    let table = |row_name: &str, col_name: &str, rows: &[f64], cols: &[f64], vals: &[f64]| {
        let mut s = format!("{row_name}\\{col_name}");
        for c in cols {
            let _ = write!(s, ",{c}");
        }
        s.push('\n');
        for (i, r) in rows.iter().enumerate() {
            let _ = write!(s, "{r}");
            for v in &vals[i * cols.len()..(i + 1) * cols.len()] {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    };
    match geometry.dim {
        Dimension::One => {
            let ts = linspace(geometry.t_max, grid.nt);
            let xs = linspace(geometry.x_max, grid.nx);
            let vals = abs_err(&grid.points(&geometry))?;
            Ok(vec![(
                format!("error_{field}.csv"),
                table("t", "x", &ts, &xs, &vals),
            )])
        }
        Dimension::Two => {
            let xs = linspace(geometry.x_max, grid.nx);
            let ys = linspace(geometry.y_max.unwrap_or(0.0), grid.ny);
            let mut out = Vec::new();
            for &t in &grid.t_slices {
                let slice = GridSpec {
                    t_slices: vec![t],
                    ..grid.clone()
                };
                let vals = abs_err(&slice.points(&geometry))?;
                out.push((
                    format!("error_{field}_t{t}.csv"),
                    table("x", "y", &xs, &ys, &vals),
                ));
            }
            Ok(out)
        }
    }
}

/// Error grid of one field for a finished run.
pub fn export_error_grid(
    dir: &Path,
    field: &str,
    grid: &GridSpec,
) -> Result<Vec<(String, String)>, ExperimentError> {
    let (config, model) = load_run(dir)?;
    error_grids(&model, &analytic_case(config.case), field, grid)
}

/// Human-readable summary printed after a run.
pub fn render_run(a: &RunArtifacts) -> String {
    let mut s = format!(
        "{} ({} iterations, {:.1} s) -> {}\n",
        a.metrics.mode.name(),
        a.metrics.iterations,
        a.seconds,
        a.dir.display()
    );
    s.push_str(&render_param_table(&a.metrics.params));
    let _ = writeln!(s, "{:<6} {:>12}", "field", "l2 error");
    for (f, e) in &a.metrics.field_errors {
        let _ = writeln!(s, "{:<6} {:>12.4e}", f, e);
    }
    s
}
