//! Seeded experiment runner.
//!
//! A run reads a `key = value` config, executes one named experiment and
//! produces a [`Report`] plus a per-trial table. [`write_outputs`] stores
//! them as `summary.json` and `trials.csv`. For a fixed config and seed the
//! CSV is byte-identical whatever the number of worker threads.

mod config;
mod experiments;
mod report;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

pub use config::{ExperimentConfig, ExperimentId, NUMERIC_KEYS};
pub use experiments::default_threshold;
pub use report::{format_float, Check, Metric, Report, TrialTable};

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("experiment failed: {0}")]
    Experiment(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl LabError {
    fn io(path: &Path, e: std::io::Error) -> Self {
        LabError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

/// Process exit codes.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: Report,
    pub trials: TrialTable,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        if self.report.all_pass {
            EXIT_PASS
        } else {
            EXIT_CHECK_FAILED
        }
    }
}

/// Runs the experiment on the global thread pool.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, LabError> {
    cfg.validate()?;
    let start = Instant::now();
    let (metrics, trials) = experiments::dispatch(cfg)?;
    Ok(RunOutput {
        report: Report::new(cfg.clone(), metrics, start.elapsed().as_secs_f64()),
        trials,
    })
}

/// Runs the experiment on a dedicated pool of `workers` threads.
pub fn run_with_workers(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<RunOutput, LabError> {
    match workers {
        None => run(cfg),
        Some(0) => Err(LabError::Config("workers must be at least 1".into())),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| LabError::Experiment(e.to_string()))?
            .install(|| run(cfg)),
    }
}

pub fn load_config(path: &Path, overrides: &[(&str, &str)]) -> Result<ExperimentConfig, LabError> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    ExperimentConfig::parse_with(&text, overrides)
}

/// Writes `summary.json` and `trials.csv` into `dir`, creating it.
pub fn write_outputs(dir: &Path, out: &RunOutput) -> Result<(), LabError> {
    write_files(
        dir,
        &[("summary.json", out.report.to_json()), ("trials.csv", out.trials.to_csv())],
    )
}

/// Writes each file under a temporary name first so a failure leaves no
/// partial outputs behind.
fn write_files(dir: &Path, files: &[(&str, String)]) -> Result<(), LabError> {
    fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    let mut staged = Vec::new();
    for (name, body) in files {
        let tmp = dir.join(format!(".{name}.tmp"));
        if let Err(e) = fs::write(&tmp, body) {
            for t in &staged {
                let _ = fs::remove_file(t);
            }
            return Err(LabError::io(&tmp, e));
        }
        staged.push(tmp);
    }
    for ((name, _), tmp) in files.iter().zip(&staged) {
        let dest = dir.join(name);
        fs::rename(tmp, &dest).map_err(|e| LabError::io(&dest, e))?;
    }
    Ok(())
}

/// One run of a sweep.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub value: String,
    pub output: RunOutput,
}

/// Parses a comma-separated list of values.
pub fn parse_values(list: &str) -> Result<Vec<String>, LabError> {
    let values: Vec<String> = list
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(LabError::Config("sweep needs at least one value".into()));
    }
    Ok(values)
}

/// Runs `base` once per value of the numeric key `axis`.
pub fn sweep(
    base: &ExperimentConfig,
    axis: &str,
    values: &[String],
    workers: Option<usize>,
) -> Result<Vec<SweepPoint>, LabError> {
    if !NUMERIC_KEYS.contains(&axis) {
        return Err(LabError::Config(format!(
            "cannot sweep {axis:?}; numeric keys are {}",
            NUMERIC_KEYS.join(", ")
        )));
    }
    if values.is_empty() {
        return Err(LabError::Config("sweep needs at least one value".into()));
    }
    let configs = values
        .iter()
        .map(|v| {
            let mut cfg = base.clone();
            cfg.set(axis, v)?;
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>, LabError>>()?;
    configs
        .iter()
        .zip(values)
        .map(|(cfg, v)| {
            Ok(SweepPoint {
                value: v.clone(),
                output: run_with_workers(cfg, workers)?,
            })
        })
        .collect()
}

/// One row per (value, metric): `axis,value,metric,estimate,stderr,target,pass`.
pub fn sweep_csv(axis: &str, points: &[SweepPoint]) -> String {
    let mut out = String::from("axis,value,metric,estimate,stderr,target,pass\n");
    for p in points {
        for m in &p.output.report.metrics {
            let target = m.target.map(format_float).unwrap_or_default();
            let pass = match m.pass {
                Some(true) => "true",
                Some(false) => "false",
                None => "",
            };
            writeln!(
                out,
                "{axis},{},{},{},{},{target},{pass}",
                p.value,
                m.name,
                format_float(m.estimate),
                format_float(m.stderr)
            )
            .unwrap();
        }
    }
    out
}

/// Writes each point into `dir/<axis>=<value>/` and the combined
/// `sweep.csv` into `dir`.
pub fn write_sweep(dir: &Path, axis: &str, points: &[SweepPoint]) -> Result<(), LabError> {
    for p in points {
        write_outputs(&dir.join(format!("{axis}={}", p.value)), &p.output)?;
    }
    write_files(dir, &[("sweep.csv", sweep_csv(axis, points))])
}

/// Directory used when neither the config nor the command line names one.
pub fn default_out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("fplab-out").join(cfg.experiment.as_str()))
}
