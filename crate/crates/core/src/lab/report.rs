//! Metric records, reports and the per-trial table.

use std::fmt::Write as _;

use serde::Serialize;

use super::config::ExperimentConfig;
use crate::stats::MeanSe;

/// How a metric is judged. Every variant carries its tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Check {
    /// `|estimate − target| ≤ k·stderr`.
    WithinSe { k: f64 },
    /// `estimate + k·stderr ≥ target`.
    AtLeast { k: f64 },
    /// `estimate − k·stderr ≤ target`.
    AtMost { k: f64 },
    /// `estimate ≤ target·(1 + k·stderr/estimate)`.
    AtMostRel { k: f64 },
    /// `|estimate − target| ≤ tol`.
    Abs { tol: f64 },
    /// Reported, not judged.
    Info,
}

impl Check {
    fn judge(self, estimate: f64, stderr: f64, target: f64) -> Option<bool> {
        let ok = match self {
            Check::WithinSe { k } => (estimate - target).abs() <= k * stderr,
            Check::AtLeast { k } => estimate + k * stderr >= target,
            Check::AtMost { k } => estimate - k * stderr <= target,
            Check::AtMostRel { k } => {
                let rel = if estimate > 0.0 { stderr / estimate } else { 0.0 };
                estimate <= target * (1.0 + k * rel)
            }
            Check::Abs { tol } => (estimate - target).abs() <= tol,
            Check::Info => return None,
        };
        Some(ok)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub estimate: f64,
    pub stderr: f64,
    pub target: Option<f64>,
    pub check: Check,
    pub pass: Option<bool>,
    /// The statement the target comes from.
    pub reference: String,
}

impl Metric {
    pub fn new(name: impl Into<String>, estimate: f64, stderr: f64, target: f64, check: Check, reference: &str) -> Self {
        Self {
            name: name.into(),
            estimate,
            stderr,
            target: Some(target),
            pass: check.judge(estimate, stderr, target),
            check,
            reference: reference.to_string(),
        }
    }

    pub fn within(name: impl Into<String>, est: MeanSe, target: f64, k: f64, reference: &str) -> Self {
        Self::new(name, est.mean, est.se, target, Check::WithinSe { k }, reference)
    }

    pub fn at_least(name: impl Into<String>, est: MeanSe, target: f64, k: f64, reference: &str) -> Self {
        Self::new(name, est.mean, est.se, target, Check::AtLeast { k }, reference)
    }

    pub fn at_most(name: impl Into<String>, est: MeanSe, target: f64, k: f64, reference: &str) -> Self {
        Self::new(name, est.mean, est.se, target, Check::AtMost { k }, reference)
    }

    pub fn abs(name: impl Into<String>, value: f64, target: f64, tol: f64, reference: &str) -> Self {
        Self::new(name, value, 0.0, target, Check::Abs { tol }, reference)
    }

    pub fn info(name: impl Into<String>, value: f64, stderr: f64) -> Self {
        Self {
            name: name.into(),
            estimate: value,
            stderr,
            target: None,
            check: Check::Info,
            pass: None,
            reference: String::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub experiment: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub metrics: Vec<Metric>,
    pub all_pass: bool,
    pub runtime_secs: f64,
}

impl Report {
    pub fn new(config: ExperimentConfig, metrics: Vec<Metric>, runtime_secs: f64) -> Self {
        Self {
            experiment: config.experiment.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            all_pass: metrics.iter().all(|m| m.pass != Some(false)),
            config,
            metrics,
            runtime_secs,
        }
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Metric> {
        self.metrics.iter().filter(|m| m.pass == Some(false))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Per-trial values. The CSV has a leading `trial_index` column.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrialTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TrialTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Floats are written with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial_index");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            write!(out, "{i}").unwrap();
            for v in row {
                write!(out, ",{}", format_float(*v)).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}
