//! Experiment configuration: flat `key = value` text with `#` comments.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use super::LabError;
use crate::expfam::FamilyId;
use crate::mechanisms::MechanismId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExperimentId {
    Lemma32Equality,
    Lemma33Moments,
    Thm35Terms,
    CovsampInvariants,
    FourthMomentIdentity,
    ReductionFactor32,
    HeavyTailedAssouad,
    ConcentrationSuite,
    AppendixCProduct,
    AppendixCGaussmean,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 10] = [
        ExperimentId::Lemma32Equality,
        ExperimentId::Lemma33Moments,
        ExperimentId::Thm35Terms,
        ExperimentId::CovsampInvariants,
        ExperimentId::FourthMomentIdentity,
        ExperimentId::ReductionFactor32,
        ExperimentId::HeavyTailedAssouad,
        ExperimentId::ConcentrationSuite,
        ExperimentId::AppendixCProduct,
        ExperimentId::AppendixCGaussmean,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::Lemma32Equality => "lemma32_equality",
            ExperimentId::Lemma33Moments => "lemma33_moments",
            ExperimentId::Thm35Terms => "thm35_terms",
            ExperimentId::CovsampInvariants => "covsamp_invariants",
            ExperimentId::FourthMomentIdentity => "fourth_moment_identity",
            ExperimentId::ReductionFactor32 => "reduction_factor32",
            ExperimentId::HeavyTailedAssouad => "heavy_tailed_assouad",
            ExperimentId::ConcentrationSuite => "concentration_suite",
            ExperimentId::AppendixCProduct => "appendixC_product",
            ExperimentId::AppendixCGaussmean => "appendixC_gaussmean",
        }
    }

    /// The family the experiment is tied to, if it does not accept `family`.
    fn fixed_family(self) -> Option<FamilyId> {
        match self {
            ExperimentId::Lemma32Equality | ExperimentId::Lemma33Moments | ExperimentId::Thm35Terms => None,
            ExperimentId::AppendixCProduct => Some(FamilyId::BernoulliProduct),
            ExperimentId::AppendixCGaussmean => Some(FamilyId::GaussianMean),
            _ => Some(FamilyId::GaussianCovariance),
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, LabError> {
        ExperimentId::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| LabError::Config(format!("unknown experiment {s:?}")))
    }
}

impl Serialize for ExperimentId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub family: FamilyId,
    pub d: usize,
    pub n: usize,
    pub mechanism: MechanismId,
    pub epsilon: f64,
    pub delta: f64,
    pub clip: Option<f64>,
    pub outer: usize,
    pub inner: usize,
    pub tail_mc: usize,
    pub alpha: f64,
    pub threshold: Option<f64>,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

/// Keys that take numbers and can therefore be swept.
pub const NUMERIC_KEYS: [&str; 11] = [
    "d", "n", "epsilon", "delta", "clip", "outer", "inner", "tail_mc", "alpha", "threshold", "seed",
];

const KEYS: [&str; 15] = [
    "experiment",
    "family",
    "d",
    "n",
    "mechanism",
    "epsilon",
    "delta",
    "clip",
    "outer",
    "inner",
    "tail_mc",
    "alpha",
    "threshold",
    "seed",
    "out",
];

impl ExperimentConfig {
    /// Defaults for `experiment` with the given seed.
    pub fn defaults(experiment: ExperimentId, seed: u64) -> Self {
        let mut c = ExperimentConfig {
            experiment,
            family: experiment.fixed_family().unwrap_or(FamilyId::GaussianCovariance),
            d: 3,
            n: 20,
            mechanism: MechanismId::Constant,
            epsilon: 1.0,
            delta: 1e-5,
            clip: None,
            outer: 1,
            inner: 1,
            tail_mc: 10_000,
            alpha: 0.5,
            threshold: None,
            seed,
            out: None,
        };
        match experiment {
            ExperimentId::Lemma32Equality => c.outer = 10_000,
            ExperimentId::Lemma33Moments => {
                c.mechanism = MechanismId::PlugIn;
                c.inner = 100_000;
            }
            ExperimentId::Thm35Terms => {
                c.n = 10_000;
                c.mechanism = MechanismId::Gaussian;
                c.epsilon = 0.5;
                c.clip = Some(4.0);
                c.outer = 40;
                c.inner = 50;
            }
            ExperimentId::CovsampInvariants => {
                c.d = 5;
                c.outer = 1000;
            }
            ExperimentId::FourthMomentIdentity => {
                c.outer = 1_000_000;
                c.inner = 20;
            }
            ExperimentId::ReductionFactor32 => {
                c.n = 100_000;
                c.mechanism = MechanismId::PlugIn;
                c.outer = 200;
            }
            ExperimentId::HeavyTailedAssouad => {
                c.d = 20;
                c.n = 100;
                c.epsilon = 0.4;
                c.delta = 0.1;
                c.outer = 100_000;
                c.inner = 10_000;
            }
            ExperimentId::ConcentrationSuite => {
                c.d = 5;
                c.outer = 1_000_000;
            }
            ExperimentId::AppendixCProduct | ExperimentId::AppendixCGaussmean => {
                c.d = 4;
                c.outer = 100;
            }
        }
        c
    }

    /// Parses config text. `overrides` are applied after the file's own
    /// entries, as if appended to it.
    pub fn parse_with(text: &str, overrides: &[(&str, &str)]) -> Result<Self, LabError> {
        let mut entries: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| LabError::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(LabError::Config(format!("line {}: unknown key {key:?}", lineno + 1)));
            }
            if value.is_empty() {
                return Err(LabError::Config(format!("line {}: empty value for {key:?}", lineno + 1)));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(LabError::Config(format!("line {}: duplicate key {key:?}", lineno + 1)));
            }
        }
        for (key, value) in overrides {
            if !KEYS.contains(key) {
                return Err(LabError::Config(format!("unknown key {key:?}")));
            }
            entries.insert(key.to_string(), value.to_string());
        }
        let experiment: ExperimentId = entries
            .get("experiment")
            .ok_or_else(|| LabError::Config("missing key \"experiment\"".into()))?
            .parse()?;
        let seed: u64 = parse_num(
            "seed",
            entries
                .get("seed")
                .ok_or_else(|| LabError::Config("missing key \"seed\"".into()))?,
        )?;
        let mut cfg = Self::defaults(experiment, seed);
        for (key, value) in &entries {
            if key != "experiment" {
                cfg.set(key, value)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, LabError> {
        Self::parse_with(text, &[])
    }

    /// Sets one key from its text form. Does not revalidate.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), LabError> {
        match key {
            "experiment" => {
                return Err(LabError::Config("the experiment cannot be changed".into()));
            }
            "family" => {
                self.family = value.parse().map_err(|e| LabError::Config(format!("{e}")))?;
            }
            "mechanism" => {
                self.mechanism = value.parse().map_err(|e| LabError::Config(format!("{e}")))?;
            }
            "d" => self.d = parse_num(key, value)?,
            "n" => self.n = parse_num(key, value)?,
            "outer" => self.outer = parse_num(key, value)?,
            "inner" => self.inner = parse_num(key, value)?,
            "tail_mc" => self.tail_mc = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "epsilon" => self.epsilon = parse_num(key, value)?,
            "delta" => self.delta = parse_num(key, value)?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "clip" => self.clip = Some(parse_num(key, value)?),
            "threshold" => self.threshold = Some(parse_num(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            other => return Err(LabError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |msg: String| Err(LabError::Config(msg));
        for (name, v) in [("d", self.d), ("n", self.n), ("outer", self.outer), ("inner", self.inner), ("tail_mc", self.tail_mc)] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if let Some(f) = self.experiment.fixed_family() {
            if f != self.family {
                return bad(format!("{} runs on the {} family only", self.experiment, f));
            }
        }
        if !(self.epsilon >= 0.0) || !(self.delta >= 0.0) {
            return bad("epsilon and delta must be non-negative".into());
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                return bad("clip must be positive".into());
            }
        }
        if self.mechanism == MechanismId::Gaussian && self.clip.is_none() {
            return bad("the gaussian mechanism needs a clip radius".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]".into());
        }
        if let Some(t) = self.threshold {
            if !(t > 0.0) {
                return bad("threshold must be positive".into());
            }
        }
        Ok(())
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, LabError> {
    if let Ok(v) = value.parse() {
        return Ok(v);
    }
    // Integers written like `1e5`.
    if let Ok(f) = value.parse::<f64>() {
        if f.fract() == 0.0 && f >= 0.0 && f < 1.8e19 {
            if let Ok(v) = format!("{}", f as u64).parse() {
                return Ok(v);
            }
        }
    }
    Err(LabError::Config(format!("bad value {value:?} for {key:?}")))
}
