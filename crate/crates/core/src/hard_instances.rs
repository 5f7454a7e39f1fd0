//! Lower-bound constructions: the random covariance sampler and its prior
//! box, the product and Gaussian-mean priors, and the heavy-tailed family
//! used with Assouad's method.

use std::f64::consts::LN_2;

use rand::{Rng, RngCore};
use serde::Serialize;
use thiserror::Error;

use crate::expfam::{self, Dataset, ExpFamError};
use crate::linalg::{self, LinalgError, Mat};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    #[error("box endpoints have lengths {lo} and {hi}")]
    LengthMismatch { lo: usize, hi: usize },
    #[error("box coordinate {0} has lo > hi or a non-finite endpoint")]
    BadInterval(usize),
    #[error("invalid heavy-tailed parameters: {0}")]
    HeavyTailed(String),
    #[error("dimension must be positive")]
    ZeroDim,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    ExpFam(#[from] ExpFamError),
}

pub type Result<T> = std::result::Result<T, InstanceError>;

/// Axis-aligned box `Π_j [lo_j, hi_j]` of natural parameters; the prior is
/// uniform on it. Degenerate coordinates (`lo_j = hi_j`) are allowed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PriorBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl PriorBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(InstanceError::LengthMismatch {
                lo: lo.len(),
                hi: hi.len(),
            });
        }
        if let Some(j) = (0..lo.len()).find(|&j| !(lo[j].is_finite() && hi[j].is_finite() && lo[j] <= hi[j])) {
            return Err(InstanceError::BadInterval(j));
        }
        Ok(Self { lo, hi })
    }

    /// The cube `[-r, r]^k`.
    pub fn cube(k: usize, r: f64) -> Result<Self> {
        Self::new(vec![-r; k], vec![r; k])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// `R = hi − lo`.
    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).collect()
    }

    /// `m = (lo + hi)/2`.
    pub fn midpoint(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// `‖R‖²`.
    pub fn r_norm_sq(&self) -> f64 {
        self.widths().iter().map(|r| r * r).sum()
    }

    /// `‖R‖∞`.
    pub fn r_inf(&self) -> f64 {
        self.widths().iter().fold(0.0, |m, r| m.max(*r))
    }

    pub fn is_degenerate(&self, j: usize) -> bool {
        self.lo[j] == self.hi[j]
    }

    pub fn contains(&self, eta: &[f64]) -> bool {
        eta.len() == self.dim()
            && eta
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(e, (a, b))| *a <= *e && *e <= *b)
    }

    /// `η ~ U(box)`; degenerate coordinates are returned exactly.
    pub fn sample_uniform(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| if a == b { a } else { a + (b - a) * rng.random::<f64>() })
            .collect()
    }

    /// Clamps a deviation vector into `Π_j [−R_j/2, R_j/2]`; returns the
    /// number of coordinates that moved.
    pub fn clamp_deviation(&self, a: &mut [f64]) -> usize {
        let mut moved = 0;
        for (v, r) in a.iter_mut().zip(self.widths()) {
            let c = v.clamp(-0.5 * r, 0.5 * r);
            if c != *v {
                moved += 1;
                *v = c;
            }
        }
        moved
    }

    /// Whether `a` lies in the deviation box `Π_j [−R_j/2, R_j/2]`.
    pub fn contains_deviation(&self, a: &[f64]) -> bool {
        a.len() == self.dim()
            && a.iter().zip(self.widths()).all(|(v, r)| v.abs() <= 0.5 * r)
    }
}

/// One draw of the random covariance construction.
#[derive(Clone, Debug)]
pub struct CovInstance {
    pub sigma: Mat,
    pub precision: Mat,
    /// Upper-triangular natural parameter `2U♭`, `P = U + Uᵀ`.
    pub eta0: Vec<f64>,
    pub prior: PriorBox,
}

/// The box the covariance construction draws `η₀` from: diagonal entries in
/// `[3/4 ± 1/(4d)]`, entries above the diagonal in `[±1/(2d)]`, entries below
/// the diagonal fixed at 0.
pub fn cov_prior(d: usize) -> Result<PriorBox> {
    if d == 0 {
        return Err(InstanceError::ZeroDim);
    }
    let w = 1.0 / (4.0 * d as f64);
    let mut lo = vec![0.0; d * d];
    let mut hi = vec![0.0; d * d];
    for i in 0..d {
        lo[i * d + i] = 0.75 - w;
        hi[i * d + i] = 0.75 + w;
        for j in (i + 1)..d {
            lo[i * d + j] = -2.0 * w;
            hi[i * d + j] = 2.0 * w;
        }
    }
    PriorBox::new(lo, hi)
}

/// Random covariance matrix: the precision has diagonal entries uniform on
/// `[3/4 ± 1/(4d)]` and off-diagonal entries uniform on `[±1/(4d)]`,
/// mirrored. By Gershgorin the precision's spectrum lies in `[1/2, 1]`, so
/// `I ⪯ Σ ⪯ 2I`.
pub fn cov_samp(d: usize, rng: &mut dyn RngCore) -> Result<CovInstance> {
    let prior = cov_prior(d)?;
    let w = 1.0 / (4.0 * d as f64);
    let mut p = Mat::zeros(d, d);
    for i in 0..d {
        p[(i, i)] = rng.random_range(0.75 - w..=0.75 + w);
        for j in (i + 1)..d {
            let v = rng.random_range(-w..=w);
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
    let eta0 = expfam::eta0_from_precision(&p)?;
    let sigma = linalg::sym_inverse(&p)?;
    Ok(CovInstance {
        sigma,
        precision: p,
        eta0,
        prior,
    })
}

/// `[−ln 2, ln 2]^d`: success probabilities in `[1/3, 2/3]`.
pub fn product_prior(d: usize) -> Result<PriorBox> {
    if d == 0 {
        return Err(InstanceError::ZeroDim);
    }
    PriorBox::cube(d, LN_2)
}

/// `[−1, 1]^d`.
pub fn gaussian_mean_prior(d: usize) -> Result<PriorBox> {
    if d == 0 {
        return Err(InstanceError::ZeroDim);
    }
    PriorBox::cube(d, 1.0)
}

/// Coordinates are independently `v_i·t` with probability `p` and 0
/// otherwise.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeavyTailedSpec {
    v: Vec<f64>,
    t: f64,
    p: f64,
}

/// Slack allowed in the second-moment budget `p·t² ≤ 1`.
pub const MOMENT_BUDGET_TOL: f64 = 1e-12;

impl HeavyTailedSpec {
    pub fn new(v: Vec<f64>, t: f64, p: f64) -> Result<Self> {
        if v.is_empty() {
            return Err(InstanceError::ZeroDim);
        }
        if v.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(InstanceError::HeavyTailed("sign vector entries must be ±1".into()));
        }
        if !(t.is_finite() && t > 0.0) {
            return Err(InstanceError::HeavyTailed(format!("spike value {t} must be positive")));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(InstanceError::HeavyTailed(format!("probability {p} outside [0, 1]")));
        }
        if p * t * t > 1.0 + MOMENT_BUDGET_TOL {
            return Err(InstanceError::HeavyTailed(format!(
                "p·t² = {} exceeds the unit second-moment budget",
                p * t * t
            )));
        }
        Ok(Self { v, t, p })
    }

    /// `p = 2α²/d`, `t = √d/(√2 α)`, so that `p·t² = 1`.
    pub fn for_accuracy(alpha: f64, v: Vec<f64>) -> Result<Self> {
        let d = v.len() as f64;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(InstanceError::HeavyTailed(format!("accuracy {alpha} must be positive")));
        }
        let p = 2.0 * alpha * alpha / d;
        let t = d.sqrt() / (2f64.sqrt() * alpha);
        Self::new(v, t, p)
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn signs(&self) -> &[f64] {
        &self.v
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `p·t·v`.
    pub fn mean(&self) -> Vec<f64> {
        self.v.iter().map(|s| self.p * self.t * s).collect()
    }

    /// Variance along any unit direction, `p(1−p)t²`.
    pub fn directional_variance(&self) -> f64 {
        self.p * (1.0 - self.p) * self.t * self.t
    }

    /// Same `t` and `p` with a different sign vector.
    pub fn with_signs(&self, v: Vec<f64>) -> Result<Self> {
        Self::new(v, self.t, self.p)
    }
}

fn heavy_rows(v: &[f64], t: f64, p: f64, n: usize, rng: &mut dyn RngCore) -> Vec<f64> {
    let mut data = Vec::with_capacity(n * v.len());
    for _ in 0..n {
        for s in v {
            data.push(if rng.random::<f64>() < p { s * t } else { 0.0 });
        }
    }
    data
}

pub fn heavy_sample(spec: &HeavyTailedSpec, n: usize, rng: &mut dyn RngCore) -> Dataset {
    Dataset::from_raw(n, spec.dim(), heavy_rows(&spec.v, spec.t, spec.p, n, rng))
}

/// A draw from the coupling of the `e_i = +1` and `e_i = −1` mixtures.
#[derive(Clone, Debug)]
pub struct Coupling {
    pub x: Dataset,
    pub y: Dataset,
    /// Number of rows on which `x` and `y` differ.
    pub hamming: usize,
    /// The sign vector the dataset was drawn from (`e_i = +1`).
    pub signs: Vec<f64>,
}

/// Draws `e` uniformly with `e_i = +1`, samples `x ~ p_e^n`, and sets `y` to
/// `x` with coordinate `i` negated. `y` is then a draw from the `e_i = −1`
/// mixture and the rows differ exactly where `x[·, i] ≠ 0`.
pub fn assouad_coupling(
    spec: &HeavyTailedSpec,
    i: usize,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<Coupling> {
    let d = spec.dim();
    if i >= d {
        return Err(InstanceError::HeavyTailed(format!(
            "coordinate {i} out of range for dimension {d}"
        )));
    }
    let signs: Vec<f64> = (0..d)
        .map(|j| if j == i || rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let xs = heavy_rows(&signs, spec.t, spec.p, n, rng);
    let mut ys = xs.clone();
    let mut hamming = 0;
    for r in 0..n {
        let v = &mut ys[r * d + i];
        if *v != 0.0 {
            *v = -*v;
            hamming += 1;
        }
    }
    Ok(Coupling {
        x: Dataset::from_raw(n, d, xs),
        y: Dataset::from_raw(n, d, ys),
        hamming,
        signs,
    })
}
