//! Exponential families `p_η(x) = h(x) exp(ηᵀT(x) − Z(η))`.
//!
//! Three closed-form instances are provided through [`ExpFamilyModel`]:
//!
//! * `bernoulli_product`: `x ∈ {0,1}^d`, `T(x) = x`, `P(x_j = 1) = σ(η_j)`,
//!   `Z(η) = Σ_j ln(1 + e^{η_j})`.
//! * `gaussian_mean`: `N(η, I)`, `T(x) = x`, `Z(η) = ‖η‖²/2`.
//! * `gaussian_covariance`: `N(0, Σ)` with `T(x) = −½ (xxᵀ)♭` and
//!   `η ∈ R^{d²}` an arbitrary (not necessarily symmetric) flattened matrix.
//!   The density only sees `P = (η# + η#ᵀ)/2 = Σ⁻¹`, so both the symmetric
//!   parameter `P♭` and the upper-triangular one `2U♭` (with `P = U + Uᵀ`)
//!   describe the same distribution.
//!
//! For the Bernoulli family `η` is the canonical parameter: the mean of the
//! sufficient statistic is `e^η/(1+e^η)`. Whether an experiment calls that
//! quantity `p` or `1 − p` is its own business.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, LinalgError, Mat};
use crate::stats::MeanSe;

/// Smallest eigenvalue of the symmetrized precision accepted by the
/// covariance family.
pub const COV_RANGE_FLOOR: f64 = 1e-10;

/// Largest `d` for which the Bernoulli product support is enumerated.
pub const MAX_ENUMERATED_DIM: usize = 16;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExpFamError {
    #[error("natural parameter outside the family's range: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, ExpFamError>;

/// `n` samples of dimension `d`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl Dataset {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(ExpFamError::Invalid("sample dimension must be positive".into()));
        }
        if data.len() != n * d {
            return Err(ExpFamError::Dimension {
                expected: n * d,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(ExpFamError::Invalid(format!("non-finite entry at {pos}")));
        }
        Ok(Self { n, d, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * d);
        for r in rows {
            if r.as_ref().len() != d {
                return Err(ExpFamError::Dimension {
                    expected: d,
                    got: r.as_ref().len(),
                });
            }
            data.extend_from_slice(r.as_ref());
        }
        Self::new(rows.len(), d, data)
    }

    pub(crate) fn from_raw(n: usize, d: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * d);
        Self { n, d, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// A copy with row `i` replaced by `x`.
    pub fn with_row(&self, i: usize, x: &[f64]) -> Self {
        assert_eq!(x.len(), self.d, "with_row: dimension mismatch");
        let mut out = self.clone();
        out.data[i * self.d..(i + 1) * self.d].copy_from_slice(x);
        out
    }
}

/// Mean and covariance of the sufficient statistics.
#[derive(Clone, Debug)]
pub struct SuffStatsMoments {
    pub mu_t: Vec<f64>,
    pub sigma_t: Mat,
}

/// The operations a family must support to be used by the fingerprinting
/// engine.
pub trait ExponentialFamily: Send + Sync {
    /// Short identifier used in reports.
    fn name(&self) -> &'static str;

    /// The built-in family this is, if any.
    fn family_id(&self) -> Option<FamilyId> {
        None
    }

    fn sample_dim(&self) -> usize;

    fn param_dim(&self) -> usize;

    fn suff_stats(&self, x: &[f64]) -> Vec<f64>;

    fn log_carrier(&self, x: &[f64]) -> f64;

    fn in_range(&self, eta: &[f64]) -> bool;

    /// Whether every point of the box `[lo, hi]` is in the natural-parameter
    /// range. May be conservative.
    fn box_in_range(&self, lo: &[f64], hi: &[f64]) -> bool;

    fn log_partition(&self, eta: &[f64]) -> Result<f64>;

    /// `μ_T(η) = ∇Z(η)`.
    fn mean_suff(&self, eta: &[f64]) -> Result<Vec<f64>>;

    /// `μ_T(η)` and `Σ_T(η) = ∇²Z(η)`.
    fn moments(&self, eta: &[f64]) -> Result<SuffStatsMoments>;

    /// `sᵀ Σ_T(η) s`.
    fn suff_cov_quad_form(&self, eta: &[f64], s: &[f64]) -> Result<f64> {
        let m = self.moments(eta)?;
        Ok(m.sigma_t.bilinear(s, s))
    }

    /// `n` independent draws from `p_η`.
    fn sample(&self, eta: &[f64], n: usize, rng: &mut dyn RngCore) -> Result<Dataset>;

    /// The full support, when it is finite and small enough to enumerate.
    fn enumerate_support(&self) -> Option<Vec<Vec<f64>>> {
        None
    }

    fn log_density(&self, x: &[f64], eta: &[f64]) -> Result<f64> {
        let t = self.suff_stats(x);
        let dot: f64 = eta.iter().zip(&t).map(|(a, b)| a * b).sum();
        Ok(self.log_carrier(x) + dot - self.log_partition(eta)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyId {
    BernoulliProduct,
    GaussianMean,
    GaussianCovariance,
}

impl FamilyId {
    pub fn as_str(self) -> &'static str {
        match self {
            FamilyId::BernoulliProduct => "bernoulli_product",
            FamilyId::GaussianMean => "gaussian_mean",
            FamilyId::GaussianCovariance => "gaussian_covariance",
        }
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyId {
    type Err = ExpFamError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bernoulli_product" => Ok(FamilyId::BernoulliProduct),
            "gaussian_mean" => Ok(FamilyId::GaussianMean),
            "gaussian_covariance" => Ok(FamilyId::GaussianCovariance),
            other => Err(ExpFamError::Invalid(format!("unknown family {other:?}"))),
        }
    }
}

/// One of the three built-in families at a fixed sample dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExpFamilyModel {
    family: FamilyId,
    d: usize,
}

impl ExpFamilyModel {
    pub fn new(family: FamilyId, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(ExpFamError::Invalid("dimension must be positive".into()));
        }
        Ok(Self { family, d })
    }

    pub fn bernoulli_product(d: usize) -> Result<Self> {
        Self::new(FamilyId::BernoulliProduct, d)
    }

    pub fn gaussian_mean(d: usize) -> Result<Self> {
        Self::new(FamilyId::GaussianMean, d)
    }

    pub fn gaussian_covariance(d: usize) -> Result<Self> {
        Self::new(FamilyId::GaussianCovariance, d)
    }

    pub fn family(&self) -> FamilyId {
        self.family
    }

    fn check_eta(&self, eta: &[f64]) -> Result<()> {
        let k = self.param_dim();
        if eta.len() != k {
            return Err(ExpFamError::Dimension {
                expected: k,
                got: eta.len(),
            });
        }
        if !self.in_range(eta) {
            return Err(ExpFamError::Domain(match self.family {
                FamilyId::GaussianCovariance => format!(
                    "symmetrized precision must have smallest eigenvalue above {COV_RANGE_FLOOR:e}"
                ),
                _ => "parameter must be finite".into(),
            }));
        }
        Ok(())
    }

    /// Covariance family only: `P = (η# + η#ᵀ)/2`.
    pub fn precision(&self, eta: &[f64]) -> Result<Mat> {
        if eta.len() != self.d * self.d {
            return Err(ExpFamError::Dimension {
                expected: self.d * self.d,
                got: eta.len(),
            });
        }
        let d = self.d;
        let p = Mat::from_fn(d, d, |i, j| 0.5 * (eta[i * d + j] + eta[j * d + i]));
        Mat::new(d, d, p.into_vec()).map_err(Into::into)
    }

    /// Covariance family only: `Σ = P⁻¹`.
    pub fn covariance(&self, eta: &[f64]) -> Result<Mat> {
        self.check_eta(eta)?;
        Ok(linalg::sym_inverse(&self.precision(eta)?)?)
    }
}

/// Upper-triangular parameter `2U♭` of a symmetric precision `P = U + Uᵀ`.
pub fn eta0_from_precision(p: &Mat) -> Result<Vec<f64>> {
    p.require_symmetric()?;
    let d = p.rows();
    let mut eta = vec![0.0; d * d];
    for i in 0..d {
        eta[i * d + i] = p[(i, i)];
        for j in (i + 1)..d {
            eta[i * d + j] = 2.0 * p[(i, j)];
        }
    }
    Ok(eta)
}

/// Symmetric parameter `P♭`.
pub fn eta_from_precision(p: &Mat) -> Result<Vec<f64>> {
    p.require_symmetric()?;
    Ok(p.as_slice().to_vec())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl ExponentialFamily for ExpFamilyModel {
    fn name(&self) -> &'static str {
        self.family.as_str()
    }

    fn family_id(&self) -> Option<FamilyId> {
        Some(self.family)
    }

    fn sample_dim(&self) -> usize {
        self.d
    }

    fn param_dim(&self) -> usize {
        match self.family {
            FamilyId::GaussianCovariance => self.d * self.d,
            _ => self.d,
        }
    }

    fn suff_stats(&self, x: &[f64]) -> Vec<f64> {
        match self.family {
            FamilyId::BernoulliProduct | FamilyId::GaussianMean => x.to_vec(),
            FamilyId::GaussianCovariance => {
                let d = x.len();
                let mut t = Vec::with_capacity(d * d);
                for xi in x {
                    for xj in x {
                        t.push(-0.5 * xi * xj);
                    }
                }
                t
            }
        }
    }

    fn log_carrier(&self, x: &[f64]) -> f64 {
        match self.family {
            FamilyId::BernoulliProduct => {
                if x.iter().all(|&v| v == 0.0 || v == 1.0) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            FamilyId::GaussianMean => {
                let sq: f64 = x.iter().map(|v| v * v).sum();
                -0.5 * self.d as f64 * LN_2PI - 0.5 * sq
            }
            FamilyId::GaussianCovariance => 0.0,
        }
    }

    fn in_range(&self, eta: &[f64]) -> bool {
        if eta.len() != self.param_dim() || eta.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self.family {
            FamilyId::BernoulliProduct | FamilyId::GaussianMean => true,
            FamilyId::GaussianCovariance => self
                .precision(eta)
                .and_then(|p| Ok(linalg::eig_range_symmetric(&p)?))
                .is_ok_and(|(lo, _)| lo > COV_RANGE_FLOOR),
        }
    }

    fn box_in_range(&self, lo: &[f64], hi: &[f64]) -> bool {
        let k = self.param_dim();
        if lo.len() != k || hi.len() != k {
            return false;
        }
        if lo.iter().chain(hi).any(|v| !v.is_finite()) || lo.iter().zip(hi).any(|(a, b)| a > b) {
            return false;
        }
        match self.family {
            FamilyId::BernoulliProduct | FamilyId::GaussianMean => true,
            FamilyId::GaussianCovariance => {
                // Gershgorin lower bound over every precision the box can produce.
                let d = self.d;
                (0..d).all(|i| {
                    let radius: f64 = (0..d)
                        .filter(|&j| j != i)
                        .map(|j| {
                            let a = 0.5 * (lo[i * d + j] + lo[j * d + i]);
                            let b = 0.5 * (hi[i * d + j] + hi[j * d + i]);
                            a.abs().max(b.abs())
                        })
                        .sum();
                    lo[i * d + i] - radius > COV_RANGE_FLOOR
                })
            }
        }
    }

    fn log_partition(&self, eta: &[f64]) -> Result<f64> {
        self.check_eta(eta)?;
        Ok(match self.family {
            FamilyId::BernoulliProduct => eta.iter().map(|&e| softplus(e)).sum(),
            FamilyId::GaussianMean => 0.5 * eta.iter().map(|e| e * e).sum::<f64>(),
            FamilyId::GaussianCovariance => {
                let p = self.precision(eta)?;
                0.5 * self.d as f64 * LN_2PI - 0.5 * linalg::log_det_spd(&p)?
            }
        })
    }

    fn mean_suff(&self, eta: &[f64]) -> Result<Vec<f64>> {
        self.check_eta(eta)?;
        Ok(match self.family {
            FamilyId::BernoulliProduct => eta.iter().map(|&e| sigmoid(e)).collect(),
            FamilyId::GaussianMean => eta.to_vec(),
            FamilyId::GaussianCovariance => self
                .covariance(eta)?
                .as_slice()
                .iter()
                .map(|v| -0.5 * v)
                .collect(),
        })
    }

    fn moments(&self, eta: &[f64]) -> Result<SuffStatsMoments> {
        let mu_t = self.mean_suff(eta)?;
        let sigma_t = match self.family {
            FamilyId::BernoulliProduct => {
                Mat::from_diag(&mu_t.iter().map(|p| p * (1.0 - p)).collect::<Vec<_>>())
            }
            FamilyId::GaussianMean => Mat::identity(self.d),
            FamilyId::GaussianCovariance => {
                let s = self.covariance(eta)?;
                let d = self.d;
                Mat::from_fn(d * d, d * d, |r, c| {
                    let (i, j) = (r / d, r % d);
                    let (k, l) = (c / d, c % d);
                    0.25 * (s[(i, k)] * s[(j, l)] + s[(i, l)] * s[(j, k)])
                })
            }
        };
        Ok(SuffStatsMoments { mu_t, sigma_t })
    }

    fn suff_cov_quad_form(&self, eta: &[f64], s: &[f64]) -> Result<f64> {
        if s.len() != self.param_dim() {
            return Err(ExpFamError::Dimension {
                expected: self.param_dim(),
                got: s.len(),
            });
        }
        match self.family {
            FamilyId::BernoulliProduct => {
                let mu = self.mean_suff(eta)?;
                Ok(mu.iter().zip(s).map(|(p, v)| p * (1.0 - p) * v * v).sum())
            }
            FamilyId::GaussianMean => {
                self.check_eta(eta)?;
                Ok(s.iter().map(|v| v * v).sum())
            }
            FamilyId::GaussianCovariance => {
                // ¼ (⟨S, ΣSΣ⟩ + ⟨S, ΣSᵀΣ⟩)
                let sigma = self.covariance(eta)?;
                let d = self.d;
                let sm = Mat::new(d, d, s.to_vec())?;
                let a = (&(&sigma * &sm) * &sigma).inner(&sm);
                let b = (&(&sigma * &sm.transpose()) * &sigma).inner(&sm);
                Ok(0.25 * (a + b))
            }
        }
    }

    fn sample(&self, eta: &[f64], n: usize, rng: &mut dyn RngCore) -> Result<Dataset> {
        self.check_eta(eta)?;
        let d = self.d;
        let mut data = Vec::with_capacity(n * d);
        match self.family {
            FamilyId::BernoulliProduct => {
                let p: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
                for _ in 0..n {
                    for pj in &p {
                        data.push(if rng.random::<f64>() < *pj { 1.0 } else { 0.0 });
                    }
                }
            }
            FamilyId::GaussianMean => {
                for _ in 0..n {
                    for mu in eta {
                        let z: f64 = rng.sample(StandardNormal);
                        data.push(mu + z);
                    }
                }
            }
            FamilyId::GaussianCovariance => {
                let root = linalg::sym_sqrt(&self.covariance(eta)?)?;
                let mut z = vec![0.0; d];
                for _ in 0..n {
                    for zi in z.iter_mut() {
                        *zi = rng.sample(StandardNormal);
                    }
                    data.extend(root.matvec(&z));
                }
            }
        }
        Ok(Dataset::from_raw(n, d, data))
    }

    fn enumerate_support(&self) -> Option<Vec<Vec<f64>>> {
        if self.family != FamilyId::BernoulliProduct || self.d > MAX_ENUMERATED_DIM {
            return None;
        }
        let d = self.d;
        Some(
            (0..1usize << d)
                .map(|bits| (0..d).map(|j| ((bits >> j) & 1) as f64).collect())
                .collect(),
        )
    }
}

/// Outcome of an MGF identity check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MgfResidual {
    /// `|Ê[exp(sᵀT(X))] − exp(Z(η+s) − Z(η))|`.
    pub residual: f64,
    /// Standard error of the empirical mean; zero when computed exactly.
    pub stderr: f64,
    pub exact: bool,
}

/// Checks `E[exp(sᵀT(X))] = exp(Z(η+s) − Z(η))`, exactly when the support
/// can be enumerated and by Monte Carlo otherwise.
pub fn mgf_residual(
    model: &dyn ExponentialFamily,
    eta: &[f64],
    shift: &[f64],
    n_mc: usize,
    rng: &mut dyn RngCore,
) -> Result<MgfResidual> {
    if shift.len() != eta.len() {
        return Err(ExpFamError::Dimension {
            expected: eta.len(),
            got: shift.len(),
        });
    }
    let shifted: Vec<f64> = eta.iter().zip(shift).map(|(a, b)| a + b).collect();
    let target = (model.log_partition(&shifted)? - model.log_partition(eta)?).exp();
    if shift.iter().all(|&v| v == 0.0) {
        return Ok(MgfResidual {
            residual: 0.0,
            stderr: 0.0,
            exact: true,
        });
    }
    let mgf_term = |x: &[f64]| -> f64 {
        let t = model.suff_stats(x);
        shift.iter().zip(&t).map(|(a, b)| a * b).sum::<f64>().exp()
    };
    if let Some(support) = model.enumerate_support() {
        let mut total = 0.0;
        for x in &support {
            total += model.log_density(x, eta)?.exp() * mgf_term(x);
        }
        return Ok(MgfResidual {
            residual: (total - target).abs(),
            stderr: 0.0,
            exact: true,
        });
    }
    if n_mc < 2 {
        return Err(ExpFamError::Invalid("n_mc must be at least 2".into()));
    }
    let data = model.sample(eta, n_mc, rng)?;
    let values: Vec<f64> = data.rows().map(mgf_term).collect();
    let est = MeanSe::from_samples(&values);
    Ok(MgfResidual {
        residual: (est.mean - target).abs(),
        stderr: est.se,
        exact: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-12)
    }

    fn cov_eta(d: usize, seed: u64) -> Vec<f64> {
        // A precision with eigenvalues comfortably inside the range.
        let mut rng = stream(seed, &[]);
        let a = Mat::from_fn(d, d, |_, _| rng.random_range(-0.4..0.4));
        let p = &(&a * &a.transpose()) + &Mat::identity(d);
        eta0_from_precision(&p).unwrap()
    }

    #[test]
    fn suff_stats_examples() {
        let gm = ExpFamilyModel::gaussian_mean(2).unwrap();
        assert_eq!(gm.suff_stats(&[1.0, 2.0]), vec![1.0, 2.0]);
        let gc = ExpFamilyModel::gaussian_covariance(2).unwrap();
        assert_eq!(gc.suff_stats(&[1.0, 0.0]), vec![-0.5, -0.0, -0.0, -0.0]);
        let bp = ExpFamilyModel::bernoulli_product(2).unwrap();
        assert_eq!(bp.suff_stats(&[0.0, 1.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn log_partition_examples() {
        let gm = ExpFamilyModel::gaussian_mean(3).unwrap();
        assert_eq!(gm.log_partition(&[0.0; 3]).unwrap(), 0.0);
        let bp = ExpFamilyModel::bernoulli_product(1).unwrap();
        assert!((bp.log_partition(&[0.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
        let gc = ExpFamilyModel::gaussian_covariance(1).unwrap();
        let z = gc.log_partition(&[1.0]).unwrap();
        assert!((z - 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn covariance_domain_error() {
        let gc = ExpFamilyModel::gaussian_covariance(2).unwrap();
        assert!(matches!(
            gc.log_partition(&[1.0, 0.0, 0.0, -1.0]),
            Err(ExpFamError::Domain(_))
        ));
        assert!(matches!(
            gc.log_partition(&[1.0, 0.0, 0.0]),
            Err(ExpFamError::Dimension { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn simple_moments() {
        let gm = ExpFamilyModel::gaussian_mean(2).unwrap();
        let m = gm.moments(&[0.3, -1.0]).unwrap();
        assert_eq!(m.mu_t, vec![0.3, -1.0]);
        assert_eq!(m.sigma_t, Mat::identity(2));
        let bp = ExpFamilyModel::bernoulli_product(1).unwrap();
        let eta = 0.7f64;
        let m = bp.moments(&[eta]).unwrap();
        let p = eta.exp() / (1.0 + eta.exp());
        assert!(close(m.mu_t[0], p, 1e-14));
        assert!(close(m.sigma_t[(0, 0)], eta.exp() / (1.0 + eta.exp()).powi(2), 1e-14));
    }

    fn finite_difference_check(model: &ExpFamilyModel, eta: &[f64]) {
        let h = 1e-5;
        let k = eta.len();
        let m = model.moments(eta).unwrap();
        let z = |e: &[f64]| model.log_partition(e).unwrap();
        let bump = |i: usize, di: f64, j: usize, dj: f64| {
            let mut e = eta.to_vec();
            e[i] += di;
            e[j] += dj;
            e
        };
        let scale_mu = m.mu_t.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let scale_sigma = m.sigma_t.max_abs();
        for i in 0..k {
            let g = (z(&bump(i, h, i, 0.0)) - z(&bump(i, -h, i, 0.0))) / (2.0 * h);
            assert!(
                (g - m.mu_t[i]).abs() <= 1e-4 * scale_mu.max(1e-3),
                "{}: grad[{i}] {g} vs {}",
                model.name(),
                m.mu_t[i]
            );
            for j in 0..k {
                let hess = (z(&bump(i, h, j, h)) - z(&bump(i, h, j, -h)) - z(&bump(i, -h, j, h))
                    + z(&bump(i, -h, j, -h)))
                    / (4.0 * h * h);
                assert!(
                    (hess - m.sigma_t[(i, j)]).abs() <= 1e-4 * scale_sigma.max(1e-2),
                    "{}: hess[{i},{j}] {hess} vs {}",
                    model.name(),
                    m.sigma_t[(i, j)]
                );
            }
        }
    }

    #[test]
    fn closed_form_moments_match_finite_differences() {
        for seed in 0..20u64 {
            let mut rng = stream(100 + seed, &[]);
            let bp = ExpFamilyModel::bernoulli_product(3).unwrap();
            let eta: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            finite_difference_check(&bp, &eta);
            let gm = ExpFamilyModel::gaussian_mean(3).unwrap();
            finite_difference_check(&gm, &eta);
            let gc = ExpFamilyModel::gaussian_covariance(2).unwrap();
            finite_difference_check(&gc, &cov_eta(2, seed));
        }
    }

    #[test]
    fn sigma_t_is_symmetric_psd() {
        for seed in 0..10 {
            let gc = ExpFamilyModel::gaussian_covariance(3).unwrap();
            let m = gc.moments(&cov_eta(3, seed)).unwrap();
            assert!(m.sigma_t.asymmetry().unwrap() <= 1e-10);
            let (lo, _) = linalg::eig_range_symmetric(&m.sigma_t).unwrap();
            assert!(lo >= -1e-8);
        }
    }

    #[test]
    fn quad_form_matches_moment_matrix() {
        let gc = ExpFamilyModel::gaussian_covariance(3).unwrap();
        let eta = cov_eta(3, 5);
        let m = gc.moments(&eta).unwrap();
        let mut rng = stream(6, &[]);
        for _ in 0..10 {
            let s: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
            let direct = m.sigma_t.bilinear(&s, &s);
            assert!(close(gc.suff_cov_quad_form(&eta, &s).unwrap(), direct, 1e-12));
        }
    }

    #[test]
    fn covariance_parameterizations_agree() {
        let gc = ExpFamilyModel::gaussian_covariance(3).unwrap();
        let mut rng = stream(9, &[]);
        for seed in 0..10 {
            let eta0 = cov_eta(3, seed);
            let p = gc.precision(&eta0).unwrap();
            let eta = eta_from_precision(&p).unwrap();
            let z0 = gc.log_partition(&eta0).unwrap();
            let z = gc.log_partition(&eta).unwrap();
            assert!(close(z0, z, 1e-10));
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let t = gc.suff_stats(&x);
            let a: f64 = eta0.iter().zip(&t).map(|(u, v)| u * v).sum();
            let b: f64 = eta.iter().zip(&t).map(|(u, v)| u * v).sum();
            assert!(close(a, b, 1e-10));
        }
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn one_dimensional_densities_integrate_to_one() {
        let gm = ExpFamilyModel::gaussian_mean(1).unwrap();
        let total = simpson(|x| gm.log_density(&[x], &[0.4]).unwrap().exp(), -12.0, 12.0, 4000);
        assert!((total - 1.0).abs() < 1e-6, "{total}");
        let gc = ExpFamilyModel::gaussian_covariance(1).unwrap();
        let total = simpson(|x| gc.log_density(&[x], &[0.6]).unwrap().exp(), -20.0, 20.0, 8000);
        assert!((total - 1.0).abs() < 1e-6, "{total}");
        let bp = ExpFamilyModel::bernoulli_product(1).unwrap();
        let total: f64 = [0.0, 1.0]
            .iter()
            .map(|&x| bp.log_density(&[x], &[-0.3]).unwrap().exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_mean_sampler_is_centered() {
        let gm = ExpFamilyModel::gaussian_mean(2).unwrap();
        let data = gm.sample(&[0.0, 0.0], 1_000_000, &mut stream(1, &[])).unwrap();
        for j in 0..2 {
            let col: Vec<f64> = data.rows().map(|r| r[j]).collect();
            let m = MeanSe::from_samples(&col);
            assert!(m.mean.abs() < 4e-3, "{m:?}");
        }
    }

    #[test]
    fn bernoulli_sampler_symmetric_case() {
        let bp = ExpFamilyModel::bernoulli_product(1).unwrap();
        let data = bp.sample(&[0.0], 100_000, &mut stream(2, &[])).unwrap();
        let m = MeanSe::from_samples(data.as_slice());
        assert!(m.within(0.5, 3.0), "{m:?}");
    }

    #[test]
    fn covariance_sampler_second_moment() {
        let gc = ExpFamilyModel::gaussian_covariance(3).unwrap();
        let eta = cov_eta(3, 11);
        let sigma = gc.covariance(&eta).unwrap();
        let data = gc.sample(&eta, 100_000, &mut stream(3, &[])).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let prods: Vec<f64> = data.rows().map(|r| r[i] * r[j]).collect();
                let m = MeanSe::from_samples(&prods);
                assert!(m.within(sigma[(i, j)], 3.0), "({i},{j}) {m:?} vs {}", sigma[(i, j)]);
            }
        }
    }

    #[test]
    fn mgf_residual_cases() {
        let bp = ExpFamilyModel::bernoulli_product(1).unwrap();
        let r = mgf_residual(&bp, &[0.2], &[0.0], 0, &mut stream(0, &[])).unwrap();
        assert_eq!(r.residual, 0.0);
        let r = mgf_residual(&bp, &[0.2], &[0.9], 0, &mut stream(0, &[])).unwrap();
        assert!(r.exact && r.residual < 1e-14, "{r:?}");
        let gm = ExpFamilyModel::gaussian_mean(2).unwrap();
        let r = mgf_residual(&gm, &[0.1, -0.2], &[0.1, 0.05], 100_000, &mut stream(4, &[]))
            .unwrap();
        assert!(!r.exact && r.residual < 3.0 * r.stderr, "{r:?}");
        let gc = ExpFamilyModel::gaussian_covariance(1).unwrap();
        assert!(matches!(
            mgf_residual(&gc, &[0.5], &[-1.0], 10, &mut stream(0, &[])),
            Err(ExpFamError::Domain(_))
        ));
    }

    #[test]
    fn box_range_checks() {
        let gc = ExpFamilyModel::gaussian_covariance(2).unwrap();
        assert!(gc.box_in_range(&[0.5, -0.1, 0.0, 0.5], &[1.0, 0.1, 0.0, 1.0]));
        assert!(!gc.box_in_range(&[0.1, -0.5, 0.0, 0.1], &[1.0, 0.5, 0.0, 1.0]));
        let gm = ExpFamilyModel::gaussian_mean(2).unwrap();
        assert!(gm.box_in_range(&[-1.0, -1.0], &[1.0, 1.0]));
        assert!(!gm.box_in_range(&[1.0, -1.0], &[-1.0, 1.0]));
    }

    proptest! {
        #[test]
        fn bernoulli_mgf_exact(eta in prop::collection::vec(-3.0f64..3.0, 1..5),
                               shift_seed in 0u64..1000) {
            let d = eta.len();
            let bp = ExpFamilyModel::bernoulli_product(d).unwrap();
            let mut rng = stream(shift_seed, &[]);
            let s: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = mgf_residual(&bp, &eta, &s, 0, &mut rng).unwrap();
            prop_assert!(r.residual < 1e-12);
        }

        #[test]
        fn bernoulli_partition_is_stable(eta in -700.0f64..700.0) {
            let bp = ExpFamilyModel::bernoulli_product(1).unwrap();
            let z = bp.log_partition(&[eta]).unwrap();
            prop_assert!(z.is_finite() && z >= eta.max(0.0));
        }
    }
}
