//! Estimators under test.
//!
//! Every mechanism returns an estimate of the deviation `η − m` from the
//! prior box midpoint, clamped into `Π_j [−R_j/2, R_j/2]`. Three kinds are
//! provided per family: a data-independent constant, a non-private plug-in,
//! and a clip-and-noise Gaussian mechanism.
//!
//! The Gaussian mechanisms use the classical calibration
//! `σ = Δ·√(2 ln(1.25/δ))/ε` with replacement sensitivity `Δ = 2c/n` for
//! the clipped mean and `Δ = 2c²/n` for the clipped second moment.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::expfam::{Dataset, ExpFamError, ExpFamilyModel, ExponentialFamily, FamilyId};
use crate::hard_instances::{cov_prior, InstanceError, PriorBox};
use crate::linalg::{self, LinalgError, Mat, SymEigen, EIGEN_FLOOR};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MechError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid privacy parameters: {0}")]
    Privacy(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    ExpFam(#[from] ExpFamError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

pub type Result<T> = std::result::Result<T, MechError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismId {
    /// Always returns the box midpoint.
    Constant,
    /// Non-private clamped plug-in estimator.
    PlugIn,
    /// Clip, compute the empirical statistic, add Gaussian noise.
    Gaussian,
}

impl MechanismId {
    pub fn as_str(self) -> &'static str {
        match self {
            MechanismId::Constant => "constant",
            MechanismId::PlugIn => "plugin",
            MechanismId::Gaussian => "gaussian",
        }
    }
}

impl fmt::Display for MechanismId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MechanismId {
    type Err = MechError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(MechanismId::Constant),
            "plugin" => Ok(MechanismId::PlugIn),
            "gaussian" => Ok(MechanismId::Gaussian),
            other => Err(MechError::Invalid(format!("unknown mechanism {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    NatParamDeviation,
    Covariance,
    Mean,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub kind: EstimateKind,
    pub value: Vec<f64>,
    /// Coordinates moved by clamping.
    pub clamped: usize,
}

impl Estimate {
    /// `‖value − target‖²`.
    pub fn sq_error(&self, target: &[f64]) -> f64 {
        self.value
            .iter()
            .zip(target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// What a mechanism claims about itself.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MechanismSpec {
    pub id: MechanismId,
    /// Claimed ε; infinite for non-private mechanisms.
    pub epsilon: f64,
    pub delta: f64,
    pub clip: Option<f64>,
    /// Outputs lie in the deviation box of this prior.
    pub range: PriorBox,
    /// Output does not depend on the data, hence DP for every (ε, δ).
    pub data_independent: bool,
}

pub trait Mechanism: Send + Sync {
    fn spec(&self) -> &MechanismSpec;

    /// Estimate of `η − m`.
    fn release(&self, x: &Dataset, rng: &mut dyn RngCore) -> Result<Estimate>;
}

fn check_privacy(epsilon: f64, delta: f64, clip: f64) -> Result<()> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(MechError::Privacy(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(MechError::Privacy(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(clip.is_finite() && clip > 0.0) {
        return Err(MechError::Invalid(format!("clip radius must be positive, got {clip}")));
    }
    Ok(())
}

/// Rows rescaled by `min(1, c/‖x‖)`.
pub fn clip_rows(x: &Dataset, c: f64) -> Dataset {
    let mut data = Vec::with_capacity(x.as_slice().len());
    for row in x.rows() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = if norm > c { c / norm } else { 1.0 };
        data.extend(row.iter().map(|v| v * scale));
    }
    Dataset::from_raw(x.n(), x.d(), data)
}

pub fn empirical_mean(x: &Dataset) -> Result<Vec<f64>> {
    if x.n() == 0 {
        return Err(MechError::EmptyDataset);
    }
    let mut mean = vec![0.0; x.d()];
    for row in x.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    let n = x.n() as f64;
    Ok(mean.into_iter().map(|m| m / n).collect())
}

/// `(1/n) Σ_i x_i x_iᵀ`.
pub fn empirical_covariance(x: &Dataset) -> Result<Mat> {
    if x.n() == 0 {
        return Err(MechError::EmptyDataset);
    }
    let d = x.d();
    let mut acc = vec![0.0; d * d];
    for row in x.rows() {
        for i in 0..d {
            for j in i..d {
                acc[i * d + j] += row[i] * row[j];
            }
        }
    }
    let n = x.n() as f64;
    Ok(Mat::from_fn(d, d, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        acc[a * d + b] / n
    }))
}

/// Per-entry noise scale of [`gauss_mech_covariance`].
pub fn covariance_noise_scale(n: usize, epsilon: f64, delta: f64, clip: f64) -> Result<f64> {
    check_privacy(epsilon, delta, clip)?;
    if n == 0 {
        return Err(MechError::EmptyDataset);
    }
    Ok(2.0 * clip * clip / n as f64 * (2.0 * (1.25 / delta).ln()).sqrt() / epsilon)
}

/// Per-coordinate noise scale of [`gauss_mech_mean`].
pub fn mean_noise_scale(n: usize, epsilon: f64, delta: f64, clip: f64) -> Result<f64> {
    check_privacy(epsilon, delta, clip)?;
    if n == 0 {
        return Err(MechError::EmptyDataset);
    }
    Ok(2.0 * clip / n as f64 * (2.0 * (1.25 / delta).ln()).sqrt() / epsilon)
}

/// Clipped second moment plus a symmetric Gaussian noise matrix: the upper
/// triangle (diagonal included) is drawn i.i.d. and mirrored.
pub fn gauss_mech_covariance(
    x: &Dataset,
    epsilon: f64,
    delta: f64,
    clip: f64,
    rng: &mut dyn RngCore,
) -> Result<Mat> {
    let sigma = covariance_noise_scale(x.n(), epsilon, delta, clip)?;
    let mut out = empirical_covariance(&clip_rows(x, clip))?;
    let d = x.d();
    for i in 0..d {
        for j in i..d {
            let z: f64 = rng.sample(StandardNormal);
            out[(i, j)] += sigma * z;
            if j != i {
                out[(j, i)] = out[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Clipped empirical mean plus i.i.d. Gaussian noise.
pub fn gauss_mech_mean(
    x: &Dataset,
    epsilon: f64,
    delta: f64,
    clip: f64,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    let sigma = mean_noise_scale(x.n(), epsilon, delta, clip)?;
    let mut mean = empirical_mean(&clip_rows(x, clip))?;
    for m in mean.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *m += sigma * z;
    }
    Ok(mean)
}

/// Result of mapping a covariance estimate onto the support of the random
/// covariance construction.
#[derive(Clone, Debug)]
pub struct Projection {
    pub sigma: Mat,
    pub precision: Mat,
    /// Precision entries (upper triangle) moved by clamping.
    pub clamped_entries: usize,
    /// Eigenvalues of the input raised to the floor before inversion.
    pub floored_eigenvalues: usize,
}

/// Projects in precision space: invert `Σ̂` with eigenvalues floored at
/// [`EIGEN_FLOOR`], clamp the diagonal to `[3/4 ± 1/(4d)]` and the
/// off-diagonal to `[±1/(4d)]`, and invert back.
///
/// The result is always in the support. It is not in general the
/// Frobenius-nearest support point.
pub fn project_to_support(sigma_hat: &Mat) -> Result<Projection> {
    let eig = SymEigen::new(sigma_hat)?;
    let floored_eigenvalues = eig.values().iter().filter(|&&v| v < EIGEN_FLOOR).count();
    let raw = eig.map(|v| 1.0 / v.max(EIGEN_FLOOR));
    let d = sigma_hat.rows();
    let w = 1.0 / (4.0 * d as f64);
    let mut clamped_entries = 0;
    let mut p = Mat::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let (lo, hi) = if i == j { (0.75 - w, 0.75 + w) } else { (-w, w) };
            let v = raw[(i, j)];
            let c = v.clamp(lo, hi);
            if c != v {
                clamped_entries += 1;
            }
            p[(i, j)] = c;
            p[(j, i)] = c;
        }
    }
    let sigma = linalg::sym_inverse(&p)?;
    Ok(Projection {
        sigma,
        precision: p,
        clamped_entries,
        floored_eigenvalues,
    })
}

/// Turns a covariance estimate into an estimate of `η₀ − m`: project onto
/// the support, invert, split the precision as `Ũ + Ũᵀ` with `Ũ`
/// upper-triangular, and return `2Ũ♭ − m`.
pub fn nat_param_est(sigma_hat: &Mat, d: usize, m: &[f64]) -> Result<Estimate> {
    if sigma_hat.shape() != (d, d) {
        return Err(MechError::Invalid(format!(
            "expected a {d}x{d} covariance, got {:?}",
            sigma_hat.shape()
        )));
    }
    if m.len() != d * d {
        return Err(MechError::Invalid(format!(
            "midpoint has length {}, expected {}",
            m.len(),
            d * d
        )));
    }
    let proj = project_to_support(sigma_hat)?;
    let eta0 = crate::expfam::eta0_from_precision(&proj.precision)?;
    let prior = cov_prior(d)?;
    let mut clamped = proj.clamped_entries;
    let value = eta0
        .iter()
        .zip(prior.lo().iter().zip(prior.hi()))
        .zip(m)
        .map(|((e, (lo, hi)), mj)| {
            // Guards against rounding at the box faces only.
            let c = e.clamp(*lo, *hi);
            if c != *e {
                clamped += 1;
            }
            c - mj
        })
        .collect();
    Ok(Estimate {
        kind: EstimateKind::NatParamDeviation,
        value,
        clamped,
    })
}

/// `ln((1 − p̂_j)/p̂_j)` after clamping `p̂` into `[1/3, 2/3]`; the result
/// lies in `[−ln 2, ln 2]`.
pub fn logit_reduction(p_hat: &[f64]) -> Estimate {
    let mut clamped = 0;
    let value = p_hat
        .iter()
        .map(|&p| {
            let c = if p.is_nan() { 0.5 } else { p.clamp(1.0 / 3.0, 2.0 / 3.0) };
            if c != p {
                clamped += 1;
            }
            ((1.0 - c) / c).ln().clamp(-LN_2, LN_2)
        })
        .collect();
    Estimate {
        kind: EstimateKind::NatParamDeviation,
        value,
        clamped,
    }
}

/// The midpoint estimate: zero deviation.
pub fn constant_mech(prior: &PriorBox) -> Estimate {
    Estimate {
        kind: EstimateKind::NatParamDeviation,
        value: vec![0.0; prior.dim()],
        clamped: 0,
    }
}

/// A mechanism for one of the built-in families.
///
/// For the Bernoulli family the plug-in estimates the frequency of zeros,
/// `1 − x̄_j = 1/(1 + e^{η_j})`, and maps it through [`logit_reduction`],
/// which recovers `η_j`.
#[derive(Clone, Debug)]
pub struct NatParamMechanism {
    spec: MechanismSpec,
    model: ExpFamilyModel,
    midpoint: Vec<f64>,
}

impl NatParamMechanism {
    pub fn new(
        id: MechanismId,
        model: ExpFamilyModel,
        prior: PriorBox,
        epsilon: f64,
        delta: f64,
        clip: Option<f64>,
    ) -> Result<Self> {
        if prior.dim() != model.param_dim() {
            return Err(MechError::Invalid(format!(
                "prior has {} coordinates, family has {}",
                prior.dim(),
                model.param_dim()
            )));
        }
        let (epsilon, delta, clip) = match id {
            MechanismId::Constant => (0.0, 0.0, None),
            MechanismId::PlugIn => (f64::INFINITY, 1.0, None),
            MechanismId::Gaussian => {
                let c = clip.ok_or_else(|| {
                    MechError::Invalid("the gaussian mechanism needs a clip radius".into())
                })?;
                check_privacy(epsilon, delta, c)?;
                (epsilon, delta, Some(c))
            }
        };
        Ok(Self {
            midpoint: prior.midpoint(),
            spec: MechanismSpec {
                id,
                epsilon,
                delta,
                clip,
                range: prior,
                data_independent: id == MechanismId::Constant,
            },
            model,
        })
    }

    pub fn constant(model: ExpFamilyModel, prior: PriorBox) -> Result<Self> {
        Self::new(MechanismId::Constant, model, prior, 0.0, 0.0, None)
    }

    pub fn plug_in(model: ExpFamilyModel, prior: PriorBox) -> Result<Self> {
        Self::new(MechanismId::PlugIn, model, prior, 0.0, 0.0, None)
    }

    pub fn gaussian(
        model: ExpFamilyModel,
        prior: PriorBox,
        epsilon: f64,
        delta: f64,
        clip: f64,
    ) -> Result<Self> {
        Self::new(MechanismId::Gaussian, model, prior, epsilon, delta, Some(clip))
    }

    fn finish(&self, eta_hat: Vec<f64>, clamped: usize, kind: EstimateKind) -> Estimate {
        let mut value: Vec<f64> = eta_hat.iter().zip(&self.midpoint).map(|(e, m)| e - m).collect();
        let moved = self.spec.range.clamp_deviation(&mut value);
        Estimate {
            kind,
            value,
            clamped: clamped + moved,
        }
    }
}

impl Mechanism for NatParamMechanism {
    fn spec(&self) -> &MechanismSpec {
        &self.spec
    }

    fn release(&self, x: &Dataset, rng: &mut dyn RngCore) -> Result<Estimate> {
        if x.d() != self.model.sample_dim() {
            return Err(MechError::Invalid(format!(
                "dataset dimension {} does not match the family's {}",
                x.d(),
                self.model.sample_dim()
            )));
        }
        let spec = &self.spec;
        match spec.id {
            MechanismId::Constant => Ok(constant_mech(&spec.range)),
            MechanismId::PlugIn | MechanismId::Gaussian => {
                let private = spec.id == MechanismId::Gaussian;
                let clip = spec.clip.unwrap_or(f64::INFINITY);
                match self.model.family() {
                    FamilyId::BernoulliProduct => {
                        let mean = if private {
                            gauss_mech_mean(x, spec.epsilon, spec.delta, clip, rng)?
                        } else {
                            empirical_mean(x)?
                        };
                        let zeros: Vec<f64> = mean.iter().map(|v| 1.0 - v).collect();
                        let est = logit_reduction(&zeros);
                        Ok(self.finish(est.value, est.clamped, EstimateKind::NatParamDeviation))
                    }
                    FamilyId::GaussianMean => {
                        let mean = if private {
                            gauss_mech_mean(x, spec.epsilon, spec.delta, clip, rng)?
                        } else {
                            empirical_mean(x)?
                        };
                        Ok(self.finish(mean, 0, EstimateKind::NatParamDeviation))
                    }
                    FamilyId::GaussianCovariance => {
                        let d = x.d();
                        let sigma_hat = if private {
                            gauss_mech_covariance(x, spec.epsilon, spec.delta, clip, rng)?
                        } else {
                            empirical_covariance(x)?
                        };
                        let est = nat_param_est(&sigma_hat, d, &self.midpoint)?;
                        let mut value = est.value;
                        let moved = spec.range.clamp_deviation(&mut value);
                        Ok(Estimate {
                            kind: EstimateKind::NatParamDeviation,
                            value,
                            clamped: est.clamped + moved,
                        })
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::expfam::eta0_from_precision;
    use crate::hard_instances::cov_samp;
    use crate::linalg::mahalanobis_mat;
    use crate::rng::stream;
    use crate::stats::MeanSe;
    use proptest::prelude::*;

    #[test]
    fn empirical_covariance_examples() {
        let x = Dataset::from_rows(&[[1.0, 0.0]]).unwrap();
        assert_eq!(
            empirical_covariance(&x).unwrap(),
            Mat::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap()
        );
        let z = Dataset::new(3, 2, vec![0.0; 6]).unwrap();
        assert_eq!(empirical_covariance(&z).unwrap(), Mat::zeros(2, 2));
        let empty = Dataset::new(0, 2, vec![]).unwrap();
        assert_eq!(empirical_covariance(&empty), Err(MechError::EmptyDataset));
    }

    #[test]
    fn empirical_covariance_tracks_sigma() {
        let inst = cov_samp(3, &mut stream(1, &[])).unwrap();
        let model = ExpFamilyModel::gaussian_covariance(3).unwrap();
        let x = model.sample(&inst.eta0, 100_000, &mut stream(2, &[])).unwrap();
        let s = empirical_covariance(&x).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let prods: Vec<f64> = x.rows().map(|r| r[i] * r[j]).collect();
                let m = MeanSe::from_samples(&prods);
                assert!((s[(i, j)] - m.mean).abs() < 1e-12);
                assert!(m.within(inst.sigma[(i, j)], 3.0));
            }
        }
    }

    #[test]
    fn privacy_parameter_validation() {
        let x = Dataset::from_rows(&[[1.0, 0.0]]).unwrap();
        let mut rng = stream(0, &[]);
        assert!(matches!(
            gauss_mech_covariance(&x, 0.0, 1e-5, 1.0, &mut rng),
            Err(MechError::Privacy(_))
        ));
        assert!(matches!(
            gauss_mech_mean(&x, 1.0, 1.0, 1.0, &mut rng),
            Err(MechError::Privacy(_))
        ));
        assert!(matches!(
            gauss_mech_mean(&x, 1.0, 0.1, -1.0, &mut rng),
            Err(MechError::Invalid(_))
        ));
    }

    #[test]
    fn infinite_epsilon_is_noiseless() {
        let x = Dataset::from_rows(&[[3.0, 4.0], [0.3, 0.4]]).unwrap();
        let mut rng = stream(0, &[]);
        let c = gauss_mech_covariance(&x, f64::INFINITY, 1e-5, 1.0, &mut rng).unwrap();
        assert_eq!(c, empirical_covariance(&clip_rows(&x, 1.0)).unwrap());
        let m = gauss_mech_mean(&x, f64::INFINITY, 1e-5, 1.0, &mut rng).unwrap();
        assert_eq!(m, empirical_mean(&clip_rows(&x, 1.0)).unwrap());
    }

    #[test]
    fn gaussian_covariance_is_symmetric_and_reproducible() {
        let x = ExpFamilyModel::gaussian_mean(2)
            .unwrap()
            .sample(&[0.0, 0.0], 100, &mut stream(5, &[]))
            .unwrap();
        let a = gauss_mech_covariance(&x, 0.5, 1e-5, 2.0, &mut stream(6, &[])).unwrap();
        let b = gauss_mech_covariance(&x, 0.5, 1e-5, 2.0, &mut stream(6, &[])).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        assert_eq!(a.asymmetry().unwrap(), 0.0);
    }

    #[test]
    fn mean_noise_has_calibrated_scale() {
        let x = Dataset::from_rows(&[[0.6, 0.0]; 10]).unwrap();
        let sigma = mean_noise_scale(10, 1.0, 1e-5, 1.0).unwrap();
        let noise: Vec<f64> = (0..10_000u64)
            .map(|t| gauss_mech_mean(&x, 1.0, 1e-5, 1.0, &mut stream(7, &[t])).unwrap()[0] - 0.6)
            .collect();
        let sq: Vec<f64> = noise.iter().map(|z| z * z).collect();
        let var = MeanSe::from_samples(&sq);
        // Delta method: se(std) = se(var) / (2 std).
        let std = var.mean.sqrt();
        assert!((std - sigma).abs() <= 3.0 * var.se / (2.0 * std), "{std} vs {sigma}");
    }

    #[test]
    fn projection_fixed_point() {
        let mut rng = stream(8, &[]);
        for d in [1usize, 2, 3, 5] {
            let inst = cov_samp(d, &mut rng).unwrap();
            let m = cov_prior(d).unwrap().midpoint();
            let est = nat_param_est(&inst.sigma, d, &m).unwrap();
            assert_eq!(est.clamped, 0);
            for (l, v) in est.value.iter().enumerate() {
                assert!((v - (inst.eta0[l] - m[l])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nat_param_identity_d1() {
        let est = nat_param_est(&Mat::identity(1), 1, &[0.75]).unwrap();
        assert!((est.value[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn logit_examples() {
        assert_eq!(logit_reduction(&[0.5]).value, vec![0.0]);
        assert!((logit_reduction(&[1.0 / 3.0]).value[0] - LN_2).abs() < 1e-15);
        let e = logit_reduction(&[0.9, 0.1, 0.5]);
        assert_eq!(e.clamped, 2);
        assert!((e.value[0] + LN_2).abs() < 1e-15 && (e.value[1] - LN_2).abs() < 1e-15);
    }

    #[test]
    fn logit_mse_inflation_at_most_81_over_4() {
        let mut rng = stream(9, &[]);
        let mut num = Vec::new();
        let mut den = Vec::new();
        for _ in 0..20_000 {
            let p: f64 = rng.random_range(1.0 / 3.0..2.0 / 3.0);
            let err: f64 = rng.random_range(-0.1..0.1);
            let est = logit_reduction(&[p + err]).value[0];
            let truth = ((1.0 - p) / p).ln();
            num.push((est - truth).powi(2));
            den.push(err * err);
        }
        let ratio = MeanSe::from_samples(&num).mean / MeanSe::from_samples(&den).mean;
        assert!(ratio <= 81.0 / 4.0, "{ratio}");
        for (n, d) in num.iter().zip(&den) {
            assert!(*n <= 81.0 / 4.0 * d + 1e-15);
        }
    }

    #[test]
    fn constant_mech_mse_is_uniform_variance() {
        let prior = cov_prior(3).unwrap();
        let est = constant_mech(&prior);
        assert!(est.value.iter().all(|&v| v == 0.0));
        let m = prior.midpoint();
        let errs: Vec<f64> = (0..20_000u64)
            .map(|t| {
                let eta = prior.sample_uniform(&mut stream(10, &[t]));
                let dev: Vec<f64> = eta.iter().zip(&m).map(|(a, b)| a - b).collect();
                est.sq_error(&dev)
            })
            .collect();
        let s = MeanSe::from_samples(&errs);
        assert!(s.within(prior.r_norm_sq() / 12.0, 3.0), "{s:?}");
    }

    #[test]
    fn reduction_chain_inequality() {
        let mut rng = stream(11, &[]);
        for _ in 0..300 {
            let d = rng.random_range(1..=4usize);
            let inst = cov_samp(d, &mut rng).unwrap();
            let scale: f64 = rng.random_range(0.0..1.5);
            let e = Mat::from_fn(d, d, |_, _| rng.random_range(-scale..scale));
            let sigma_hat = (&inst.sigma + &e).symmetrize().unwrap();
            let proj = project_to_support(&sigma_hat).unwrap();
            let lhs = (&proj.precision - &inst.precision).frobenius_norm();
            let rhs = 4.0 * mahalanobis_mat(&(&sigma_hat - &inst.sigma), &inst.sigma).unwrap();
            assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
        }
    }

    #[test]
    fn bernoulli_plug_in_recovers_parameter() {
        let model = ExpFamilyModel::bernoulli_product(2).unwrap();
        let prior = crate::hard_instances::product_prior(2).unwrap();
        let mech = NatParamMechanism::plug_in(model, prior).unwrap();
        let eta = [0.4, -0.2];
        let x = model.sample(&eta, 200_000, &mut stream(12, &[])).unwrap();
        let est = mech.release(&x, &mut stream(13, &[])).unwrap();
        for j in 0..2 {
            assert!((est.value[j] - eta[j]).abs() < 0.03, "{:?}", est.value);
        }
    }

    #[test]
    fn gaussian_mechanism_requires_clip() {
        let model = ExpFamilyModel::gaussian_mean(2).unwrap();
        let prior = crate::hard_instances::gaussian_mean_prior(2).unwrap();
        assert!(NatParamMechanism::new(MechanismId::Gaussian, model, prior, 1.0, 1e-5, None).is_err());
    }

    proptest! {
        #[test]
        fn clipping_never_increases_norms(rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 1..20),
                                          c in 0.1f64..5.0) {
            let x = Dataset::from_rows(&rows).unwrap();
            let y = clip_rows(&x, c);
            for (a, b) in x.rows().zip(y.rows()) {
                let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
                let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!(nb <= na + 1e-12 && nb <= c * (1.0 + 1e-12));
                if na <= c {
                    prop_assert_eq!(a, b);
                }
            }
        }

        #[test]
        fn nat_param_output_in_box(seed in 0u64..10_000, d in 1usize..5, scale in 0.0f64..3.0) {
            let mut rng = stream(seed, &[]);
            let inst = cov_samp(d, &mut rng).unwrap();
            let e = Mat::from_fn(d, d, |_, _| rng.random_range(-scale..=scale));
            let sigma_hat = (&inst.sigma + &e).symmetrize().unwrap();
            let prior = cov_prior(d).unwrap();
            let est = nat_param_est(&sigma_hat, d, &prior.midpoint()).unwrap();
            prop_assert!(prior.contains_deviation(&est.value));
            let eta_tilde: Vec<f64> = est.value.iter().zip(prior.midpoint()).map(|(a, b)| a + b).collect();
            let p = ExpFamilyModel::gaussian_covariance(d).unwrap().precision(&eta_tilde).unwrap();
            let back = eta0_from_precision(&p).unwrap();
            for (u, v) in back.iter().zip(&eta_tilde) {
                prop_assert!((u - v).abs() < 1e-14);
            }
        }
    }
}
