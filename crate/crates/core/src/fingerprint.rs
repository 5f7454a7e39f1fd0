//! Correlation statistics and Monte Carlo estimates of the fingerprinting
//! quantities.
//!
//! With `η ~ U(box)`, `X ~ p_η^{⊗n}` and an estimate `a = M(X)` of `η − m`,
//! the correlation of coordinate `j` with sample `i` is
//!
//! ```text
//! Z_i^j = [R_j²/4 − (η_j − m_j)²] · [a_j − (η_j − m_j)] · (T_j(X_i) − μ_{T,j})
//! ```
//!
//! and for every estimator `E[Z + ‖a − (η − m)‖²] ≥ ‖R‖²/12`, with equality
//! for the constant estimator. Privacy caps each `E[Z_i]` by
//! `2δT + 2ε√(E[sᵀΣ_T s]) + 2∫_T^∞ P[W > t] dt`, where
//! `W = ‖T(X) − μ_T‖·‖R‖∞³√k/4` and `s` is the weight vector computed from a
//! dataset with sample `i` resampled.
//!
//! All Monte Carlo loops run trials in parallel on independent streams and
//! aggregate in trial order.

use std::f64::consts::{LN_2, PI};

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expfam::{ExpFamError, ExponentialFamily, FamilyId};
use crate::hard_instances::{cov_prior, gaussian_mean_prior, product_prior, InstanceError, PriorBox};
use crate::linalg::{self, kronecker, transpose_flatten, FlatVec, LinalgError, Mat};
use crate::mechanisms::{MechError, Mechanism};
use crate::rng::stream;
use crate::stats::{self, MeanSe};

/// Absolute constant of the Gaussian Hanson-Wright inequality.
pub const HANSON_WRIGHT_C: f64 = 0.036425;

/// Slack allowed when checking that an estimate lies in the deviation box.
const RANGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FingerprintError {
    #[error("estimate coordinate {j} = {value} outside [−{half}, {half}]")]
    EstimateRange { j: usize, value: f64, half: f64 },
    #[error("parameter outside the prior box")]
    ParamRange,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    ExpFam(#[from] ExpFamError),
    #[error(transparent)]
    Mech(#[from] MechError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, FingerprintError>;

/// `Z_i^j` and its row, column and total sums.
#[derive(Clone, Debug)]
pub struct CorrStats {
    pub n: usize,
    pub k: usize,
    /// Row-major `n x k`.
    pub z_ij: Vec<f64>,
    pub z_i: Vec<f64>,
    pub z_j: Vec<f64>,
    pub z_total: f64,
}

/// `w_j = R_j²/4 − (η_j − m_j)²` and `dev_j = η_j − m_j`.
fn weights(prior: &PriorBox, eta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let dev: Vec<f64> = eta.iter().zip(prior.midpoint()).map(|(e, m)| e - m).collect();
    let w = prior
        .widths()
        .iter()
        .zip(&dev)
        .map(|(r, d)| r * r / 4.0 - d * d)
        .collect();
    (w, dev)
}

fn check_estimate(prior: &PriorBox, a: &[f64]) -> Result<()> {
    if a.len() != prior.dim() {
        return Err(FingerprintError::Dimension {
            expected: prior.dim(),
            got: a.len(),
        });
    }
    for (j, (v, r)) in a.iter().zip(prior.widths()).enumerate() {
        let half = 0.5 * r;
        if !(v.abs() <= half + RANGE_TOL * half.max(1.0)) {
            return Err(FingerprintError::EstimateRange { j, value: *v, half });
        }
    }
    Ok(())
}

/// Computes every `Z_i^j` for one dataset and estimate.
pub fn corr_stats(
    model: &dyn ExponentialFamily,
    prior: &PriorBox,
    eta: &[f64],
    x: &crate::expfam::Dataset,
    a: &[f64],
) -> Result<CorrStats> {
    let k = model.param_dim();
    if prior.dim() != k {
        return Err(FingerprintError::Dimension {
            expected: k,
            got: prior.dim(),
        });
    }
    if !prior.contains(eta) {
        return Err(FingerprintError::ParamRange);
    }
    check_estimate(prior, a)?;
    let mu = model.mean_suff(eta)?;
    let (w, dev) = weights(prior, eta);
    let coef: Vec<f64> = (0..k).map(|j| w[j] * (a[j] - dev[j])).collect();
    let n = x.n();
    let mut z_ij = Vec::with_capacity(n * k);
    for row in x.rows() {
        let t = model.suff_stats(row);
        z_ij.extend((0..k).map(|j| coef[j] * (t[j] - mu[j])));
    }
    let z_i: Vec<f64> = z_ij.chunks_exact(k).map(stats::pairwise_sum).collect();
    let z_j: Vec<f64> = (0..k)
        .map(|j| {
            let col: Vec<f64> = (0..n).map(|i| z_ij[i * k + j]).collect();
            stats::pairwise_sum(&col)
        })
        .collect();
    let z_total = stats::pairwise_sum(&z_i);
    Ok(CorrStats {
        n,
        k,
        z_ij,
        z_i,
        z_j,
        z_total,
    })
}

/// One trial of [`fingerprint_lhs`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FingerprintTrial {
    pub z: f64,
    pub sq_err: f64,
    pub lhs: f64,
}

#[derive(Clone, Debug)]
pub struct FingerprintEstimate {
    /// `Ê[Z + ‖a − (η − m)‖²]`.
    pub lhs: MeanSe,
    pub mse: MeanSe,
    pub ez: MeanSe,
    /// `Ê[Z^j + (a_j − (η_j − m_j))²]` per coordinate.
    pub per_coord: Vec<MeanSe>,
    pub widths: Vec<f64>,
    pub r_norm_sq: f64,
    pub trials: Vec<FingerprintTrial>,
}

impl FingerprintEstimate {
    /// `‖R‖²/12`.
    pub fn lower_bound(&self) -> f64 {
        self.r_norm_sq / 12.0
    }
}

/// Monte Carlo estimate of `E[Z + ‖a − (η − m)‖²]` over
/// `η ~ U(box)`, `X ~ p_η^{⊗n}` and the mechanism's randomness.
pub fn fingerprint_lhs(
    model: &dyn ExponentialFamily,
    prior: &PriorBox,
    mech: &dyn Mechanism,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<FingerprintEstimate> {
    if trials == 0 || n == 0 {
        return Err(FingerprintError::Invalid("n and trials must be positive".into()));
    }
    let k = model.param_dim();
    let results: Vec<(FingerprintTrial, Vec<f64>)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, &[t]);
            let eta = prior.sample_uniform(&mut rng);
            let x = model.sample(&eta, n, &mut rng)?;
            let a = mech.release(&x, &mut rng)?;
            let cs = corr_stats(model, prior, &eta, &x, &a.value)?;
            let (_, dev) = weights(prior, &eta);
            let errs: Vec<f64> = (0..k).map(|j| (a.value[j] - dev[j]).powi(2)).collect();
            let sq_err = stats::pairwise_sum(&errs);
            let per: Vec<f64> = (0..k).map(|j| cs.z_j[j] + errs[j]).collect();
            let trial = FingerprintTrial {
                z: cs.z_total,
                sq_err,
                lhs: cs.z_total + sq_err,
            };
            Ok((trial, per))
        })
        .collect::<Result<_>>()?;
    let column = |f: fn(&FingerprintTrial) -> f64| -> Vec<f64> {
        results.iter().map(|(t, _)| f(t)).collect()
    };
    let per_coord = (0..k)
        .map(|j| MeanSe::from_samples(&results.iter().map(|(_, p)| p[j]).collect::<Vec<_>>()))
        .collect();
    Ok(FingerprintEstimate {
        lhs: MeanSe::from_samples(&column(|t| t.lhs)),
        mse: MeanSe::from_samples(&column(|t| t.sq_err)),
        ez: MeanSe::from_samples(&column(|t| t.z)),
        per_coord,
        widths: prior.widths(),
        r_norm_sq: prior.r_norm_sq(),
        trials: results.into_iter().map(|(t, _)| t).collect(),
    })
}

/// `s_j = [R_j²/4 − (η_j − m_j)²] · [a_j − (η_j − m_j)]` for an estimate
/// computed on a dataset with one sample resampled.
pub fn s_vector(prior: &PriorBox, eta: &[f64], a_resampled: &[f64]) -> Result<Vec<f64>> {
    if eta.len() != prior.dim() {
        return Err(FingerprintError::Dimension {
            expected: prior.dim(),
            got: eta.len(),
        });
    }
    check_estimate(prior, a_resampled)?;
    let (w, dev) = weights(prior, eta);
    Ok((0..prior.dim())
        .map(|j| w[j] * (a_resampled[j] - dev[j]))
        .collect())
}

#[derive(Clone, Debug)]
pub struct ZtildeMoments {
    /// `Ê[Z̃_i]`; zero in expectation.
    pub mean: MeanSe,
    /// Unbiased sample variance of `Z̃_i`.
    pub variance: f64,
    pub variance_se: f64,
    /// `Ê[sᵀΣ_T s]` from the closed-form `Σ_T`.
    pub sts: MeanSe,
    /// Paired differences `Z̃_i² − sᵀΣ_T s`; zero in expectation.
    pub excess: MeanSe,
    pub values: Vec<f64>,
    pub sts_values: Vec<f64>,
}

/// At fixed `η`, draws `X`, a fresh `X_i'`, releases `a` on `X` with row `i`
/// replaced, and records `Z̃_i = ⟨s, T(X_i) − μ_T⟩` together with
/// `sᵀΣ_T s`.
#[allow(clippy::too_many_arguments)]
pub fn ztilde_moments(
    model: &dyn ExponentialFamily,
    prior: &PriorBox,
    eta: &[f64],
    mech: &dyn Mechanism,
    n: usize,
    i: usize,
    trials: usize,
    seed: u64,
) -> Result<ZtildeMoments> {
    if i >= n {
        return Err(FingerprintError::Invalid(format!("sample index {i} out of range for n = {n}")));
    }
    if trials < 2 {
        return Err(FingerprintError::Invalid("need at least two trials".into()));
    }
    if !prior.contains(eta) {
        return Err(FingerprintError::ParamRange);
    }
    let mu = model.mean_suff(eta)?;
    let pairs: Vec<(f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, &[t]);
            let x = model.sample(eta, n, &mut rng)?;
            let fresh = model.sample(eta, 1, &mut rng)?;
            let resampled = x.with_row(i, fresh.row(0));
            let a = mech.release(&resampled, &mut rng)?;
            let s = s_vector(prior, eta, &a.value)?;
            let t_xi = model.suff_stats(x.row(i));
            let zt: f64 = s.iter().zip(t_xi.iter().zip(&mu)).map(|(sj, (tj, mj))| sj * (tj - mj)).sum();
            let sts = model.suff_cov_quad_form(eta, &s)?;
            Ok((zt, sts))
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let sts: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let excess: Vec<f64> = pairs.iter().map(|(z, s)| z * z - s).collect();
    Ok(ZtildeMoments {
        mean: MeanSe::from_samples(&values),
        variance: stats::sample_variance(&values),
        variance_se: stats::variance_se(&values),
        sts: MeanSe::from_samples(&sts),
        excess: MeanSe::from_samples(&excess),
        values,
        sts_values: sts,
    })
}

/// `∫_T^∞ P̂[W > t] dt` for the empirical distribution of `w`, which equals
/// `mean((W − T)₊)` exactly.
pub fn empirical_tail_integral(w: &[f64], t_thresh: f64) -> f64 {
    let excess: Vec<f64> = w.iter().map(|v| (v - t_thresh).max(0.0)).collect();
    stats::mean(&excess)
}

#[derive(Clone, Debug, Serialize)]
pub struct TailIntegral {
    pub value: f64,
    pub max_w: f64,
    pub mean_w: f64,
    pub n_mc: usize,
    /// Closed-form bound on the neglected mass beyond `max_w`, when one is
    /// known for this family and prior.
    pub truncation_bound: Option<f64>,
}

/// Scale turning `‖T(X) − μ_T‖` into `W`.
pub fn w_scale(prior: &PriorBox) -> f64 {
    prior.r_inf().powi(3) * (prior.dim() as f64).sqrt() / 4.0
}

/// `n_mc` draws of `W = ‖T(X) − μ_T‖·‖R‖∞³√k/4` with `X ~ p_η`.
pub fn w_samples(
    model: &dyn ExponentialFamily,
    eta: &[f64],
    prior: &PriorBox,
    n_mc: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    let mu = model.mean_suff(eta)?;
    let scale = w_scale(prior);
    let x = model.sample(eta, n_mc, rng)?;
    Ok(x.rows()
        .map(|r| {
            let t = model.suff_stats(r);
            let sq: f64 = t.iter().zip(&mu).map(|(a, b)| (a - b) * (a - b)).sum();
            sq.sqrt() * scale
        })
        .collect())
}

/// Empirical estimate of `∫_T^∞ P[‖T(X) − μ_T‖ > 4t/(‖R‖∞³√k)] dt` at `η`.
pub fn tail_integral(
    model: &dyn ExponentialFamily,
    eta: &[f64],
    prior: &PriorBox,
    t_thresh: f64,
    n_mc: usize,
    rng: &mut dyn RngCore,
) -> Result<TailIntegral> {
    if !(t_thresh >= 0.0) {
        return Err(FingerprintError::Invalid(format!("threshold {t_thresh} must be non-negative")));
    }
    if n_mc == 0 {
        return Err(FingerprintError::Invalid("n_mc must be positive".into()));
    }
    let w = w_samples(model, eta, prior, n_mc, rng)?;
    let max_w = w.iter().fold(0.0f64, |m, v| m.max(*v));
    Ok(TailIntegral {
        value: empirical_tail_integral(&w, t_thresh),
        max_w,
        mean_w: stats::mean(&w),
        n_mc,
        truncation_bound: family_tail_bound(model, prior, max_w.max(t_thresh)),
    })
}

/// Closed-form bound on the tail integral at `t_thresh` for the three
/// standard hard instances, or `None` if `prior` is not one of them or the
/// bound's validity condition on `t_thresh` fails.
pub fn family_tail_bound(model: &dyn ExponentialFamily, prior: &PriorBox, t_thresh: f64) -> Option<f64> {
    let d = model.sample_dim();
    match model.family_id()? {
        FamilyId::GaussianCovariance if *prior == cov_prior(d).ok()? => covariance_tail_bound(d, t_thresh).ok(),
        FamilyId::GaussianMean if *prior == gaussian_mean_prior(d).ok()? => {
            gaussian_mean_tail_bound(d, t_thresh).ok()
        }
        FamilyId::BernoulliProduct if *prior == product_prior(d).ok()? => {
            (t_thresh >= product_threshold(d)).then_some(0.0)
        }
        _ => None,
    }
}

/// `(2/(3cd²))·exp(−d²(3cT − 2 ln 3))`, valid for `T ≥ 1/(3d²)`.
pub fn covariance_tail_bound(d: usize, t_thresh: f64) -> Result<f64> {
    let d2 = (d * d) as f64;
    if t_thresh < 1.0 / (3.0 * d2) {
        return Err(FingerprintError::Invalid(format!(
            "covariance tail bound needs T ≥ 1/(3d²) = {}",
            1.0 / (3.0 * d2)
        )));
    }
    let c = HANSON_WRIGHT_C;
    Ok(2.0 / (3.0 * c * d2) * (-d2 * (3.0 * c * t_thresh - 2.0 * 3f64.ln())).exp())
}

/// `√(2πd)·exp(−(√(T² − 2d²) − √2·d)²/(8d))`, valid for `T ≥ 2d`.
pub fn gaussian_mean_tail_bound(d: usize, t_thresh: f64) -> Result<f64> {
    let df = d as f64;
    if t_thresh < 2.0 * df {
        return Err(FingerprintError::Invalid(format!("gaussian mean tail bound needs T ≥ 2d = {}", 2.0 * df)));
    }
    let u = (t_thresh * t_thresh - 2.0 * df * df).sqrt() - 2f64.sqrt() * df;
    Ok((2.0 * PI * df).sqrt() * (-u * u / (8.0 * df)).exp())
}

/// Threshold `(1/(3c))(2 ln 3 + ln(1/δ)/d²)` balancing the δ and tail terms
/// for the covariance instance.
pub fn covariance_threshold(d: usize, delta: f64) -> f64 {
    let d2 = (d * d) as f64;
    (2.0 * 3f64.ln() + (1.0 / delta).ln() / d2) / (3.0 * HANSON_WRIGHT_C)
}

/// Threshold `2√d·√(L + (√L + √d)²)`, `L = ln(1/δ)`, for the Gaussian mean
/// instance.
pub fn gaussian_mean_threshold(d: usize, delta: f64) -> f64 {
    let df = d as f64;
    let l = (1.0 / delta).ln();
    2.0 * df.sqrt() * (l + (l.sqrt() + df.sqrt()).powi(2)).sqrt()
}

/// `4 ln³2·d/3`, the largest value `W` can take for the product instance.
pub fn product_threshold(d: usize) -> f64 {
    4.0 * LN_2.powi(3) * d as f64 / 3.0
}

/// Parameters of [`theorem_terms`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoremParams {
    pub n: usize,
    pub t_thresh: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Draws of `η`.
    pub outer: usize,
    /// Draws of `(X, X_i', mechanism)` per `η`.
    pub inner: usize,
    /// Samples per tail-integral estimate.
    pub tail_mc: usize,
}

/// Per-`η` quantities of [`theorem_terms`].
#[derive(Clone, Debug, Serialize)]
pub struct OuterRecord {
    pub sts_mean: f64,
    pub sqrt_sts: f64,
    pub mse: f64,
    pub ez_i: f64,
    pub tail: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoremTerms {
    pub params: TheoremParams,
    /// `2δT`.
    pub term_delta: f64,
    /// `2ε·Ê_η[√(Ê[sᵀΣ_T s])]`.
    pub term_eps: MeanSe,
    /// `2ε·max_η √(Ê[sᵀΣ_T s])` over the sampled `η`.
    pub term_eps_max: f64,
    /// `2·Ê_η[tail integral]`.
    pub term_tail: MeanSe,
    pub total: f64,
    /// `‖R‖²/24`.
    pub rhs: f64,
    /// Whether `n·total ≥ ‖R‖²/24`.
    pub holds: bool,
    /// `‖R‖²/(96ε·Ê_η√(Ê sᵀΣ_T s))`.
    pub implied_n_bound: f64,
    /// `‖R‖²/(48ε·Ê_η√(Ê sᵀΣ_T s))`, the pure-DP version.
    pub pure_dp_n_bound: f64,
    /// Mean over `η` of `Ê[sᵀΣ_T s]`.
    pub sts: MeanSe,
    /// Mean over `η` of the mechanism's squared error.
    pub mse: MeanSe,
    /// Per-sample correlation `Ê[Z_i]`.
    pub ez_i: MeanSe,
    /// `Ê[Z_i]` exceeds the privacy ceiling `total` by more than 3 SE.
    pub exceeds_ceiling: bool,
    pub outer_records: Vec<OuterRecord>,
}

/// Two-level Monte Carlo assembly of the three terms of the fingerprinting
/// inequality.
pub fn theorem_terms(
    model: &dyn ExponentialFamily,
    prior: &PriorBox,
    mech: &dyn Mechanism,
    params: &TheoremParams,
    seed: u64,
) -> Result<TheoremTerms> {
    let TheoremParams {
        n,
        t_thresh,
        epsilon,
        delta,
        outer,
        inner,
        tail_mc,
    } = *params;
    if n == 0 || outer == 0 || inner == 0 || tail_mc == 0 {
        return Err(FingerprintError::Invalid("n and all trial counts must be positive".into()));
    }
    if !(0.0..=1.0).contains(&epsilon) || !(delta >= 0.0) || !(t_thresh > 0.0) {
        return Err(FingerprintError::Invalid(format!(
            "need ε ∈ [0, 1], δ ≥ 0, T > 0; got ε = {epsilon}, δ = {delta}, T = {t_thresh}"
        )));
    }
    let records: Vec<OuterRecord> = (0..outer as u64)
        .into_par_iter()
        .map(|o| -> Result<OuterRecord> {
            let mut rng = stream(seed, &[o]);
            let eta = prior.sample_uniform(&mut rng);
            let mu = model.mean_suff(&eta)?;
            let (w, dev) = weights(prior, &eta);
            let mut sts = Vec::with_capacity(inner);
            let mut mse = Vec::with_capacity(inner);
            let mut ez = Vec::with_capacity(inner);
            for j in 0..inner as u64 {
                let mut rng = stream(seed, &[o, j]);
                let x = model.sample(&eta, n, &mut rng)?;
                let fresh = model.sample(&eta, 1, &mut rng)?;
                let t0 = model.suff_stats(x.row(0));
                let a = mech.release(&x, &mut rng)?;
                check_estimate(prior, &a.value)?;
                let z0: f64 = (0..eta.len())
                    .map(|l| w[l] * (a.value[l] - dev[l]) * (t0[l] - mu[l]))
                    .sum();
                let a_res = mech.release(&x.with_row(0, fresh.row(0)), &mut rng)?;
                let s = s_vector(prior, &eta, &a_res.value)?;
                sts.push(model.suff_cov_quad_form(&eta, &s)?);
                mse.push(a_res.sq_error(&dev));
                ez.push(z0);
            }
            let mut tail_rng = stream(seed, &[o, u64::MAX]);
            let tail = tail_integral(model, &eta, prior, t_thresh, tail_mc, &mut tail_rng)?;
            let sts_mean = stats::mean(&sts);
            Ok(OuterRecord {
                sts_mean,
                sqrt_sts: sts_mean.sqrt(),
                mse: stats::mean(&mse),
                ez_i: stats::mean(&ez),
                tail: tail.value,
            })
        })
        .collect::<Result<_>>()?;
    let col = |f: fn(&OuterRecord) -> f64| -> Vec<f64> { records.iter().map(f).collect() };
    let sqrt_sts = MeanSe::from_samples(&col(|r| r.sqrt_sts));
    let tail = MeanSe::from_samples(&col(|r| r.tail));
    let term_delta = 2.0 * delta * t_thresh;
    let term_eps = MeanSe {
        mean: 2.0 * epsilon * sqrt_sts.mean,
        se: 2.0 * epsilon * sqrt_sts.se,
        n: sqrt_sts.n,
    };
    let term_tail = MeanSe {
        mean: 2.0 * tail.mean,
        se: 2.0 * tail.se,
        n: tail.n,
    };
    let term_eps_max = 2.0 * epsilon * records.iter().fold(0.0f64, |m, r| m.max(r.sqrt_sts));
    let total = term_delta + term_eps.mean + term_tail.mean;
    let r2 = prior.r_norm_sq();
    let rhs = r2 / 24.0;
    let ez_i = MeanSe::from_samples(&col(|r| r.ez_i));
    Ok(TheoremTerms {
        params: params.clone(),
        term_delta,
        term_eps,
        term_eps_max,
        term_tail,
        total,
        rhs,
        holds: n as f64 * total >= rhs,
        implied_n_bound: r2 / (96.0 * epsilon * sqrt_sts.mean),
        pure_dp_n_bound: r2 / (48.0 * epsilon * sqrt_sts.mean),
        sts: MeanSe::from_samples(&col(|r| r.sts_mean)),
        mse: MeanSe::from_samples(&col(|r| r.mse)),
        exceeds_ceiling: ez_i.mean - 3.0 * ez_i.se > total,
        ez_i,
        outer_records: records,
    })
}

/// Closed-form concentration inequalities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConcentrationBound {
    /// `P[|XᵀAX − E XᵀAX| ≥ t] ≤ 2 exp(−c·min(t²/‖A‖_F², t/‖A‖₂))` for
    /// `X ~ N(0, I)` and symmetric nonzero `A`.
    HansonWright { t: f64, frobenius: f64, spectral: f64 },
    /// `P[χ²_k ≥ t] ≤ exp(−(√(2t − k) − √k)²/4)` for `t ≥ k`.
    ChiSquareUpper { k: f64, t: f64 },
    /// `P[χ²_k ≤ t] ≤ exp(−(k − t)²/(4k))` for `t ≤ k`.
    ChiSquareLower { k: f64, t: f64 },
    /// `erfc(x) ≤ exp(−x²)` for `x ≥ 0`.
    Erfc { x: f64 },
}

impl ConcentrationBound {
    pub fn evaluate(&self) -> Result<f64> {
        let bad = |msg: String| Err(FingerprintError::Invalid(msg));
        match *self {
            ConcentrationBound::HansonWright { t, frobenius, spectral } => {
                if !(t >= 0.0) || !(frobenius > 0.0) || !(spectral > 0.0) {
                    return bad(format!(
                        "Hanson-Wright needs t ≥ 0 and positive norms, got t = {t}, ‖A‖_F = {frobenius}, ‖A‖₂ = {spectral}"
                    ));
                }
                let m = (t * t / (frobenius * frobenius)).min(t / spectral);
                Ok(2.0 * (-HANSON_WRIGHT_C * m).exp())
            }
            ConcentrationBound::ChiSquareUpper { k, t } => {
                if !(k > 0.0) || !(t >= k) {
                    return bad(format!("chi-square upper tail needs t ≥ k > 0, got k = {k}, t = {t}"));
                }
                let u = (2.0 * t - k).sqrt() - k.sqrt();
                Ok((-u * u / 4.0).exp())
            }
            ConcentrationBound::ChiSquareLower { k, t } => {
                if !(k > 0.0) || !(t <= k) || !(t >= 0.0) {
                    return bad(format!("chi-square lower tail needs 0 ≤ t ≤ k, got k = {k}, t = {t}"));
                }
                Ok((-(k - t) * (k - t) / (4.0 * k)).exp())
            }
            ConcentrationBound::Erfc { x } => {
                if !(x >= 0.0) {
                    return bad(format!("erfc bound needs x ≥ 0, got {x}"));
                }
                Ok((-x * x).exp())
            }
        }
    }
}

pub fn concentration_bound(kind: ConcentrationBound) -> Result<f64> {
    kind.evaluate()
}

/// `vᵀ E[(X⊗X)(X⊗X)ᵀ] v` for `X ~ N(0, Σ)` in closed form:
/// `vᵀΣ^{⊗2}v + vᵀΣ^{⊗2}·v' + (vᵀΣ♭)²`, `v'` the flattened transpose.
pub fn fourth_moment_quad_form(sigma: &Mat, v: &FlatVec) -> Result<f64> {
    let d = sigma.rows();
    if v.side()? != d {
        return Err(FingerprintError::Dimension {
            expected: d * d,
            got: v.len(),
        });
    }
    let k = kronecker(sigma, sigma);
    let vt = transpose_flatten(v)?;
    let vs = v.as_slice();
    let sflat = linalg::flatten(sigma)?;
    let lin: f64 = vs.iter().zip(sflat.as_slice()).map(|(a, b)| a * b).sum();
    Ok(k.bilinear(vs, vs) + k.bilinear(vs, vt.as_slice()) + lin * lin)
}

/// Monte Carlo estimate of `E[(xᵀ v# x)²]` for `x ~ N(0, Σ)`.
pub fn fourth_moment_mc(sigma: &Mat, v: &FlatVec, samples: usize, seed: u64) -> Result<MeanSe> {
    const CHUNK: usize = 1 << 14;
    let d = sigma.rows();
    let vm = linalg::unflatten(v)?;
    if vm.rows() != d {
        return Err(FingerprintError::Dimension {
            expected: d * d,
            got: v.len(),
        });
    }
    let root = linalg::sym_sqrt(sigma)?;
    let chunks = samples.div_ceil(CHUNK);
    let values: Vec<Vec<f64>> = (0..chunks as u64)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, &[c]);
            let len = CHUNK.min(samples - c as usize * CHUNK);
            let mut z = vec![0.0; d];
            (0..len)
                .map(|_| {
                    for zi in z.iter_mut() {
                        *zi = rng.sample(StandardNormal);
                    }
                    let x = root.matvec(&z);
                    let q = vm.bilinear(&x, &x);
                    q * q
                })
                .collect()
        })
        .collect();
    Ok(MeanSe::from_samples(&values.concat()))
}
