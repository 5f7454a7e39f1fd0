//! Coupling form of the private Assouad bound and its heavy-tailed
//! instantiation.
//!
//! For a hypercube family with per-coordinate separation `τ` and couplings of
//! the two coordinate mixtures at expected Hamming distance `D`, every
//! `(ε, δ)`-DP estimator has minimax risk at least
//! `(dτ/2)(0.9 e^{−10εD} − 10δD)`.

use serde::Serialize;
use thiserror::Error;

use crate::hard_instances::{HeavyTailedSpec, InstanceError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssouadError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

pub type Result<T> = std::result::Result<T, AssouadError>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AssouadParams {
    pub d: usize,
    pub tau: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Expected Hamming distance of the coupling.
    pub hamming: f64,
}

impl AssouadParams {
    pub fn new(d: usize, tau: f64, epsilon: f64, delta: f64, hamming: f64) -> Result<Self> {
        for (name, v) in [("τ", tau), ("ε", epsilon), ("δ", delta), ("D", hamming)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(AssouadError::Invalid(format!("{name} = {v} must be finite and non-negative")));
            }
        }
        Ok(Self {
            d,
            tau,
            epsilon,
            delta,
            hamming,
        })
    }

    /// The heavy-tailed family at sample size `n`: `τ = 2p²t²`, `D = np`.
    pub fn heavy_tailed(spec: &HeavyTailedSpec, n: usize, epsilon: f64, delta: f64) -> Result<Self> {
        let (p, t) = (spec.p(), spec.t());
        Self::new(spec.dim(), 2.0 * p * p * t * t, epsilon, delta, n as f64 * p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AssouadBound {
    pub value: f64,
    /// The bound is negative and says nothing.
    pub vacuous: bool,
}

/// `(dτ/2)(0.9 e^{−10εD} − 10δD)`, returned unclamped.
pub fn assouad_bound(p: &AssouadParams) -> AssouadBound {
    let value = p.d as f64 * p.tau / 2.0
        * (0.9 * (-10.0 * p.epsilon * p.hamming).exp() - 10.0 * p.delta * p.hamming);
    AssouadBound {
        value,
        vacuous: value < 0.0,
    }
}

/// `(dτ/2)(0.9 − 10D(ε + δ))`, the bound after `e^{−x} ≥ 1 − x`; never
/// larger than [`assouad_bound`].
pub fn linearized_assouad_bound(p: &AssouadParams) -> f64 {
    p.d as f64 * p.tau / 2.0 * (0.9 - 10.0 * p.hamming * (p.epsilon + p.delta))
}

/// Smallest `D` for which the linearized bound drops to `risk`:
/// `(0.9 − 2·risk/(dτ)) / (10(ε + δ))`.
pub fn required_hamming(d: usize, tau: f64, epsilon: f64, delta: f64, risk: f64) -> Result<f64> {
    if !(epsilon + delta > 0.0) || !(tau > 0.0) || d == 0 {
        return Err(AssouadError::Invalid("need d ≥ 1, τ > 0 and ε + δ > 0".into()));
    }
    Ok((0.9 - 2.0 * risk / (d as f64 * tau)) / (10.0 * (epsilon + delta)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NBound {
    pub n: f64,
    /// `δ > ε`, outside the regime where the bound reads `Ω(d/(α²ε))`.
    pub delta_exceeds_epsilon: bool,
}

/// `d/(50(ε + δ)α²)`: the sample size below which no `(ε, δ)`-DP estimator
/// reaches squared error `α²` on distributions with second moments at most 1.
pub fn heavy_tailed_n_bound(alpha: f64, d: usize, epsilon: f64, delta: f64) -> Result<NBound> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(AssouadError::Invalid(format!("α = {alpha} must lie in (0, 1]")));
    }
    if !(epsilon >= 0.0) || !(delta >= 0.0) || !(epsilon + delta > 0.0) {
        return Err(AssouadError::Invalid(format!("need ε, δ ≥ 0 with ε + δ > 0, got ε = {epsilon}, δ = {delta}")));
    }
    Ok(NBound {
        n: d as f64 / (50.0 * (epsilon + delta) * alpha * alpha),
        delta_exceeds_epsilon: delta > epsilon,
    })
}

/// `‖pt·u − pt·v‖²` for sign vectors `u`, `v`.
pub fn mixture_separation(spec: &HeavyTailedSpec, u: &[f64], v: &[f64]) -> Result<f64> {
    let d = spec.dim();
    if u.len() != d || v.len() != d {
        return Err(AssouadError::Invalid(format!("sign vectors must have length {d}")));
    }
    if u.iter().chain(v).any(|&s| s != 1.0 && s != -1.0) {
        return Err(AssouadError::Invalid("sign entries must be ±1".into()));
    }
    let pt = spec.p() * spec.t();
    Ok(u
        .iter()
        .zip(v)
        .map(|(a, b)| {
            let diff = pt * a - pt * b;
            diff * diff
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_privacy_loss() {
        let p = AssouadParams::new(7, 0.3, 0.0, 0.0, 12.0).unwrap();
        let b = assouad_bound(&p);
        assert!((b.value - 0.45 * 7.0 * 0.3).abs() < 1e-15);
        assert!(!b.vacuous);
    }

    #[test]
    fn large_hamming_is_vacuous() {
        let p = AssouadParams::new(5, 1.0, 0.1, 0.01, 1e3).unwrap();
        assert!(assouad_bound(&p).vacuous);
        assert!(AssouadParams::new(5, -1.0, 0.1, 0.0, 1.0).is_err());
    }

    #[test]
    fn n_bound_examples() {
        assert!((heavy_tailed_n_bound(1.0, 50, 1.0, 0.0).unwrap().n - 1.0).abs() < 1e-15);
        let b = heavy_tailed_n_bound(0.5, 20, 0.4, 0.1).unwrap();
        assert!((b.n - 3.2).abs() < 1e-12);
        assert!(!b.delta_exceeds_epsilon);
        assert!(heavy_tailed_n_bound(0.5, 20, 0.1, 0.4).unwrap().delta_exceeds_epsilon);
        let b1 = heavy_tailed_n_bound(0.3, 8, 0.2, 0.0).unwrap().n;
        let b2 = heavy_tailed_n_bound(0.3, 16, 0.2, 0.0).unwrap().n;
        assert!((b2 - 2.0 * b1).abs() < 1e-12);
        assert!(heavy_tailed_n_bound(1.5, 8, 0.2, 0.0).is_err());
    }

    /// With `p = 2α²/d`, `t = √d/(√2 α)` the linearized bound equals `α²`
    /// exactly when `D = 0.04/(ε + δ)`, and `D = np` gives the n bound.
    #[test]
    fn inversion_matches_n_bound() {
        for &(alpha, d, eps, delta) in &[(0.5, 20usize, 0.4, 0.1), (0.9, 3, 1.0, 0.0), (0.2, 100, 0.05, 0.01)] {
            let spec = HeavyTailedSpec::for_accuracy(alpha, vec![1.0; d]).unwrap();
            let tau = 2.0 * spec.p();
            let dh = required_hamming(d, tau, eps, delta, alpha * alpha).unwrap();
            assert!((dh - 0.04 / (eps + delta)).abs() < 1e-12 * dh);
            let n = dh / spec.p();
            let nb = heavy_tailed_n_bound(alpha, d, eps, delta).unwrap().n;
            assert!((n - nb).abs() < 1e-9 * nb, "{n} vs {nb}");
            let at = AssouadParams::new(d, tau, eps, delta, dh).unwrap();
            assert!((linearized_assouad_bound(&at) - alpha * alpha).abs() < 1e-12);
        }
    }

    #[test]
    fn separation_examples() {
        let spec = HeavyTailedSpec::for_accuracy(0.5, vec![1.0, -1.0, 1.0, 1.0]).unwrap();
        let u = [1.0, -1.0, 1.0, 1.0];
        let neg: Vec<f64> = u.iter().map(|s| -s).collect();
        let pt2 = (spec.p() * spec.t()).powi(2);
        assert_eq!(mixture_separation(&spec, &u, &u).unwrap(), 0.0);
        assert!((mixture_separation(&spec, &u, &neg).unwrap() - 16.0 * pt2).abs() < 1e-12);
        let w = [1.0, 1.0, 1.0, -1.0];
        assert!((mixture_separation(&spec, &u, &w).unwrap() - 8.0 * pt2).abs() < 1e-12);
        assert!(mixture_separation(&spec, &u, &[1.0, 0.0, 1.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn bound_monotone(eps in 0.0f64..2.0, delta in 0.0f64..0.5, dh in 0.0f64..10.0, step in 0.0f64..1.0) {
            let b = |e, dl, h| assouad_bound(&AssouadParams::new(4, 0.5, e, dl, h).unwrap()).value;
            let base = b(eps, delta, dh);
            prop_assert!(b(eps + step, delta, dh) <= base);
            prop_assert!(b(eps, delta + step, dh) <= base);
            prop_assert!(b(eps, delta, dh + step) <= base);
            let p = AssouadParams::new(4, 0.5, eps, delta, dh).unwrap();
            prop_assert!(linearized_assouad_bound(&p) <= base + 1e-12);
        }

        #[test]
        fn separation_is_scaled_hamming(bits in prop::collection::vec(any::<(bool, bool)>(), 2..30), alpha in 0.05f64..1.0) {
            let u: Vec<f64> = bits.iter().map(|b| if b.0 { 1.0 } else { -1.0 }).collect();
            let v: Vec<f64> = bits.iter().map(|b| if b.1 { 1.0 } else { -1.0 }).collect();
            let spec = HeavyTailedSpec::for_accuracy(alpha, u.clone()).unwrap();
            let ham = u.iter().zip(&v).filter(|(a, b)| a != b).count() as f64;
            let mu = spec.mean();
            let mv = spec.with_signs(v.clone()).unwrap().mean();
            let direct: f64 = mu.iter().zip(&mv).map(|(a, b)| (a - b) * (a - b)).sum();
            let sep = mixture_separation(&spec, &u, &v).unwrap();
            let tau = 2.0 * (spec.p() * spec.t()).powi(2);
            prop_assert!((sep - direct).abs() <= 1e-12 * direct.max(1.0));
            prop_assert!((sep - 2.0 * tau * ham).abs() <= 1e-12 * sep.max(1.0));
        }
    }
}
