mod common;

use fplab::expfam::{Dataset, ExpFamilyModel};
use fplab::fingerprint::{fingerprint_lhs, ConcentrationBound};
use fplab::hard_instances::{heavy_sample, product_prior, HeavyTailedSpec};
use fplab::mechanisms::{Estimate, EstimateKind, Mechanism, MechanismSpec, NatParamMechanism};
use fplab::rng::stream;
use fplab::stats::MeanSe;
use rand::RngCore;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

#[test]
fn lhs_matches_enumeration_for_small_bernoulli() {
    let model = ExpFamilyModel::bernoulli_product(1).unwrap();
    let prior = product_prior(1).unwrap();
    let mech = NatParamMechanism::plug_in(model, prior.clone()).unwrap();
    for n in 1..=3 {
        let exact = common::bernoulli_lhs_exact(n, common::bernoulli_plugin);
        let est = fingerprint_lhs(&model, &prior, &mech, n, 200_000, 40 + n as u64).unwrap();
        assert!(est.lhs.within(exact, 4.0), "n = {n}: {} ± {} vs {exact}", est.lhs.mean, est.lhs.se);
        assert!(exact >= prior.r_norm_sq() / 12.0 - 1e-12);
    }
}

/// A deterministic estimator that ignores the data except for the first
/// sample.
struct FirstSample {
    spec: MechanismSpec,
}

impl Mechanism for FirstSample {
    fn spec(&self) -> &MechanismSpec {
        &self.spec
    }

    fn release(&self, x: &Dataset, _rng: &mut dyn RngCore) -> fplab::mechanisms::Result<Estimate> {
        let v = if x.row(0)[0] == 1.0 { 0.5 } else { -0.5 };
        Ok(Estimate {
            kind: EstimateKind::NatParamDeviation,
            value: vec![v],
            clamped: 0,
        })
    }
}

#[test]
fn lhs_matches_enumeration_for_custom_estimator() {
    let model = ExpFamilyModel::bernoulli_product(1).unwrap();
    let prior = product_prior(1).unwrap();
    let spec = NatParamMechanism::plug_in(model, prior.clone()).unwrap().spec().clone();
    let mech = FirstSample { spec };
    let exact = common::bernoulli_lhs_exact(2, |xs| if xs[0] == 1 { 0.5 } else { -0.5 });
    let est = fingerprint_lhs(&model, &prior, &mech, 2, 200_000, 9).unwrap();
    assert!(est.lhs.within(exact, 4.0), "{} ± {} vs {exact}", est.lhs.mean, est.lhs.se);
}

#[test]
fn chi_square_bounds_dominate_exact_tails() {
    for k in [1.0, 5.0, 20.0, 100.0] {
        let dist = ChiSquared::new(k).unwrap();
        for g in 0..40 {
            let up = k * (1.0 + 0.1 * g as f64);
            let bound = ConcentrationBound::ChiSquareUpper { k, t: up }.evaluate().unwrap();
            assert!(dist.sf(up) <= bound, "upper k={k} t={up}");
            let lo = k * (1.0 - 0.025 * g as f64);
            let bound = ConcentrationBound::ChiSquareLower { k, t: lo }.evaluate().unwrap();
            assert!(dist.cdf(lo) <= bound, "lower k={k} t={lo}");
        }
    }
}

#[test]
fn erfc_bound_dominates_exact_value() {
    for g in 0..100 {
        let x = 0.05 * g as f64;
        assert!(erfc(x) <= ConcentrationBound::Erfc { x }.evaluate().unwrap());
    }
}

#[test]
fn population_means_separate_by_scaled_hamming() {
    let u = vec![1.0, -1.0, 1.0, 1.0, -1.0];
    let v = vec![1.0, 1.0, -1.0, 1.0, 1.0];
    let spec_u = HeavyTailedSpec::for_accuracy(0.6, u.clone()).unwrap();
    let spec_v = spec_u.with_signs(v.clone()).unwrap();
    let n = 100_000;
    let xu = heavy_sample(&spec_u, n, &mut stream(1, &[]));
    let xv = heavy_sample(&spec_v, n, &mut stream(2, &[]));
    let (p, t) = (spec_u.p(), spec_u.t());
    for j in 0..u.len() {
        let cu: Vec<f64> = xu.rows().map(|r| r[j]).collect();
        let cv: Vec<f64> = xv.rows().map(|r| r[j]).collect();
        let (mu, mv) = (MeanSe::from_samples(&cu), MeanSe::from_samples(&cv));
        let se = (mu.se * mu.se + mv.se * mv.se).sqrt();
        let want = p * t * (u[j] - v[j]);
        assert!((mu.mean - mv.mean - want).abs() <= 3.0 * se, "coordinate {j}");
    }
    let sep = fplab::assouad::mixture_separation(&spec_u, &u, &v).unwrap();
    assert!((sep - 4.0 * p * p * t * t * 3.0).abs() < 1e-12);
}
