//! Independent oracles shared by the integration tests and the acceptance
//! harness.
#![allow(dead_code)]

use std::f64::consts::LN_2;

/// Composite Simpson rule on `[a, b]` with `2m` panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let n = 2 * m;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Clamped plug-in estimate of η for one Bernoulli coordinate: the logit of
/// the fraction of ones with the fraction clamped to [1/3, 2/3].
pub fn bernoulli_plugin(xs: &[u8]) -> f64 {
    let ones = xs.iter().map(|&x| f64::from(x)).sum::<f64>() / xs.len() as f64;
    let q = ones.clamp(1.0 / 3.0, 2.0 / 3.0);
    (q / (1.0 - q)).ln()
}

/// `E[Z + (a − η)²]` for one Bernoulli coordinate, `η ~ U[−ln 2, ln 2]`,
/// `n` samples and a deterministic estimator, by summing over all `2^n`
/// datasets and integrating over η.
pub fn bernoulli_lhs_exact(n: usize, estimator: impl Fn(&[u8]) -> f64) -> f64 {
    let r = 2.0 * LN_2;
    let mut total = 0.0;
    for bits in 0..(1u32 << n) {
        let xs: Vec<u8> = (0..n).map(|i| ((bits >> i) & 1) as u8).collect();
        let a = estimator(&xs);
        let ones = xs.iter().filter(|&&x| x == 1).count() as i32;
        let integrand = |eta: f64| {
            let p = 1.0 / (1.0 + (-eta).exp());
            let prob = p.powi(ones) * (1.0 - p).powi(n as i32 - ones);
            let w = r * r / 4.0 - eta * eta;
            let z: f64 = xs.iter().map(|&x| w * (a - eta) * (f64::from(x) - p)).sum();
            prob * (z + (a - eta) * (a - eta))
        };
        total += simpson(integrand, -LN_2, LN_2, 2000) / r;
    }
    total
}
