//! Lower bounds for private estimation in exponential families, checked by
//! seeded Monte Carlo.
//!
//! - [`expfam`]: sufficient statistics, log-partition and samplers.
//! - [`hard_instances`]: prior boxes, random covariances, heavy-tailed mixtures.
//! - [`mechanisms`]: Gaussian mechanisms and the natural-parameter reduction.
//! - [`fingerprint`]: correlation statistics, tail integrals, theorem terms.
//! - [`assouad`]: Assouad-type bounds for the heavy-tailed construction.
//! - [`lab`]: config-driven experiments with JSON and CSV output.
//!
//! ```
//! use fplab::hard_instances::cov_prior;
//!
//! let prior = cov_prior(3).unwrap();
//! assert!((prior.r_norm_sq() - 0.5 * (1.0 - 1.0 / 6.0)).abs() < 1e-15);
//! ```

pub mod assouad;
pub mod expfam;
pub mod fingerprint;
pub mod hard_instances;
pub mod lab;
pub mod linalg;
pub mod mechanisms;
pub mod rng;
pub mod stats;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/instances.md")]
    mod instances {}
    #[doc = include_str!("../../../book/src/fingerprinting.md")]
    mod fingerprinting {}
    #[doc = include_str!("../../../book/src/assouad.md")]
    mod assouad {}
    #[doc = include_str!("../../../book/src/lab.md")]
    mod lab {}
}
