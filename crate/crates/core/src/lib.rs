//! Bayesian computation for non-negativity-constrained low-photon imaging.
//!
//! The crate implements reflected proximal Langevin MCMC samplers for
//! posteriors combining Poisson, binomial or geometric photon-count
//! likelihoods with a total-variation prior, together with the supporting
//! machinery: forward operators, Moreau-Yosida smoothing, MAP estimation,
//! chain analytics, a reflected-SDE discretisation lab, and an experiment
//! runner with file-based persistence.
//!
//! Entry points:
//! - [`samplers`] for the four reflected kernels (R-MYULA, R-SKROCK,
//!   R-MYUULA, R-PMALA) and the chain runner;
//! - [`posterior`] for smoothed constrained posteriors;
//! - [`runner`] for configuration, synthetic observation generation and
//!   end-to-end experiments;
//! - [`scheme_lab`] for weak-error studies of penalty/projection/reflection
//!   discretisations of reflected SDEs.

pub mod analytics;
pub mod fft;
pub mod image;
pub mod likelihood;
pub mod map;
pub mod ops;
pub mod posterior;
pub mod quad;
pub mod rng;
pub mod runner;
pub mod samplers;
pub mod scheme_lab;
pub mod toy;
pub mod tv;

pub use image::Image;
