//! Reflected proximal Langevin MCMC kernels and the chain runner.
//!
//! Four kernels target the smoothed constrained posterior on the
//! non-negative orthant:
//!
//! - R-MYULA: Euler-Maruyama on the smoothed drift, componentwise absolute
//!   value after every step;
//! - R-SKROCK: an s-stage stabilised Runge-Kutta-Chebyshev step with
//!   reflection after every stage;
//! - R-MYUULA: an exponential (OU) integrator for the underdamped dynamics,
//!   position reflected, velocity untouched;
//! - R-PMALA: R-MYULA proposals corrected by a Metropolis-Hastings step
//!   with the folded-normal proposal density (optionally against the exact,
//!   unsmoothed posterior).
//!
//! Every kernel draws its noise from a per-chain [`GaussianStream`], so a
//! fixed seed reproduces the chain bit for bit.

mod myula;
mod myuula;
mod pmala;
mod skrock;

pub use myula::{myula_drift_mean, Myula};
pub use myuula::{Myuula, MyuulaCovariance};
pub use pmala::{folded_normal_logpdf, tune_pmala_step, Pmala, PmalaTarget};
pub use skrock::{chebyshev_t, Skrock, SkrockCoeffs};

use crate::posterior::Target;
use crate::rng::GaussianStream;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("step size {delta} outside admissible range (0, {max}] for {kernel}")]
    StepSizeOutOfRange {
        kernel: &'static str,
        delta: f64,
        max: f64,
    },
    #[error("R-SKROCK stage count s={0} outside 3..=15")]
    StageCountOutOfRange(u32),
    #[error("R-SKROCK damping eta={eta} gives non-positive stability interval l_s={ls}")]
    InvalidDamping { eta: f64, ls: f64 },
    #[error("invalid parameter {name}={value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error(
        "R-MYUULA covariance not positive semidefinite at delta={delta}, gamma={gamma}, u={u}"
    )]
    CovarianceNotPsd { delta: f64, gamma: f64, u: f64 },
    #[error("non-finite drift encountered at iteration {iter}")]
    NonFiniteDrift { iter: u64 },
    #[error("chain sink error: {0}")]
    Sink(#[from] std::io::Error),
}

/// Current chain iterate; `velocity` is populated for R-MYUULA only.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub x: Vec<f64>,
    pub velocity: Option<Vec<f64>>,
    pub iter: u64,
}

impl ChainState {
    pub fn new(x: Vec<f64>) -> Self {
        Self {
            x,
            velocity: None,
            iter: 0,
        }
    }

    pub fn with_velocity(x: Vec<f64>, v: Vec<f64>) -> Self {
        Self {
            x,
            velocity: Some(v),
            iter: 0,
        }
    }
}

/// Componentwise absolute value, the reflection of the discretised RSDE.
#[inline]
pub fn reflect_in_place(x: &mut [f64]) {
    for v in x.iter_mut() {
        *v = v.abs();
    }
}

/// Largest admissible R-MYULA / R-PMALA step,
/// `1 / (L_f + 1/lambda) = lambda / (lambda L_f + 1)`.
pub fn delta_max_myula<T: Target + ?Sized>(target: &T) -> f64 {
    1.0 / target.lipschitz_total()
}

/// Largest admissible R-SKROCK step, `l_s / (L_f + 1/lambda)`.
pub fn delta_max_skrock<T: Target + ?Sized>(
    target: &T,
    s: u32,
    eta: f64,
) -> Result<f64, SamplerError> {
    let coeffs = SkrockCoeffs::new(s, eta)?;
    Ok(coeffs.ls / target.lipschitz_total())
}

/// Kernel selection plus step parameters; validated against the target's
/// Lipschitz bounds before a chain is run.
#[derive(Debug, Clone)]
pub enum SamplerConfig {
    RMyula {
        delta: f64,
    },
    RSkrock {
        delta: f64,
        s: u32,
        eta: f64,
    },
    RMyuula {
        delta: f64,
        gamma: f64,
        /// Inverse-mass parameter; defaults to `1 / (L_f + 1/lambda)`
        /// when `None`.
        u: Option<f64>,
    },
    RPmala {
        delta: f64,
        target: PmalaTarget,
    },
}

impl SamplerConfig {
    pub fn kernel_name(&self) -> &'static str {
        match self {
            SamplerConfig::RMyula { .. } => "rmyula",
            SamplerConfig::RSkrock { .. } => "rskrock",
            SamplerConfig::RMyuula { .. } => "rmyuula",
            SamplerConfig::RPmala { .. } => "rpmala",
        }
    }

    /// Validate the step-size guards and instantiate the kernel.
    pub fn build<T: Target + ?Sized>(&self, target: &T) -> Result<AnyKernel, SamplerError> {
        match *self {
            SamplerConfig::RMyula { delta } => {
                let max = delta_max_myula(target);
                if !(delta > 0.0) || delta > max * (1.0 + 1e-12) {
                    return Err(SamplerError::StepSizeOutOfRange {
                        kernel: "R-MYULA",
                        delta,
                        max,
                    });
                }
                Ok(AnyKernel::Myula(Myula { delta }))
            }
            SamplerConfig::RSkrock { delta, s, eta } => {
                let coeffs = SkrockCoeffs::new(s, eta)?;
                let max = coeffs.ls / target.lipschitz_total();
                if !(delta > 0.0) || delta > max * (1.0 + 1e-12) {
                    return Err(SamplerError::StepSizeOutOfRange {
                        kernel: "R-SKROCK",
                        delta,
                        max,
                    });
                }
                Ok(AnyKernel::Skrock(Skrock::new(delta, coeffs)))
            }
            SamplerConfig::RMyuula { delta, gamma, u } => {
                if !(delta > 0.0) {
                    return Err(SamplerError::InvalidParameter {
                        name: "delta",
                        value: delta,
                    });
                }
                if !(gamma > 0.0) {
                    return Err(SamplerError::InvalidParameter {
                        name: "gamma",
                        value: gamma,
                    });
                }
                let u = u.unwrap_or_else(|| 1.0 / target.lipschitz_total());
                Ok(AnyKernel::Myuula(Myuula::new(delta, gamma, u)?))
            }
            SamplerConfig::RPmala { delta, target: mh } => {
                let max = delta_max_myula(target);
                if !(delta > 0.0) || delta > max * (1.0 + 1e-12) {
                    return Err(SamplerError::StepSizeOutOfRange {
                        kernel: "R-PMALA",
                        delta,
                        max,
                    });
                }
                Ok(AnyKernel::Pmala(Pmala::new(delta, mh)))
            }
        }
    }
}

/// Runtime kernel dispatch.
pub enum AnyKernel {
    Myula(Myula),
    Skrock(Skrock),
    Myuula(Myuula),
    Pmala(Pmala),
}

impl AnyKernel {
    /// Advance the chain one iteration. Returns `Some(accepted)` for
    /// Metropolised kernels, `None` otherwise.
    pub fn step<T: Target + ?Sized>(
        &mut self,
        state: &mut ChainState,
        target: &T,
        rng: &mut GaussianStream,
    ) -> Result<Option<bool>, SamplerError> {
        let res = match self {
            AnyKernel::Myula(k) => k.step(state, target, rng).map(|_| None),
            AnyKernel::Skrock(k) => k.step(state, target, rng).map(|_| None),
            AnyKernel::Myuula(k) => k.step(state, target, rng).map(|_| None),
            AnyKernel::Pmala(k) => k.step(state, target, rng).map(Some),
        };
        state.iter += 1;
        res
    }

    /// Drift-gradient evaluations per iteration (R-SKROCK counts its
    /// stages, matching convergence plots indexed by gradient evaluations).
    pub fn gradient_evals_per_iter(&self) -> u64 {
        match self {
            AnyKernel::Skrock(k) => k.coeffs().s as u64,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ChainOptions {
    pub n_iter: u64,
    pub burn_in_frac: f64,
    pub thin: u64,
    pub seed: u64,
}

/// Per-iteration view handed to the chain callback.
#[derive(Debug)]
pub struct IterationRecord<'a> {
    /// 1-based iteration counter.
    pub iter: u64,
    /// Cumulative drift-gradient evaluations including this iteration.
    pub gradient_evals: u64,
    pub post_burn_in: bool,
    /// True on every `thin`-th post-burn-in iteration; the rule is
    /// `(iter - burn_in) % thin == 0` for `iter > burn_in`.
    pub stored: bool,
    pub accepted: Option<bool>,
    pub x: &'a [f64],
}

#[derive(Debug, Clone)]
pub struct ChainSummary {
    pub n_iter: u64,
    pub burn_in: u64,
    pub n_stored: u64,
    pub gradient_evals: u64,
    /// Fraction of accepted proposals, for Metropolised kernels.
    pub acceptance_rate: Option<f64>,
    pub final_state: ChainState,
}

/// Iterate `kernel` from `state`, feeding every iteration to `callback`.
///
/// Burn-in is `floor(burn_in_frac * n_iter)` iterations; post-burn-in
/// samples are indexed from 1 and every `thin`-th one is flagged `stored`.
/// Fully deterministic for a fixed `opts.seed`.
pub fn run_chain<T: Target + ?Sized>(
    kernel: &mut AnyKernel,
    target: &T,
    mut state: ChainState,
    opts: &ChainOptions,
    mut callback: impl FnMut(&IterationRecord) -> std::io::Result<()>,
) -> Result<ChainSummary, SamplerError> {
    assert!(opts.n_iter > 0, "n_iter must be positive");
    assert!(opts.thin >= 1, "thin must be >= 1");
    let mut rng = GaussianStream::seed_from_u64(opts.seed);
    let burn_in = (opts.burn_in_frac * opts.n_iter as f64).floor() as u64;

    let ge_per_iter = kernel.gradient_evals_per_iter();
    let mut n_stored = 0;
    let mut accepted_count = 0u64;
    let mut mh_steps = 0u64;

    for iter in 1..=opts.n_iter {
        let accepted = kernel.step(&mut state, target, &mut rng)?;
        if let Some(a) = accepted {
            mh_steps += 1;
            if a {
                accepted_count += 1;
            }
        }
        let post_burn_in = iter > burn_in;
        let stored = post_burn_in && (iter - burn_in) % opts.thin == 0;
        if stored {
            n_stored += 1;
        }
        callback(&IterationRecord {
            iter,
            gradient_evals: iter * ge_per_iter,
            post_burn_in,
            stored,
            accepted,
            x: &state.x,
        })?;
    }

    Ok(ChainSummary {
        n_iter: opts.n_iter,
        burn_in,
        n_stored,
        gradient_evals: opts.n_iter * ge_per_iter,
        acceptance_rate: if mh_steps > 0 {
            Some(accepted_count as f64 / mh_steps as f64)
        } else {
            None
        },
        final_state: state,
    })
}
