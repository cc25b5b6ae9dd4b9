//! Reflected proximal MALA: R-MYULA proposals with a Metropolis-Hastings
//! correction.
//!
//! Reflection makes the proposal non-Gaussian: `x' = |m + sqrt(2 delta) Z|`
//! has the folded-normal density `q(x'|x) = prod_i [phi(x'_i; m_i, 2 delta)
//! + phi(-x'_i; m_i, 2 delta)]`, the sum over the two sign preimages. The
//! kernel can Metropolise against the exact posterior (default, removing
//! all smoothing and discretisation bias) or against the smoothed one.

use super::myula::myula_drift_mean;
use super::{reflect_in_place, ChainState, SamplerError};
use crate::posterior::Target;
use crate::rng::GaussianStream;

/// Which density the Metropolis-Hastings ratio uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmalaTarget {
    /// `f_y(x) + theta TV(x)` with the positivity indicator; asymptotically
    /// unbiased.
    Exact,
    /// The smoothed `f^b + g^lambda` that the unadjusted kernels target.
    Smoothed,
}

/// Log-density of the folded normal `|N(mean, var)|` at `t >= 0`:
/// `log(phi(t; mean, var) + phi(-t; mean, var))`, computed by log-sum-exp.
pub fn folded_normal_logpdf(t: f64, mean: f64, var: f64) -> f64 {
    let log_norm = -0.5 * (2.0 * std::f64::consts::PI * var).ln();
    let a = -(t - mean) * (t - mean) / (2.0 * var);
    let b = -(t + mean) * (t + mean) / (2.0 * var);
    let hi = a.max(b);
    log_norm + hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

pub struct Pmala {
    delta: f64,
    mh_target: PmalaTarget,
    /// Potential and drift mean of the current state, maintained across
    /// steps; valid because the kernel is the only mutator of the chain.
    cached: Option<(f64, Vec<f64>)>,
    /// Proposals rejected because the log-ratio was not finite (NaN).
    pub non_finite_rejects: u64,
}

impl Pmala {
    pub fn new(delta: f64, mh_target: PmalaTarget) -> Self {
        Self {
            delta,
            mh_target,
            cached: None,
            non_finite_rejects: 0,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn target_kind(&self) -> PmalaTarget {
        self.mh_target
    }

    fn potential<T: Target + ?Sized>(&self, target: &T, x: &[f64]) -> f64 {
        match self.mh_target {
            PmalaTarget::Exact => target.potential_exact(x),
            PmalaTarget::Smoothed => target.potential_smoothed(x),
        }
    }

    /// One proposal/accept step; returns whether the proposal was accepted.
    pub fn step<T: Target + ?Sized>(
        &mut self,
        state: &mut ChainState,
        target: &T,
        rng: &mut GaussianStream,
    ) -> Result<bool, SamplerError> {
        let n = state.x.len();
        let var = 2.0 * self.delta;
        let noise_scale = var.sqrt();

        let (u_cur, mean_cur) = match self.cached.take() {
            Some(c) => c,
            None => (
                self.potential(target, &state.x),
                myula_drift_mean(target, &state.x, self.delta),
            ),
        };
        if mean_cur.iter().any(|v| !v.is_finite()) {
            return Err(SamplerError::NonFiniteDrift { iter: state.iter });
        }

        let mut proposal = vec![0.0; n];
        for i in 0..n {
            proposal[i] = mean_cur[i] + noise_scale * rng.standard_normal();
        }
        reflect_in_place(&mut proposal);

        let u_prop = self.potential(target, &proposal);
        let mean_prop = myula_drift_mean(target, &proposal, self.delta);

        let mut log_q_fwd = 0.0;
        let mut log_q_rev = 0.0;
        for i in 0..n {
            log_q_fwd += folded_normal_logpdf(proposal[i], mean_cur[i], var);
            log_q_rev += folded_normal_logpdf(state.x[i], mean_prop[i], var);
        }
        let log_alpha = (u_cur - u_prop) + (log_q_rev - log_q_fwd);

        // the uniform is always drawn, keeping the stream advancement
        // identical whatever the ratio
        let log_u = rng.uniform().max(f64::MIN_POSITIVE).ln();
        let accept = if log_alpha.is_nan() {
            self.non_finite_rejects += 1;
            false
        } else {
            log_u < log_alpha
        };

        if accept {
            state.x = proposal;
            self.cached = Some((u_prop, mean_prop));
        } else {
            self.cached = Some((u_cur, mean_cur));
        }
        Ok(accept)
    }
}

/// Pre-run bisection for the R-PMALA step size: find `delta` in
/// `(0, delta_max]` whose empirical acceptance over `probe_steps` probe
/// iterations is close to `target_accept`; capped at `delta_max` when even
/// the cap accepts more often than requested.
pub fn tune_pmala_step<T: Target + ?Sized>(
    target: &T,
    x0: &[f64],
    delta_max: f64,
    target_accept: f64,
    mh_target: PmalaTarget,
    probe_steps: u64,
    seed: u64,
) -> f64 {
    let acceptance = |delta: f64| -> f64 {
        let mut kernel = Pmala::new(delta, mh_target);
        let mut state = ChainState::new(x0.to_vec());
        let mut rng = GaussianStream::seed_from_u64(seed);
        let mut accepted = 0u64;
        for _ in 0..probe_steps {
            if kernel.step(&mut state, target, &mut rng).unwrap_or(false) {
                accepted += 1;
            }
        }
        accepted as f64 / probe_steps as f64
    };

    if acceptance(delta_max) >= target_accept {
        return delta_max;
    }
    let mut lo = delta_max * 1e-6;
    let mut hi = delta_max;
    for _ in 0..20 {
        let mid = (lo * hi).sqrt();
        if acceptance(mid) >= target_accept {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
