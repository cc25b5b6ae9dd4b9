//! Reflected SKROCK: an s-stage stochastic Runge-Kutta-Chebyshev step.
//!
//! The stage recurrence follows the Chebyshev three-term relation; noise
//! enters only through the first stage. Reflection (componentwise absolute
//! value) is applied after every stage.

use super::{reflect_in_place, ChainState, SamplerError};
use crate::posterior::Target;
use crate::rng::GaussianStream;

/// Chebyshev polynomial of the first kind by the three-term recurrence.
pub fn chebyshev_t(j: u32, x: f64) -> f64 {
    let mut t_prev = 1.0;
    let mut t_cur = x;
    if j == 0 {
        return t_prev;
    }
    for _ in 1..j {
        let t_next = 2.0 * x * t_cur - t_prev;
        t_prev = t_cur;
        t_cur = t_next;
    }
    t_cur
}

/// Chebyshev polynomial of the second kind (for `T'_s = s U_{s-1}`).
fn chebyshev_u(j: u32, x: f64) -> f64 {
    let mut u_prev = 1.0;
    let mut u_cur = 2.0 * x;
    if j == 0 {
        return u_prev;
    }
    for _ in 1..j {
        let u_next = 2.0 * x * u_cur - u_prev;
        u_prev = u_cur;
        u_cur = u_next;
    }
    u_cur
}

/// Stage coefficients for a given stage count `s` and damping `eta`.
#[derive(Debug, Clone)]
pub struct SkrockCoeffs {
    pub s: u32,
    pub eta: f64,
    /// Stability interval length `l_s = (s - 0.5)^2 (2 - 4 eta / 3) - 1.5`.
    pub ls: f64,
    pub omega0: f64,
    pub omega1: f64,
    pub mu1: f64,
    pub nu1: f64,
    pub kappa1: f64,
    /// `mu_j, nu_j, kappa_j` for stages `j = 2..=s` (index `j - 2`).
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub kappa: Vec<f64>,
}

impl SkrockCoeffs {
    pub fn new(s: u32, eta: f64) -> Result<Self, SamplerError> {
        if !(3..=15).contains(&s) {
            return Err(SamplerError::StageCountOutOfRange(s));
        }
        let sf = s as f64;
        let ls = (sf - 0.5) * (sf - 0.5) * (2.0 - 4.0 * eta / 3.0) - 1.5;
        if !(eta > 0.0) || ls <= 0.0 {
            return Err(SamplerError::InvalidDamping { eta, ls });
        }
        let omega0 = 1.0 + eta / (sf * sf);
        let ts = |j: u32| chebyshev_t(j, omega0);
        let ts_prime = sf * chebyshev_u(s - 1, omega0);
        let omega1 = ts(s) / ts_prime;

        let mu1 = omega1 / omega0;
        let nu1 = sf * omega1 / 2.0;
        let kappa1 = sf * omega1 / omega0;

        let mut mu = Vec::with_capacity((s - 1) as usize);
        let mut nu = Vec::with_capacity((s - 1) as usize);
        let mut kappa = Vec::with_capacity((s - 1) as usize);
        for j in 2..=s {
            let tj = ts(j);
            let tjm1 = ts(j - 1);
            let tjm2 = ts(j - 2);
            mu.push(2.0 * omega1 * tjm1 / tj);
            nu.push(2.0 * omega0 * tjm1 / tj);
            kappa.push(-tjm2 / tj);
        }
        Ok(Self {
            s,
            eta,
            ls,
            omega0,
            omega1,
            mu1,
            nu1,
            kappa1,
            mu,
            nu,
            kappa,
        })
    }
}

pub struct Skrock {
    delta: f64,
    coeffs: SkrockCoeffs,
}

impl Skrock {
    pub fn new(delta: f64, coeffs: SkrockCoeffs) -> Self {
        Self { delta, coeffs }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn coeffs(&self) -> &SkrockCoeffs {
        &self.coeffs
    }

    /// Smoothed drift gradient `grad f^b(x) + (x - prox(x, lambda)) / lambda`.
    fn drift_grad<T: Target + ?Sized>(target: &T, x: &[f64]) -> Vec<f64> {
        let lambda = target.lambda();
        let mut g = target.grad_smooth(x);
        let prox = target.prox(x, lambda);
        for ((gi, &xi), &pi) in g.iter_mut().zip(x).zip(&prox) {
            *gi += (xi - pi) / lambda;
        }
        g
    }

    pub fn step<T: Target + ?Sized>(
        &self,
        state: &mut ChainState,
        target: &T,
        rng: &mut GaussianStream,
    ) -> Result<(), SamplerError> {
        let c = &self.coeffs;
        let delta = self.delta;
        let noise_scale = (2.0 * delta).sqrt();
        let x = &state.x;
        let n = x.len();

        let mut z = vec![0.0; n];
        rng.fill_standard_normal(&mut z);

        // stage 1: gradient evaluated at the noise-shifted point
        let w1: Vec<f64> = x
            .iter()
            .zip(&z)
            .map(|(&xi, &zi)| xi + c.nu1 * noise_scale * zi)
            .collect();
        let g = Self::drift_grad(target, &w1);
        let mut k_prev2 = x.clone();
        let mut k_prev1: Vec<f64> = x
            .iter()
            .zip(&g)
            .zip(&z)
            .map(|((&xi, &gi), &zi)| xi - c.mu1 * delta * gi + c.kappa1 * noise_scale * zi)
            .collect();
        if k_prev1.iter().any(|v| !v.is_finite()) {
            return Err(SamplerError::NonFiniteDrift { iter: state.iter });
        }
        reflect_in_place(&mut k_prev1);

        for j in 0..(c.s - 1) as usize {
            let g = Self::drift_grad(target, &k_prev1);
            let mut k_next: Vec<f64> = (0..n)
                .map(|i| {
                    -c.mu[j] * delta * g[i] + c.nu[j] * k_prev1[i] + c.kappa[j] * k_prev2[i]
                })
                .collect();
            if k_next.iter().any(|v| !v.is_finite()) {
                return Err(SamplerError::NonFiniteDrift { iter: state.iter });
            }
            reflect_in_place(&mut k_next);
            k_prev2 = std::mem::replace(&mut k_prev1, k_next);
        }

        state.x = k_prev1;
        Ok(())
    }
}
