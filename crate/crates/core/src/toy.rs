//! Analytic 1-D targets with quadrature references.
//!
//! Two models back the empirical checks of the sampler theory:
//!
//! - [`HalfNormalTarget`]: `U(x) = x^2/2` on the half line. Every kernel
//!   must reproduce its stationary moments (mean `sqrt(2/pi)`, second
//!   moment 1) up to discretisation bias.
//! - [`ScalarPoissonToy`]: a scalar Poisson likelihood with a `theta |x|`
//!   prior, for which both the exact posterior and its smoothed
//!   approximation are tractable by quadrature, so the total-variation gap
//!   between them can be measured as the smoothing parameters vanish.

use crate::posterior::Target;
use crate::quad::integrate;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ToyError {
    #[error("smoothing parameters must satisfy lambda > 0, b > 0 (or both zero); got lambda={lambda}, b={b}")]
    InvalidSmoothing { lambda: f64, b: f64 },
    #[error("quadrature produced a non-finite normaliser for lambda={lambda}, b={b}")]
    DegenerateDensity { lambda: f64, b: f64 },
}

/// `pi(x) proportional to exp(-x^2/2)` on `x >= 0`, treated as a pure
/// smooth data-fit term (`g = 0`, so the prox is the identity).
#[derive(Debug, Clone, Copy)]
pub struct HalfNormalTarget {
    /// Envelope parameter; with `g = 0` it only enters the step-size rules,
    /// so tests pick it to control the admissible step.
    pub lambda: f64,
}

impl HalfNormalTarget {
    pub fn mean_exact(&self) -> f64 {
        (2.0 / std::f64::consts::PI).sqrt()
    }

    pub fn second_moment_exact(&self) -> f64 {
        1.0
    }

    /// Stationary `E[phi(X)]` by quadrature, the oracle the chains are
    /// compared against.
    pub fn expectation(&self, phi: &dyn Fn(f64) -> f64, tol: f64) -> f64 {
        let dens = |x: f64| (-x * x / 2.0).exp();
        let z = integrate(&dens, 0.0, 12.0, tol);
        integrate(&|x| phi(x) * dens(x), 0.0, 12.0, tol) / z
    }
}

impl Target for HalfNormalTarget {
    fn dim(&self) -> usize {
        1
    }

    fn grad_smooth(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn prox(&self, x: &[f64], _step: f64) -> Vec<f64> {
        x.to_vec()
    }

    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn lipschitz_smooth(&self) -> f64 {
        1.0
    }

    fn potential_smoothed(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v * v / 2.0).sum()
    }

    fn potential_exact(&self, x: &[f64]) -> f64 {
        if x.iter().any(|&v| v < 0.0) {
            f64::INFINITY
        } else {
            self.potential_smoothed(x)
        }
    }
}

/// Scalar Poisson posterior `pi(x) proportional to exp(-(x - y ln x) - theta x)`
/// on `x > 0`, the 1-D model whose smoothed approximation is quadrature
/// friendly: the prox of `theta |x|` is soft thresholding and the envelope
/// is the Huber function.
#[derive(Debug, Clone, Copy)]
pub struct ScalarPoissonToy {
    pub count: f64,
    pub theta: f64,
}

impl Default for ScalarPoissonToy {
    fn default() -> Self {
        Self {
            count: 3.0,
            theta: 1.0,
        }
    }
}

impl ScalarPoissonToy {
    /// Unnormalised exact density at `x`.
    pub fn density_exact(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            (-(x - self.count * x.ln()) - self.theta * x).exp()
        }
    }

    /// Huber envelope of `theta |x|` with parameter `lambda`, on `x >= 0`.
    fn envelope(&self, x: f64, lambda: f64) -> f64 {
        let t = self.theta;
        if x >= t * lambda {
            t * x - t * t * lambda / 2.0
        } else {
            x * x / (2.0 * lambda)
        }
    }

    /// Unnormalised smoothed density `pi^{lambda,b}` at `x >= 0`.
    pub fn density_smoothed(&self, x: f64, lambda: f64, b: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let z = x + b;
        (-(z - self.count * z.ln()) - self.envelope(x, lambda)).exp()
    }

    fn upper_limit(&self) -> f64 {
        // the potential grows like (1 + theta) x for large x; 40 mean
        // scales of decay is far beyond f64 relevance for the defaults
        40.0 * (1.0 + self.count) / (1.0 + self.theta).max(0.5)
    }

    /// Total-variation distance `||pi - pi^{lambda,b}||_TV` (half the L1
    /// gap of the normalised densities) by adaptive quadrature.
    pub fn tv_distance(&self, lambda: f64, b: f64, tol: f64) -> Result<f64, ToyError> {
        if lambda == 0.0 && b == 0.0 {
            // the (0, 0) limit is the exact posterior itself
            return Ok(0.0);
        }
        if !(lambda > 0.0) || !(b > 0.0) {
            return Err(ToyError::InvalidSmoothing { lambda, b });
        }
        let hi = self.upper_limit();
        let z_exact = integrate(&|x| self.density_exact(x), 0.0, hi, tol);
        let z_smooth = integrate(&|x| self.density_smoothed(x, lambda, b), 0.0, hi, tol);
        if !z_exact.is_finite() || !z_smooth.is_finite() || z_exact <= 0.0 || z_smooth <= 0.0 {
            return Err(ToyError::DegenerateDensity { lambda, b });
        }
        let l1 = integrate(
            &|x| {
                (self.density_exact(x) / z_exact - self.density_smoothed(x, lambda, b) / z_smooth)
                    .abs()
            },
            0.0,
            hi,
            tol,
        );
        Ok(0.5 * l1)
    }

    /// TV distances along a sequence of `(lambda, b)` smoothing pairs.
    pub fn tv_distance_check(&self, pairs: &[(f64, f64)], tol: f64) -> Result<Vec<f64>, ToyError> {
        pairs
            .iter()
            .map(|&(lambda, b)| self.tv_distance(lambda, b, tol))
            .collect()
    }

    /// Posterior mean of the exact toy density, by quadrature.
    pub fn mean_exact(&self, tol: f64) -> f64 {
        let hi = self.upper_limit();
        let z = integrate(&|x| self.density_exact(x), 0.0, hi, tol);
        integrate(&|x| x * self.density_exact(x), 0.0, hi, tol) / z
    }
}

/// Smoothed version of [`ScalarPoissonToy`] as a sampler target.
#[derive(Debug, Clone, Copy)]
pub struct ScalarPoissonToyTarget {
    pub toy: ScalarPoissonToy,
    pub lambda: f64,
    pub b: f64,
}

impl Target for ScalarPoissonToyTarget {
    fn dim(&self) -> usize {
        1
    }

    fn grad_smooth(&self, x: &[f64]) -> Vec<f64> {
        // d/dx [ (x+b) - y ln(x+b) ]
        x.iter()
            .map(|&v| 1.0 - self.toy.count / (v + self.b))
            .collect()
    }

    fn prox(&self, x: &[f64], step: f64) -> Vec<f64> {
        // soft threshold for theta |x|
        let t = self.toy.theta * step;
        x.iter()
            .map(|&v| v.signum() * (v.abs() - t).max(0.0))
            .collect()
    }

    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn lipschitz_smooth(&self) -> f64 {
        self.toy.count / (self.b * self.b)
    }

    fn potential_smoothed(&self, x: &[f64]) -> f64 {
        x.iter()
            .map(|&v| {
                let z = v + self.b;
                z - self.toy.count * z.ln() + self.toy.envelope(v, self.lambda)
            })
            .sum()
    }

    fn potential_exact(&self, x: &[f64]) -> f64 {
        x.iter()
            .map(|&v| {
                if v < 0.0 {
                    f64::INFINITY
                } else {
                    let d = self.toy.density_exact(v);
                    if d == 0.0 {
                        f64::INFINITY
                    } else {
                        -d.ln()
                    }
                }
            })
            .sum()
    }
}
