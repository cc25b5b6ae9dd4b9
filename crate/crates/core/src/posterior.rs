//! The smoothed constrained posterior: b-shifted likelihood plus
//! Moreau-Yosida-smoothed total-variation prior, and the target interface
//! consumed by the samplers.

use crate::image::Image;
use crate::likelihood::{Likelihood, LikelihoodError};
use crate::tv::{tv_prox, tv_value, TvProxOpts};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PosteriorError {
    #[error("prior weight theta must be positive, got {0}")]
    NonPositiveTheta(f64),
    #[error("envelope parameter lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("posterior dimension {expected} does not match image shape {h}x{w}")]
    ShapeMismatch { expected: usize, h: usize, w: usize },
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
}

/// Total-variation prior `theta * TV(x)` with Moreau-Yosida envelope
/// parameter `lambda`.
#[derive(Debug, Clone, Copy)]
pub struct Prior {
    pub theta: f64,
    pub lambda: f64,
}

impl Prior {
    pub fn new(theta: f64, lambda: f64) -> Result<Self, PosteriorError> {
        if !(theta > 0.0) {
            return Err(PosteriorError::NonPositiveTheta(theta));
        }
        if !(lambda > 0.0) {
            return Err(PosteriorError::NonPositiveLambda(lambda));
        }
        Ok(Self { theta, lambda })
    }

    /// `prox_{step * theta TV}(x)`.
    pub fn prox(&self, x: &Image, step: f64, opts: TvProxOpts) -> Image {
        tv_prox(x, self.theta * step, opts)
    }

    /// Envelope value `g^lambda(x) = theta TV(p) + ||p - x||^2 / (2 lambda)`
    /// with `p = prox(x, lambda)`.
    pub fn envelope_value(&self, x: &Image, opts: TvProxOpts) -> f64 {
        let p = self.prox(x, self.lambda, opts);
        let dist2: f64 = p
            .as_slice()
            .iter()
            .zip(x.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        self.theta * tv_value(&p) + dist2 / (2.0 * self.lambda)
    }
}

/// `grad g^lambda(x) = (x - prox(x, lambda)) / lambda`; Lipschitz with
/// constant `1/lambda`.
pub fn my_envelope_grad(x: &Image, prior: &Prior, opts: TvProxOpts) -> Image {
    let p = prior.prox(x, prior.lambda, opts);
    let (h, w) = x.shape();
    let data = x
        .as_slice()
        .iter()
        .zip(p.as_slice())
        .map(|(xi, pi)| (xi - pi) / prior.lambda)
        .collect();
    Image::new(data, h, w).expect("shape preserved")
}

/// Target interface for the reflected samplers: a smooth data-fit part with
/// known gradient and Lipschitz bound, plus a non-smooth part accessed
/// through its proximal operator. Inputs are componentwise non-negative
/// (guaranteed by the reflection step).
pub trait Target: Sync {
    fn dim(&self) -> usize;

    /// Gradient of the smooth part `f^b` at `x >= 0`.
    fn grad_smooth(&self, x: &[f64]) -> Vec<f64>;

    /// `prox_{step * g}(x)` for the non-smooth part `g`.
    fn prox(&self, x: &[f64], step: f64) -> Vec<f64>;

    /// Moreau-Yosida envelope parameter.
    fn lambda(&self) -> f64;

    /// Lipschitz bound for `grad_smooth`.
    fn lipschitz_smooth(&self) -> f64;

    /// `f^b(x) + g^lambda(x)` up to an additive constant.
    fn potential_smoothed(&self, x: &[f64]) -> f64;

    /// Exact potential `f(x) + g(x)` up to a constant; `+inf` off-support.
    fn potential_exact(&self, x: &[f64]) -> f64;

    /// Lipschitz bound for the full smoothed drift.
    fn lipschitz_total(&self) -> f64 {
        self.lipschitz_smooth() + 1.0 / self.lambda()
    }
}

/// The smoothed imaging posterior `pi^{lambda,b}` on the non-negative
/// orthant: likelihood kind and data, prior weight, envelope parameter and
/// the Lipschitz bound of the smooth gradient.
#[derive(Clone)]
pub struct SmoothedPosterior {
    likelihood: Likelihood,
    prior: Prior,
    shape: (usize, usize),
    lipschitz_smooth: f64,
    prox_opts: TvProxOpts,
}

impl SmoothedPosterior {
    pub fn new(
        likelihood: Likelihood,
        prior: Prior,
        shape: (usize, usize),
    ) -> Result<Self, PosteriorError> {
        Self::with_prox_opts(likelihood, prior, shape, TvProxOpts::default())
    }

    pub fn with_prox_opts(
        likelihood: Likelihood,
        prior: Prior,
        shape: (usize, usize),
        prox_opts: TvProxOpts,
    ) -> Result<Self, PosteriorError> {
        let (h, w) = shape;
        if likelihood.dim() != h * w {
            return Err(PosteriorError::ShapeMismatch {
                expected: likelihood.dim(),
                h,
                w,
            });
        }
        let lipschitz_smooth = likelihood.lipschitz();
        Ok(Self {
            likelihood,
            prior,
            shape,
            lipschitz_smooth,
            prox_opts,
        })
    }

    pub fn likelihood(&self) -> &Likelihood {
        &self.likelihood
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn prox_opts(&self) -> TvProxOpts {
        self.prox_opts
    }

    fn to_image(&self, x: &[f64]) -> Image {
        Image::new(x.to_vec(), self.shape.0, self.shape.1).expect("state length matches shape")
    }

    /// Full drift gradient `grad f^b + grad g^lambda`.
    pub fn smoothed_grad(&self, x: &[f64]) -> Result<Vec<f64>, PosteriorError> {
        let mut g = self.likelihood.grad(x)?;
        let env = my_envelope_grad(&self.to_image(x), &self.prior, self.prox_opts);
        for (gi, ei) in g.iter_mut().zip(env.as_slice()) {
            *gi += ei;
        }
        Ok(g)
    }
}

impl Target for SmoothedPosterior {
    fn dim(&self) -> usize {
        self.likelihood.dim()
    }

    fn grad_smooth(&self, x: &[f64]) -> Vec<f64> {
        self.likelihood
            .grad(x)
            .expect("sampler states are componentwise non-negative")
    }

    fn prox(&self, x: &[f64], step: f64) -> Vec<f64> {
        self.prior
            .prox(&self.to_image(x), step, self.prox_opts)
            .into_vec()
    }

    fn lambda(&self) -> f64 {
        self.prior.lambda
    }

    fn lipschitz_smooth(&self) -> f64 {
        self.lipschitz_smooth
    }

    fn potential_smoothed(&self, x: &[f64]) -> f64 {
        let f = self
            .likelihood
            .potential(x)
            .expect("sampler states are componentwise non-negative");
        f + self.prior.envelope_value(&self.to_image(x), self.prox_opts)
    }

    fn potential_exact(&self, x: &[f64]) -> f64 {
        if x.iter().any(|&v| v < 0.0) {
            return f64::INFINITY;
        }
        let f = self
            .likelihood
            .potential_exact(x)
            .expect("non-negative checked above");
        f + self.prior.theta * tv_value(&self.to_image(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::norm2;
    use crate::likelihood::LikelihoodKind;
    use crate::ops::ForwardOp;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ACCURATE: TvProxOpts = TvProxOpts {
        max_iters: 2000,
        gap_tol: Some(1e-13),
    };

    fn random_image(h: usize, w: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(h, w, |_, _| 0.3 + rng.random::<f64>())
    }

    #[test]
    fn envelope_grad_of_constant_is_zero() {
        let prior = Prior::new(1.3, 0.7).unwrap();
        let g = my_envelope_grad(&Image::constant(2.0, 5, 5), &prior, ACCURATE);
        assert!(norm2(g.as_slice()) < 1e-10);
    }

    #[test]
    fn envelope_grad_is_lipschitz() {
        let prior = Prior::new(0.8, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for seed in 0..20 {
            let x = random_image(4, 4, 500 + seed);
            let y = Image::from_fn(4, 4, |i, j| x.get(i, j) + 0.2 * rng.random::<f64>());
            let gx = my_envelope_grad(&x, &prior, ACCURATE);
            let gy = my_envelope_grad(&y, &prior, ACCURATE);
            let dg: Vec<f64> = gx
                .as_slice()
                .iter()
                .zip(gy.as_slice())
                .map(|(a, b)| a - b)
                .collect();
            let dx: Vec<f64> = x
                .as_slice()
                .iter()
                .zip(y.as_slice())
                .map(|(a, b)| a - b)
                .collect();
            assert!(norm2(&dg) <= norm2(&dx) / prior.lambda + 1e-9);
        }
    }

    #[test]
    fn envelope_grad_matches_finite_differences() {
        let prior = Prior::new(0.6, 0.5).unwrap();
        let x = random_image(4, 4, 8);
        let g = my_envelope_grad(&x, &prior, ACCURATE);
        let h = 1e-5;
        for k in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.as_mut_slice()[k] += h;
            xm.as_mut_slice()[k] -= h;
            let fd = (prior.envelope_value(&xp, ACCURATE) - prior.envelope_value(&xm, ACCURATE))
                / (2.0 * h);
            let a = g.as_slice()[k];
            let scale = a.abs().max(fd.abs()).max(1.0);
            assert!(
                (a - fd).abs() / scale < 1e-4,
                "component {k}: analytic {a} vs fd {fd}"
            );
        }
    }

    fn toy_posterior(seed: u64) -> (SmoothedPosterior, Image) {
        let x = random_image(4, 4, seed);
        let n = x.len();
        let counts: Vec<f64> = (0..n).map(|i| (i % 4) as f64).collect();
        let lk = Likelihood::new(
            LikelihoodKind::Poisson { counts },
            ForwardOp::identity(n),
            0.05,
        )
        .unwrap();
        let prior = Prior::new(0.4, 0.6).unwrap();
        let post = SmoothedPosterior::with_prox_opts(lk, prior, (4, 4), ACCURATE).unwrap();
        (post, x)
    }

    #[test]
    fn smoothed_grad_vanishes_at_joint_stationary_point() {
        // constant image + matching counts: likelihood gradient and
        // envelope gradient are both zero
        let c = 2.0;
        let b = 0.05;
        let n = 9;
        let lk = Likelihood::new(
            LikelihoodKind::Poisson {
                counts: vec![c + b; n],
            },
            ForwardOp::identity(n),
            b,
        )
        .unwrap();
        let prior = Prior::new(1.0, 0.5).unwrap();
        let post = SmoothedPosterior::with_prox_opts(lk, prior, (3, 3), ACCURATE).unwrap();
        let g = post.smoothed_grad(&vec![c; n]).unwrap();
        assert!(norm2(&g) < 1e-9);
    }

    #[test]
    fn smoothed_grad_matches_finite_differences() {
        let (post, x) = toy_posterior(21);
        let g = post.smoothed_grad(x.as_slice()).unwrap();
        let h = 1e-5;
        for k in 0..x.len() {
            let mut xp = x.as_slice().to_vec();
            let mut xm = xp.clone();
            xp[k] += h;
            xm[k] -= h;
            let fd = (post.potential_smoothed(&xp) - post.potential_smoothed(&xm)) / (2.0 * h);
            let scale = g[k].abs().max(fd.abs()).max(1.0);
            assert!(
                (g[k] - fd).abs() / scale < 1e-4,
                "component {k}: analytic {} vs fd {fd}",
                g[k]
            );
        }
    }

    #[test]
    fn sampled_gradient_ratios_respect_lipschitz_total() {
        let (post, _) = toy_posterior(33);
        let l_total = post.lipschitz_total();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let x1: Vec<f64> = (0..16).map(|_| rng.random::<f64>() * 2.0).collect();
            let x2: Vec<f64> = (0..16).map(|_| rng.random::<f64>() * 2.0).collect();
            let g1 = post.smoothed_grad(&x1).unwrap();
            let g2 = post.smoothed_grad(&x2).unwrap();
            let dg: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a - b).collect();
            let dx: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a - b).collect();
            let ratio = norm2(&dg) / norm2(&dx).max(1e-12);
            assert!(
                ratio <= l_total * (1.0 + 1e-6),
                "ratio {ratio} exceeds bound {l_total}"
            );
        }
    }
}
