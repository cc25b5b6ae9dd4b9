//! Seedable random streams for the samplers.
//!
//! Each chain owns one counter-based ChaCha8 stream. Gaussian variates are
//! produced by the Box-Muller transform (not the platform-dependent ziggurat
//! tables), so a given seed yields the same draw sequence everywhere and
//! reruns are bit-reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn seed_from_u64(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Derive an independent substream, e.g. per path or per chain.
    /// Streams for distinct `index` values never overlap because ChaCha
    /// stream ids select disjoint keystream blocks.
    pub fn substream(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index.wrapping_add(1));
        Self { rng, spare: None }
    }

    /// Uniform draw in the half-open interval (0, 1].
    fn uniform_pos(&mut self) -> f64 {
        1.0 - self.rng.random::<f64>()
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// One standard normal draw. Box-Muller: each pair of uniforms
    /// (u1, u2) maps to sqrt(-2 ln u1) * (cos, sin)(2 pi u2); the second
    /// element is cached and returned on the next call.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform_pos();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.standard_normal();
        }
    }

    /// Access to the underlying uniform generator for discrete draws.
    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}
