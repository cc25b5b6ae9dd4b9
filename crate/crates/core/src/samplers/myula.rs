//! Reflected MYULA: one Euler-Maruyama step on the smoothed drift followed
//! by a componentwise absolute value.

use super::{reflect_in_place, ChainState, SamplerError};
use crate::posterior::Target;
use crate::rng::GaussianStream;

/// Drift mean of one MYULA step from `x`:
/// `(1 - delta/lambda) x - delta grad f^b(x) + (delta/lambda) prox_g^lambda(x)`.
pub fn myula_drift_mean<T: Target + ?Sized>(target: &T, x: &[f64], delta: f64) -> Vec<f64> {
    let lambda = target.lambda();
    let grad = target.grad_smooth(x);
    let prox = target.prox(x, lambda);
    let a = 1.0 - delta / lambda;
    let c = delta / lambda;
    x.iter()
        .zip(&grad)
        .zip(&prox)
        .map(|((&xi, &gi), &pi)| a * xi - delta * gi + c * pi)
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct Myula {
    pub delta: f64,
}

impl Myula {
    pub fn step<T: Target + ?Sized>(
        &self,
        state: &mut ChainState,
        target: &T,
        rng: &mut GaussianStream,
    ) -> Result<(), SamplerError> {
        let mut y = myula_drift_mean(target, &state.x, self.delta);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(SamplerError::NonFiniteDrift { iter: state.iter });
        }
        let noise_scale = (2.0 * self.delta).sqrt();
        for v in y.iter_mut() {
            *v += noise_scale * rng.standard_normal();
        }
        reflect_in_place(&mut y);
        state.x = y;
        Ok(())
    }
}
