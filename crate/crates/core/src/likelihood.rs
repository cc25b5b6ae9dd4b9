//! Photon-count likelihood potentials.
//!
//! Each likelihood is evaluated at the shifted linear predictor
//! `z = A x + b` with `b > 0`, which keeps every potential and gradient
//! finite and globally Lipschitz on the non-negative orthant. Constant data
//! terms (`log y_i!`, binomial coefficients) are dropped throughout; they
//! cancel in gradients and in Metropolis-Hastings ratios.
//!
//! Per-component potentials F_i(z), their derivatives s_i(z) and curvature
//! bounds c_i on `z >= b`:
//!
//! | model     | F_i(z)                        | s_i(z)                  | c_i                          |
//! |-----------|-------------------------------|-------------------------|------------------------------|
//! | Poisson   | z - y ln z                    | 1 - y/z                 | y / b^2                      |
//! | binomial  | (t - y) z - y ln(1 - e^-z)    | (t-y) - y / (e^z - 1)   | y e^-b / (1 - e^-b)^2        |
//! | geometric | (t - 1) z - ln(1 - e^-z)      | (t-1) - 1 / (e^z - 1)   | e^-b / (1 - e^-b)^2          |
//!
//! `e^-z / (1 - e^-z)` is computed as `1 / expm1(z)` for stability near 0.

use crate::ops::ForwardOp;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LikelihoodError {
    #[error("x contains a negative entry at index {index} ({value}); reflect or project first")]
    NegativeEntry { index: usize, value: f64 },
    #[error("shift b must be positive, got {0}")]
    NonPositiveShift(f64),
    #[error("observation vector length {got} does not match operator output {expected}")]
    DataLength { expected: usize, got: usize },
    #[error("invalid observation at index {index}: {reason}")]
    InvalidObservation { index: usize, reason: String },
}

#[derive(Debug, Clone)]
pub enum LikelihoodKind {
    /// `y | x ~ Poisson(Ax)`; `counts` holds `y_i >= 0`.
    Poisson { counts: Vec<f64> },
    /// `y | x, t ~ Bin(t, 1 - e^{-Ax})`; `0 <= y_i <= t_i`, `t_i >= 1`.
    Binomial { counts: Vec<f64>, trials: Vec<f64> },
    /// `t | x ~ Geo(1 - e^{-Ax})`; `periods` holds `t_i >= 1`.
    Geometric { periods: Vec<f64> },
}

impl LikelihoodKind {
    fn len(&self) -> usize {
        match self {
            LikelihoodKind::Poisson { counts } => counts.len(),
            LikelihoodKind::Binomial { counts, .. } => counts.len(),
            LikelihoodKind::Geometric { periods } => periods.len(),
        }
    }

    fn validate(&self) -> Result<(), LikelihoodError> {
        let bad = |index: usize, reason: &str| {
            Err(LikelihoodError::InvalidObservation {
                index,
                reason: reason.to_string(),
            })
        };
        match self {
            LikelihoodKind::Poisson { counts } => {
                for (i, &y) in counts.iter().enumerate() {
                    if !y.is_finite() || y < 0.0 {
                        return bad(i, "Poisson count must be finite and >= 0");
                    }
                }
            }
            LikelihoodKind::Binomial { counts, trials } => {
                if counts.len() != trials.len() {
                    return Err(LikelihoodError::DataLength {
                        expected: trials.len(),
                        got: counts.len(),
                    });
                }
                for (i, (&y, &t)) in counts.iter().zip(trials).enumerate() {
                    if t < 1.0 {
                        return bad(i, "binomial trial count must be >= 1");
                    }
                    if y < 0.0 || y > t {
                        return bad(i, "binomial count must satisfy 0 <= y <= t");
                    }
                }
            }
            LikelihoodKind::Geometric { periods } => {
                for (i, &t) in periods.iter().enumerate() {
                    if t < 1.0 {
                        return bad(i, "geometric observation must be >= 1");
                    }
                }
            }
        }
        Ok(())
    }
}

/// A photon-count data-fit term `f^b(x) = F(Ax + b)`.
#[derive(Clone)]
pub struct Likelihood {
    kind: LikelihoodKind,
    op: ForwardOp,
    shift: f64,
    /// Upper bound on the operator spectral norm. Exact for the closed set
    /// of operator kinds used here (1 for identity/mask, max |kernel_hat|
    /// for circulant convolutions).
    norm_bound: f64,
}

impl Likelihood {
    pub fn new(kind: LikelihoodKind, op: ForwardOp, shift: f64) -> Result<Self, LikelihoodError> {
        if !(shift > 0.0) {
            return Err(LikelihoodError::NonPositiveShift(shift));
        }
        kind.validate()?;
        if kind.len() != op.output_len() {
            return Err(LikelihoodError::DataLength {
                expected: op.output_len(),
                got: kind.len(),
            });
        }
        let norm_bound = match &op {
            ForwardOp::Identity { .. } | ForwardOp::Mask(_) => 1.0,
            ForwardOp::Conv(c) => c.exact_norm(),
        };
        Ok(Self {
            kind,
            op,
            shift,
            norm_bound,
        })
    }

    pub fn kind(&self) -> &LikelihoodKind {
        &self.kind
    }

    pub fn operator(&self) -> &ForwardOp {
        &self.op
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn dim(&self) -> usize {
        self.op.input_len()
    }

    fn check_domain(&self, x: &[f64]) -> Result<(), LikelihoodError> {
        for (i, &v) in x.iter().enumerate() {
            if v < 0.0 {
                return Err(LikelihoodError::NegativeEntry { index: i, value: v });
            }
        }
        Ok(())
    }

    fn predictor(&self, x: &[f64], shift: f64) -> Vec<f64> {
        let mut z = self.op.apply(x).expect("operator input length");
        for v in z.iter_mut() {
            *v += shift;
        }
        z
    }

    fn scalar_potential(&self, i: usize, z: f64) -> f64 {
        match &self.kind {
            LikelihoodKind::Poisson { counts } => {
                let y = counts[i];
                if y == 0.0 {
                    z
                } else if z <= 0.0 {
                    f64::INFINITY
                } else {
                    z - y * z.ln()
                }
            }
            LikelihoodKind::Binomial { counts, trials } => {
                let y = counts[i];
                let base = (trials[i] - y) * z;
                if y == 0.0 {
                    base
                } else if z <= 0.0 {
                    f64::INFINITY
                } else {
                    base - y * (-(-z).exp_m1()).ln()
                }
            }
            LikelihoodKind::Geometric { periods } => {
                if z <= 0.0 {
                    f64::INFINITY
                } else {
                    (periods[i] - 1.0) * z - (-(-z).exp_m1()).ln()
                }
            }
        }
    }

    fn scalar_grad(&self, i: usize, z: f64) -> f64 {
        match &self.kind {
            LikelihoodKind::Poisson { counts } => 1.0 - counts[i] / z,
            LikelihoodKind::Binomial { counts, trials } => {
                trials[i] - counts[i] - counts[i] / z.exp_m1()
            }
            LikelihoodKind::Geometric { periods } => periods[i] - 1.0 - 1.0 / z.exp_m1(),
        }
    }

    /// `f^b(x) = sum_i F_i((Ax)_i + b)`, finite for every `x >= 0`.
    pub fn potential(&self, x: &[f64]) -> Result<f64, LikelihoodError> {
        self.check_domain(x)?;
        let z = self.predictor(x, self.shift);
        Ok(z
            .iter()
            .enumerate()
            .map(|(i, &zi)| self.scalar_potential(i, zi))
            .sum())
    }

    /// Unshifted potential `f(x) = sum_i F_i((Ax)_i)`, used when targeting
    /// the exact posterior; may be `+inf` on the boundary.
    pub fn potential_exact(&self, x: &[f64]) -> Result<f64, LikelihoodError> {
        self.check_domain(x)?;
        let z = self.predictor(x, 0.0);
        Ok(z
            .iter()
            .enumerate()
            .map(|(i, &zi)| self.scalar_potential(i, zi))
            .sum())
    }

    /// `grad f^b(x) = A^T s(Ax + b)` with the per-component derivatives above.
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>, LikelihoodError> {
        self.check_domain(x)?;
        let z = self.predictor(x, self.shift);
        let s: Vec<f64> = z
            .iter()
            .enumerate()
            .map(|(i, &zi)| self.scalar_grad(i, zi))
            .collect();
        Ok(self.op.adjoint(&s).expect("operator output length"))
    }

    /// Lipschitz bound for `grad f^b`: `||A||^2 * max_i c_i` with the
    /// curvature bounds tabulated in the module docs.
    pub fn lipschitz(&self) -> f64 {
        let b = self.shift;
        let max_c = match &self.kind {
            LikelihoodKind::Poisson { counts } => {
                counts.iter().copied().fold(0.0, f64::max) / (b * b)
            }
            LikelihoodKind::Binomial { counts, .. } => {
                let ymax = counts.iter().copied().fold(0.0, f64::max);
                let em1 = b.exp_m1();
                // y e^{-b} / (1-e^{-b})^2 = y e^{b} / (e^{b}-1)^2
                ymax * b.exp() / (em1 * em1)
            }
            LikelihoodKind::Geometric { .. } => {
                let em1 = b.exp_m1();
                b.exp() / (em1 * em1)
            }
        };
        self.norm_bound * self.norm_bound * max_c
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{dot, norm2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poisson(counts: Vec<f64>, b: f64) -> Likelihood {
        let n = counts.len();
        Likelihood::new(
            LikelihoodKind::Poisson { counts },
            ForwardOp::identity(n),
            b,
        )
        .unwrap()
    }

    fn finite_diff_grad(lk: &Likelihood, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                (lk.potential(&xp).unwrap() - lk.potential(&xm).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn poisson_zero_counts_zero_image() {
        let m = 7;
        let lk = poisson(vec![0.0; m], 0.01);
        let val = lk.potential(&vec![0.0; m]).unwrap();
        assert!((val - 0.01 * m as f64).abs() < 1e-14);
    }

    #[test]
    fn binomial_saturation_limit() {
        let lk = Likelihood::new(
            LikelihoodKind::Binomial {
                counts: vec![10.0; 4],
                trials: vec![10.0; 4],
            },
            ForwardOp::identity(4),
            0.01,
        )
        .unwrap();
        let val = lk.potential(&vec![50.0; 4]).unwrap();
        assert!(val.abs() < 1e-15, "saturated binomial potential {val}");
    }

    #[test]
    fn geometric_four_pixel_oracle() {
        let lk = Likelihood::new(
            LikelihoodKind::Geometric {
                periods: vec![1.0, 2.0, 3.0, 4.0],
            },
            ForwardOp::identity(4),
            0.01,
        )
        .unwrap();
        let x = vec![1.0; 4];
        // direct scalar sum at z = 1.01
        let z: f64 = 1.01;
        let term = -(1.0 - (-z).exp()).ln();
        let oracle = (0.0 * z + term)
            + (1.0 * z + term)
            + (2.0 * z + term)
            + (3.0 * z + term);
        let val = lk.potential(&x).unwrap();
        assert!((val - oracle).abs() < 1e-12, "{val} vs {oracle}");
    }

    #[test]
    fn poisson_gradient_vanishes_at_data_fit() {
        let y = vec![1.0, 2.0, 0.5, 3.0];
        let b = 0.01;
        let lk = poisson(y.clone(), b);
        let x: Vec<f64> = y.iter().map(|v| v - b).collect();
        let g = lk.grad(&x).unwrap();
        assert!(norm2(&g) < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 36;
        let x: Vec<f64> = (0..n).map(|_| 0.2 + rng.random::<f64>()).collect();
        let kinds = vec![
            LikelihoodKind::Poisson {
                counts: (0..n).map(|_| (rng.random::<f64>() * 5.0).floor()).collect(),
            },
            LikelihoodKind::Binomial {
                counts: (0..n).map(|_| (rng.random::<f64>() * 8.0).floor()).collect(),
                trials: vec![10.0; n],
            },
            LikelihoodKind::Geometric {
                periods: (0..n).map(|_| 1.0 + (rng.random::<f64>() * 6.0).floor()).collect(),
            },
        ];
        for kind in kinds {
            let lk = Likelihood::new(kind, ForwardOp::identity(n), 0.05).unwrap();
            let g = lk.grad(&x).unwrap();
            let fd = finite_diff_grad(&lk, &x, 1e-6);
            for (a, b) in g.iter().zip(&fd) {
                let scale = a.abs().max(b.abs()).max(1.0);
                assert!(
                    (a - b).abs() / scale < 1e-5,
                    "analytic {a} vs finite difference {b}"
                );
            }
        }
    }

    #[test]
    fn geometric_single_period_pushes_up() {
        let n = 5;
        let lk = Likelihood::new(
            LikelihoodKind::Geometric {
                periods: vec![1.0; n],
            },
            ForwardOp::identity(n),
            0.01,
        )
        .unwrap();
        let g = lk.grad(&vec![0.5; n]).unwrap();
        // s_i = -1/(e^z - 1) < 0, so descent direction -g is positive
        for v in &g {
            assert!(*v < 0.0);
        }
    }

    #[test]
    fn lipschitz_values() {
        let lk = poisson(vec![0.0; 3], 0.01);
        assert_eq!(lk.lipschitz(), 0.0);

        let mut counts = vec![2.0; 9];
        counts[4] = 12.0;
        let lk = poisson(counts, 0.01);
        assert!((lk.lipschitz() - 1.2e5).abs() < 1e-6);

        // binomial bound decays to y*e^{-b} for large b
        for b in [5.0, 10.0, 20.0] {
            let lk = Likelihood::new(
                LikelihoodKind::Binomial {
                    counts: vec![3.0],
                    trials: vec![10.0],
                },
                ForwardOp::identity(1),
                b,
            )
            .unwrap();
            let want = 3.0 * (-b).exp();
            // first-order correction to the limit is 2 e^{-b}
            assert!((lk.lipschitz() - want).abs() / want < 3.0 * (-b).exp(), "b={b}");
        }
    }

    #[test]
    fn curvature_bound_dominates_sampled_hessian() {
        // second differences of the scalar potentials never exceed c_i on z >= b
        let b = 0.05;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let kinds = vec![
            LikelihoodKind::Poisson { counts: vec![4.0] },
            LikelihoodKind::Binomial {
                counts: vec![4.0],
                trials: vec![10.0],
            },
            LikelihoodKind::Geometric { periods: vec![3.0] },
        ];
        for kind in kinds {
            let lk = Likelihood::new(kind, ForwardOp::identity(1), b).unwrap();
            let c = lk.lipschitz();
            for _ in 0..1000 {
                let x = rng.random::<f64>() * 4.0;
                let h = 1e-5;
                let (xp, xm) = (x + h, (x - h).max(0.0));
                let fp = lk.potential(&[xp]).unwrap();
                let fm = lk.potential(&[xm]).unwrap();
                let f0 = lk.potential(&[x]).unwrap();
                let hess = (fp - 2.0 * f0 + fm) / (h * h);
                assert!(
                    hess <= c * (1.0 + 1e-6) + 1e-6,
                    "sampled curvature {hess} exceeds bound {c}"
                );
            }
        }
    }

    #[test]
    fn gradient_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 16;
        let kinds = vec![
            LikelihoodKind::Poisson {
                counts: (0..n).map(|_| (rng.random::<f64>() * 6.0).floor()).collect(),
            },
            LikelihoodKind::Binomial {
                counts: (0..n).map(|_| (rng.random::<f64>() * 9.0).floor()).collect(),
                trials: vec![9.0; n],
            },
            LikelihoodKind::Geometric {
                periods: (0..n).map(|_| 1.0 + (rng.random::<f64>() * 4.0).floor()).collect(),
            },
        ];
        for kind in kinds {
            let lk = Likelihood::new(kind, ForwardOp::identity(n), 0.02).unwrap();
            for _ in 0..200 {
                let x1: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 3.0).collect();
                let x2: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 3.0).collect();
                let g1 = lk.grad(&x1).unwrap();
                let g2 = lk.grad(&x2).unwrap();
                let diff_g: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a - b).collect();
                let diff_x: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a - b).collect();
                assert!(dot(&diff_g, &diff_x) >= -1e-10);
            }
        }
    }

    #[test]
    fn finite_on_boundary_zeros() {
        let n = 6;
        let kinds = vec![
            LikelihoodKind::Poisson {
                counts: vec![3.0; n],
            },
            LikelihoodKind::Binomial {
                counts: vec![3.0; n],
                trials: vec![5.0; n],
            },
            LikelihoodKind::Geometric {
                periods: vec![2.0; n],
            },
        ];
        let mut x = vec![0.0; n];
        x[2] = 1.5; // mixed boundary/interior
        for kind in kinds {
            let lk = Likelihood::new(kind, ForwardOp::identity(n), 0.01).unwrap();
            assert!(lk.potential(&x).unwrap().is_finite());
            assert!(lk.grad(&x).unwrap().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn negative_entry_is_domain_error() {
        let lk = poisson(vec![1.0; 3], 0.01);
        let err = lk.potential(&[0.5, -0.1, 0.2]).unwrap_err();
        assert!(matches!(
            err,
            LikelihoodError::NegativeEntry { index: 1, .. }
        ));
    }
}
