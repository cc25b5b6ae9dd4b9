//! Linear forward operators (circulant convolution, masking, identity) with
//! adjoints and spectral-norm estimation.
//!
//! All operators use the periodic (circulant) boundary convention so that the
//! convolution diagonalises in the Fourier basis.

use crate::fft::Fft2;
use crate::image::{dot, norm2, Image};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use thiserror::Error;

/// Spectral norms are inflated by 1% so cached values upper-bound the truth;
/// step-size rules divide by these, so erring high keeps samplers stable.
pub const NORM_SAFETY_FACTOR: f64 = 1.01;

#[derive(Debug, Error)]
pub enum OpError {
    #[error("kernel shape {kernel_h}x{kernel_w} exceeds image shape {image_h}x{image_w}")]
    KernelTooLarge {
        kernel_h: usize,
        kernel_w: usize,
        image_h: usize,
        image_w: usize,
    },
    #[error("operator expects input of length {expected}, got {got}")]
    InputLength { expected: usize, got: usize },
    #[error("mask index {index} out of range for image of {len} pixels")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("mask indices contain duplicates (index {index})")]
    DuplicateIndex { index: usize },
    #[error("mask must select at least one pixel")]
    EmptyMask,
}

/// Periodic convolution with a fixed kernel, applied in the frequency domain.
///
/// Anchoring convention: kernel pixel `(a, b)` with centre
/// `(ci, cj) = ((kh-1)/2, (kw-1)/2)` is placed at frame position
/// `((a - ci) mod h, (b - cj) mod w)`, so the kernel centre sits on the
/// zero-frequency origin and a centred delta kernel is the identity.
#[derive(Debug, Clone)]
pub struct CirculantConv {
    shape: (usize, usize),
    kernel_hat: Vec<Complex64>,
    fft: Fft2,
}

impl CirculantConv {
    pub fn new(kernel: &Image, shape: (usize, usize)) -> Result<Self, OpError> {
        let (h, w) = shape;
        if kernel.height() > h || kernel.width() > w {
            return Err(OpError::KernelTooLarge {
                kernel_h: kernel.height(),
                kernel_w: kernel.width(),
                image_h: h,
                image_w: w,
            });
        }
        let ci = (kernel.height() - 1) / 2;
        let cj = (kernel.width() - 1) / 2;
        let mut frame = vec![0.0; h * w];
        for a in 0..kernel.height() {
            for b in 0..kernel.width() {
                let i = (a + h - ci) % h;
                let j = (b + w - cj) % w;
                frame[i * w + j] += kernel.get(a, b);
            }
        }
        let fft = Fft2::new(h, w);
        let kernel_hat = fft.forward_real(&frame);
        Ok(Self {
            shape,
            kernel_hat,
            fft,
        })
    }

    fn convolve(&self, x: &[f64], conjugate: bool) -> Vec<f64> {
        let mut spec = self.fft.forward_real(x);
        for (s, k) in spec.iter_mut().zip(&self.kernel_hat) {
            *s *= if conjugate { k.conj() } else { *k };
        }
        self.fft.inverse_to_real(spec)
    }

    /// Exact spectral norm, `max_f |kernel_hat(f)|`.
    pub fn exact_norm(&self) -> f64 {
        self.kernel_hat
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }
}

/// Selection of a fixed subset of pixels, in index order.
#[derive(Debug, Clone)]
pub struct Mask {
    indices: Vec<usize>,
    input_len: usize,
}

impl Mask {
    pub fn new(indices: Vec<usize>, input_len: usize) -> Result<Self, OpError> {
        if indices.is_empty() {
            return Err(OpError::EmptyMask);
        }
        let mut seen = vec![false; input_len];
        for &idx in &indices {
            if idx >= input_len {
                return Err(OpError::IndexOutOfRange {
                    index: idx,
                    len: input_len,
                });
            }
            if seen[idx] {
                return Err(OpError::DuplicateIndex { index: idx });
            }
            seen[idx] = true;
        }
        Ok(Self { indices, input_len })
    }

    /// Deterministically sample `floor(fraction * n)` observed pixels.
    pub fn random(fraction: f64, input_len: usize, seed: u64) -> Result<Self, OpError> {
        assert!(
            fraction > 0.0 && fraction <= 1.0,
            "mask fraction must lie in (0, 1]"
        );
        let m = ((fraction * input_len as f64).floor() as usize).max(1);
        // partial Fisher-Yates over 0..n
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pool: Vec<usize> = (0..input_len).collect();
        for k in 0..m {
            let j = rng.random_range(k..input_len);
            pool.swap(k, j);
        }
        let mut indices = pool[..m].to_vec();
        indices.sort_unstable();
        Self::new(indices, input_len)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

/// Forward operator `A` of the observation model.
#[derive(Debug, Clone)]
pub enum ForwardOp {
    Identity { len: usize },
    Conv(CirculantConv),
    Mask(Mask),
}

impl ForwardOp {
    pub fn identity(len: usize) -> Self {
        ForwardOp::Identity { len }
    }

    pub fn conv(kernel: &Image, shape: (usize, usize)) -> Result<Self, OpError> {
        Ok(ForwardOp::Conv(CirculantConv::new(kernel, shape)?))
    }

    pub fn mask(indices: Vec<usize>, input_len: usize) -> Result<Self, OpError> {
        Ok(ForwardOp::Mask(Mask::new(indices, input_len)?))
    }

    pub fn input_len(&self) -> usize {
        match self {
            ForwardOp::Identity { len } => *len,
            ForwardOp::Conv(c) => c.shape.0 * c.shape.1,
            ForwardOp::Mask(m) => m.input_len,
        }
    }

    pub fn output_len(&self) -> usize {
        match self {
            ForwardOp::Identity { len } => *len,
            ForwardOp::Conv(c) => c.shape.0 * c.shape.1,
            ForwardOp::Mask(m) => m.indices.len(),
        }
    }

    fn check_len(&self, got: usize, expected: usize) -> Result<(), OpError> {
        if got != expected {
            Err(OpError::InputLength { expected, got })
        } else {
            Ok(())
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, OpError> {
        self.check_len(x.len(), self.input_len())?;
        Ok(match self {
            ForwardOp::Identity { .. } => x.to_vec(),
            ForwardOp::Conv(c) => c.convolve(x, false),
            ForwardOp::Mask(m) => m.indices.iter().map(|&i| x[i]).collect(),
        })
    }

    /// True transpose of `apply`: `<A u, v> = <u, A^T v>`.
    pub fn adjoint(&self, v: &[f64]) -> Result<Vec<f64>, OpError> {
        self.check_len(v.len(), self.output_len())?;
        Ok(match self {
            ForwardOp::Identity { .. } => v.to_vec(),
            ForwardOp::Conv(c) => c.convolve(v, true),
            ForwardOp::Mask(m) => {
                let mut out = vec![0.0; m.input_len];
                for (k, &i) in m.indices.iter().enumerate() {
                    out[i] = v[k];
                }
                out
            }
        })
    }

    /// Power-method spectral norm estimate, inflated by [`NORM_SAFETY_FACTOR`].
    pub fn operator_norm(&self, iters: usize, tol: f64, seed: u64) -> NormEstimate {
        let n = self.input_len();
        let mut est = power_method(
            |x| self.apply(x).expect("operator input length"),
            |v| self.adjoint(v).expect("operator output length"),
            n,
            iters,
            tol,
            seed,
        );
        est.value *= NORM_SAFETY_FACTOR;
        est
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NormEstimate {
    pub value: f64,
    /// False when the iteration budget ran out before `tol` was met; the
    /// value is then the last iterate, to be used with caution.
    pub converged: bool,
}

/// Power method on `A^T A`, returning an estimate of `||A||`.
pub fn power_method(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    adjoint: impl Fn(&[f64]) -> Vec<f64>,
    dim: usize,
    iters: usize,
    tol: f64,
    seed: u64,
) -> NormEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut sigma = 0.0;
    for _ in 0..iters {
        let av = apply(&v);
        let mut w = adjoint(&av);
        let lambda = dot(&w, &v); // Rayleigh quotient for A^T A
        let new_sigma = lambda.max(0.0).sqrt();
        let nw = norm2(&w);
        if nw == 0.0 {
            return NormEstimate {
                value: 0.0,
                converged: true,
            };
        }
        w.iter_mut().for_each(|x| *x /= nw);
        let done = (new_sigma - sigma).abs() <= tol * new_sigma.max(1.0);
        sigma = new_sigma;
        v = w;
        if done {
            return NormEstimate {
                value: sigma,
                converged: true,
            };
        }
    }
    NormEstimate {
        value: sigma,
        converged: false,
    }
}

/// `k x k` uniform blur kernel (entries `1/k^2`).
pub fn uniform_kernel(k: usize) -> Image {
    Image::constant(1.0 / (k * k) as f64, k, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_image(h: usize, w: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(h, w, |_, _| rng.random::<f64>())
    }

    /// Direct nested-loop circular convolution with the same anchoring
    /// convention as `CirculantConv`.
    fn brute_force_conv(x: &Image, kernel: &Image) -> Image {
        let (h, w) = x.shape();
        let ci = (kernel.height() - 1) / 2;
        let cj = (kernel.width() - 1) / 2;
        Image::from_fn(h, w, |i, j| {
            let mut acc = 0.0;
            for a in 0..kernel.height() {
                for b in 0..kernel.width() {
                    let qi = (a + h - ci) % h;
                    let qj = (b + w - cj) % w;
                    acc += kernel.get(a, b) * x.get((i + h - qi) % h, (j + w - qj) % w);
                }
            }
            acc
        })
    }

    #[test]
    fn centered_delta_kernel_is_identity() {
        let x = random_image(5, 7, 3);
        let mut delta = Image::zeros(3, 3);
        delta.set(1, 1, 1.0);
        let op = ForwardOp::conv(&delta, x.shape()).unwrap();
        let y = op.apply(x.as_slice()).unwrap();
        for (a, b) in x.as_slice().iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_kernel_preserves_constants() {
        let x = Image::constant(3.25, 8, 8);
        let op = ForwardOp::conv(&uniform_kernel(5), x.shape()).unwrap();
        let y = op.apply(x.as_slice()).unwrap();
        for v in &y {
            assert!((v - 3.25).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_matches_brute_force_oracle() {
        let x = random_image(4, 4, 11);
        let kernel = random_image(3, 3, 12);
        let op = ForwardOp::conv(&kernel, x.shape()).unwrap();
        let fast = op.apply(x.as_slice()).unwrap();
        let slow = brute_force_conv(&x, &kernel);
        for (a, b) in fast.iter().zip(slow.as_slice()) {
            assert!((a - b).abs() < 1e-10, "fft {a} vs spatial {b}");
        }
    }

    #[test]
    fn conv_matches_brute_force_all_small_shapes() {
        let mut seed = 100;
        for h in 2..=8usize {
            for w in 2..=8usize {
                for (kh, kw) in [(1, 1), (2, 2), (3, 3), (2, 3)] {
                    if kh > h || kw > w {
                        continue;
                    }
                    seed += 1;
                    let x = random_image(h, w, seed);
                    let kernel = random_image(kh, kw, seed + 5000);
                    let op = ForwardOp::conv(&kernel, x.shape()).unwrap();
                    let fast = op.apply(x.as_slice()).unwrap();
                    let slow = brute_force_conv(&x, &kernel);
                    for (a, b) in fast.iter().zip(slow.as_slice()) {
                        assert!(
                            (a - b).abs() < 1e-10,
                            "mismatch at {h}x{w} kernel {kh}x{kw}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn kernel_larger_than_image_is_rejected() {
        let err = ForwardOp::conv(&uniform_kernel(5), (4, 4)).unwrap_err();
        assert!(matches!(err, OpError::KernelTooLarge { .. }));
    }

    #[test]
    fn mask_full_selection_is_identity() {
        let x = random_image(3, 3, 21);
        let op = ForwardOp::mask((0..9).collect(), 9).unwrap();
        assert_eq!(op.apply(x.as_slice()).unwrap(), x.as_slice());
    }

    #[test]
    fn mask_adjoint_of_apply_zeroes_unobserved() {
        let x = random_image(3, 3, 22);
        let op = ForwardOp::mask(vec![0, 4, 7], 9).unwrap();
        let y = op.apply(x.as_slice()).unwrap();
        let back = op.adjoint(&y).unwrap();
        for (i, v) in back.iter().enumerate() {
            let expected = if [0, 4, 7].contains(&i) {
                x.as_slice()[i]
            } else {
                0.0
            };
            assert_eq!(*v, expected);
        }
    }

    #[test]
    fn mask_rejects_bad_indices() {
        assert!(matches!(
            Mask::new(vec![0, 9], 9).unwrap_err(),
            OpError::IndexOutOfRange { index: 9, .. }
        ));
        assert!(matches!(
            Mask::new(vec![1, 1], 9).unwrap_err(),
            OpError::DuplicateIndex { index: 1 }
        ));
    }

    #[test]
    fn adjoint_identity_all_operator_kinds() {
        let shape = (6, 6);
        let n = 36;
        let ops = vec![
            ForwardOp::identity(n),
            ForwardOp::conv(&random_image(3, 3, 31), shape).unwrap(),
            ForwardOp::Mask(Mask::random(0.3, n, 32).unwrap()),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for op in &ops {
            for _ in 0..50 {
                let u: Vec<f64> = (0..op.input_len()).map(|_| rng.random::<f64>() - 0.5).collect();
                let v: Vec<f64> = (0..op.output_len()).map(|_| rng.random::<f64>() - 0.5).collect();
                let au = op.apply(&u).unwrap();
                let atv = op.adjoint(&v).unwrap();
                let lhs = dot(&au, &v);
                let rhs = dot(&u, &atv);
                let scale = lhs.abs().max(rhs.abs()).max(1e-30);
                assert!(
                    (lhs - rhs).abs() / scale < 1e-10,
                    "adjoint identity violated: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn norm_of_identity_and_mask_and_blur() {
        let id = ForwardOp::identity(16);
        let est = id.operator_norm(100, 1e-10, 1);
        assert!((est.value - NORM_SAFETY_FACTOR).abs() < 1e-9);

        let mask = ForwardOp::Mask(Mask::random(0.3, 64, 7).unwrap());
        let est = mask.operator_norm(100, 1e-10, 2);
        assert!((est.value / NORM_SAFETY_FACTOR - 1.0).abs() < 1e-9);

        let blur = ForwardOp::conv(&uniform_kernel(5), (64, 64)).unwrap();
        let est = blur.operator_norm(4000, 1e-9, 3);
        assert!(
            (est.value / NORM_SAFETY_FACTOR - 1.0).abs() < 1e-4,
            "blur norm {} (doubly stochastic circulant should have norm 1)",
            est.value
        );
        if let ForwardOp::Conv(c) = &blur {
            assert!((c.exact_norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn power_method_on_diagonal_operator() {
        let d: Vec<f64> = vec![0.3, 1.7, 0.9, 1.2, 0.1, 1.69];
        let apply = |x: &[f64]| x.iter().zip(&d).map(|(v, di)| v * di).collect::<Vec<_>>();
        let est = power_method(apply, apply, d.len(), 5000, 1e-12, 9);
        assert!(est.converged);
        assert!((est.value - 1.7).abs() < 1e-6, "got {}", est.value);
    }
}
