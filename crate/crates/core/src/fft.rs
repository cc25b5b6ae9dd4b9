//! Thin 2-D FFT layer over `rustfft`.
//!
//! Plans are cheap to clone (`Arc`) and safe to share across threads; every
//! transform call owns its scratch, so concurrent use needs no locking.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

#[derive(Clone)]
pub struct Fft2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish()
    }
}

impl Fft2 {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft(width, FftDirection::Forward),
            row_inv: planner.plan_fft(width, FftDirection::Inverse),
            col_fwd: planner.plan_fft(height, FftDirection::Forward),
            col_inv: planner.plan_fft(height, FftDirection::Inverse),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    fn transform(&self, buf: &mut [Complex64], forward: bool) {
        let (h, w) = (self.height, self.width);
        assert_eq!(buf.len(), h * w, "fft buffer shape mismatch");
        let row = if forward { &self.row_fwd } else { &self.row_inv };
        let col = if forward { &self.col_fwd } else { &self.col_inv };

        let mut scratch = vec![Complex64::default(); row.get_inplace_scratch_len()];
        for r in buf.chunks_exact_mut(w) {
            row.process_with_scratch(r, &mut scratch);
        }

        // columns: transpose, run row transforms, transpose back
        let mut t = vec![Complex64::default(); h * w];
        for i in 0..h {
            for j in 0..w {
                t[j * h + i] = buf[i * w + j];
            }
        }
        let mut scratch = vec![Complex64::default(); col.get_inplace_scratch_len()];
        for c in t.chunks_exact_mut(h) {
            col.process_with_scratch(c, &mut scratch);
        }
        for j in 0..w {
            for i in 0..h {
                buf[i * w + j] = t[j * h + i];
            }
        }
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.transform(buf, true);
    }

    /// Unitary inverse: includes the 1/(h*w) normalisation.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, false);
        let scale = 1.0 / (self.height * self.width) as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    pub fn forward_real(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    pub fn inverse_to_real(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.inverse(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }
}
