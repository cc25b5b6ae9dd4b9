//! Chain analytics: streaming multiscale moments, autocorrelation,
//! mixing-direction selection and image quality metrics.

use crate::fft::Fft2;
use crate::image::{norm2, Image};
use rustfft::num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("sample length {got} does not match accumulator shape {h}x{w}")]
    ShapeMismatch { h: usize, w: usize, got: usize },
    #[error("window {window} does not divide image shape {h}x{w}")]
    BadWindow { window: usize, h: usize, w: usize },
    #[error("accumulators with different shapes or windows cannot be merged")]
    MergeMismatch,
    #[error("store is empty")]
    EmptyStore,
    #[error("trace of length {len} too short for max lag {max_lag}")]
    TraceTooShort { len: usize, max_lag: usize },
}

/// Default downsampling windows: scale 0 keeps full resolution, the
/// remaining scales i in {2, 4, 8} downsample by a factor `2 i`. Set
/// `windows = [1, 4, 16, 256]` in the config to read the scales as powers
/// instead.
pub const DEFAULT_WINDOWS: [usize; 4] = [1, 4, 8, 16];

/// Block-average `x` over non-overlapping `window x window` tiles.
pub fn downsample(x: &[f64], h: usize, w: usize, window: usize) -> Vec<f64> {
    if window == 1 {
        return x.to_vec();
    }
    let (oh, ow) = (h / window, w / window);
    let mut out = vec![0.0; oh * ow];
    let inv = 1.0 / (window * window) as f64;
    for bi in 0..oh {
        for bj in 0..ow {
            let mut acc = 0.0;
            for di in 0..window {
                for dj in 0..window {
                    acc += x[(bi * window + di) * w + bj * window + dj];
                }
            }
            out[bi * ow + bj] = acc * inv;
        }
    }
    out
}

#[derive(Debug, Clone)]
struct ScaleMoments {
    window: usize,
    shape: (usize, usize),
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

/// Streaming first/second moments of the sample stream at several spatial
/// scales. Merging accumulators from parallel chains is exact: all state is
/// additive.
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    shape: (usize, usize),
    count: u64,
    scales: Vec<ScaleMoments>,
    /// Number of variance entries clamped to zero by rounding, across all
    /// queries so far.
    pub clamped_negative_variances: std::cell::Cell<u64>,
}

impl MomentAccumulator {
    pub fn new(h: usize, w: usize, windows: &[usize]) -> Result<Self, AnalyticsError> {
        let mut scales = Vec::with_capacity(windows.len());
        for &window in windows {
            if window == 0 || h % window != 0 || w % window != 0 {
                return Err(AnalyticsError::BadWindow { window, h, w });
            }
            let shape = (h / window, w / window);
            scales.push(ScaleMoments {
                window,
                shape,
                sum: vec![0.0; shape.0 * shape.1],
                sumsq: vec![0.0; shape.0 * shape.1],
            });
        }
        Ok(Self {
            shape: (h, w),
            count: 0,
            scales,
            clamped_negative_variances: std::cell::Cell::new(0),
        })
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn windows(&self) -> Vec<usize> {
        self.scales.iter().map(|s| s.window).collect()
    }

    pub fn push(&mut self, sample: &[f64]) -> Result<(), AnalyticsError> {
        let (h, w) = self.shape;
        if sample.len() != h * w {
            return Err(AnalyticsError::ShapeMismatch {
                h,
                w,
                got: sample.len(),
            });
        }
        self.count += 1;
        for scale in &mut self.scales {
            let down = downsample(sample, h, w, scale.window);
            for (i, v) in down.iter().enumerate() {
                scale.sum[i] += v;
                scale.sumsq[i] += v * v;
            }
        }
        Ok(())
    }

    /// Merge a second accumulator; equals accumulating the concatenated
    /// stream.
    pub fn merge(&mut self, other: &MomentAccumulator) -> Result<(), AnalyticsError> {
        if self.shape != other.shape || self.windows() != other.windows() {
            return Err(AnalyticsError::MergeMismatch);
        }
        self.count += other.count;
        for (a, b) in self.scales.iter_mut().zip(&other.scales) {
            for i in 0..a.sum.len() {
                a.sum[i] += b.sum[i];
                a.sumsq[i] += b.sumsq[i];
            }
        }
        Ok(())
    }

    fn scale(&self, window: usize) -> Option<&ScaleMoments> {
        self.scales.iter().find(|s| s.window == window)
    }

    /// Running mean at the given window (window 1 = full resolution).
    pub fn mean(&self, window: usize) -> Option<Image> {
        let s = self.scale(window)?;
        if self.count == 0 {
            return None;
        }
        let n = self.count as f64;
        let data = s.sum.iter().map(|v| v / n).collect();
        Some(Image::new(data, s.shape.0, s.shape.1).expect("scale shape"))
    }

    /// Pixelwise standard deviation at the given window; negative variances
    /// from rounding are clamped to zero and counted.
    pub fn std(&self, window: usize) -> Option<Image> {
        let s = self.scale(window)?;
        if self.count == 0 {
            return None;
        }
        let n = self.count as f64;
        let data = s
            .sum
            .iter()
            .zip(&s.sumsq)
            .map(|(&sum, &sq)| {
                let m = sum / n;
                let var = sq / n - m * m;
                if var < 0.0 {
                    self.clamped_negative_variances
                        .set(self.clamped_negative_variances.get() + 1);
                    0.0
                } else {
                    var.sqrt()
                }
            })
            .collect();
        Some(Image::new(data, s.shape.0, s.shape.1).expect("scale shape"))
    }
}

/// `||estimate - truth|| / ||truth||`.
pub fn nrmse(estimate: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(estimate.len(), truth.len(), "shape mismatch");
    let diff: Vec<f64> = estimate.iter().zip(truth).map(|(a, b)| a - b).collect();
    norm2(&diff) / norm2(truth)
}

/// `10 log10(peak^2 n / ||e - t||^2)` in dB; `+inf` for identical inputs.
pub fn psnr(estimate: &[f64], truth: &[f64], peak: f64) -> f64 {
    assert_eq!(estimate.len(), truth.len(), "shape mismatch");
    assert!(peak > 0.0, "peak must be positive");
    let err2: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if err2 == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (peak * peak * estimate.len() as f64 / err2).log10()
}

#[derive(Debug, Clone)]
pub struct Acf {
    /// `values[k]` is the lag-k sample autocorrelation; `values[0] = 1`.
    pub values: Vec<f64>,
    /// Set when the trace has zero variance; values are then 1 at lag 0 and
    /// 0 elsewhere by convention.
    pub degenerate: bool,
}

/// Biased sample ACF normalised by the lag-0 autocovariance, computed in
/// the frequency domain.
pub fn acf(trace: &[f64], max_lag: usize) -> Result<Acf, AnalyticsError> {
    if trace.len() <= max_lag {
        return Err(AnalyticsError::TraceTooShort {
            len: trace.len(),
            max_lag,
        });
    }
    let n = trace.len();
    let mean = trace.iter().sum::<f64>() / n as f64;

    // autocorrelation via FFT with zero padding to avoid circular wrap
    let m = (2 * n).next_power_of_two();
    let fft = Fft2::new(1, m);
    let mut buf: Vec<Complex64> = trace
        .iter()
        .map(|&v| Complex64::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex64::default()))
        .take(m)
        .collect();
    fft.forward(&mut buf);
    for v in buf.iter_mut() {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    fft.inverse(&mut buf);

    let c0 = buf[0].re / n as f64;
    if c0 <= 0.0 || !c0.is_finite() {
        let mut values = vec![0.0; max_lag + 1];
        values[0] = 1.0;
        return Ok(Acf {
            values,
            degenerate: true,
        });
    }
    let values = (0..=max_lag)
        .map(|k| (buf[k].re / n as f64) / c0)
        .collect();
    Ok(Acf {
        values,
        degenerate: false,
    })
}

/// Direct O(n * max_lag) ACF definition, kept as the oracle for the
/// frequency-domain implementation.
pub fn acf_direct(trace: &[f64], max_lag: usize) -> Result<Acf, AnalyticsError> {
    if trace.len() <= max_lag {
        return Err(AnalyticsError::TraceTooShort {
            len: trace.len(),
            max_lag,
        });
    }
    let n = trace.len();
    let mean = trace.iter().sum::<f64>() / n as f64;
    let cov = |k: usize| -> f64 {
        (0..n - k)
            .map(|t| (trace[t] - mean) * (trace[t + k] - mean))
            .sum::<f64>()
            / n as f64
    };
    let c0 = cov(0);
    if c0 <= 0.0 || !c0.is_finite() {
        let mut values = vec![0.0; max_lag + 1];
        values[0] = 1.0;
        return Ok(Acf {
            values,
            degenerate: true,
        });
    }
    Ok(Acf {
        values: (0..=max_lag).map(|k| cov(k) / c0).collect(),
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceDomain {
    Pixel,
    /// Fourier magnitude coefficients; valid when the forward operator is
    /// diagonal in the Fourier basis (circulant).
    Fourier,
}

/// Scalar series of one tracked coefficient over the thinned samples.
#[derive(Debug, Clone)]
pub struct DirectionTrace {
    pub domain: TraceDomain,
    pub index: usize,
    pub series: Vec<f64>,
}

/// The fastest / median / slowest mixing directions by per-coefficient
/// variance (lowest, median, highest variance respectively).
#[derive(Debug, Clone)]
pub struct DirectionTraces {
    pub fastest: DirectionTrace,
    pub median: DirectionTrace,
    pub slowest: DirectionTrace,
}

fn coefficients(sample: &[f64], shape: (usize, usize), domain: TraceDomain, fft: &Fft2) -> Vec<f64> {
    match domain {
        TraceDomain::Pixel => sample.to_vec(),
        TraceDomain::Fourier => {
            debug_assert_eq!(fft.shape(), shape);
            fft.forward_real(sample).iter().map(|c| c.norm()).collect()
        }
    }
}

/// Streaming per-coefficient variances over a sample stream (first pass of
/// direction selection).
pub fn direction_variances<I>(
    samples: I,
    shape: (usize, usize),
    domain: TraceDomain,
) -> Result<Vec<f64>, AnalyticsError>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let fft = Fft2::new(shape.0, shape.1);
    let n = shape.0 * shape.1;
    let mut sum = vec![0.0; n];
    let mut sumsq = vec![0.0; n];
    let mut count = 0u64;
    for sample in samples {
        if sample.len() != n {
            return Err(AnalyticsError::ShapeMismatch {
                h: shape.0,
                w: shape.1,
                got: sample.len(),
            });
        }
        let coefs = coefficients(&sample, shape, domain, &fft);
        for (i, v) in coefs.iter().enumerate() {
            sum[i] += v;
            sumsq[i] += v * v;
        }
        count += 1;
    }
    if count == 0 {
        return Err(AnalyticsError::EmptyStore);
    }
    let nf = count as f64;
    Ok(sum
        .iter()
        .zip(&sumsq)
        .map(|(&s, &sq)| (sq / nf - (s / nf) * (s / nf)).max(0.0))
        .collect())
}

/// Indices of the (fastest, median, slowest) directions: lowest, median and
/// highest variance. Ties break to the lowest index; the median is the
/// lowest index attaining the median value of the variance multiset.
pub fn pick_direction_indices(variances: &[f64]) -> (usize, usize, usize) {
    assert!(!variances.is_empty());
    let mut fastest = 0;
    let mut slowest = 0;
    for (i, &v) in variances.iter().enumerate() {
        if v < variances[fastest] {
            fastest = i;
        }
        if v > variances[slowest] {
            slowest = i;
        }
    }
    let mut sorted: Vec<f64> = variances.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite variances"));
    let median_value = sorted[(sorted.len() - 1) / 2];
    let median = variances
        .iter()
        .position(|&v| v == median_value)
        .expect("median value comes from the multiset");
    (fastest, median, slowest)
}

/// Second pass of direction selection: extract the scalar series of the
/// three chosen coefficients.
pub fn extract_direction_traces<I>(
    samples: I,
    shape: (usize, usize),
    domain: TraceDomain,
    indices: (usize, usize, usize),
) -> Result<DirectionTraces, AnalyticsError>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let fft = Fft2::new(shape.0, shape.1);
    let mut fastest = Vec::new();
    let mut median = Vec::new();
    let mut slowest = Vec::new();
    for sample in samples {
        let coefs = coefficients(&sample, shape, domain, &fft);
        fastest.push(coefs[indices.0]);
        median.push(coefs[indices.1]);
        slowest.push(coefs[indices.2]);
    }
    if fastest.is_empty() {
        return Err(AnalyticsError::EmptyStore);
    }
    let mk = |index: usize, series: Vec<f64>| DirectionTrace {
        domain,
        index,
        series,
    };
    Ok(DirectionTraces {
        fastest: mk(indices.0, fastest),
        median: mk(indices.1, median),
        slowest: mk(indices.2, slowest),
    })
}

/// One-pass convenience wrapper over variance computation, index picking
/// and trace extraction for in-memory sample sets.
pub fn select_directions(
    samples: &[Vec<f64>],
    shape: (usize, usize),
    domain: TraceDomain,
) -> Result<DirectionTraces, AnalyticsError> {
    let variances = direction_variances(samples.iter().cloned(), shape, domain)?;
    let indices = pick_direction_indices(&variances);
    extract_direction_traces(samples.iter().cloned(), shape, domain, indices)
}

/// Batch-means standard error of the mean of a correlated scalar trace.
pub fn batch_means_se(trace: &[f64], n_batches: usize) -> (f64, f64) {
    assert!(n_batches >= 2 && trace.len() >= 2 * n_batches);
    let batch_len = trace.len() / n_batches;
    let used = batch_len * n_batches;
    let mean = trace[..used].iter().sum::<f64>() / used as f64;
    let mut var_between = 0.0;
    for b in 0..n_batches {
        let bm = trace[b * batch_len..(b + 1) * batch_len]
            .iter()
            .sum::<f64>()
            / batch_len as f64;
        var_between += (bm - mean) * (bm - mean);
    }
    var_between /= (n_batches - 1) as f64;
    (mean, (var_between / n_batches as f64).sqrt())
}
