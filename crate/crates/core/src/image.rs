//! Flat image container used throughout the crate.
//!
//! Pixels are stored row-major as `f64` intensities (photons per pixel).
//! All numerical code in this crate works in 64-bit floating point.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("data length {len} does not match shape {height}x{width}")]
    ShapeMismatch {
        len: usize,
        height: usize,
        width: usize,
    },
    #[error("image dimensions must be positive, got {height}x{width}")]
    EmptyShape { height: usize, width: usize },
}

/// A grayscale image: row-major intensities plus 2-D shape metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    data: Vec<f64>,
    height: usize,
    width: usize,
}

impl Image {
    pub fn new(data: Vec<f64>, height: usize, width: usize) -> Result<Self, ImageError> {
        if height == 0 || width == 0 {
            return Err(ImageError::EmptyShape { height, width });
        }
        if data.len() != height * width {
            return Err(ImageError::ShapeMismatch {
                len: data.len(),
                height,
                width,
            });
        }
        Ok(Self {
            data,
            height,
            width,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::constant(0.0, height, width)
    }

    pub fn constant(value: f64, height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "image shape must be positive");
        Self {
            data: vec![value; height * width],
            height,
            width,
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                data.push(f(i, j));
            }
        }
        Self {
            data,
            height,
            width,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Mean intensity value, `||x||_1 / n` for non-negative images.
    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Rescale so that the mean intensity equals `miv`. No-op on all-zero images.
    pub fn rescaled_to_miv(&self, miv: f64) -> Image {
        let current = self.mean();
        if current == 0.0 {
            return self.clone();
        }
        let scale = miv / current;
        Image {
            data: self.data.iter().map(|v| v * scale).collect(),
            height: self.height,
            width: self.width,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            data: self.data.iter().map(|&v| f(v)).collect(),
            height: self.height,
            width: self.width,
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
