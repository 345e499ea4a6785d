//! Dense `H × W × C` tensors and the metrics defined on them.

use crate::error::{CscError, Result};
use crate::rng::Rng;

/// Dense real tensor, row-major and channel-last: entry `(h, w, c)` lives at
/// `(h * width + w) * channels + c`.
///
/// Images (0-255 scale), sparse representations and noise all use this type.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Tensor3 {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        check_dims(height, width, channels)?;
        Ok(Tensor3 {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        let mut t = Self::zeros(height, width, channels)?;
        if !value.is_finite() {
            return Err(CscError::domain("fill value must be finite"));
        }
        t.data.fill(value);
        Ok(t)
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(height, width, channels)?;
        if data.len() != height * width * channels {
            return Err(CscError::shape(format!(
                "{height}x{width}x{channels} tensor needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(CscError::domain(format!("non-finite value at index {i}")));
        }
        Ok(Tensor3 {
            height,
            width,
            channels,
            data,
        })
    }

    pub(crate) fn from_vec_unchecked(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        Tensor3 {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        check_dims(height, width, channels)?;
        let mut data = Vec::with_capacity(height * width * channels);
        for h in 0..height {
            for w in 0..width {
                for c in 0..channels {
                    data.push(f(h, w, c));
                }
            }
        }
        Self::from_vec(height, width, channels, data)
    }

    /// I.i.d. standard Gaussian entries.
    pub fn random_gaussian(
        height: usize,
        width: usize,
        channels: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        check_dims(height, width, channels)?;
        let data = (0..height * width * channels)
            .map(|_| rng.gaussian() as f32)
            .collect();
        Ok(Self::from_vec_unchecked(height, width, channels, data))
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Mutable access to the raw values. Callers must keep every value finite.
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn index(&self, h: usize, w: usize, c: usize) -> usize {
        (h * self.width + w) * self.channels + c
    }

    #[inline]
    pub fn get(&self, h: usize, w: usize, c: usize) -> f32 {
        self.data[self.index(h, w, c)]
    }

    #[inline]
    pub fn set(&mut self, h: usize, w: usize, c: usize, value: f32) {
        let i = self.index(h, w, c);
        self.data[i] = value;
    }

    /// The `1 × 1 × C` fiber at spatial position `(h, w)`.
    pub fn needle(&self, h: usize, w: usize) -> &[f32] {
        let start = self.index(h, w, 0);
        &self.data[start..start + self.channels]
    }

    pub fn needles(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.channels)
    }

    pub fn same_shape(&self, other: &Tensor3) -> bool {
        self.shape() == other.shape()
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor3 {
        Tensor3::from_vec_unchecked(
            self.height,
            self.width,
            self.channels,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    /// `a·self + b·other`.
    pub fn axpby(&self, a: f32, other: &Tensor3, b: f32) -> Result<Tensor3> {
        expect_same_shape(self, other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&x, &y)| a * x + b * y)
            .collect();
        Ok(Tensor3::from_vec_unchecked(
            self.height,
            self.width,
            self.channels,
            data,
        ))
    }

    pub fn sub(&self, other: &Tensor3) -> Result<Tensor3> {
        self.axpby(1.0, other, -1.0)
    }

    pub fn add(&self, other: &Tensor3) -> Result<Tensor3> {
        self.axpby(1.0, other, 1.0)
    }

    pub fn scale(&self, a: f32) -> Tensor3 {
        self.map(|v| a * v)
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|&v| f64::from(v) * f64::from(v)).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|&v| f64::from(v).abs()).sum()
    }

    /// Number of entries with `|v| > zero_tol`.
    pub fn count_nonzero(&self, zero_tol: f32) -> usize {
        self.data.iter().filter(|v| v.abs() > zero_tol).count()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

fn check_dims(height: usize, width: usize, channels: usize) -> Result<()> {
    if height == 0 || width == 0 || channels == 0 {
        return Err(CscError::shape(format!(
            "dimensions must be positive, got {height}x{width}x{channels}"
        )));
    }
    height
        .checked_mul(width)
        .and_then(|v| v.checked_mul(channels))
        .ok_or_else(|| CscError::shape("tensor size overflows"))?;
    Ok(())
}

pub(crate) fn expect_same_shape(a: &Tensor3, b: &Tensor3) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(CscError::shape(format!(
            "shape mismatch: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )))
    }
}

/// Sum of elementwise products, accumulated in f64 in index order.
pub fn inner(a: &Tensor3, b: &Tensor3) -> Result<f64> {
    expect_same_shape(a, b)?;
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum())
}

/// Mean squared error, accumulated in f64.
pub fn mse(reference: &Tensor3, candidate: &Tensor3) -> Result<f64> {
    expect_same_shape(reference, candidate)?;
    let sum: f64 = reference
        .data
        .iter()
        .zip(&candidate.data)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum();
    Ok(sum / reference.len() as f64)
}

pub const PSNR_PEAK: f64 = 255.0;

/// `10·log10(255² / MSE)` in dB. Identical inputs give `f64::INFINITY`.
pub fn psnr(reference: &Tensor3, candidate: &Tensor3) -> Result<f64> {
    let err = mse(reference, candidate)?;
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (PSNR_PEAK * PSNR_PEAK / err).log10())
}

/// `x + n` with `n` i.i.d. `N(0, sigma²)`, drawn in index order from `rng`.
pub fn add_awgn(x: &Tensor3, sigma: f64, rng: &mut Rng) -> Result<Tensor3> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(CscError::domain(format!(
            "noise sigma must be finite and nonnegative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let data = x
        .data
        .iter()
        .map(|&v| (f64::from(v) + sigma * rng.gaussian()) as f32)
        .collect();
    Ok(Tensor3::from_vec_unchecked(
        x.height, x.width, x.channels, data,
    ))
}
