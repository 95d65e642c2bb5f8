//! Numerical kernels shared by the bispectral and cepstral pipelines.
//!
//! The forward FFT is an unnormalized iterative radix-2 transform:
//! `bin[k] = sum_n x[n] * exp(-2 pi i k n / N)`. The DCT-II is orthonormal.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("fft size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("frame of {len} samples does not fit fft size {fft_size}")]
    FrameTooLong { len: usize, fft_size: usize },
    #[error("empty input")]
    EmptyInput,
}

/// Spectrum of one frame; `bins.len()` equals the transform size.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    bins: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn from_bins(bins: Vec<Complex64>) -> Self {
        Self { bins }
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn fft_size(&self) -> usize {
        self.bins.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WindowKind {
    Rectangular,
    #[default]
    Hann,
}

impl WindowKind {
    /// Symmetric window weights of length `len`.
    pub fn weights(self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::Rectangular => vec![1.0; len],
            WindowKind::Hann if len <= 1 => vec![1.0; len],
            WindowKind::Hann => {
                let denom = (len - 1) as f64;
                (0..len)
                    .map(|n| 0.5 * (1.0 - (2.0 * PI * n as f64 / denom).cos()))
                    .collect()
            }
        }
    }
}

/// Forward FFT of a real frame, zero-padded to `fft_size`.
pub fn fft(frame: &[f64], fft_size: usize) -> Result<ComplexSpectrum, DspError> {
    if fft_size == 0 || !fft_size.is_power_of_two() {
        return Err(DspError::NotPowerOfTwo(fft_size));
    }
    if frame.len() > fft_size {
        return Err(DspError::FrameTooLong {
            len: frame.len(),
            fft_size,
        });
    }
    let mut bins = vec![Complex64::new(0.0, 0.0); fft_size];
    for (b, &x) in bins.iter_mut().zip(frame) {
        b.re = x;
    }
    fft_in_place(&mut bins);
    Ok(ComplexSpectrum { bins })
}

fn fft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = -2.0 * PI / len as f64;
        // Twiddles are evaluated directly rather than by recurrence so the
        // error stays at machine precision for every stage.
        let twiddles: Vec<Complex64> = (0..half)
            .map(|k| Complex64::from_polar(1.0, step * k as f64))
            .collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = buf[start + k];
                let b = buf[start + k + half] * twiddles[k];
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

/// `|bin[k]|^2` for every bin.
pub fn power_spectrum(spectrum: &ComplexSpectrum) -> Vec<f64> {
    spectrum.bins.iter().map(|c| c.norm_sqr()).collect()
}

/// Complete frames of `frame_len` samples starting every `hop` samples.
pub fn frame_signal(samples: &[f64], frame_len: usize, hop: usize) -> Vec<&[f64]> {
    assert!(
        frame_len >= 1 && hop >= 1,
        "frame length and hop must be positive"
    );
    if samples.len() < frame_len {
        return Vec::new();
    }
    let count = (samples.len() - frame_len) / hop + 1;
    (0..count)
        .map(|i| &samples[i * hop..i * hop + frame_len])
        .collect()
}

/// Orthonormal DCT-II with a cached cosine basis.
#[derive(Debug, Clone)]
pub struct DctPlan {
    len: usize,
    basis: Vec<f64>,
}

impl DctPlan {
    pub fn new(len: usize) -> Result<Self, DspError> {
        if len == 0 {
            return Err(DspError::EmptyInput);
        }
        let n = len as f64;
        let mut basis = Vec::with_capacity(len * len);
        for k in 0..len {
            let scale = if k == 0 {
                (1.0 / n).sqrt()
            } else {
                (2.0 / n).sqrt()
            };
            for i in 0..len {
                basis.push(scale * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos());
            }
        }
        Ok(Self { len, basis })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Transforms `values` (length must equal the plan length), keeping the
    /// first `keep` coefficients.
    pub fn apply_truncated(&self, values: &[f64], keep: usize) -> Vec<f64> {
        assert_eq!(values.len(), self.len, "DCT input length mismatch");
        self.basis
            .chunks_exact(self.len)
            .take(keep)
            .map(|row| row.iter().zip(values).map(|(b, v)| b * v).sum())
            .collect()
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        self.apply_truncated(values, self.len)
    }
}

pub fn dct_ii(values: &[f64]) -> Result<Vec<f64>, DspError> {
    Ok(DctPlan::new(values.len())?.apply(values))
}
