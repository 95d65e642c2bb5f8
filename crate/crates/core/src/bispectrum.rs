//! Third-order spectral statistics.
//!
//! A clip is cut into roughly `K` non-overlapping segments. For each segment
//! spectrum `Y`, the bispectrum at `(k1, k2)` is `Y(k1) Y(k2) conj(Y(k1 + k2))`.
//! Two estimators are provided:
//!
//! * the segment-averaged magnitude `mean |Y(k1)| |Y(k2)| |Y(k1+k2)|` and
//!   wrapped biphase `mean wrap(arg Y(k1) + arg Y(k2) - arg Y(k1+k2))`, which
//!   [`normalize_grid`] maps onto `[0, 1]` for feature extraction;
//! * the classic bicoherence `|sum B| / sqrt(sum |Y1 Y2|^2 * sum |Y3|^2)`,
//!   bounded in `[0, 1]` by Cauchy-Schwarz.
//!
//! Grids cover `k1, k2 < fft_size / 2`; only bins with `k1 + k2 < fft_size / 2`
//! are valid and every other entry is held at zero.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::AudioClip;
use crate::dsp::{self, ComplexSpectrum, DspError, WindowKind};
use crate::textdump;

#[derive(Debug, Error, PartialEq)]
pub enum BispectrumError {
    #[error("clip of {len} samples is too short; at least {needed} are required")]
    ClipTooShort { len: usize, needed: usize },
    #[error("at least 2 segments are required, got {0}")]
    TooFewSegments(usize),
    #[error("signal is degenerate (all-zero bispectrum); normalization undefined")]
    DegenerateSignal,
    #[error("bispectral analysis expects a mono clip, got {0} channels")]
    NotMono(u16),
    #[error("invalid bispectral configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BispectralConfig {
    /// Target number of segments `K`.
    pub target_segments: usize,
    pub segment_fft_size: usize,
    pub window: WindowKind,
}

impl Default for BispectralConfig {
    fn default() -> Self {
        Self {
            target_segments: 100,
            segment_fft_size: 64,
            window: WindowKind::Hann,
        }
    }
}

impl BispectralConfig {
    pub fn validate(&self) -> Result<(), BispectrumError> {
        if self.target_segments < 2 {
            return Err(BispectrumError::InvalidConfig(format!(
                "target_segments must be >= 2, got {}",
                self.target_segments
            )));
        }
        if self.segment_fft_size < 8 || !self.segment_fft_size.is_power_of_two() {
            return Err(BispectrumError::InvalidConfig(format!(
                "segment_fft_size must be a power of two >= 8, got {}",
                self.segment_fft_size
            )));
        }
        Ok(())
    }

    /// Side length of the (k1, k2) grid.
    pub fn grid_dim(&self) -> usize {
        self.segment_fft_size / 2
    }
}

/// Square row-major matrix indexed by `(k1, k2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareGrid<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> SquareGrid<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::default(); dim * dim],
        }
    }
}

impl<T: Copy> SquareGrid<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k1: usize, k2: usize) -> T {
        self.data[k1 * self.dim + k2]
    }

    pub fn set(&mut self, k1: usize, k2: usize, value: T) {
        self.data[k1 * self.dim + k2] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    /// Entries where `k1 + k2 < dim`, in row-major order.
    pub fn valid_values(&self) -> Vec<T> {
        valid_bins(self.dim).map(|(a, b)| self.get(a, b)).collect()
    }
}

impl SquareGrid<f64> {
    /// Row-major text dump, one line per `k1`.
    pub fn to_text(&self) -> String {
        textdump::format_rows(self.rows())
    }
}

/// Whether a grid of side `dim` treats `(k1, k2)` as a valid bin.
pub fn is_valid_bin(dim: usize, k1: usize, k2: usize) -> bool {
    k1 < dim && k2 < dim && k1 + k2 < dim
}

fn valid_bins(dim: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..dim).flat_map(move |a| (0..dim - a).map(move |b| (a, b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridScale {
    /// Magnitude in amplitude-cubed units, phase in radians.
    Raw,
    /// Both grids mapped onto `[0, 1]`.
    Normalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicoherenceGrid {
    pub magnitude: SquareGrid<f64>,
    pub phase: SquareGrid<f64>,
    pub scale: GridScale,
    pub segments: usize,
}

impl BicoherenceGrid {
    pub fn dim(&self) -> usize {
        self.magnitude.dim()
    }

    pub fn is_valid(&self, k1: usize, k2: usize) -> bool {
        is_valid_bin(self.dim(), k1, k2)
    }

    /// Boolean mask over the full grid.
    pub fn valid_mask(&self) -> SquareGrid<bool> {
        let dim = self.dim();
        let mut mask = SquareGrid::zeros(dim);
        for (a, b) in valid_bins(dim) {
            mask.set(a, b, true);
        }
        mask
    }
}

/// How many segments of which length a clip of `len` samples yields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentPlan {
    pub segment_len: usize,
    pub count: usize,
}

impl SegmentPlan {
    /// Segments are `floor(N / K)` samples long but never shorter than the
    /// FFT size; the count is then capped by what fits in the clip.
    pub fn for_length(len: usize, config: &BispectralConfig) -> Result<Self, BispectrumError> {
        config.validate()?;
        let needed = 2 * config.segment_fft_size;
        if len < needed {
            return Err(BispectrumError::ClipTooShort { len, needed });
        }
        let segment_len = (len / config.target_segments).max(config.segment_fft_size);
        let count = (len / segment_len).min(config.target_segments);
        Ok(Self { segment_len, count })
    }
}

/// Cuts a mono clip into consecutive non-overlapping segments ready for the
/// FFT: each segment's head (at most `segment_fft_size` samples) is windowed
/// and zero-padded to `segment_fft_size`. Trailing samples are discarded.
pub fn segment_clip(
    clip: &AudioClip,
    config: &BispectralConfig,
) -> Result<Vec<Vec<f64>>, BispectrumError> {
    if clip.channels() != 1 {
        return Err(BispectrumError::NotMono(clip.channels()));
    }
    segment_samples(clip.samples(), config)
}

pub fn segment_samples(
    samples: &[f64],
    config: &BispectralConfig,
) -> Result<Vec<Vec<f64>>, BispectrumError> {
    let plan = SegmentPlan::for_length(samples.len(), config)?;
    let used = plan.segment_len.min(config.segment_fft_size);
    let window = config.window.weights(used);
    Ok(samples
        .chunks_exact(plan.segment_len)
        .take(plan.count)
        .map(|seg| {
            let mut out = vec![0.0; config.segment_fft_size];
            for ((o, s), w) in out.iter_mut().zip(&seg[..used]).zip(&window) {
                *o = s * w;
            }
            out
        })
        .collect())
}

fn spectra(
    segments: &[Vec<f64>],
    config: &BispectralConfig,
) -> Result<Vec<ComplexSpectrum>, BispectrumError> {
    config.validate()?;
    if segments.len() < 2 {
        return Err(BispectrumError::TooFewSegments(segments.len()));
    }
    segments
        .iter()
        .map(|s| dsp::fft(s, config.segment_fft_size).map_err(BispectrumError::from))
        .collect()
}

/// Per-segment bispectrum `Y(k1) Y(k2) conj(Y(k1 + k2))` over the valid bins.
pub fn segment_bispectrum(spectrum: &ComplexSpectrum) -> SquareGrid<Complex64> {
    let dim = spectrum.fft_size() / 2;
    let y = spectrum.bins();
    let mut grid = SquareGrid::zeros(dim);
    for (a, b) in valid_bins(dim) {
        grid.set(a, b, y[a] * y[b] * y[a + b].conj());
    }
    grid
}

/// Maps an angle onto `(-pi, pi]`.
pub fn wrap_phase(angle: f64) -> f64 {
    let w = angle.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Segment-averaged bispectral magnitude and wrapped biphase (raw scale).
pub fn averaged_bispectrum(
    segments: &[Vec<f64>],
    config: &BispectralConfig,
) -> Result<BicoherenceGrid, BispectrumError> {
    let spectra = spectra(segments, config)?;
    Ok(averaged_from_spectra(&spectra))
}

pub fn averaged_from_spectra(spectra: &[ComplexSpectrum]) -> BicoherenceGrid {
    let dim = spectra[0].fft_size() / 2;
    let mut magnitude = SquareGrid::zeros(dim);
    let mut phase = SquareGrid::zeros(dim);
    // Per-bin sums accumulate in segment order so results do not depend on
    // any scheduling.
    for spectrum in spectra {
        let y = spectrum.bins();
        let norms: Vec<f64> = y.iter().map(|c| c.norm()).collect();
        let args: Vec<f64> = y.iter().map(|c| c.arg()).collect();
        for (a, b) in valid_bins(dim) {
            let idx = a * dim + b;
            magnitude.data[idx] += norms[a] * norms[b] * norms[a + b];
            // With a zero index the biphase reduces to the DC angle exactly;
            // summing and cancelling would leave rounding noise at +-pi.
            let biphase = if a == 0 || b == 0 {
                args[0]
            } else {
                args[a] + args[b] - args[a + b]
            };
            phase.data[idx] += wrap_phase(biphase);
        }
    }
    let k = spectra.len() as f64;
    magnitude.data.iter_mut().for_each(|v| *v /= k);
    phase.data.iter_mut().for_each(|v| *v /= k);
    BicoherenceGrid {
        magnitude,
        phase,
        scale: GridScale::Raw,
        segments: spectra.len(),
    }
}

/// Bins whose power is this far below the strongest bin of any segment are
/// FFT rounding residue and count as zero in [`bicoherence`].
pub const SPECTRAL_FLOOR: f64 = 1e-20;

/// Classic segment-averaged bicoherence; every valid entry lies in `[0, 1]`
/// and bins with a zero denominator are 0.
pub fn bicoherence(
    segments: &[Vec<f64>],
    config: &BispectralConfig,
) -> Result<SquareGrid<f64>, BispectrumError> {
    let spectra = spectra(segments, config)?;
    Ok(bicoherence_from_spectra(&spectra))
}

pub fn bicoherence_from_spectra(spectra: &[ComplexSpectrum]) -> SquareGrid<f64> {
    let dim = spectra[0].fft_size() / 2;
    let mut cross = SquareGrid::<Complex64>::zeros(dim);
    let mut pair_power = SquareGrid::<f64>::zeros(dim);
    let mut sum_power = SquareGrid::<f64>::zeros(dim);
    let peak = spectra
        .iter()
        .flat_map(|s| s.bins().iter().map(|c| c.norm_sqr()))
        .fold(0.0, f64::max);
    let floor = peak * SPECTRAL_FLOOR;
    for spectrum in spectra {
        let y: Vec<Complex64> = spectrum
            .bins()
            .iter()
            .map(|&c| {
                if c.norm_sqr() > floor {
                    c
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        for (a, b) in valid_bins(dim) {
            let idx = a * dim + b;
            let pair = y[a] * y[b];
            cross.data[idx] += pair * y[a + b].conj();
            pair_power.data[idx] += pair.norm_sqr();
            sum_power.data[idx] += y[a + b].norm_sqr();
        }
    }
    let mut out = SquareGrid::zeros(dim);
    for (a, b) in valid_bins(dim) {
        let idx = a * dim + b;
        let denom = (pair_power.data[idx] * sum_power.data[idx]).sqrt();
        let value = if denom > 0.0 {
            (cross.data[idx].norm() / denom).min(1.0)
        } else {
            0.0
        };
        out.data[idx] = value;
    }
    out
}

/// Min-max scales the magnitude over valid bins and maps raw phase from
/// `(-pi, pi]` onto `[0, 1]` via `(phi + pi) / (2 pi)`. Already-normalized
/// phase is left as is, so the operation is idempotent.
pub fn normalize_grid(grid: &BicoherenceGrid) -> BicoherenceGrid {
    let dim = grid.dim();
    let valid = grid.magnitude.valid_values();
    let (lo, hi) = valid
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    let mut magnitude = SquareGrid::zeros(dim);
    let mut phase = SquareGrid::zeros(dim);
    for (a, b) in valid_bins(dim) {
        let m = if span > 0.0 {
            ((grid.magnitude.get(a, b) - lo) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        magnitude.set(a, b, m);
        let p = match grid.scale {
            GridScale::Raw => ((grid.phase.get(a, b) + PI) / (2.0 * PI)).clamp(0.0, 1.0),
            GridScale::Normalized => grid.phase.get(a, b),
        };
        phase.set(a, b, p);
    }
    BicoherenceGrid {
        magnitude,
        phase,
        scale: GridScale::Normalized,
        segments: grid.segments,
    }
}

/// Which magnitude grid feeds feature extraction and plots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MagnitudeEstimator {
    /// Min-max normalized segment-averaged magnitude.
    #[default]
    Averaged,
    /// Classic bicoherence, already bounded in `[0, 1]`.
    Classic,
}

/// Full per-clip analysis: segment, transform, average, normalize.
///
/// Fails with [`BispectrumError::DegenerateSignal`] when every valid raw
/// magnitude is zero (e.g. digital silence).
pub fn analyze(
    clip: &AudioClip,
    config: &BispectralConfig,
    estimator: MagnitudeEstimator,
) -> Result<BicoherenceGrid, BispectrumError> {
    let segments = segment_clip(clip, config)?;
    let spectra = spectra(&segments, config)?;
    let raw = averaged_from_spectra(&spectra);
    let peak = raw.magnitude.valid_values().into_iter().fold(0.0, f64::max);
    if peak <= 0.0 || !peak.is_finite() {
        return Err(BispectrumError::DegenerateSignal);
    }
    let mut grid = normalize_grid(&raw);
    if estimator == MagnitudeEstimator::Classic {
        grid.magnitude = bicoherence_from_spectra(&spectra);
    }
    Ok(grid)
}
