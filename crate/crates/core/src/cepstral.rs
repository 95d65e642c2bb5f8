//! Mel spectrograms, MFCCs and their first and second frame differences.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::AudioClip;
use crate::dsp::{self, DctPlan, DspError, WindowKind};
use crate::textdump;

/// Floor added before taking the log of mel energies.
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum CepstralError {
    #[error("clip of {len} samples is shorter than one {frame_len}-sample frame")]
    ClipTooShort { len: usize, frame_len: usize },
    #[error("band {fmin}..{fmax} Hz cannot hold {n_mels} filters at this FFT resolution")]
    DegenerateBand { fmin: f64, fmax: f64, n_mels: usize },
    #[error("invalid cepstral configuration: {0}")]
    InvalidConfig(String),
    #[error("cepstral analysis expects a mono clip, got {0} channels")]
    NotMono(u16),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CepstralConfig {
    pub frame_len_ms: f64,
    pub hop_ms: f64,
    pub n_mels: usize,
    pub n_coeffs: usize,
    pub fmin: f64,
    /// Upper band edge; `None` means the Nyquist frequency.
    pub fmax: Option<f64>,
    pub pre_emphasis: f64,
}

impl Default for CepstralConfig {
    fn default() -> Self {
        Self {
            frame_len_ms: 25.0,
            hop_ms: 10.0,
            n_mels: 26,
            n_coeffs: 13,
            fmin: 0.0,
            fmax: None,
            pre_emphasis: 0.97,
        }
    }
}

impl CepstralConfig {
    pub fn validate(&self, sample_rate: u32) -> Result<(), CepstralError> {
        let nyquist = f64::from(sample_rate) / 2.0;
        let fmax = self.fmax.unwrap_or(nyquist);
        let bad = |msg: String| Err(CepstralError::InvalidConfig(msg));
        if !(self.frame_len_ms > 0.0 && self.hop_ms > 0.0) {
            return bad("frame length and hop must be positive".into());
        }
        if self.n_mels == 0 || self.n_coeffs == 0 || self.n_coeffs > self.n_mels {
            return bad(format!(
                "need 0 < n_coeffs ({}) <= n_mels ({})",
                self.n_coeffs, self.n_mels
            ));
        }
        if !(self.fmin >= 0.0 && self.fmin < fmax && fmax <= nyquist) {
            return bad(format!(
                "need 0 <= fmin ({}) < fmax ({fmax}) <= {nyquist}",
                self.fmin
            ));
        }
        if !(0.0..1.0).contains(&self.pre_emphasis) {
            return bad(format!("pre-emphasis {} outside [0, 1)", self.pre_emphasis));
        }
        Ok(())
    }

    pub fn frame_len(&self, sample_rate: u32) -> usize {
        ((self.frame_len_ms * f64::from(sample_rate) / 1000.0).round() as usize).max(1)
    }

    pub fn hop(&self, sample_rate: u32) -> usize {
        ((self.hop_ms * f64::from(sample_rate) / 1000.0).round() as usize).max(1)
    }

    pub fn fft_size(&self, sample_rate: u32) -> usize {
        self.frame_len(sample_rate).next_power_of_two()
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters over the one-sided power spectrum (`fft_size / 2 + 1`
/// bins), peak weight 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    weights: Vec<Vec<f64>>,
    peaks_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn peak_frequencies(&self) -> &[f64] {
        &self.peaks_hz
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

pub fn build_filterbank(
    config: &CepstralConfig,
    fft_size: usize,
    sample_rate: u32,
) -> Result<MelFilterbank, CepstralError> {
    config.validate(sample_rate)?;
    let sr = f64::from(sample_rate);
    let fmax = config.fmax.unwrap_or(sr / 2.0);
    let (mel_lo, mel_hi) = (hz_to_mel(config.fmin), hz_to_mel(fmax));
    let step = (mel_hi - mel_lo) / (config.n_mels + 1) as f64;
    let edges: Vec<f64> = (0..config.n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + step * i as f64))
        .collect();
    let n_bins = fft_size / 2 + 1;
    let bin_hz: Vec<f64> = (0..n_bins)
        .map(|k| k as f64 * sr / fft_size as f64)
        .collect();

    let mut weights = Vec::with_capacity(config.n_mels);
    for m in 0..config.n_mels {
        let (lo, peak, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let row: Vec<f64> = bin_hz
            .iter()
            .map(|&f| {
                let w = if f <= peak {
                    (f - lo) / (peak - lo)
                } else {
                    (hi - f) / (hi - peak)
                };
                w.max(0.0)
            })
            .collect();
        if row.iter().all(|&w| w == 0.0) {
            return Err(CepstralError::DegenerateBand {
                fmin: config.fmin,
                fmax,
                n_mels: config.n_mels,
            });
        }
        weights.push(row);
    }
    Ok(MelFilterbank {
        weights,
        peaks_hz: edges[1..=config.n_mels].to_vec(),
    })
}

/// Frames-by-columns matrix with per-frame start times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfccMatrix {
    pub coeffs: Vec<Vec<f64>>,
    pub frame_times: Vec<f64>,
}

impl MfccMatrix {
    pub fn frames(&self) -> usize {
        self.coeffs.len()
    }

    pub fn width(&self) -> usize {
        self.coeffs.first().map_or(0, Vec::len)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + Clone + '_ {
        self.coeffs.iter().flatten().copied()
    }

    /// One frame per line.
    pub fn to_text(&self) -> String {
        textdump::format_rows(self.coeffs.iter().map(Vec::as_slice))
    }
}

fn pre_emphasize(samples: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut prev = 0.0;
    for &s in samples {
        out.push(s - alpha * prev);
        prev = s;
    }
    out
}

/// Log mel energies, one row of `n_mels` per frame.
pub fn mel_spectrogram(
    clip: &AudioClip,
    config: &CepstralConfig,
) -> Result<MfccMatrix, CepstralError> {
    if clip.channels() != 1 {
        return Err(CepstralError::NotMono(clip.channels()));
    }
    let sr = clip.sample_rate();
    config.validate(sr)?;
    let frame_len = config.frame_len(sr);
    let hop = config.hop(sr);
    let fft_size = config.fft_size(sr);
    if clip.samples().len() < frame_len {
        return Err(CepstralError::ClipTooShort {
            len: clip.samples().len(),
            frame_len,
        });
    }
    let bank = build_filterbank(config, fft_size, sr)?;
    let window = WindowKind::Hann.weights(frame_len);
    let emphasized = pre_emphasize(clip.samples(), config.pre_emphasis);
    let frames = dsp::frame_signal(&emphasized, frame_len, hop);
    let mut rows = Vec::with_capacity(frames.len());
    let mut windowed = vec![0.0; frame_len];
    for frame in &frames {
        for ((o, s), w) in windowed.iter_mut().zip(*frame).zip(&window) {
            *o = s * w;
        }
        let power = dsp::power_spectrum(&dsp::fft(&windowed, fft_size)?);
        let energies = bank.apply(&power[..fft_size / 2 + 1]);
        rows.push(energies.into_iter().map(|e| (e + LOG_FLOOR).ln()).collect());
    }
    let frame_times = (0..rows.len())
        .map(|i| (i * hop) as f64 / f64::from(sr))
        .collect();
    Ok(MfccMatrix {
        coeffs: rows,
        frame_times,
    })
}

/// Row-wise orthonormal DCT-II of the log mel energies, truncated to
/// `n_coeffs` (coefficient 0 kept).
pub fn mfcc(clip: &AudioClip, config: &CepstralConfig) -> Result<MfccMatrix, CepstralError> {
    let mel = mel_spectrogram(clip, config)?;
    Ok(mfcc_from_mel(&mel, config.n_coeffs))
}

pub fn mfcc_from_mel(mel: &MfccMatrix, n_coeffs: usize) -> MfccMatrix {
    if mel.frames() == 0 {
        return mel.clone();
    }
    let plan = DctPlan::new(mel.width()).expect("mel rows are non-empty");
    MfccMatrix {
        coeffs: mel
            .coeffs
            .iter()
            .map(|row| plan.apply_truncated(row, n_coeffs))
            .collect(),
        frame_times: mel.frame_times.clone(),
    }
}

/// First difference along time; frame 0 is zero.
pub fn delta(matrix: &MfccMatrix) -> MfccMatrix {
    let mut coeffs = Vec::with_capacity(matrix.frames());
    if let Some(first) = matrix.coeffs.first() {
        coeffs.push(vec![0.0; first.len()]);
    }
    for pair in matrix.coeffs.windows(2) {
        coeffs.push(
            pair[1]
                .iter()
                .zip(&pair[0])
                .map(|(cur, prev)| cur - prev)
                .collect(),
        );
    }
    MfccMatrix {
        coeffs,
        frame_times: matrix.frame_times.clone(),
    }
}

pub fn delta2(matrix: &MfccMatrix) -> MfccMatrix {
    delta(&delta(matrix))
}
