//! Moment statistics and the per-clip feature vector.
//!
//! Column order is fixed:
//!
//! | idx | name          | source                                   |
//! |-----|---------------|------------------------------------------|
//! | 0-3 | `mag_*`       | mean/var/skew/kurt of normalized magnitude |
//! | 4-7 | `phase_*`     | mean/var/skew/kurt of normalized biphase  |
//! | 8-9 | `mfcc_*`      | mean/var over every MFCC entry           |
//! | 10-11 | `delta_*`   | mean/var over every first-difference entry |
//! | 12-13 | `delta2_*`  | mean/var over every second-difference entry |
//!
//! Grid moments use only the valid `k1 + k2 < N/2` bins. Variance is the
//! population form and kurtosis is non-excess.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::AudioClip;
use crate::bispectrum::{self, BispectralConfig, BispectrumError, MagnitudeEstimator};
use crate::cepstral::{self, CepstralConfig, CepstralError};
use crate::label::ClassLabel;

pub const FEATURE_COUNT: usize = 14;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "mag_mean",
    "mag_var",
    "mag_skew",
    "mag_kurt",
    "phase_mean",
    "phase_var",
    "phase_skew",
    "phase_kurt",
    "mfcc_mean",
    "mfcc_var",
    "delta_mean",
    "delta_var",
    "delta2_mean",
    "delta2_var",
];

/// Columns holding the bicoherence moments.
pub const BICOHERENCE_COLUMNS: std::ops::Range<usize> = 0..8;

/// Variance below which skewness and kurtosis are reported as 0.
pub const DEGENERATE_VARIANCE: f64 = 1e-24;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("moments of an empty sequence")]
    EmptyInput,
    #[error(transparent)]
    Bispectral(#[from] BispectrumError),
    #[error(transparent)]
    Cepstral(#[from] CepstralError),
    #[error("feature `{0}` is not finite")]
    NonFinite(&'static str),
    #[error("feature csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

/// First four moments with averages in place of expectations.
pub fn moments(values: &[f64]) -> Result<Moments, FeatureError> {
    if values.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let variance = m2 / n;
    if variance < DEGENERATE_VARIANCE {
        return Ok(Moments {
            mean,
            variance,
            skewness: 0.0,
            kurtosis: 0.0,
        });
    }
    Ok(Moments {
        mean,
        variance,
        skewness: m3 / n / variance.powf(1.5),
        kurtosis: m4 / n / (variance * variance),
    })
}

fn mean_variance(values: impl Iterator<Item = f64> + Clone) -> Result<(f64, f64), FeatureError> {
    let n = values.clone().count();
    if n == 0 {
        return Err(FeatureError::EmptyInput);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    Ok((mean, var))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub bispectral: BispectralConfig,
    pub cepstral: CepstralConfig,
    pub estimator: MagnitudeEstimator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_COUNT],
    pub label: ClassLabel,
}

/// The 14 numeric features of a mono clip.
pub fn compute_features(
    clip: &AudioClip,
    config: &FeatureConfig,
) -> Result<[f64; FEATURE_COUNT], FeatureError> {
    let grid = bispectrum::analyze(clip, &config.bispectral, config.estimator)?;
    let mag = moments(&grid.magnitude.valid_values())?;
    let phase = moments(&grid.phase.valid_values())?;

    let mfcc = cepstral::mfcc(clip, &config.cepstral)?;
    let d1 = cepstral::delta(&mfcc);
    let d2 = cepstral::delta(&d1);
    let (mfcc_mean, mfcc_var) = mean_variance(mfcc.values())?;
    let (d1_mean, d1_var) = mean_variance(d1.values())?;
    let (d2_mean, d2_var) = mean_variance(d2.values())?;

    let values = [
        mag.mean,
        mag.variance,
        mag.skewness,
        mag.kurtosis,
        phase.mean,
        phase.variance,
        phase.skewness,
        phase.kurtosis,
        mfcc_mean,
        mfcc_var,
        d1_mean,
        d1_var,
        d2_mean,
        d2_var,
    ];
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite(FEATURE_NAMES[i]));
    }
    Ok(values)
}

pub fn extract_features(
    clip: &AudioClip,
    config: &FeatureConfig,
    label: ClassLabel,
) -> Result<FeatureVector, FeatureError> {
    Ok(FeatureVector {
        values: compute_features(clip, config)?,
        label,
    })
}

pub fn csv_header() -> Vec<&'static str> {
    let mut h = FEATURE_NAMES.to_vec();
    h.push("label");
    h
}

/// Writes a header plus one row per vector. Floats use shortest round-trip
/// formatting, so reading the file back reproduces every bit.
pub fn write_feature_csv<W: Write>(out: W, rows: &[FeatureVector]) -> Result<(), FeatureError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let err = |e: csv::Error| FeatureError::Csv(e.to_string());
    w.write_record(csv_header()).map_err(err)?;
    for row in rows {
        let mut record: Vec<String> = row.values.iter().map(|v| v.to_string()).collect();
        record.push(row.label.to_string());
        w.write_record(&record).map_err(err)?;
    }
    w.flush().map_err(|e| FeatureError::Csv(e.to_string()))
}

pub fn read_feature_csv<R: Read>(input: R) -> Result<Vec<FeatureVector>, FeatureError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = r
        .headers()
        .map_err(|e| FeatureError::Csv(e.to_string()))?
        .clone();
    let expected = csv_header();
    if header.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(FeatureError::Csv(format!(
            "unexpected header; expected `{}`",
            expected.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| FeatureError::Csv(format!("line {line}: {e}")))?;
        rows.push(
            parse_feature_record(&record)
                .map_err(|e| FeatureError::Csv(format!("line {line}: {e}")))?,
        );
    }
    Ok(rows)
}

fn parse_feature_record(record: &csv::StringRecord) -> Result<FeatureVector, String> {
    if record.len() != FEATURE_COUNT + 1 {
        return Err(format!(
            "expected {} fields, found {}",
            FEATURE_COUNT + 1,
            record.len()
        ));
    }
    let mut values = [0.0; FEATURE_COUNT];
    for (slot, (field, name)) in values.iter_mut().zip(record.iter().zip(FEATURE_NAMES)) {
        let v: f64 = field
            .trim()
            .parse()
            .map_err(|_| format!("`{field}` is not a number in column {name}"))?;
        *slot = v;
        if !v.is_finite() {
            return Err(format!("non-finite value in column {name}"));
        }
    }
    let label = record[FEATURE_COUNT]
        .parse()
        .map_err(|e: crate::label::UnknownLabel| e.to_string())?;
    Ok(FeatureVector { values, label })
}

/// Parses a bare comma-separated row of 14 numbers.
pub fn parse_feature_values(text: &str) -> Result<[f64; FEATURE_COUNT], FeatureError> {
    let parts: Vec<&str> = text.trim().split(',').collect();
    if parts.len() != FEATURE_COUNT {
        return Err(FeatureError::Csv(format!(
            "expected {FEATURE_COUNT} comma-separated values, found {}",
            parts.len()
        )));
    }
    let mut values = [0.0; FEATURE_COUNT];
    for (slot, p) in values.iter_mut().zip(parts) {
        *slot = p
            .trim()
            .parse()
            .map_err(|_| FeatureError::Csv(format!("`{p}` is not a number")))?;
    }
    Ok(values)
}
