//! Python bindings: clips, bispectral and cepstral analysis, feature
//! extraction, classifier training and cross-validation.

use std::path::PathBuf;

use bispeech::bispectrum::{self, BispectralConfig, MagnitudeEstimator};
use bispeech::cepstral::{self, CepstralConfig};
use bispeech::classify::{Kernel, SvmParams};
use bispeech::features::{self, FeatureConfig, FEATURE_NAMES};
use bispeech::synthgen::{self, FixtureKind, FixtureSpec};
use bispeech::{audio_io, eval, ClassLabel, ModelKind, TrainParams};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

/// Magnitude and phase grids as nested row lists.
type GridPair = (Vec<Vec<f64>>, Vec<Vec<f64>>);

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err(e: impl std::fmt::Display) -> PyErr {
    PyIOError::new_err(e.to_string())
}

/// Parses a classifier name as the command line accepts it.
pub fn parse_kind(
    kind: &str,
    kernel_scale: f64,
    knn_k: usize,
) -> Result<(ModelKind, TrainParams), String> {
    if !(kernel_scale > 0.0 && kernel_scale.is_finite()) {
        return Err(format!("kernel_scale must be positive, got {kernel_scale}"));
    }
    let mut params = TrainParams {
        knn_k: knn_k.max(1),
        ..TrainParams::default()
    };
    let kind = match kind {
        "knn" => ModelKind::Knn,
        "lda" => ModelKind::Lda,
        "qda" => ModelKind::Qda,
        "logistic" => ModelKind::Logistic,
        "svm-linear" => {
            params.svm = SvmParams {
                kernel: Kernel::Linear,
                kernel_scale,
                ..SvmParams::default()
            };
            ModelKind::Svm
        }
        "svm-quad" => {
            params.svm = SvmParams::quadratic(kernel_scale);
            ModelKind::Svm
        }
        other => return Err(format!("unknown model kind `{other}`")),
    };
    Ok((kind, params))
}

pub fn parse_labels(labels: &[String]) -> Result<Vec<ClassLabel>, String> {
    labels
        .iter()
        .map(|l| l.parse::<ClassLabel>().map_err(|e| e.to_string()))
        .collect()
}

fn feature_config(segments: usize, fft_size: usize, estimator: &str) -> PyResult<FeatureConfig> {
    let estimator = match estimator {
        "averaged" => MagnitudeEstimator::Averaged,
        "classic" => MagnitudeEstimator::Classic,
        other => return Err(value_err(format!("unknown estimator `{other}`"))),
    };
    Ok(FeatureConfig {
        bispectral: BispectralConfig {
            target_segments: segments,
            segment_fft_size: fft_size,
            ..BispectralConfig::default()
        },
        estimator,
        ..FeatureConfig::default()
    })
}

/// Mono PCM clip with samples in `[-1, 1]`.
#[pyclass(module = "bispeech", name = "AudioClip", frozen)]
pub struct PyAudioClip {
    inner: bispeech::AudioClip,
}

#[pymethods]
impl PyAudioClip {
    #[new]
    fn new(samples: Vec<f64>, sample_rate: u32) -> PyResult<Self> {
        let inner = bispeech::AudioClip::new(samples, sample_rate).map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Loads a WAV file, mixes it to mono and keeps at most `max_seconds`.
    #[staticmethod]
    #[pyo3(signature = (path, max_seconds = 5.0))]
    fn load(path: PathBuf, max_seconds: f64) -> PyResult<Self> {
        if max_seconds.is_nan() || max_seconds <= 0.0 {
            return Err(value_err("max_seconds must be positive"));
        }
        let inner = audio_io::load_mono(&path, max_seconds).map_err(|e| match e {
            bispeech::AudioError::Io(_) => io_err(format!("{}: {e}", path.display())),
            _ => value_err(format!("{}: {e}", path.display())),
        })?;
        Ok(Self { inner })
    }

    /// Synthesizes a fixture: `tone`, `triple`, `stack`, `noise` or `silence`.
    #[staticmethod]
    #[pyo3(signature = (kind, duration_s = 1.0, sample_rate = 16000, seed = 0, freq = 440.0, freq2 = 0.0, coupling = 1.0))]
    #[allow(clippy::too_many_arguments)]
    fn fixture(
        kind: &str,
        duration_s: f64,
        sample_rate: u32,
        seed: u64,
        freq: f64,
        freq2: f64,
        coupling: f64,
    ) -> PyResult<Self> {
        let kind = match kind {
            "tone" => FixtureKind::Tone { freq },
            "triple" => FixtureKind::CoupledTriple {
                f1: freq,
                f2: freq2,
                coupling,
            },
            "stack" => FixtureKind::HarmonicStack { f0: freq, coupling },
            "noise" => FixtureKind::WhiteNoise,
            "silence" => FixtureKind::Silence,
            other => return Err(value_err(format!("unknown fixture `{other}`"))),
        };
        let clip = synthgen::generate(&FixtureSpec::new(kind, duration_s, sample_rate, seed))
            .map_err(value_err)?;
        Ok(Self { inner: clip })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        audio_io::write_wav(&path, &self.inner).map_err(io_err)
    }

    #[getter]
    fn samples(&self) -> Vec<f64> {
        self.inner.samples().to_vec()
    }

    #[getter]
    fn sample_rate(&self) -> u32 {
        self.inner.sample_rate()
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.inner.duration_secs()
    }

    fn __len__(&self) -> usize {
        self.inner.frames()
    }

    fn __repr__(&self) -> String {
        format!(
            "AudioClip(frames={}, sample_rate={})",
            self.inner.frames(),
            self.inner.sample_rate()
        )
    }
}

/// Normalized magnitude and phase grids, each `fft_size/2` square; only
/// entries with `k1 + k2 < fft_size/2` carry data.
#[pyfunction]
#[pyo3(signature = (clip, segments = 100, fft_size = 64, estimator = "averaged"))]
fn bicoherence(
    clip: &PyAudioClip,
    segments: usize,
    fft_size: usize,
    estimator: &str,
) -> PyResult<GridPair> {
    let cfg = feature_config(segments, fft_size, estimator)?;
    let grid =
        bispectrum::analyze(&clip.inner, &cfg.bispectral, cfg.estimator).map_err(value_err)?;
    let rows = |g: &bispectrum::SquareGrid<f64>| g.rows().map(<[f64]>::to_vec).collect();
    Ok((rows(&grid.magnitude), rows(&grid.phase)))
}

/// MFCC matrix, one row of 13 coefficients per frame.
#[pyfunction]
fn mfcc(clip: &PyAudioClip) -> PyResult<Vec<Vec<f64>>> {
    Ok(cepstral::mfcc(&clip.inner, &CepstralConfig::default())
        .map_err(value_err)?
        .coeffs)
}

/// Log mel energies, one row of 26 bands per frame.
#[pyfunction]
fn mel_spectrogram(clip: &PyAudioClip) -> PyResult<Vec<Vec<f64>>> {
    Ok(
        cepstral::mel_spectrogram(&clip.inner, &CepstralConfig::default())
            .map_err(value_err)?
            .coeffs,
    )
}

#[pyfunction]
fn feature_names() -> Vec<&'static str> {
    FEATURE_NAMES.to_vec()
}

/// The 14 numeric features: eight bicoherence moments, then mean and
/// variance of the MFCC, delta and delta-delta matrices.
#[pyfunction]
#[pyo3(signature = (clip, segments = 100, fft_size = 64, estimator = "averaged"))]
fn extract_features(
    clip: &PyAudioClip,
    segments: usize,
    fft_size: usize,
    estimator: &str,
) -> PyResult<Vec<f64>> {
    let cfg = feature_config(segments, fft_size, estimator)?;
    Ok(features::compute_features(&clip.inner, &cfg)
        .map_err(value_err)?
        .to_vec())
}

/// Writes a balanced corpus and returns `(path, label)` pairs.
#[pyfunction]
#[pyo3(signature = (out_dir, n = 30, seed = 0))]
fn make_corpus(out_dir: PathBuf, n: usize, seed: u64) -> PyResult<Vec<(String, String)>> {
    if !n.is_multiple_of(2) {
        return Err(value_err(format!("n must be even, got {n}")));
    }
    let manifest = synthgen::make_corpus(&out_dir, n / 2, seed).map_err(value_err)?;
    Ok((0..manifest.len())
        .map(|i| {
            (
                manifest.resolved_path(i).display().to_string(),
                manifest.entries()[i].label.to_string(),
            )
        })
        .collect())
}

/// Standardizer plus fitted classifier.
#[pyclass(module = "bispeech", name = "TrainedModel", frozen)]
pub struct PyTrainedModel {
    inner: bispeech::TrainedModel,
}

#[pymethods]
impl PyTrainedModel {
    /// `kind` is one of knn, lda, qda, logistic, svm-linear, svm-quad.
    #[staticmethod]
    #[pyo3(signature = (kind, rows, labels, kernel_scale = 2.0, knn_k = 10, seed = 0))]
    fn train(
        kind: &str,
        rows: Vec<Vec<f64>>,
        labels: Vec<String>,
        kernel_scale: f64,
        knn_k: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let (kind, params) = parse_kind(kind, kernel_scale, knn_k).map_err(value_err)?;
        let labels = parse_labels(&labels).map_err(value_err)?;
        let inner = bispeech::TrainedModel::train(kind, &rows, &labels, &params, seed)
            .map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = bispeech::TrainedModel::from_json(text).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn classes(&self) -> Vec<String> {
        self.inner.classes.iter().map(ToString::to_string).collect()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn predict(&self, row: Vec<f64>) -> PyResult<String> {
        Ok(self.inner.predict(&row).map_err(value_err)?.to_string())
    }

    /// Per-class scores in `classes` order.
    fn predict_scores(&self, row: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.predict_scores(&row).map_err(value_err)
    }
}

#[pyclass(module = "bispeech", name = "CvResult", frozen, get_all)]
pub struct PyCvResult {
    mean_accuracy: f64,
    auc: f64,
    fold_accuracies: Vec<f64>,
    classes: Vec<String>,
    predictions: Vec<String>,
}

#[pymethods]
impl PyCvResult {
    fn __repr__(&self) -> String {
        format!(
            "CvResult(mean_accuracy={:.4}, auc={:.4})",
            self.mean_accuracy, self.auc
        )
    }
}

/// k-fold cross-validation with a per-fold standardizer.
#[pyfunction]
#[pyo3(signature = (kind, rows, labels, folds = 5, seed = 0, kernel_scale = 2.0, knn_k = 10))]
fn cross_validate(
    kind: &str,
    rows: Vec<Vec<f64>>,
    labels: Vec<String>,
    folds: usize,
    seed: u64,
    kernel_scale: f64,
    knn_k: usize,
) -> PyResult<PyCvResult> {
    let (kind, params) = parse_kind(kind, kernel_scale, knn_k).map_err(value_err)?;
    let labels = parse_labels(&labels).map_err(value_err)?;
    let summary =
        eval::cross_validate(kind, &rows, &labels, folds, seed, &params).map_err(value_err)?;
    Ok(PyCvResult {
        mean_accuracy: summary.mean_accuracy,
        auc: summary.roc.auc,
        fold_accuracies: summary.folds.iter().map(|f| f.accuracy).collect(),
        classes: summary.classes.iter().map(ToString::to_string).collect(),
        predictions: summary
            .predictions
            .iter()
            .map(ToString::to_string)
            .collect(),
    })
}

#[pymodule]
#[pyo3(name = "bispeech")]
fn bispeech_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAudioClip>()?;
    m.add_class::<PyTrainedModel>()?;
    m.add_class::<PyCvResult>()?;
    m.add_function(wrap_pyfunction!(bicoherence, m)?)?;
    m.add_function(wrap_pyfunction!(mfcc, m)?)?;
    m.add_function(wrap_pyfunction!(mel_spectrogram, m)?)?;
    m.add_function(wrap_pyfunction!(feature_names, m)?)?;
    m.add_function(wrap_pyfunction!(extract_features, m)?)?;
    m.add_function(wrap_pyfunction!(make_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    Ok(())
}
