//! Synthetic speech detection from bispectral and cepstral statistics.
//!
//! The pipeline loads mono audio, measures third-order phase coupling
//! (bicoherence) and short-time cepstra (MFCC with first and second
//! differences), condenses both into a fixed 14-value feature vector, and
//! trains classical classifiers on those vectors.

pub mod audio_io;
pub mod bispectrum;
pub mod cepstral;
pub mod classify;
pub mod dataset;
pub mod dsp;
pub mod eval;
pub mod features;
pub mod label;
pub mod synthgen;
pub mod textdump;
pub mod viz;

pub use audio_io::{AudioClip, AudioError};
pub use bispectrum::{BicoherenceGrid, BispectralConfig, BispectrumError, MagnitudeEstimator};
pub use cepstral::{CepstralConfig, CepstralError, MfccMatrix};
pub use classify::{ClassifyError, ModelKind, TrainParams, TrainedModel};
pub use features::{FeatureConfig, FeatureError, FeatureVector, FEATURE_COUNT};
pub use label::ClassLabel;
