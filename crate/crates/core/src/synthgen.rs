//! Deterministic audio fixtures: tones, noise, silence, quadratically
//! phase-coupled frequency triples, and harmonic stacks with locked or free
//! harmonic phases.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::audio_io::{self, AudioClip, AudioError};
use crate::dataset::{DatasetError, Manifest, ManifestEntry};
use crate::label::ClassLabel;

/// Peak amplitude of every generated clip (silence excepted).
pub const PEAK: f64 = 0.9;
/// Blocks of a coupled triple per clip; matches the default segment count so
/// each analysis segment sees one phase draw.
pub const COUPLING_BLOCKS: usize = 100;
pub const MIN_DURATION_S: f64 = 0.5;
pub const STACK_CEILING_HZ: f64 = 7000.0;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("frequency {freq} Hz is not below the Nyquist limit {nyquist} Hz")]
    NyquistViolation { freq: f64, nyquist: f64 },
    #[error("invalid fixture: {0}")]
    InvalidSpec(String),
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixtureKind {
    Tone {
        freq: f64,
    },
    /// `cos(w1 t + p1) + cos(w2 t + p2) + cos((w1 + w2) t + p1 + p2 + psi)`
    /// where `psi` is 0 with probability `coupling` in each block and
    /// uniform otherwise.
    CoupledTriple {
        f1: f64,
        f2: f64,
        coupling: f64,
    },
    /// Harmonics `h * f0` below [`STACK_CEILING_HZ`] (and Nyquist) with
    /// amplitude `1 / h`. In a locked block every harmonic phase is
    /// `h * theta` for one uniform `theta`, so all harmonic triples are
    /// coupled; otherwise each phase is drawn independently. Blocks lock with
    /// probability `coupling`.
    HarmonicStack {
        f0: f64,
        coupling: f64,
    },
    WhiteNoise,
    Silence,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureSpec {
    pub kind: FixtureKind,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub seed: u64,
    /// Adds white Gaussian noise at this signal-to-noise ratio before peak
    /// normalization.
    pub snr_db: Option<f64>,
}

impl FixtureSpec {
    pub fn new(kind: FixtureKind, duration_s: f64, sample_rate: u32, seed: u64) -> Self {
        Self {
            kind,
            duration_s,
            sample_rate,
            seed,
            snr_db: None,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.sample_rate == 0 {
            return Err(SynthError::InvalidSpec(
                "sample rate must be positive".into(),
            ));
        }
        if self.duration_s.is_nan()
            || self.duration_s < MIN_DURATION_S
            || !self.duration_s.is_finite()
        {
            return Err(SynthError::InvalidSpec(format!(
                "duration {} s is shorter than {MIN_DURATION_S} s",
                self.duration_s
            )));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(SynthError::InvalidSpec("SNR must be finite".into()));
            }
        }
        let nyquist = f64::from(self.sample_rate) / 2.0;
        let check = |freq: f64| {
            if freq.is_nan() || freq <= 0.0 {
                Err(SynthError::InvalidSpec(format!(
                    "frequency {freq} Hz must be positive"
                )))
            } else if freq >= nyquist {
                Err(SynthError::NyquistViolation { freq, nyquist })
            } else {
                Ok(())
            }
        };
        match self.kind {
            FixtureKind::Tone { freq } => check(freq),
            FixtureKind::CoupledTriple { f1, f2, coupling } => {
                if !(0.0..=1.0).contains(&coupling) {
                    return Err(SynthError::InvalidSpec(format!(
                        "coupling {coupling} outside [0, 1]"
                    )));
                }
                check(f1)?;
                check(f2)?;
                check(f1 + f2)
            }
            FixtureKind::HarmonicStack { f0, coupling } => {
                if !(0.0..=1.0).contains(&coupling) {
                    return Err(SynthError::InvalidSpec(format!(
                        "coupling {coupling} outside [0, 1]"
                    )));
                }
                check(f0)
            }
            FixtureKind::WhiteNoise | FixtureKind::Silence => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        (self.duration_s * f64::from(self.sample_rate)).round() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn uniform_phase(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-PI..PI)
}

pub fn generate(spec: &FixtureSpec) -> Result<AudioClip, SynthError> {
    spec.validate()?;
    let n = spec.len();
    let sr = f64::from(spec.sample_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut samples = match spec.kind {
        FixtureKind::Silence => vec![0.0; n],
        FixtureKind::WhiteNoise => (0..n).map(|_| StandardNormal.sample(&mut rng)).collect(),
        FixtureKind::Tone { freq } => {
            let phase = uniform_phase(&mut rng);
            (0..n)
                .map(|i| (2.0 * PI * freq * i as f64 / sr + phase).cos())
                .collect()
        }
        FixtureKind::CoupledTriple { f1, f2, coupling } => {
            let block = (n / COUPLING_BLOCKS).max(1);
            let mut out = Vec::with_capacity(n);
            let (mut p1, mut p2, mut psi) = (0.0, 0.0, 0.0);
            for i in 0..n {
                if i % block == 0 {
                    p1 = uniform_phase(&mut rng);
                    p2 = uniform_phase(&mut rng);
                    // Both draws happen every block so the stream does not
                    // depend on `coupling`.
                    let locked = rng.random::<f64>() < coupling;
                    let free = uniform_phase(&mut rng);
                    psi = if locked { 0.0 } else { free };
                }
                let t = i as f64 / sr;
                out.push(
                    (2.0 * PI * f1 * t + p1).cos()
                        + (2.0 * PI * f2 * t + p2).cos()
                        + (2.0 * PI * (f1 + f2) * t + p1 + p2 + psi).cos(),
                );
            }
            out
        }
        FixtureKind::HarmonicStack { f0, coupling } => {
            let ceiling = STACK_CEILING_HZ.min(sr / 2.0);
            let top = ((ceiling / f0).ceil() as usize).saturating_sub(1).max(1);
            let block = (n / COUPLING_BLOCKS).max(1);
            let mut phases = vec![0.0; top + 1];
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                if i % block == 0 {
                    let locked = rng.random::<f64>() < coupling;
                    let theta = uniform_phase(&mut rng);
                    for (h, p) in phases.iter_mut().enumerate().skip(1) {
                        let free = uniform_phase(&mut rng);
                        *p = if locked { h as f64 * theta } else { free };
                    }
                }
                let t = i as f64 / sr;
                let s: f64 = (1..=top)
                    .map(|h| (2.0 * PI * h as f64 * f0 * t + phases[h]).cos() / h as f64)
                    .sum();
                out.push(s);
            }
            out
        }
    };
    if let Some(snr) = spec.snr_db {
        let power = samples.iter().map(|s| s * s).sum::<f64>() / n.max(1) as f64;
        if power > 0.0 {
            let sigma = (power / 10f64.powf(snr / 10.0)).sqrt();
            for s in &mut samples {
                let z: f64 = StandardNormal.sample(&mut rng);
                *s += sigma * z;
            }
        }
    }
    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > 0.0 {
        samples.iter_mut().for_each(|s| *s *= PEAK / peak);
    }
    Ok(AudioClip::new(samples, spec.sample_rate)?)
}

/// Settings shared by every clip of [`make_corpus`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusConfig {
    pub sample_rate: u32,
    pub duration_s: f64,
    pub snr_db: f64,
    /// Fundamental frequencies are drawn uniformly from this range.
    pub f0_range: (f64, f64),
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            duration_s: 2.0,
            snr_db: 20.0,
            f0_range: (100.0, 250.0),
        }
    }
}

/// Spec of clip `index` in a corpus: even indices are uncoupled harmonic
/// stacks (Human), odd ones fully locked stacks (Synthetic). The per-file
/// seed is `seed ^ index`; `f0` comes from a separate stream of that seed.
pub fn corpus_spec(config: &CorpusConfig, seed: u64, index: usize) -> (ClassLabel, FixtureSpec) {
    let file_seed = seed ^ index as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(file_seed);
    rng.set_stream(1);
    let (lo, hi) = config.f0_range;
    let f0 = rng.random_range(lo..hi);
    let (label, coupling) = if index.is_multiple_of(2) {
        (ClassLabel::Human, 0.0)
    } else {
        (ClassLabel::Synthetic, 1.0)
    };
    let spec = FixtureSpec {
        kind: FixtureKind::HarmonicStack { f0, coupling },
        duration_s: config.duration_s,
        sample_rate: config.sample_rate,
        seed: file_seed,
        snr_db: Some(config.snr_db),
    };
    (label, spec)
}

/// Writes `2 * n_per_class` WAV files (`human_NNN.wav`, `synthetic_NNN.wav`)
/// and `manifest.csv` into `out_dir`.
pub fn make_corpus(
    out_dir: impl AsRef<Path>,
    n_per_class: usize,
    seed: u64,
) -> Result<Manifest, SynthError> {
    make_corpus_with(out_dir, n_per_class, seed, &CorpusConfig::default())
}

pub fn make_corpus_with(
    out_dir: impl AsRef<Path>,
    n_per_class: usize,
    seed: u64,
    config: &CorpusConfig,
) -> Result<Manifest, SynthError> {
    if n_per_class < 5 {
        return Err(SynthError::InvalidSpec(format!(
            "need at least 5 clips per class, got {n_per_class}"
        )));
    }
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let mut entries = Vec::with_capacity(2 * n_per_class);
    for index in 0..2 * n_per_class {
        let (label, spec) = corpus_spec(config, seed, index);
        let name = format!("{}_{:03}.wav", label.as_str().to_lowercase(), index / 2);
        let clip = generate(&spec)?;
        audio_io::write_wav(out_dir.join(&name), &clip)?;
        entries.push(ManifestEntry {
            path: name.into(),
            label,
        });
    }
    let manifest = Manifest::new(entries)?.with_base_dir(out_dir);
    fs::write(out_dir.join("manifest.csv"), manifest.to_csv())?;
    Ok(manifest)
}
