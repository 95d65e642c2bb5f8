//! WAV decoding and encoding, mono mixdown and duration capping.
//!
//! Integer PCM is scaled by `1 / 2^(bits-1)` so every decoded sample lies in
//! `[-1, 1]`. Float files are clamped into the same range.

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed RIFF/WAVE container: {0}")]
    MalformedContainer(String),
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("audio contains no sample frames")]
    EmptyAudio,
    #[error("buffer of {len} samples is not divisible into {channels} channels")]
    LengthMismatch { len: usize, channels: u16 },
    #[error("invalid clip: {0}")]
    InvalidClip(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Decoded PCM audio. Samples are interleaved when `channels > 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
    channels: u16,
    source_path: Option<PathBuf>,
}

impl AudioClip {
    /// Builds a mono clip from in-memory samples.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        Self::interleaved(samples, sample_rate, 1)
    }

    pub fn interleaved(
        samples: Vec<f64>,
        sample_rate: u32,
        channels: u16,
    ) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidClip(
                "sample rate must be positive".into(),
            ));
        }
        if channels == 0 {
            return Err(AudioError::InvalidClip(
                "channel count must be positive".into(),
            ));
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(AudioError::InvalidClip(format!(
                "sample {bad} outside [-1, 1]"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
            channels,
            source_path: None,
        })
    }

    pub fn with_source(mut self, path: impl Into<PathBuf>) -> Self {
        self.source_path = Some(path.into());
        self
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channels(&self) -> u16 {
        self.channels
    }

    pub fn source_path(&self) -> Option<&Path> {
        self.source_path.as_deref()
    }

    /// Number of sample frames (samples per channel).
    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels as usize
    }

    pub fn duration_secs(&self) -> f64 {
        self.frames() as f64 / self.sample_rate as f64
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Decodes a RIFF/WAVE file (PCM u8/i16/i24/i32 or IEEE float-32).
///
/// Channels are left interleaved; call [`to_mono`] to mix down.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(map_hound)?;
    let spec = reader.spec();
    let samples = decode_samples(reader, spec)?;
    if samples.is_empty() {
        return Err(AudioError::EmptyAudio);
    }
    let clip = AudioClip {
        samples,
        sample_rate: spec.sample_rate,
        channels: spec.channels,
        source_path: Some(path.to_path_buf()),
    };
    if clip.sample_rate == 0 || clip.channels == 0 {
        return Err(AudioError::MalformedContainer(
            "zero sample rate or channel count".into(),
        ));
    }
    Ok(clip)
}

fn decode_samples<R: std::io::Read>(
    mut reader: hound::WavReader<R>,
    spec: hound::WavSpec,
) -> Result<Vec<f64>, AudioError> {
    match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / f64::from(1u32 << (bits - 1));
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) * scale).map_err(map_hound))
                .collect()
        }
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| f64::from(v).clamp(-1.0, 1.0)).map_err(map_hound))
            .collect(),
        (format, bits) => Err(AudioError::UnsupportedEncoding(format!(
            "{format:?} with {bits} bits per sample"
        ))),
    }
}

fn map_hound(err: hound::Error) -> AudioError {
    match err {
        hound::Error::IoError(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            AudioError::MalformedContainer("truncated chunk".into())
        }
        hound::Error::IoError(e) => AudioError::Io(e),
        hound::Error::FormatError(msg) => AudioError::MalformedContainer(msg.into()),
        hound::Error::Unsupported => {
            AudioError::UnsupportedEncoding("compressed or unknown codec".into())
        }
        other => AudioError::MalformedContainer(other.to_string()),
    }
}

/// Writes the clip as 16-bit PCM. Samples are rounded to the nearest code
/// and saturated at the positive rail.
pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<(), AudioError> {
    let spec = hound::WavSpec {
        channels: clip.channels,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(map_hound)?;
    for &s in &clip.samples {
        writer.write_sample(quantize_i16(s)).map_err(map_hound)?;
    }
    writer.finalize().map_err(map_hound)
}

pub(crate) fn quantize_i16(sample: f64) -> i16 {
    (sample * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Averages interleaved channels frame by frame.
pub fn to_mono(clip: &AudioClip, channel_count: u16) -> Result<AudioClip, AudioError> {
    if channel_count == 0 {
        return Err(AudioError::InvalidClip(
            "channel count must be positive".into(),
        ));
    }
    let n = channel_count as usize;
    if !clip.samples.len().is_multiple_of(n) {
        return Err(AudioError::LengthMismatch {
            len: clip.samples.len(),
            channels: channel_count,
        });
    }
    let samples = if n == 1 {
        clip.samples.clone()
    } else {
        clip.samples
            .chunks_exact(n)
            .map(|frame| frame.iter().sum::<f64>() / n as f64)
            .collect()
    };
    Ok(AudioClip {
        samples,
        sample_rate: clip.sample_rate,
        channels: 1,
        source_path: clip.source_path.clone(),
    })
}

/// Keeps at most `round(max_seconds * sample_rate)` frames from the head.
pub fn trim(clip: &AudioClip, max_seconds: f64) -> AudioClip {
    assert!(max_seconds > 0.0, "trim duration must be positive");
    let cap = (max_seconds * clip.sample_rate as f64).round() as usize;
    let frames = clip.frames().min(cap);
    AudioClip {
        samples: clip.samples[..frames * clip.channels as usize].to_vec(),
        sample_rate: clip.sample_rate,
        channels: clip.channels,
        source_path: clip.source_path.clone(),
    }
}

/// Loads, mixes down and caps a file in one step.
pub fn load_mono(path: impl AsRef<Path>, max_seconds: f64) -> Result<AudioClip, AudioError> {
    let clip = load_wav(path)?;
    let mono = to_mono(&clip, clip.channels)?;
    Ok(trim(&mono, max_seconds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn write_raw_wav(
        path: &Path,
        format_tag: u16,
        channels: u16,
        rate: u32,
        bits: u16,
        data: &[u8],
    ) {
        let block_align = channels * bits / 8;
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
        bytes.extend_from_slice(b"WAVEfmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&format_tag.to_le_bytes());
        bytes.extend_from_slice(&channels.to_le_bytes());
        bytes.extend_from_slice(&rate.to_le_bytes());
        bytes.extend_from_slice(&(rate * block_align as u32).to_le_bytes());
        bytes.extend_from_slice(&block_align.to_le_bytes());
        bytes.extend_from_slice(&bits.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&(data.len() as u32).to_le_bytes());
        bytes.extend_from_slice(data);
        std::fs::File::create(path)
            .unwrap()
            .write_all(&bytes)
            .unwrap();
    }

    #[test]
    fn single_16bit_sample_scales_to_half() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("half.wav");
        write_raw_wav(&path, 1, 1, 8000, 16, &16384i16.to_le_bytes());
        let clip = load_wav(&path).unwrap();
        assert_eq!(clip.samples(), &[0.5]);
        assert_eq!(clip.sample_rate(), 8000);
    }

    #[test]
    fn empty_data_chunk_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.wav");
        write_raw_wav(&path, 1, 1, 8000, 16, &[]);
        assert!(matches!(load_wav(&path), Err(AudioError::EmptyAudio)));
    }

    #[test]
    fn bad_magic_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.wav");
        std::fs::write(&path, b"RIFX\0\0\0\0WAVEjunkjunkjunk").unwrap();
        assert!(matches!(
            load_wav(&path),
            Err(AudioError::MalformedContainer(_))
        ));
    }

    #[test]
    fn compressed_codec_is_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("alaw.wav");
        // format tag 6 = A-law
        write_raw_wav(&path, 6, 1, 8000, 8, &[1, 2, 3, 4]);
        assert!(matches!(
            load_wav(&path),
            Err(AudioError::UnsupportedEncoding(_))
        ));
    }

    #[test]
    fn decodes_u8_i24_and_float() {
        let dir = tempfile::tempdir().unwrap();
        let p8 = dir.path().join("u8.wav");
        write_raw_wav(&p8, 1, 1, 8000, 8, &[128, 192, 0]);
        assert_eq!(load_wav(&p8).unwrap().samples(), &[0.0, 0.5, -1.0]);

        let p24 = dir.path().join("i24.wav");
        let v: i32 = -(1 << 22);
        write_raw_wav(&p24, 1, 1, 8000, 24, &v.to_le_bytes()[..3]);
        assert_eq!(load_wav(&p24).unwrap().samples(), &[-0.5]);

        let pf = dir.path().join("f32.wav");
        let mut data = Vec::new();
        for x in [0.25f32, -0.75, 1.5] {
            data.extend_from_slice(&x.to_le_bytes());
        }
        write_raw_wav(&pf, 3, 1, 8000, 32, &data);
        assert_eq!(load_wav(&pf).unwrap().samples(), &[0.25, -0.75, 1.0]);
    }

    #[test]
    fn sine_round_trips_within_one_lsb() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sine.wav");
        let buf: Vec<f64> = (0..8000)
            .map(|n| 0.9 * (2.0 * std::f64::consts::PI * 440.0 * n as f64 / 8000.0).sin())
            .collect();
        let clip = AudioClip::new(buf.clone(), 8000).unwrap();
        write_wav(&path, &clip).unwrap();
        let back = load_wav(&path).unwrap();
        let max_err = buf
            .iter()
            .zip(back.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err <= 2f64.powi(-15), "max_err = {max_err}");
    }

    #[test]
    fn stereo_mixdown() {
        let clip = AudioClip::interleaved(vec![0.5, 0.5, 1.0, -1.0], 8000, 2).unwrap();
        let mono = to_mono(&clip, 2).unwrap();
        assert_eq!(mono.samples(), &[0.5, 0.0]);
        assert_eq!(mono.channels(), 1);
    }

    #[test]
    fn mixdown_matches_per_frame_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let buf: Vec<f64> = (0..128).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let clip = AudioClip::interleaved(buf.clone(), 8000, 2).unwrap();
        let mono = to_mono(&clip, 2).unwrap();
        let mut expected = Vec::new();
        let mut i = 0;
        while i < buf.len() {
            expected.push((buf[i] + buf[i + 1]) / 2.0);
            i += 2;
        }
        assert_eq!(mono.samples(), expected.as_slice());
    }

    #[test]
    fn mixdown_rejects_ragged_buffers() {
        let clip = AudioClip::new(vec![0.1, 0.2, 0.3], 8000).unwrap();
        assert!(matches!(
            to_mono(&clip, 2),
            Err(AudioError::LengthMismatch {
                len: 3,
                channels: 2
            })
        ));
    }

    #[test]
    fn trim_cases() {
        let ten =
            AudioClip::new((0..80_000).map(|i| (i % 7) as f64 / 10.0).collect(), 8000).unwrap();
        let t = trim(&ten, 5.0);
        assert_eq!(t.samples(), &ten.samples()[..40_000]);

        let three = AudioClip::new(vec![0.0; 24_000], 8000).unwrap();
        assert_eq!(trim(&three, 5.0), three);

        let long = AudioClip::new(vec![0.0; 242_550], 44_100).unwrap();
        assert_eq!(trim(&long, 5.0).samples().len(), 220_500);
    }

    proptest! {
        #[test]
        fn trim_is_idempotent_and_shrinking(len in 1usize..5000, secs in 0.01f64..1.0) {
            let clip = AudioClip::new(vec![0.25; len], 1000).unwrap();
            let once = trim(&clip, secs);
            prop_assert!(once.samples().len() <= len);
            prop_assert_eq!(trim(&once, secs), once);
        }

        #[test]
        fn mono_mixdown_of_mono_is_identity(buf in proptest::collection::vec(-1.0f64..=1.0, 1..200)) {
            let clip = AudioClip::new(buf, 8000).unwrap();
            prop_assert_eq!(to_mono(&clip, 1).unwrap(), clip);
        }
    }
}
