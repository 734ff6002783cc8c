//! Audio ingestion.
//!
//! Clips are mono f64 sample buffers at 44100 Hz. WAV input may be 16- or
//! 24-bit integer PCM or 32-bit float, mono or stereo; stereo is downmixed
//! by averaging the channels. Any other sample rate or format is rejected,
//! never resampled.

use std::path::{Path, PathBuf};

pub const SAMPLE_RATE: u32 = 44_100;

/// Minimum clip length: one analysis frame.
pub const MIN_SAMPLES: usize = 1024;

#[derive(Debug, thiserror::Error)]
pub enum AudioError {
    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        source: Box<hound::Error>,
    },
    #[error("{path}: sample rate {got} Hz is unsupported; clips must be {SAMPLE_RATE} Hz")]
    SampleRate { path: PathBuf, got: u32 },
    #[error("{path}: unsupported sample format ({detail}); expected 16/24-bit int PCM or 32-bit float")]
    Format { path: PathBuf, detail: String },
    #[error("{path}: unsupported channel count {got}; expected mono or stereo")]
    Channels { path: PathBuf, got: u16 },
    #[error("clip too short: {got} samples, need at least {MIN_SAMPLES}")]
    TooShort { got: usize },
    #[error("clip contains a non-finite sample at index {index}")]
    NonFinite { index: usize },
}

/// Mono audio at 44100 Hz.
#[derive(Debug, Clone)]
pub struct AudioClip {
    samples: Vec<f64>,
}

impl AudioClip {
    /// Wraps a mono sample buffer, validating length and finiteness.
    pub fn from_samples(samples: Vec<f64>) -> Result<Self, AudioError> {
        if samples.len() < MIN_SAMPLES {
            return Err(AudioError::TooShort { got: samples.len() });
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::NonFinite { index });
        }
        Ok(AudioClip { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / SAMPLE_RATE as f64
    }
}

/// Reads a WAV file into an [`AudioClip`], downmixing stereo by averaging.
pub fn read_wav(path: &Path) -> Result<AudioClip, AudioError> {
    let mut reader = hound::WavReader::open(path).map_err(|source| AudioError::Wav {
        path: path.to_path_buf(),
        source: Box::new(source),
    })?;
    let spec = reader.spec();
    if spec.sample_rate != SAMPLE_RATE {
        return Err(AudioError::SampleRate {
            path: path.to_path_buf(),
            got: spec.sample_rate,
        });
    }
    if spec.channels == 0 || spec.channels > 2 {
        return Err(AudioError::Channels {
            path: path.to_path_buf(),
            got: spec.channels,
        });
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(|source| AudioError::Wav {
                path: path.to_path_buf(),
                source: Box::new(source),
            })?,
        (hound::SampleFormat::Int, 24) => reader
            .samples::<i32>()
            .map(|s| s.map(|v| v as f64 / 8_388_608.0))
            .collect::<Result<_, _>>()
            .map_err(|source| AudioError::Wav {
                path: path.to_path_buf(),
                source: Box::new(source),
            })?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<Result<_, _>>()
            .map_err(|source| AudioError::Wav {
                path: path.to_path_buf(),
                source: Box::new(source),
            })?,
        (fmt, bits) => {
            return Err(AudioError::Format {
                path: path.to_path_buf(),
                detail: format!("{fmt:?} {bits}-bit"),
            })
        }
    };

    let mono = if spec.channels == 2 {
        interleaved
            .chunks_exact(2)
            .map(|lr| 0.5 * (lr[0] + lr[1]))
            .collect()
    } else {
        interleaved
    };
    AudioClip::from_samples(mono)
}
