//! Low-level audio descriptors: a fixed 22-value vector per clip.
//!
//! Eight per-frame features (dissonance, pitch salience, five spectral
//! shape statistics, frame loudness) are aggregated by mean and standard
//! deviation over all STFT frames; six clip-level scalars complete the
//! vector. Extraction is a pure function of the sample buffer, so clips
//! can be processed in parallel and results are bit-stable across runs.

pub mod loudness;
pub mod onsets;
pub mod spectral;
pub mod stft;

use crate::audio::{AudioClip, SAMPLE_RATE};
use crate::corpus::{FeatureSet, FeatureVector};
use crate::util::{mean, pop_std};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DspError {
    /// The onset envelope carries no periodicity to estimate a tempo from.
    #[error("no rhythmic content in onset envelope")]
    NoRhythm,
}

pub const N_LOWLEVEL: usize = 22;

/// Canonical feature order; feature CSVs and design matrices follow it.
pub const LOWLEVEL_NAMES: [&str; N_LOWLEVEL] = [
    "dissonance_mean",
    "dissonance_std",
    "pitch_salience_mean",
    "pitch_salience_std",
    "spectral_centroid_mean",
    "spectral_centroid_std",
    "spectral_flatness_mean",
    "spectral_flatness_std",
    "spectral_bandwidth_mean",
    "spectral_bandwidth_std",
    "spectral_rolloff_mean",
    "spectral_rolloff_std",
    "spectral_complexity_mean",
    "spectral_complexity_std",
    "frame_loudness_mean",
    "frame_loudness_std",
    "loudness",
    "dynamic_complexity",
    "onset_rate",
    "tempo_bpm",
    "onset_count_normalized",
    "silence_ratio",
];

/// One clip's low-level features, in [`LOWLEVEL_NAMES`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct LowLevelVector {
    pub values: [f64; N_LOWLEVEL],
}

impl LowLevelVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        LOWLEVEL_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values[i])
    }

    pub fn feature_vector(&self, clip_id: &str) -> FeatureVector {
        FeatureVector {
            clip_id: clip_id.to_string(),
            set: FeatureSet::LowLevel,
            names: LOWLEVEL_NAMES.iter().map(|s| s.to_string()).collect(),
            values: self.values.to_vec(),
        }
    }
}

/// Extracts the full 22-value vector.
///
/// Fails only when tempo estimation finds no rhythmic content (silence or
/// a perfectly stationary tone); real performance excerpts always carry
/// onsets. Callers attach the clip id when reporting the error.
pub fn extract_lowlevel(clip: &AudioClip) -> Result<LowLevelVector, DspError> {
    let spec = stft::stft(clip);
    let n = spec.n_frames();

    let mut diss = Vec::with_capacity(n);
    let mut sal = Vec::with_capacity(n);
    let mut centroid = Vec::with_capacity(n);
    let mut flatness = Vec::with_capacity(n);
    let mut bandwidth = Vec::with_capacity(n);
    let mut rolloff = Vec::with_capacity(n);
    let mut complexity = Vec::with_capacity(n);
    for t in 0..n {
        let frame = spec.frame(t);
        let shape = spectral::spectral_shape(frame);
        centroid.push(shape.centroid_hz);
        flatness.push(shape.flatness);
        bandwidth.push(shape.bandwidth_hz);
        rolloff.push(shape.rolloff_hz);
        complexity.push(shape.complexity);
        diss.push(spectral::dissonance(frame));
        sal.push(spectral::pitch_salience(frame));
    }
    let fl = loudness::frame_loudness(clip);
    debug_assert_eq!(fl.len(), n, "loudness and STFT share one frame grid");

    let env = onsets::onset_envelope(&spec);
    let tempo = onsets::tempo_bpm(&env)?;
    let times = onsets::onset_times(&env);
    let duration_secs = clip.samples().len() as f64 / SAMPLE_RATE as f64;
    let onset_rate = times.len() as f64 / duration_secs;
    // onsets per beat: note activity at the clip's own pace, so it is not
    // a rescaling of onset_rate
    let beats = duration_secs * tempo / 60.0;
    let onset_count_normalized = times.len() as f64 / beats;

    let (dyn_complexity, silence_ratio) = loudness::dynamic_complexity(clip);

    let values = [
        mean(&diss),
        pop_std(&diss),
        mean(&sal),
        pop_std(&sal),
        mean(&centroid),
        pop_std(&centroid),
        mean(&flatness),
        pop_std(&flatness),
        mean(&bandwidth),
        pop_std(&bandwidth),
        mean(&rolloff),
        pop_std(&rolloff),
        mean(&complexity),
        pop_std(&complexity),
        mean(&fl),
        pop_std(&fl),
        loudness::clip_loudness(clip),
        dyn_complexity,
        onset_rate,
        tempo,
        onset_count_normalized,
        silence_ratio,
    ];
    debug_assert!(values.iter().all(|v| v.is_finite()));
    Ok(LowLevelVector { values })
}
