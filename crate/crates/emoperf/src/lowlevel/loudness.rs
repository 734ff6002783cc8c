//! Energy-based loudness descriptors.
//!
//! Frame loudness follows Stevens' law: frame energy raised to 0.67. Clip
//! loudness applies the same law to the mean frame energy rather than
//! averaging frame loudness; the exponent is nonlinear, so the two carry
//! distinct information (they coincide only for stationary signals), which
//! keeps the clip scalar from duplicating the per-frame mean.
//!
//! Dynamic complexity measures level fluctuation in dB over 0.2 s windows,
//! with windows at or below -90 dB excluded as silence. The fraction
//! excluded is reported as the silence ratio.

use super::stft::{FRAME_SIZE, HOP_SIZE};
use crate::audio::{AudioClip, SAMPLE_RATE};

const POWER_EXPONENT: f64 = 0.67;

/// Dynamic-complexity window: 0.2 s of samples.
const DYN_WINDOW: usize = (SAMPLE_RATE as usize) / 5;

/// Windows at or below this level are treated as silence.
const SILENCE_GATE_DB: f64 = -90.0;

/// Guard inside log10 so an all-zero window has a finite level.
const ENERGY_EPS: f64 = 1e-12;

/// Loudness (energy^0.67) of each analysis frame, on the same 1024/512
/// grid as the STFT.
pub fn frame_loudness(clip: &AudioClip) -> Vec<f64> {
    let x = clip.samples();
    let n_frames = super::stft::frame_count(x.len());
    (0..n_frames)
        .map(|t| {
            let start = t * HOP_SIZE;
            let energy: f64 = x[start..start + FRAME_SIZE].iter().map(|s| s * s).sum();
            energy.powf(POWER_EXPONENT)
        })
        .collect()
}

/// Loudness of the whole clip: mean frame energy under the same power law.
pub fn clip_loudness(clip: &AudioClip) -> f64 {
    let x = clip.samples();
    let n_frames = super::stft::frame_count(x.len());
    let mut total = 0.0;
    for t in 0..n_frames {
        let start = t * HOP_SIZE;
        total += x[start..start + FRAME_SIZE]
            .iter()
            .map(|s| s * s)
            .sum::<f64>();
    }
    (total / n_frames as f64).powf(POWER_EXPONENT)
}

/// Mean absolute deviation of window level (dB) plus the fraction of
/// windows gated out as silence, returned as (dynamic_complexity,
/// silence_ratio). Only complete 0.2 s windows count; a clip shorter than
/// one window yields (0, 0), and a clip with every window silent (0, 1).
pub fn dynamic_complexity(clip: &AudioClip) -> (f64, f64) {
    let x = clip.samples();
    let n_windows = x.len() / DYN_WINDOW;
    if n_windows == 0 {
        return (0.0, 0.0);
    }
    let mut levels = Vec::with_capacity(n_windows);
    let mut excluded = 0usize;
    for w in 0..n_windows {
        let seg = &x[w * DYN_WINDOW..(w + 1) * DYN_WINDOW];
        let energy: f64 = seg.iter().map(|s| s * s).sum();
        let level = 10.0 * (energy + ENERGY_EPS).log10();
        if level > SILENCE_GATE_DB {
            levels.push(level);
        } else {
            excluded += 1;
        }
    }
    let silence_ratio = excluded as f64 / n_windows as f64;
    if levels.is_empty() {
        return (0.0, silence_ratio);
    }
    let mean = levels.iter().sum::<f64>() / levels.len() as f64;
    let dc = levels.iter().map(|l| (l - mean).abs()).sum::<f64>() / levels.len() as f64;
    (dc, silence_ratio)
}
