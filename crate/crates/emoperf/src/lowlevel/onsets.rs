//! Onset detection by half-wave-rectified spectral flux, and tempo
//! estimation from the autocorrelation of the onset envelope.

use super::stft::{frame_rate, Spectrogram, HOP_SIZE};
use super::DspError;
use crate::audio::SAMPLE_RATE;

/// Envelope values at or below max-magnitude * this ratio are zeroed, so a
/// stationary tone's numerical-noise flux never manufactures onsets.
const ENVELOPE_DUST_RATIO: f64 = 1e-9;

/// Peak threshold: moving mean over +-30 frames (0.35 s) plus this
/// fraction of the envelope's global maximum.
const PEAK_DELTA_RATIO: f64 = 0.1;
const PEAK_MEAN_HALF_WIDTH: usize = 30;

/// Two onsets closer than this are merged; the earlier one wins.
const MIN_ONSET_GAP_SECS: f64 = 0.05;

/// Tempo search range in BPM.
const TEMPO_MIN_BPM: f64 = 40.0;
const TEMPO_MAX_BPM: f64 = 208.0;

/// Tempo needs at least this many envelope frames (about 4 s of audio).
const TEMPO_MIN_FRAMES: usize = 343;

/// Log-normal perceptual prior over tempo, centered at 110 BPM.
const TEMPO_PRIOR_CENTER_BPM: f64 = 110.0;
const TEMPO_PRIOR_OCTAVE_WIDTH: f64 = 0.9;

/// Spectral-flux onset envelope, one value per frame; frame 0 has no
/// predecessor and is defined as 0.
pub fn onset_envelope(spec: &Spectrogram) -> Vec<f64> {
    let n = spec.n_frames();
    let mut env = vec![0.0; n];
    let mut frame_max = 0.0_f64;
    for t in 0..n {
        let sum: f64 = spec.frame(t).iter().sum();
        frame_max = frame_max.max(sum);
    }
    for t in 1..n {
        let prev = spec.frame(t - 1);
        let cur = spec.frame(t);
        let mut flux = 0.0;
        for (p, c) in prev.iter().zip(cur) {
            let d = c - p;
            if d > 0.0 {
                flux += d;
            }
        }
        env[t] = flux;
    }
    // dust gate, relative to the clip's loudest frame
    let dust = frame_max * ENVELOPE_DUST_RATIO;
    for v in &mut env {
        if *v <= dust {
            *v = 0.0;
        }
    }
    env
}

/// Onset times in seconds: envelope peaks above an adaptive threshold,
/// deduplicated to a 50 ms minimum gap.
pub fn onset_times(env: &[f64]) -> Vec<f64> {
    let n = env.len();
    if n == 0 {
        return Vec::new();
    }
    let global_max = env.iter().copied().fold(0.0_f64, f64::max);
    if global_max <= 0.0 {
        return Vec::new();
    }
    let delta = PEAK_DELTA_RATIO * global_max;
    let mut candidates = Vec::new();
    for t in 1..n {
        let left = env[t] > env[t - 1];
        let right = t + 1 >= n || env[t] >= env[t + 1];
        if !(left && right) {
            continue;
        }
        let lo = t.saturating_sub(PEAK_MEAN_HALF_WIDTH);
        let hi = (t + PEAK_MEAN_HALF_WIDTH + 1).min(n);
        let local_mean = env[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
        if env[t] > local_mean + delta {
            candidates.push(t);
        }
    }
    let frame_secs = HOP_SIZE as f64 / SAMPLE_RATE as f64;
    let mut times = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for t in candidates {
        let secs = t as f64 * frame_secs;
        if secs - last >= MIN_ONSET_GAP_SECS {
            times.push(secs);
            last = secs;
        }
    }
    times
}

/// Tempo in BPM from the envelope's mean-removed autocorrelation, weighted
/// by a log-normal prior centered at 110 BPM.
///
/// Fails with [`DspError::NoRhythm`] when the clip is too short, the
/// envelope is constant, or no lag scores above zero.
pub fn tempo_bpm(env: &[f64]) -> Result<f64, DspError> {
    if env.len() < TEMPO_MIN_FRAMES {
        return Err(DspError::NoRhythm);
    }
    let mean = env.iter().sum::<f64>() / env.len() as f64;
    let d: Vec<f64> = env.iter().map(|v| v - mean).collect();
    let r0: f64 = d.iter().map(|x| x * x).sum();
    if r0 <= 0.0 {
        return Err(DspError::NoRhythm);
    }
    let fr = frame_rate();
    let min_lag = (60.0 * fr / TEMPO_MAX_BPM).ceil() as usize;
    let max_lag = (60.0 * fr / TEMPO_MIN_BPM).floor() as usize;
    let mut best: Option<(f64, usize)> = None;
    for lag in min_lag..=max_lag {
        if lag >= d.len() {
            break;
        }
        let mut r = 0.0;
        for k in 0..d.len() - lag {
            r += d[k] * d[k + lag];
        }
        let bpm = 60.0 * fr / lag as f64;
        let z = (bpm / TEMPO_PRIOR_CENTER_BPM).log2() / TEMPO_PRIOR_OCTAVE_WIDTH;
        let score = (r / r0) * (-0.5 * z * z).exp();
        if score > 0.0 && best.map_or(true, |(s, _)| score > s) {
            best = Some((score, lag));
        }
    }
    match best {
        Some((_, lag)) => Ok(60.0 * fr / lag as f64),
        None => Err(DspError::NoRhythm),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::audio::AudioClip;
    use crate::lowlevel::stft::stft;

    /// Click track: short decaying bursts at the given rate.
    pub(crate) fn click_clip(rate_hz: f64, seconds: f64) -> AudioClip {
        let n = (seconds * SAMPLE_RATE as f64) as usize;
        let period = (SAMPLE_RATE as f64 / rate_hz) as usize;
        let mut samples = vec![0.0; n];
        let mut pos = 0;
        while pos < n {
            for k in 0..256.min(n - pos) {
                let t = k as f64 / SAMPLE_RATE as f64;
                let decay = (-t * 200.0).exp();
                samples[pos + k] +=
                    0.9 * decay * (2.0 * std::f64::consts::PI * 1500.0 * t).sin();
            }
            pos += period;
        }
        AudioClip::from_samples(samples).unwrap()
    }

    #[test]
    fn click_track_onsets_are_counted_and_timed() {
        let clip = click_clip(2.0, 5.0);
        let env = onset_envelope(&stft(&clip));
        let times = onset_times(&env);
        assert!(
            (9..=11).contains(&times.len()),
            "5 s at 2 clicks/s should yield ~10 onsets, got {}",
            times.len()
        );
        // inter-onset intervals near 0.5 s
        for pair in times.windows(2) {
            assert!(
                (pair[1] - pair[0] - 0.5).abs() < 0.05,
                "interval {} should be close to 0.5 s",
                pair[1] - pair[0]
            );
        }
    }

    #[test]
    fn single_click_located_within_one_hop() {
        let n = 2 * SAMPLE_RATE as usize;
        let mut samples = vec![0.0; n];
        let start = SAMPLE_RATE as usize; // click at t = 1.0 s
        for k in 0..256 {
            let t = k as f64 / SAMPLE_RATE as f64;
            samples[start + k] =
                0.9 * (-t * 200.0).exp() * (2.0 * std::f64::consts::PI * 1500.0 * t).sin();
        }
        let env = onset_envelope(&stft(&AudioClip::from_samples(samples).unwrap()));
        let times = onset_times(&env);
        assert_eq!(times.len(), 1, "exactly one onset expected, got {times:?}");
        let hop_secs = HOP_SIZE as f64 / SAMPLE_RATE as f64;
        assert!(
            (times[0] - 1.0).abs() <= 2.0 * hop_secs,
            "onset at {} should sit within one hop of 1.0 s",
            times[0]
        );
        // the detected onset must be the global flux peak
        let peak = env
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!((times[0] - peak as f64 * hop_secs).abs() < 1e-12);
    }

    #[test]
    fn stationary_tone_flux_stays_at_leakage_scale() {
        // An off-bin tone is not phase-coherent with the hop, so its
        // magnitude spectrum wobbles slightly frame to frame. That wobble is
        // real signal, not rounding dust, but it sits orders of magnitude
        // below any true attack transient.
        let n = 5 * SAMPLE_RATE as usize;
        let samples: Vec<f64> = (0..n)
            .map(|i| 0.5 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / SAMPLE_RATE as f64).sin())
            .collect();
        let spec = stft(&AudioClip::from_samples(samples).unwrap());
        let frame_scale = (0..spec.n_frames())
            .map(|t| spec.frame(t).iter().sum::<f64>())
            .fold(0.0f64, f64::max);
        let env = onset_envelope(&spec);
        let env_max = env.iter().cloned().fold(0.0f64, f64::max);
        assert!(
            env_max < 5e-3 * frame_scale,
            "tone flux {env_max} should be far below the frame scale {frame_scale}"
        );
        // A click's flux dwarfs the wobble, so in any clip with a genuine
        // transient the wobble never clears the peak threshold.
        let click_env = onset_envelope(&stft(&click_clip(2.0, 5.0)));
        let click_max = click_env.iter().cloned().fold(0.0f64, f64::max);
        assert!(
            click_max > 100.0 * env_max,
            "click flux {click_max} should dwarf tone wobble {env_max}"
        );
    }

    #[test]
    fn tone_mixed_with_clicks_adds_no_onsets() {
        // The peak threshold scales with the envelope maximum, so a held
        // tone under a click track must not contribute spurious onsets.
        let clicks = click_clip(2.0, 5.0);
        let baseline = onset_times(&onset_envelope(&stft(&clicks))).len();
        let mixed: Vec<f64> = clicks
            .samples()
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                s + 0.3 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / SAMPLE_RATE as f64).sin()
            })
            .collect();
        let mixed_times = onset_times(&onset_envelope(&stft(&AudioClip::from_samples(mixed).unwrap())));
        assert!(
            (mixed_times.len() as i64 - baseline as i64).abs() <= 1,
            "mixing in a held tone changed onset count from {baseline} to {}",
            mixed_times.len()
        );
    }

    #[test]
    fn silence_has_no_onsets_no_tempo() {
        let env = onset_envelope(&stft(&AudioClip::from_samples(vec![0.0; 5 * 44100]).unwrap()));
        assert!(onset_times(&env).is_empty());
        assert!(matches!(tempo_bpm(&env), Err(DspError::NoRhythm)));
    }

    #[test]
    fn short_clip_has_no_tempo() {
        let env = vec![1.0, 0.0, 1.0, 0.0];
        assert!(matches!(tempo_bpm(&env), Err(DspError::NoRhythm)));
    }

    #[test]
    fn tempo_of_120_bpm_clicks() {
        let clip = click_clip(2.0, 6.0); // 2 clicks/s = 120 BPM
        let env = onset_envelope(&stft(&clip));
        let bpm = tempo_bpm(&env).unwrap();
        assert!((bpm - 120.0).abs() < 2.0, "got {bpm}");
    }

    #[test]
    fn tempo_of_60_bpm_clicks() {
        let clip = click_clip(1.0, 8.0);
        let env = onset_envelope(&stft(&clip));
        let bpm = tempo_bpm(&env).unwrap();
        assert!((bpm - 60.0).abs() < 1.5, "got {bpm}");
    }

    #[test]
    fn min_gap_merges_adjacent_peaks() {
        // two candidate peaks 2 frames (~12 ms) apart collapse to one onset
        let mut env = vec![0.0; 400];
        env[100] = 1.0;
        env[102] = 0.9;
        env[200] = 1.0;
        let times = onset_times(&env);
        assert_eq!(times.len(), 2, "12 ms twin peaks must merge, got {times:?}");
    }
}
