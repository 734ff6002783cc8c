//! Per-frame spectral descriptors: shape statistics, peak-based sensory
//! dissonance, and pitch salience.
//!
//! An all-zero frame is silent by convention: every descriptor returns 0.
//! Peak picking is shared between spectral complexity and dissonance: local
//! maxima of the magnitude spectrum no more than 60 dB below the frame
//! maximum. A full-length (unpadded) DFT samples a sinusoid's leakage skirt
//! exactly once per sidelobe, so skirts are monotone and a clean tone
//! contributes a single peak.

use super::stft::{bin_hz, N_BINS};

/// Peaks more than this far below the frame maximum are ignored (60 dB as
/// an amplitude ratio).
const PEAK_FLOOR_RATIO: f64 = 1e-3;

/// Dissonance sums over at most this many peaks, kept by descending
/// magnitude.
const MAX_DISSONANCE_PEAKS: usize = 100;

/// Fraction of total spectral energy below the rolloff frequency.
const ROLLOFF_FRACTION: f64 = 0.85;

/// Magnitudes are floored at this value inside the flatness ratio.
const FLATNESS_FLOOR: f64 = 1e-10;

/// Harmonic spacings searched by pitch salience extend down to the lag of
/// this spacing in Hz.
const SALIENCE_MIN_SPACING_HZ: f64 = 5000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralShape {
    pub centroid_hz: f64,
    pub bandwidth_hz: f64,
    pub flatness: f64,
    pub rolloff_hz: f64,
    /// Count of spectral peaks, as a float so it aggregates like the rest.
    pub complexity: f64,
}

impl SpectralShape {
    fn silent() -> Self {
        SpectralShape {
            centroid_hz: 0.0,
            bandwidth_hz: 0.0,
            flatness: 0.0,
            rolloff_hz: 0.0,
            complexity: 0.0,
        }
    }
}

/// Shape statistics of one magnitude frame.
pub fn spectral_shape(mags: &[f64]) -> SpectralShape {
    debug_assert_eq!(mags.len(), N_BINS);
    let total: f64 = mags.iter().sum();
    if total <= 0.0 {
        return SpectralShape::silent();
    }

    let hz = bin_hz();
    let centroid_hz = mags
        .iter()
        .enumerate()
        .map(|(k, m)| k as f64 * hz * m)
        .sum::<f64>()
        / total;

    let bandwidth_hz = (mags
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let d = k as f64 * hz - centroid_hz;
            m * d * d
        })
        .sum::<f64>()
        / total)
        .sqrt();

    // geometric over arithmetic mean of floored magnitudes
    let ln_sum: f64 = mags.iter().map(|m| m.max(FLATNESS_FLOOR).ln()).sum();
    let geo = (ln_sum / mags.len() as f64).exp();
    let arith = mags.iter().map(|m| m.max(FLATNESS_FLOOR)).sum::<f64>() / mags.len() as f64;
    let flatness = geo / arith;

    let energy_total: f64 = mags.iter().map(|m| m * m).sum();
    let mut cum = 0.0;
    let mut rolloff_bin = N_BINS - 1;
    for (k, m) in mags.iter().enumerate() {
        cum += m * m;
        if cum >= ROLLOFF_FRACTION * energy_total {
            rolloff_bin = k;
            break;
        }
    }
    let rolloff_hz = rolloff_bin as f64 * hz;

    let complexity = spectral_peaks(mags).len() as f64;

    SpectralShape {
        centroid_hz,
        bandwidth_hz,
        flatness,
        rolloff_hz,
        complexity,
    }
}

/// A spectral peak at its bin frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub freq_hz: f64,
    pub magnitude: f64,
}

/// Local maxima of the frame above the -60 dB floor, in ascending frequency.
/// Interior bins only; a plateau keeps its left edge.
pub fn spectral_peaks(mags: &[f64]) -> Vec<Peak> {
    debug_assert_eq!(mags.len(), N_BINS);
    let max = mags.iter().copied().fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let floor = max * PEAK_FLOOR_RATIO;
    let hz = bin_hz();
    let mut peaks = Vec::new();
    for k in 1..N_BINS - 1 {
        if mags[k] > floor && mags[k] > mags[k - 1] && mags[k] >= mags[k + 1] {
            peaks.push(Peak {
                freq_hz: k as f64 * hz,
                magnitude: mags[k],
            });
        }
    }
    peaks
}

/// Plomp-Levelt roughness of a pair separation measured in critical
/// bandwidths: g(q) = exp(-3.5 q) - exp(-5.75 q).
fn roughness(q: f64) -> f64 {
    (-3.5 * q).exp() - (-5.75 * q).exp()
}

/// Critical bandwidth in Hz at frequency `f`.
fn critical_bandwidth(f: f64) -> f64 {
    25.0 + 75.0 * (1.0 + 1.4 * (f / 1000.0).powi(2)).powf(0.69)
}

/// Sensory dissonance of one frame: amplitude-weighted pairwise roughness of
/// its spectral peaks, normalized into [0, 1]. Fewer than two peaks is 0.
pub fn dissonance(mags: &[f64]) -> f64 {
    let mut peaks = spectral_peaks(mags);
    if peaks.len() > MAX_DISSONANCE_PEAKS {
        // keep the strongest peaks; ties resolved by frequency for determinism
        peaks.sort_by(|a, b| {
            b.magnitude
                .partial_cmp(&a.magnitude)
                .unwrap()
                .then(a.freq_hz.partial_cmp(&b.freq_hz).unwrap())
        });
        peaks.truncate(MAX_DISSONANCE_PEAKS);
    }
    dissonance_of_peaks(&peaks)
}

/// Dissonance of an explicit peak list; the normalization by total pair
/// weight keeps the value in [0, 1] regardless of scale.
pub fn dissonance_of_peaks(peaks: &[Peak]) -> f64 {
    if peaks.len() < 2 {
        return 0.0;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..peaks.len() {
        for j in (i + 1)..peaks.len() {
            let (a, b) = (&peaks[i], &peaks[j]);
            let fmin = a.freq_hz.min(b.freq_hz);
            let q = (a.freq_hz - b.freq_hz).abs() / critical_bandwidth(fmin);
            let w = a.magnitude * b.magnitude;
            num += w * roughness(q);
            den += w;
        }
    }
    if den <= 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Pitch salience of one frame: the strongest harmonic-comb periodicity of
/// the magnitude spectrum, as a fraction of the lag-0 autocovariance.
///
/// The autocorrelation is computed on the mean-removed spectrum (otherwise
/// the DC offset of broadband frames dominates every lag) and searched from
/// the lag of a 5 kHz harmonic spacing upward. Negative maxima clamp to 0,
/// so the value lives in [0, 1]; a silent frame scores 0.
pub fn pitch_salience(mags: &[f64]) -> f64 {
    debug_assert_eq!(mags.len(), N_BINS);
    let mean = mags.iter().sum::<f64>() / mags.len() as f64;
    let d: Vec<f64> = mags.iter().map(|m| m - mean).collect();
    let r0: f64 = d.iter().map(|x| x * x).sum();
    if r0 <= 0.0 {
        return 0.0;
    }
    let min_lag = (SALIENCE_MIN_SPACING_HZ / bin_hz()).round() as usize;
    let mut best = 0.0_f64;
    for lag in min_lag..N_BINS {
        let mut r = 0.0;
        for k in 0..N_BINS - lag {
            r += d[k] * d[k + lag];
        }
        if r > best {
            best = r;
        }
    }
    best / r0
}
