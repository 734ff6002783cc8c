//! Short-time Fourier analysis: 1024-sample frames, 512-sample hop,
//! periodic Hann window, magnitude spectra of 513 bins per frame.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::{AudioClip, SAMPLE_RATE};

pub const FRAME_SIZE: usize = 1024;
pub const HOP_SIZE: usize = 512;
pub const N_BINS: usize = FRAME_SIZE / 2 + 1;

/// Width of one DFT bin in Hz (about 43.07 Hz).
pub fn bin_hz() -> f64 {
    SAMPLE_RATE as f64 / FRAME_SIZE as f64
}

/// Frames per second of the hop grid (about 86.13).
pub fn frame_rate() -> f64 {
    SAMPLE_RATE as f64 / HOP_SIZE as f64
}

/// Number of complete frames in a buffer of `len` samples.
pub fn frame_count(len: usize) -> usize {
    if len < FRAME_SIZE {
        0
    } else {
        (len - FRAME_SIZE) / HOP_SIZE + 1
    }
}

/// Magnitude spectrogram, row-major frames of [`N_BINS`] bins.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    n_frames: usize,
    mags: Vec<f64>,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.mags[t * N_BINS..(t + 1) * N_BINS]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.mags.chunks_exact(N_BINS)
    }
}

/// Computes the magnitude spectrogram of a clip. Only complete frames are
/// analyzed; a clip of exactly one second yields 85 frames.
pub fn stft(clip: &AudioClip) -> Spectrogram {
    let samples = clip.samples();
    let n_frames = frame_count(samples.len());

    // periodic Hann, the analysis window for every spectral feature
    let window: Vec<f64> = (0..FRAME_SIZE)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / FRAME_SIZE as f64).cos()))
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(FRAME_SIZE);
    let mut buf = vec![Complex::new(0.0, 0.0); FRAME_SIZE];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];

    let mut mags = vec![0.0; n_frames * N_BINS];
    for t in 0..n_frames {
        let start = t * HOP_SIZE;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(samples[start + i] * window[i], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        let row = &mut mags[t * N_BINS..(t + 1) * N_BINS];
        for (k, m) in row.iter_mut().enumerate() {
            *m = buf[k].norm();
        }
    }
    Spectrogram { n_frames, mags }
}
