//! Centered short-time magnitude spectra.
//!
//! Frame `t` is centered on sample `round(t * hop * rate)`; samples outside the
//! signal are zeros. Frame `t` therefore depends only on the samples inside its
//! own window, and appending silence never changes existing frames.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;

use super::fft::Fft;

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * Float::cos(2.0 * PI * i as f64 / n as f64)).collect()
}

/// Number of frames whose centers `t * hop` fall within the signal duration.
pub fn frame_count(len: usize, rate: u32, hop_seconds: f64) -> usize {
    let duration = len as f64 / rate as f64;
    Float::floor(duration / hop_seconds + 1e-9) as usize + 1
}

pub fn frame_center(t: usize, rate: u32, hop_seconds: f64) -> i64 {
    Float::round(t as f64 * hop_seconds * rate as f64) as i64
}

/// Calls `f(t, magnitudes)` for each of `frames` centered frames, with
/// `n_fft / 2 + 1` magnitude bins.
pub fn for_each_magnitude_frame<F: FnMut(usize, &[f64])>(
    samples: &[f32],
    rate: u32,
    n_fft: usize,
    hop_seconds: f64,
    frames: usize,
    mut f: F,
) {
    let fft = Fft::new(n_fft);
    let window = hann(n_fft);
    let half = (n_fft / 2) as i64;
    let mut frame = alloc::vec![0.0; n_fft];
    let (mut re, mut im) = (Vec::with_capacity(n_fft), Vec::with_capacity(n_fft));
    let mut mags = alloc::vec![0.0; n_fft / 2 + 1];
    for t in 0..frames {
        let start = frame_center(t, rate, hop_seconds) - half;
        for (i, x) in frame.iter_mut().enumerate() {
            let idx = start + i as i64;
            let s = if idx >= 0 && (idx as usize) < samples.len() { samples[idx as usize] as f64 } else { 0.0 };
            *x = s * window[i];
        }
        fft.magnitudes(&frame, &mut re, &mut im, &mut mags);
        f(t, &mags);
    }
}

/// Magnitude spectra of `frames` centered frames.
pub fn magnitude_frames(samples: &[f32], rate: u32, n_fft: usize, hop_seconds: f64, frames: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(frames);
    for_each_magnitude_frame(samples, rate, n_fft, hop_seconds, frames, |_, m| out.push(m.to_vec()));
    out
}
