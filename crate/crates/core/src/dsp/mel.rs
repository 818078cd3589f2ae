//! Log-Mel spectra.
//!
//! Magnitude STFT (periodic Hann, centered zero-padded frames), a triangular
//! area-normalized filterbank on the Slaney Mel scale, and natural-log
//! compression with a floor of `1e-10`.

use alloc::vec::Vec;

use num_traits::Float;

use super::stft::{for_each_magnitude_frame, frame_count};
use super::{AudioBuffer, FeatureKind, FeatureMatrix};
use crate::error::{Error, Result};

pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LogMelConfig {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub n_mels: usize,
    pub hop_seconds: f64,
    pub fmin: f64,
    /// Defaults to Nyquist.
    pub fmax: Option<f64>,
}

impl Default for LogMelConfig {
    fn default() -> Self {
        LogMelConfig { sample_rate: 44_100, n_fft: 2048, n_mels: 128, hop_seconds: 0.0058, fmin: 0.0, fmax: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogMel {
    pub features: FeatureMatrix,
    /// Set when the audio was shorter than one window and a single padded frame was produced.
    pub short_input: bool,
}

const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;

fn log_step() -> f64 {
    Float::ln(6.4) / 27.0
}

pub fn hz_to_mel(hz: f64) -> f64 {
    if hz < MIN_LOG_HZ {
        hz / F_SP
    } else {
        MIN_LOG_MEL + Float::ln(hz / MIN_LOG_HZ) / log_step()
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    if mel < MIN_LOG_MEL {
        mel * F_SP
    } else {
        MIN_LOG_HZ * Float::exp(log_step() * (mel - MIN_LOG_MEL))
    }
}

/// Center frequencies (Hz) of the Mel filters.
pub fn mel_centers(n_mels: usize, fmin: f64, fmax: f64) -> Vec<f64> {
    mel_points(n_mels, fmin, fmax)[1..=n_mels].to_vec()
}

fn mel_points(n_mels: usize, fmin: f64, fmax: f64) -> Vec<f64> {
    let (lo, hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
    (0..n_mels + 2).map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64)).collect()
}

/// `n_mels x (n_fft/2 + 1)` filterbank weights.
pub fn mel_filterbank(sample_rate: u32, n_fft: usize, n_mels: usize, fmin: f64, fmax: f64) -> Vec<Vec<f64>> {
    let bins = n_fft / 2 + 1;
    let pts = mel_points(n_mels, fmin, fmax);
    (0..n_mels)
        .map(|m| {
            let (lo, c, hi) = (pts[m], pts[m + 1], pts[m + 2]);
            let norm = 2.0 / (hi - lo);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * sample_rate as f64 / n_fft as f64;
                    let up = (f - lo) / (c - lo);
                    let down = (hi - f) / (hi - c);
                    up.min(down).max(0.0) * norm
                })
                .collect()
        })
        .collect()
}

pub fn log_mel(audio: &AudioBuffer, config: &LogMelConfig) -> Result<LogMel> {
    if audio.sample_rate() != config.sample_rate {
        return Err(Error::SampleRate { expected: config.sample_rate, actual: audio.sample_rate() });
    }
    if !config.n_fft.is_power_of_two() || config.n_fft < 16 || config.n_mels == 0 || !(config.hop_seconds > 0.0) {
        return Err(Error::InvalidConfig(alloc::format!(
            "n_fft {} must be a power of two >= 16, n_mels positive, hop positive",
            config.n_fft
        )));
    }
    let fmax = config.fmax.unwrap_or(config.sample_rate as f64 / 2.0);
    let bank = mel_filterbank(config.sample_rate, config.n_fft, config.n_mels, config.fmin, fmax);
    let short_input = audio.len() < config.n_fft;
    let frames = if short_input { 1 } else { frame_count(audio.len(), audio.sample_rate(), config.hop_seconds) };
    let support: Vec<(usize, usize)> = bank
        .iter()
        .map(|filt| {
            let lo = filt.iter().position(|&w| w != 0.0).unwrap_or(0);
            let hi = filt.iter().rposition(|&w| w != 0.0).map_or(lo, |h| h + 1);
            (lo, hi)
        })
        .collect();
    let mut values = Vec::with_capacity(frames * config.n_mels);
    for_each_magnitude_frame(audio.samples(), audio.sample_rate(), config.n_fft, config.hop_seconds, frames, |_, mags| {
        for (filt, &(lo, hi)) in bank.iter().zip(&support) {
            let e: f64 = filt[lo..hi].iter().zip(&mags[lo..hi]).map(|(w, m)| w * m).sum();
            values.push(Float::ln(e.max(LOG_FLOOR)) as f32);
        }
    });
    let features = FeatureMatrix::new(
        FeatureKind::LogMel,
        frames,
        config.n_mels,
        config.hop_seconds,
        config.sample_rate,
        values,
    )?;
    Ok(LogMel { features, short_input })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::PI;

    fn sine(freq: f64, secs: f64, rate: u32, amp: f64) -> AudioBuffer {
        let n = (secs * rate as f64) as usize;
        AudioBuffer::new((0..n).map(|i| (amp * (2.0 * PI * freq * i as f64 / rate as f64).sin()) as f32).collect(), rate)
            .unwrap()
    }

    #[test]
    fn mel_scale_round_trips() {
        for hz in [0.0, 440.0, 1000.0, 5000.0, 22050.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-6);
        }
        assert!((hz_to_mel(1000.0) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn silence_is_log_floor() {
        let out = log_mel(&AudioBuffer::silence(44100, 44100).unwrap(), &LogMelConfig::default()).unwrap();
        let floor = (1e-10f64).ln() as f32;
        assert!(out.features.values.iter().all(|&v| v == floor));
        assert!(!out.short_input);
    }

    #[test]
    fn ten_seconds_frame_count() {
        let out = log_mel(&AudioBuffer::silence(441_000, 44100).unwrap(), &LogMelConfig::default()).unwrap();
        let expected = 10.0f64 / 0.0058;
        assert!((out.features.rows as f64 - expected).abs() <= 1.0 + 1e-9, "{}", out.features.rows);
    }

    #[test]
    fn one_khz_peaks_at_nearest_center() {
        let cfg = LogMelConfig::default();
        let centers = mel_centers(cfg.n_mels, 0.0, 22050.0);
        let nearest = (0..centers.len())
            .min_by(|&a, &b| (centers[a] - 1000.0).abs().total_cmp(&(centers[b] - 1000.0).abs()))
            .unwrap();
        let out = log_mel(&sine(1000.0, 1.0, 44100, 1.0), &cfg).unwrap().features;
        // interior frames only; the edges see the zero padding
        for t in 10..out.rows - 10 {
            let row = out.row(t);
            let argmax = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert_eq!(argmax, nearest, "frame {t}");
        }
    }

    #[test]
    fn short_input_gives_one_frame() {
        let out = log_mel(&AudioBuffer::new(vec![0.1; 100], 44100).unwrap(), &LogMelConfig::default()).unwrap();
        assert!(out.short_input);
        assert_eq!(out.features.rows, 1);
    }

    #[test]
    fn wrong_rate_rejected() {
        let err = log_mel(&AudioBuffer::silence(4800, 48000).unwrap(), &LogMelConfig::default()).unwrap_err();
        assert_eq!(err, Error::SampleRate { expected: 44100, actual: 48000 });
    }

    #[test]
    fn trailing_silence_keeps_frames() {
        let a = sine(523.0, 0.5, 44100, 0.3);
        let mut padded = a.samples().to_vec();
        padded.extend(core::iter::repeat_n(0.0, 30_000));
        let b = AudioBuffer::new(padded, 44100).unwrap();
        let cfg = LogMelConfig::default();
        let fa = log_mel(&a, &cfg).unwrap().features;
        let fb = log_mel(&b, &cfg).unwrap().features;
        assert!(fb.rows > fa.rows);
        assert_eq!(&fb.values[..fa.values.len()], &fa.values[..]);
    }
}
