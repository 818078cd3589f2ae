//! Fundamental frequency tracks: a YIN tracker, ingestion of external tracks,
//! and the alignment quality score built on them.

use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::AlignedNote;
use crate::dsp::fft::Fft;
use crate::dsp::stft::{frame_center, frame_count};
use crate::dsp::{resample, AudioBuffer};
use crate::error::{Error, Result};

pub const F0_HOP_SECONDS: f64 = 0.01;
pub const F0_MIN_HZ: f64 = 50.0;
pub const F0_MAX_HZ: f64 = 1500.0;
pub const YIN_THRESHOLD: f64 = 0.15;
const YIN_RATE: u32 = 16_000;
/// Integration window: two periods of the lowest frequency.
const YIN_WINDOW: usize = 640;
const YIN_FFT: usize = 1024;

/// Per-frame f0 in Hz (0 = unvoiced) and confidence in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F0Track {
    pub hop_seconds: f64,
    pub f0: Vec<f64>,
    pub confidence: Vec<f64>,
}

impl F0Track {
    pub fn len(&self) -> usize {
        self.f0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.hop_seconds
    }

    pub fn voiced_frames(&self) -> usize {
        self.f0.iter().filter(|&&f| f > 0.0).count()
    }
}

pub fn midi_to_hz(pitch: f64) -> f64 {
    440.0 * Float::powf(2.0, (pitch - 69.0) / 12.0)
}

/// YIN f0 tracker with a 10 ms hop and absolute threshold 0.15.
///
/// The audio is resampled to 16 kHz. Frames whose cumulative mean normalized
/// difference never drops below the threshold are unvoiced; their confidence
/// is `1 - min(d')`. Voiced frames report `1 - d'(tau)` at the chosen lag.
pub fn extract_f0(audio: &AudioBuffer) -> Result<F0Track> {
    let audio = resample(audio, YIN_RATE)?;
    let x = audio.samples();
    let frames = if x.is_empty() { 0 } else { frame_count(x.len(), YIN_RATE, F0_HOP_SECONDS) };
    let tau_min = (YIN_RATE as f64 / F0_MAX_HZ).floor() as usize;
    let tau_max = (YIN_RATE as f64 / F0_MIN_HZ).ceil() as usize;
    let fft = Fft::new(YIN_FFT);
    let span = YIN_WINDOW + tau_max;
    let mut seg = alloc::vec![0.0f64; span];
    let (mut ar, mut ai) = (alloc::vec![0.0; YIN_FFT], alloc::vec![0.0; YIN_FFT]);
    let (mut br, mut bi) = (alloc::vec![0.0; YIN_FFT], alloc::vec![0.0; YIN_FFT]);
    let mut diff = alloc::vec![0.0f64; tau_max + 2];
    let mut cmnd = alloc::vec![1.0f64; tau_max + 2];
    let mut f0 = Vec::with_capacity(frames);
    let mut confidence = Vec::with_capacity(frames);
    for t in 0..frames {
        let start = frame_center(t, YIN_RATE, F0_HOP_SECONDS) - (YIN_WINDOW / 2) as i64;
        for (k, s) in seg.iter_mut().enumerate() {
            let idx = start + k as i64;
            *s = if idx >= 0 && (idx as usize) < x.len() { x[idx as usize] as f64 } else { 0.0 };
        }
        cross_correlation(&fft, &seg, &mut ar, &mut ai, &mut br, &mut bi);
        // d(tau) = sum_j (x_j - x_{j+tau})^2 over the window
        let mut energy = seg[..YIN_WINDOW].iter().map(|v| v * v).sum::<f64>();
        let e0 = energy;
        for (tau, d) in diff.iter_mut().enumerate().take(tau_max + 1) {
            if tau > 0 {
                energy += seg[YIN_WINDOW + tau - 1].powi(2) - seg[tau - 1].powi(2);
            }
            *d = (e0 + energy - 2.0 * ar[tau] / YIN_FFT as f64).max(0.0);
        }
        cmnd[0] = 1.0;
        let mut running = 0.0;
        for tau in 1..=tau_max {
            running += diff[tau];
            cmnd[tau] = if running > 0.0 { diff[tau] * tau as f64 / running } else { 1.0 };
        }
        let (freq, conf) = pick_lag(&cmnd[..=tau_max], tau_min, tau_max);
        f0.push(freq);
        confidence.push(conf);
    }
    Ok(F0Track { hop_seconds: F0_HOP_SECONDS, f0, confidence })
}

/// Writes `sum_j a_j b_{j+tau}` into `ar[tau]` (times the FFT size), where `a`
/// is the first window of `seg` and `b` the whole segment.
fn cross_correlation(fft: &Fft, seg: &[f64], ar: &mut [f64], ai: &mut [f64], br: &mut [f64], bi: &mut [f64]) {
    ar.iter_mut().for_each(|v| *v = 0.0);
    ai.iter_mut().for_each(|v| *v = 0.0);
    br.iter_mut().for_each(|v| *v = 0.0);
    bi.iter_mut().for_each(|v| *v = 0.0);
    ar[..YIN_WINDOW].copy_from_slice(&seg[..YIN_WINDOW]);
    br[..seg.len()].copy_from_slice(seg);
    fft.forward(ar, ai);
    fft.forward(br, bi);
    // conj(A) * B, then inverse via conjugated forward transform
    for k in 0..ar.len() {
        let (xr, xi) = (ar[k], -ai[k]);
        let re = xr * br[k] - xi * bi[k];
        let im = xr * bi[k] + xi * br[k];
        ar[k] = re;
        ai[k] = -im;
    }
    fft.forward(ar, ai);
}

fn pick_lag(cmnd: &[f64], tau_min: usize, tau_max: usize) -> (f64, f64) {
    let mut tau = tau_min;
    while tau <= tau_max {
        if cmnd[tau] < YIN_THRESHOLD {
            while tau < tau_max && cmnd[tau + 1] < cmnd[tau] {
                tau += 1;
            }
            let shift = if tau > tau_min && tau < tau_max {
                let (a, b, c) = (cmnd[tau - 1], cmnd[tau], cmnd[tau + 1]);
                let den = a - 2.0 * b + c;
                if den.abs() > 1e-12 {
                    (0.5 * (a - c) / den).clamp(-1.0, 1.0)
                } else {
                    0.0
                }
            } else {
                0.0
            };
            let freq = YIN_RATE as f64 / (tau as f64 + shift);
            let conf = (1.0 - cmnd[tau]).clamp(0.0, 1.0);
            if (F0_MIN_HZ..=F0_MAX_HZ).contains(&freq) {
                return (freq, conf);
            }
            return (0.0, conf);
        }
        tau += 1;
    }
    let min = cmnd[tau_min..=tau_max].iter().copied().fold(f64::INFINITY, f64::min);
    (0.0, (1.0 - min).clamp(0.0, 1.0))
}

/// Resamples externally computed `(time, frequency, confidence)` rows onto a
/// 10 ms grid starting at 0 s by nearest neighbour (earlier row on ties).
///
/// Frequencies outside 50..1500 Hz become unvoiced.
pub fn ingest_f0_csv(rows: &[(f64, f64, f64)]) -> Result<F0Track> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("f0 rows"));
    }
    for (i, r) in rows.iter().enumerate() {
        if !r.0.is_finite() || !r.1.is_finite() || !r.2.is_finite() {
            return Err(Error::InvalidConfig(alloc::format!("non-finite value in f0 row {i}")));
        }
        if r.1 < 0.0 {
            return Err(Error::NegativeFrequency { row: i, freq: r.1 });
        }
        if i > 0 && r.0 < rows[i - 1].0 {
            return Err(Error::UnsortedRows(i));
        }
    }
    let last = rows[rows.len() - 1].0.max(0.0);
    let n = Float::floor(last / F0_HOP_SECONDS + 1e-9) as usize + 1;
    let mut f0 = Vec::with_capacity(n);
    let mut confidence = Vec::with_capacity(n);
    let mut k = 0;
    for t in 0..n {
        let time = t as f64 * F0_HOP_SECONDS;
        while k + 1 < rows.len() && (rows[k + 1].0 - time).abs() < (rows[k].0 - time).abs() {
            k += 1;
        }
        let (_, freq, conf) = rows[k];
        f0.push(if (F0_MIN_HZ..=F0_MAX_HZ).contains(&freq) { freq } else { 0.0 });
        confidence.push(conf.clamp(0.0, 1.0));
    }
    Ok(F0Track { hop_seconds: F0_HOP_SECONDS, f0, confidence })
}

/// Distance in cents between two frequencies, folded to one octave (0..=600).
pub fn octave_folded_cents(a: f64, b: f64) -> f64 {
    let cents = 1200.0 * Float::log2(a / b);
    let d = num_traits::Euclid::rem_euclid(&cents, &1200.0);
    d.min(1200.0 - d)
}

/// Fraction of voiced f0 frames inside aligned notes whose pitch lies within
/// 100 cents (modulo octaves) of the note's equal-tempered frequency.
///
/// Where notes overlap, the later-onset note is used.
pub fn validate_alignment(aligned: &[AlignedNote], f0: &F0Track) -> Result<f64> {
    if aligned.is_empty() {
        return Err(Error::EmptyInput("aligned notes"));
    }
    if f0.is_empty() {
        return Err(Error::EmptyInput("f0 track"));
    }
    let mut order: Vec<&AlignedNote> = aligned.iter().collect();
    order.sort_by(|a, b| a.onset_seconds.total_cmp(&b.onset_seconds));
    let (mut inside, mut good) = (0usize, 0usize);
    for (i, &freq) in f0.f0.iter().enumerate() {
        if freq <= 0.0 {
            continue;
        }
        let t = f0.time(i);
        let end = order.partition_point(|n| n.onset_seconds <= t);
        if let Some(note) = order[..end].iter().rev().find(|n| t < n.offset_seconds) {
            inside += 1;
            if octave_folded_cents(freq, midi_to_hz(note.pitch as f64)) <= 100.0 {
                good += 1;
            }
        }
    }
    if inside == 0 {
        return Err(Error::UndefinedScore);
    }
    Ok(good as f64 / inside as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::PI;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sine(freq: f64, secs: f64, rate: u32) -> AudioBuffer {
        let n = (secs * rate as f64) as usize;
        AudioBuffer::new((0..n).map(|i| (0.5 * (2.0 * PI * freq * i as f64 / rate as f64).sin()) as f32).collect(), rate)
            .unwrap()
    }

    fn an(pitch: i32, on: f64, off: f64) -> AlignedNote {
        AlignedNote { note_id: 0, pitch, onset_seconds: on, offset_seconds: off }
    }

    #[test]
    fn sine_220() {
        let track = extract_f0(&sine(220.0, 1.0, 44100)).unwrap();
        assert_eq!(track.len(), 101);
        let voiced: Vec<f64> = track.f0.iter().copied().filter(|&f| f > 0.0).collect();
        assert!(voiced.len() >= 90);
        assert!(voiced.iter().all(|f| (f - 220.0).abs() <= 3.0), "{voiced:?}");
    }

    #[test]
    fn sine_range() {
        for freq in [80.0, 440.0, 1000.0] {
            let track = extract_f0(&sine(freq, 0.5, 16000)).unwrap();
            let mid = track.f0[25];
            assert!((mid - freq).abs() / freq < 0.01, "{freq}: {mid}");
        }
    }

    #[test]
    fn noise_mostly_unvoiced() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<f32> = (0..16000).map(|_| rng.random_range(-0.5f32..0.5)).collect();
        let track = extract_f0(&AudioBuffer::new(samples, 16000).unwrap()).unwrap();
        assert!(track.voiced_frames() * 10 <= track.len(), "{} voiced", track.voiced_frames());
    }

    #[test]
    fn silence_unvoiced() {
        let track = extract_f0(&AudioBuffer::silence(8000, 16000).unwrap()).unwrap();
        assert_eq!(track.voiced_frames(), 0);
        assert!(track.confidence.iter().all(|c| (0.0..=1.0).contains(c)));
    }

    #[test]
    fn ingest_identity_and_decimation() {
        let rows: Vec<(f64, f64, f64)> = (0..50).map(|i| (i as f64 * 0.01, 100.0 + i as f64, 0.9)).collect();
        let t = ingest_f0_csv(&rows).unwrap();
        assert_eq!(t.f0, rows.iter().map(|r| r.1).collect::<Vec<_>>());
        let rows: Vec<(f64, f64, f64)> = (0..100).map(|i| (i as f64 * 0.005, 100.0 + i as f64, 0.9)).collect();
        let t = ingest_f0_csv(&rows).unwrap();
        assert_eq!(t.f0, rows.iter().step_by(2).map(|r| r.1).collect::<Vec<_>>());
    }

    #[test]
    fn ingest_jittered_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut time = 0.0;
        let rows: Vec<(f64, f64, f64)> = (0..300)
            .map(|i| {
                time += rng.random_range(0.002..0.02);
                (time, 60.0 + i as f64, 0.5)
            })
            .collect();
        let t = ingest_f0_csv(&rows).unwrap();
        for (g, &f) in t.f0.iter().enumerate() {
            let gt = g as f64 * 0.01;
            let mut best = 0;
            for (k, r) in rows.iter().enumerate() {
                if (r.0 - gt).abs() < (rows[best].0 - gt).abs() {
                    best = k;
                }
            }
            assert_eq!(f, rows[best].1);
        }
    }

    #[test]
    fn ingest_errors() {
        assert_eq!(ingest_f0_csv(&[(0.0, 100.0, 1.0), (0.1, -1.0, 1.0)]), Err(Error::NegativeFrequency { row: 1, freq: -1.0 }));
        assert_eq!(ingest_f0_csv(&[(0.1, 100.0, 1.0), (0.0, 100.0, 1.0)]), Err(Error::UnsortedRows(1)));
    }

    fn track(freqs: Vec<f64>) -> F0Track {
        let n = freqs.len();
        F0Track { hop_seconds: 0.01, f0: freqs, confidence: vec![1.0; n] }
    }

    #[test]
    fn validation_scores() {
        let notes = [an(69, 0.0, 0.5), an(72, 0.5, 1.0)];
        let exact: Vec<f64> = (0..100).map(|i| if i < 50 { 440.0 } else { midi_to_hz(72.0) }).collect();
        assert_eq!(validate_alignment(&notes, &track(exact.clone())).unwrap(), 1.0);
        let shifted: Vec<f64> = exact.iter().map(|f| f * 2f64.powf(3.0 / 12.0)).collect();
        assert_eq!(validate_alignment(&notes, &track(shifted.clone())).unwrap(), 0.0);
        let half: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { exact[i] } else { shifted[i] }).collect();
        assert!((validate_alignment(&notes, &track(half)).unwrap() - 0.5).abs() <= 0.01);
        let octave: Vec<f64> = exact.iter().map(|f| f * 2.0).collect();
        assert_eq!(validate_alignment(&notes, &track(octave)).unwrap(), 1.0);
        assert_eq!(validate_alignment(&notes, &track(vec![0.0; 100])), Err(Error::UndefinedScore));
        assert_eq!(validate_alignment(&[an(69, 5.0, 6.0)], &track(vec![440.0; 100])), Err(Error::UndefinedScore));
    }
}
