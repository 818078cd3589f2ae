//! Pitch-class profiles of scores and audio on a common time grid.

use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::dsp::stft::for_each_magnitude_frame;
use crate::dsp::{resample, AudioBuffer};
use crate::error::{Error, Result};
use crate::score::ScoreDocument;

pub const CHROMA_RATE: u32 = 22_050;
const CHROMA_FFT: usize = 4096;
const MIN_FREQ: f64 = 55.0;
const MAX_FREQ: f64 = 5000.0;
const SILENCE_ENERGY: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChromaOrigin {
    Score,
    Audio,
}

/// Frames of 12 pitch classes (C = 0), each L2-normalized or all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ChromaMatrix {
    pub frames: Vec<[f64; 12]>,
    pub hop_seconds: f64,
    pub origin: ChromaOrigin,
}

impl ChromaMatrix {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

fn normalize(v: &mut [f64; 12]) {
    let norm = Float::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Number of grid frames covering `duration` seconds.
pub fn grid_frames(duration: f64, grid_seconds: f64) -> usize {
    (Float::ceil(duration / grid_seconds - 1e-9) as usize).max(1)
}

pub fn seconds_per_quarter(score: &ScoreDocument) -> f64 {
    60.0 / score.tempo_hint.unwrap_or(super::DEFAULT_TEMPO_QPM)
}

/// Chroma of all notes in all parts. Frame `t` covers the instant `t * grid`;
/// a note is active there when `onset <= t * grid < offset`.
pub fn score_to_chroma(score: &ScoreDocument, grid_seconds: f64) -> Result<ChromaMatrix> {
    check_grid(grid_seconds)?;
    if score.all_notes().next().is_none() {
        return Err(Error::EmptyScore);
    }
    let spq = seconds_per_quarter(score);
    let n = grid_frames(score.end_offset() * spq, grid_seconds);
    let mut frames = alloc::vec![[0.0f64; 12]; n];
    for note in score.all_notes() {
        let on = note.onset * spq;
        let off = note.offset() * spq;
        let first = Float::ceil(on / grid_seconds - 1e-9).max(0.0) as usize;
        let mut t = first;
        while t < n && (t as f64) * grid_seconds < off - 1e-9 {
            frames[t][note.pitch.rem_euclid(12) as usize] = 1.0;
            t += 1;
        }
    }
    frames.iter_mut().for_each(normalize);
    Ok(ChromaMatrix { frames, hop_seconds: grid_seconds, origin: ChromaOrigin::Score })
}

/// Pitch class of every FFT bin between 55 Hz and 5 kHz (nearest equal-tempered
/// semitone, A4 = 440 Hz), `None` outside that range.
fn bin_classes(rate: u32, n_fft: usize) -> Vec<Option<usize>> {
    (0..=n_fft / 2)
        .map(|k| {
            let f = k as f64 * rate as f64 / n_fft as f64;
            if !(MIN_FREQ..=MAX_FREQ).contains(&f) {
                return None;
            }
            let midi = 69.0 + 12.0 * Float::log2(f / 440.0);
            Some((Float::round(midi) as i64).rem_euclid(12) as usize)
        })
        .collect()
}

/// Chroma of audio at 22.05 kHz: spectral power folded onto pitch classes,
/// compressed with `ln(1 + 10 x)` and L2-normalized.
pub fn audio_to_chroma(audio: &AudioBuffer, grid_seconds: f64) -> Result<ChromaMatrix> {
    check_grid(grid_seconds)?;
    if audio.is_empty() {
        return Err(Error::EmptyInput("audio"));
    }
    let audio = resample(audio, CHROMA_RATE)?;
    let n = grid_frames(audio.duration(), grid_seconds);
    let classes = bin_classes(CHROMA_RATE, CHROMA_FFT);
    // Normalizes a full-scale sine to a peak magnitude of 1/2.
    let scale = 2.0 / CHROMA_FFT as f64;
    let mut frames = Vec::with_capacity(n);
    for_each_magnitude_frame(audio.samples(), CHROMA_RATE, CHROMA_FFT, grid_seconds, n, |_, mags| {
        let mut v = [0.0f64; 12];
        for (m, c) in mags.iter().zip(&classes) {
            if let Some(c) = c {
                let a = m * scale;
                v[*c] += a * a;
            }
        }
        if v.iter().sum::<f64>() < SILENCE_ENERGY {
            frames.push([0.0; 12]);
            return;
        }
        v.iter_mut().for_each(|x| *x = Float::ln_1p(10.0 * *x));
        normalize(&mut v);
        frames.push(v);
    });
    Ok(ChromaMatrix { frames, hop_seconds: grid_seconds, origin: ChromaOrigin::Audio })
}

/// `1 - cos` between two chroma frames; two silent frames cost 0, silence
/// against sound costs 1.
pub fn chroma_cost(a: &[f64; 12], b: &[f64; 12]) -> f64 {
    let za = a.iter().all(|&x| x == 0.0);
    let zb = b.iter().all(|&x| x == 0.0);
    match (za, zb) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        _ => (1.0 - a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()).max(0.0),
    }
}

fn check_grid(grid_seconds: f64) -> Result<()> {
    if grid_seconds > 0.0 && grid_seconds.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(alloc::format!("grid {grid_seconds} must be positive")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{NoteEvent, Part, PartId};
    use alloc::vec;
    use core::f64::consts::PI;

    fn note(pitch: i32, onset: f64, duration: f64) -> NoteEvent {
        NoteEvent { pitch, onset, duration, part_id: PartId::Vocal, measure: 1 }
    }

    fn score(notes: Vec<NoteEvent>) -> ScoreDocument {
        ScoreDocument::new(vec![Part { id: PartId::Vocal, notes }], vec![], Default::default(), Some(120.0)).unwrap()
    }

    fn tones(freqs: &[f64], secs: f64, rate: u32) -> AudioBuffer {
        let n = (secs * rate as f64) as usize;
        let amp = 0.5 / freqs.len() as f64;
        AudioBuffer::new(
            (0..n)
                .map(|i| {
                    let t = i as f64 / rate as f64;
                    freqs.iter().map(|f| amp * (2.0 * PI * f * t).sin()).sum::<f64>() as f32
                })
                .collect(),
            rate,
        )
        .unwrap()
    }

    fn top(v: &[f64; 12], k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..12).collect();
        idx.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).unwrap());
        let mut out = idx[..k].to_vec();
        out.sort();
        out
    }

    #[test]
    fn whole_note_is_pitch_class_zero() {
        let c = score_to_chroma(&score(vec![note(60, 0.0, 4.0)]), 0.05).unwrap();
        assert_eq!(c.len(), 40);
        for f in &c.frames {
            assert_eq!(f[0], 1.0);
            assert_eq!(f.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn chord_has_equal_weights() {
        let c = score_to_chroma(&score(vec![note(60, 0.0, 1.0), note(64, 0.0, 1.0), note(67, 0.0, 1.0)]), 0.05)
            .unwrap();
        let w = 1.0 / 3.0f64.sqrt();
        for f in &c.frames {
            for (pc, &v) in f.iter().enumerate() {
                let want = if [0, 4, 7].contains(&pc) { w } else { 0.0 };
                assert!((v - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn note_boundaries_on_grid() {
        // 120 qpm: a quarter lasts 0.5 s = 10 frames of 50 ms
        let c = score_to_chroma(&score(vec![note(60, 0.0, 1.0), note(62, 1.0, 1.0)]), 0.05).unwrap();
        assert_eq!(c.len(), 20);
        assert!(c.frames[..10].iter().all(|f| f[0] == 1.0 && f[2] == 0.0));
        assert!(c.frames[10..].iter().all(|f| f[2] == 1.0 && f[0] == 0.0));
    }

    #[test]
    fn silence_gives_zero_frames() {
        let c = audio_to_chroma(&AudioBuffer::silence(44100, 44100).unwrap(), 0.05).unwrap();
        assert_eq!(c.len(), 20);
        assert!(c.frames.iter().all(|f| f.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn c4_sine_maps_to_class_zero() {
        let c = audio_to_chroma(&tones(&[261.63], 1.0, 44100), 0.05).unwrap();
        for f in &c.frames[2..18] {
            assert_eq!(top(f, 1), vec![0]);
            assert!((f.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn triad_top_three() {
        let c = audio_to_chroma(&tones(&[261.63, 329.63, 392.0], 1.0, 22050), 0.05).unwrap();
        for f in &c.frames[2..18] {
            assert_eq!(top(f, 3), vec![0, 4, 7]);
        }
    }

    #[test]
    fn cost_rules() {
        let z = [0.0; 12];
        let mut a = [0.0; 12];
        a[3] = 1.0;
        assert_eq!(chroma_cost(&z, &z), 0.0);
        assert_eq!(chroma_cost(&z, &a), 1.0);
        assert_eq!(chroma_cost(&a, &z), 1.0);
        assert_eq!(chroma_cost(&a, &a), 0.0);
    }
}
