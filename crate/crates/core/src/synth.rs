//! Additive renditions of scores with known dynamics.
//!
//! The vocal line is a harmonic tone whose level follows the propagated
//! dynamics; piano parts are decaying harmonic tones at a fixed level. Used
//! to build synthetic performances whose timing and dynamics are known.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;

use crate::align::{midi_to_hz, AlignedNote};
use crate::dsp::AudioBuffer;
use crate::error::{Error, Result};
use crate::labeling::category_to_class;
use crate::score::{propagate, DynamicCategory, NoteEvent, PartId, ScoreDocument};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub sample_rate: u32,
    /// Overrides the score's tempo hint.
    pub tempo_qpm: Option<f64>,
    /// Level of `ffff` in dB relative to full scale.
    pub top_level_db: f64,
    /// Level step between adjacent dynamics classes in dB.
    pub class_step_db: f64,
    pub piano_level_db: f64,
    pub vocal_harmonics: usize,
    pub piano_harmonics: usize,
    pub include_piano: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sample_rate: 48_000,
            tempo_qpm: None,
            top_level_db: -6.0,
            class_step_db: 6.0,
            piano_level_db: -30.0,
            vocal_harmonics: 6,
            piano_harmonics: 4,
            include_piano: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendition {
    /// Voice and piano.
    pub mix: AudioBuffer,
    /// Voice only.
    pub stem: AudioBuffer,
    /// Ground-truth timing of each vocal note.
    pub notes: Vec<AlignedNote>,
}

const RAMP_SECONDS: f64 = 0.01;

impl SynthConfig {
    pub fn level_db(&self, category: DynamicCategory) -> f64 {
        let class = category_to_class(category).unwrap_or(5);
        self.top_level_db - self.class_step_db * (9 - class) as f64
    }

    fn seconds_per_quarter(&self, score: &ScoreDocument) -> f64 {
        60.0 / self.tempo_qpm.or(score.tempo_hint).unwrap_or(crate::align::DEFAULT_TEMPO_QPM)
    }
}

fn db_to_amp(db: f64) -> f64 {
    Float::powf(10.0, db / 20.0)
}

fn add_tone(out: &mut [f64], rate: f64, start: f64, end: f64, freq: f64, amp: f64, harmonics: usize, decay: f64) {
    let first = Float::ceil(start * rate) as usize;
    let last = (Float::ceil(end * rate) as usize).min(out.len());
    let norm: f64 = (1..=harmonics).map(|k| 1.0 / k as f64).sum();
    for (n, o) in out.iter_mut().enumerate().take(last).skip(first) {
        let t = n as f64 / rate;
        let local = t - start;
        let ramp = (local / RAMP_SECONDS).min((end - t) / RAMP_SECONDS).clamp(0.0, 1.0);
        let env = ramp * if decay > 0.0 { Float::exp(-local / decay) } else { 1.0 };
        let mut v = 0.0;
        for k in 1..=harmonics {
            let f = freq * k as f64;
            if f >= rate / 2.0 {
                break;
            }
            v += Float::sin(2.0 * PI * f * local) / k as f64;
        }
        *o += amp * env * v / norm;
    }
}

/// Renders `score`, vocal levels following its propagated dynamics (sf notes
/// 6 dB above the held level, unlabeled notes at mf).
pub fn render(score: &ScoreDocument, config: &SynthConfig) -> Result<Rendition> {
    if config.sample_rate == 0 {
        return Err(Error::NonPositiveRate);
    }
    let vocal = score.vocal_notes();
    if vocal.is_empty() {
        return Err(Error::EmptyVocalPart);
    }
    let spq = config.seconds_per_quarter(score);
    let rate = config.sample_rate as f64;
    let total = Float::ceil((score.end_offset() * spq + 0.25) * rate) as usize;
    let mut stem = alloc::vec![0.0f64; total];
    let mut mix = alloc::vec![0.0f64; total];

    let labels = propagate(score)?.labels;
    let mut level = alloc::vec![config.level_db(DynamicCategory::Mf); vocal.len()];
    let mut held = config.level_db(DynamicCategory::Mf);
    for l in &labels {
        if l.category == DynamicCategory::Sf {
            level[l.note_id] = held + 6.0;
        } else {
            held = config.level_db(l.category);
            level[l.note_id] = held;
        }
    }
    let mut notes = Vec::with_capacity(vocal.len());
    for (i, n) in vocal.iter().enumerate() {
        let (on, off) = (n.onset * spq, n.offset() * spq);
        add_tone(&mut stem, rate, on, off, midi_to_hz(n.pitch as f64), db_to_amp(level[i]), config.vocal_harmonics, 0.0);
        notes.push(AlignedNote { note_id: i, pitch: n.pitch, onset_seconds: on, offset_seconds: off });
    }
    mix.copy_from_slice(&stem);
    if config.include_piano {
        let piano: Vec<&NoteEvent> = score.parts.iter().filter(|p| p.id != PartId::Vocal).flat_map(|p| &p.notes).collect();
        for n in piano {
            let (on, off) = (n.onset * spq, n.offset() * spq);
            add_tone(&mut mix, rate, on, off, midi_to_hz(n.pitch as f64), db_to_amp(config.piano_level_db), config.piano_harmonics, 0.8);
        }
    }
    let to_buffer = |v: Vec<f64>| AudioBuffer::new(v.into_iter().map(|x| x.clamp(-1.0, 1.0) as f32).collect(), config.sample_rate);
    Ok(Rendition { mix: to_buffer(mix)?, stem: to_buffer(stem)?, notes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{DynamicMarking, Part};
    use alloc::vec;

    fn score() -> ScoreDocument {
        let notes = (0..4).map(|i| NoteEvent { pitch: 69, onset: i as f64, duration: 1.0, part_id: PartId::Vocal, measure: 1 }).collect();
        ScoreDocument::new(
            vec![Part { id: PartId::Vocal, notes }],
            vec![
                DynamicMarking::point(DynamicCategory::P, 0.0, PartId::Vocal),
                DynamicMarking::point(DynamicCategory::F, 2.0, PartId::Vocal),
            ],
            Default::default(),
            Some(120.0),
        )
        .unwrap()
    }

    fn rms(x: &[f32]) -> f64 {
        Float::sqrt(x.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / x.len() as f64)
    }

    #[test]
    fn levels_follow_dynamics() {
        let r = render(&score(), &SynthConfig::default()).unwrap();
        let s = r.stem.samples();
        let quiet = rms(&s[4800..19200]);
        let loud = rms(&s[52800..67200]);
        let diff = 20.0 * Float::log10(loud / quiet);
        assert!((diff - 18.0).abs() < 0.5, "{diff}");
        assert_eq!(r.notes[2].onset_seconds, 1.0);
    }

    #[test]
    fn tempo_override_scales_time() {
        let cfg = SynthConfig { tempo_qpm: Some(60.0), ..Default::default() };
        let r = render(&score(), &cfg).unwrap();
        assert_eq!(r.notes[3].offset_seconds, 4.0);
        assert!(r.stem.duration() >= 4.0);
    }
}
