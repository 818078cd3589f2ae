//! Score-to-audio synchronization.
//!
//! Both the score (all parts, constant tempo) and the audio are reduced to
//! chroma on a shared grid, matched by DTW, and vocal note boundaries are
//! carried through the warping path.

use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::dsp::AudioBuffer;
use crate::error::{Error, Result};
use crate::score::ScoreDocument;

pub mod chroma;
pub mod dtw;
pub mod f0;

pub use chroma::{audio_to_chroma, chroma_cost, score_to_chroma, ChromaMatrix, ChromaOrigin};
pub use dtw::{dtw, dtw_banded, CostMatrix, WarpingPath};
pub use f0::{extract_f0, ingest_f0_csv, midi_to_hz, validate_alignment, F0Track};

pub const DEFAULT_GRID_SECONDS: f64 = 0.05;
pub const DEFAULT_TEMPO_QPM: f64 = 120.0;

/// A vocal note with performance times. `note_id` indexes the vocal part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedNote {
    pub note_id: usize,
    pub pitch: i32,
    pub onset_seconds: f64,
    pub offset_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignConfig {
    pub grid_seconds: f64,
    /// Optional Sakoe-Chiba style band, in grid frames.
    pub band: Option<usize>,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig { grid_seconds: DEFAULT_GRID_SECONDS, band: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub notes: Vec<AlignedNote>,
    pub path: WarpingPath,
}

pub fn chroma_cost_matrix(score: &ChromaMatrix, audio: &ChromaMatrix) -> Result<CostMatrix> {
    CostMatrix::from_fn(score.len(), audio.len(), |i, j| chroma_cost(&score.frames[i], &audio.frames[j]))
}

/// Maps score-grid positions (in frames, fractional) to audio seconds through
/// a warping path.
#[derive(Debug, Clone)]
pub struct PathMap {
    /// First audio frame matched to each score frame, plus one sentinel for
    /// the end of the score.
    first: Vec<f64>,
    grid_seconds: f64,
}

impl PathMap {
    pub fn new(path: &WarpingPath, score_frames: usize, audio_frames: usize, grid_seconds: f64) -> Self {
        let mut first = alloc::vec![f64::NAN; score_frames + 1];
        for &(i, j) in &path.pairs {
            if first[i].is_nan() {
                first[i] = j as f64;
            }
        }
        // Score frames skipped by a (2,1) step take the midpoint of their neighbours.
        for i in 1..score_frames {
            if first[i].is_nan() {
                first[i] = 0.5 * (first[i - 1] + first[i + 1]);
            }
        }
        first[score_frames] = audio_frames as f64;
        PathMap { first, grid_seconds }
    }

    pub fn seconds(&self, score_seconds: f64) -> f64 {
        let last = self.first.len() - 1;
        let x = (score_seconds / self.grid_seconds).clamp(0.0, last as f64);
        let i = (Float::floor(x) as usize).min(last - 1);
        let frac = x - i as f64;
        (self.first[i] + frac * (self.first[i + 1] - self.first[i])) * self.grid_seconds
    }
}

/// Aligns every vocal note of `score` to `audio`.
pub fn align_score_to_audio(score: &ScoreDocument, audio: &AudioBuffer, config: &AlignConfig) -> Result<Alignment> {
    let vocal = score.vocal_notes();
    if vocal.is_empty() {
        return Err(Error::EmptyVocalPart);
    }
    if audio.is_empty() {
        return Err(Error::EmptyInput("audio"));
    }
    let sc = score_to_chroma(score, config.grid_seconds)?;
    let ac = audio_to_chroma(audio, config.grid_seconds)?;
    let cost = chroma_cost_matrix(&sc, &ac)?;
    let path = dtw_banded(&cost, config.band)?;
    let map = PathMap::new(&path, sc.len(), ac.len(), config.grid_seconds);
    let spq = chroma::seconds_per_quarter(score);
    let min_len = 1e-3;
    let notes: Vec<AlignedNote> = vocal
        .iter()
        .enumerate()
        .map(|(note_id, n)| {
            let onset = map.seconds(n.onset * spq);
            let offset = map.seconds(n.offset() * spq).max(onset + min_len);
            AlignedNote { note_id, pitch: n.pitch, onset_seconds: onset, offset_seconds: offset }
        })
        .collect();
    debug_assert!(notes.windows(2).all(|w| w[0].onset_seconds <= w[1].onset_seconds));
    Ok(Alignment { notes, path })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn path_map_identity() {
        let path = WarpingPath { pairs: (0..10).map(|i| (i, i)).collect(), total_cost: 0.0 };
        let m = PathMap::new(&path, 10, 10, 0.05);
        assert!((m.seconds(0.0)).abs() < 1e-12);
        assert!((m.seconds(0.125) - 0.125).abs() < 1e-12);
        assert!((m.seconds(0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn path_map_stretch() {
        // score frame i -> audio frame 2i
        let mut pairs = vec![];
        for i in 0..10 {
            pairs.push((i, 2 * i));
            if i < 9 {
                pairs.push((i, 2 * i + 1));
            }
        }
        let path = WarpingPath { pairs, total_cost: 0.0 };
        let m = PathMap::new(&path, 10, 19, 0.05);
        assert!((m.seconds(0.2) - 0.4).abs() < 1e-12);
        assert!((m.seconds(0.225) - 0.45).abs() < 1e-12);
    }
}
