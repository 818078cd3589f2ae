//! Frame-wise 10-class targets from aligned, labeled notes.

use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::align::AlignedNote;
use crate::dsp::FeatureMatrix;
use crate::error::{Error, Result};
use crate::score::{DynamicCategory, NoteDynamicLabel, WedgeRegion};

pub const NUM_CLASSES: usize = 10;
/// Class value of frames excluded from loss and metrics.
pub const MASKED: u8 = 255;
const HOP_TOLERANCE: f64 = 1e-9;

/// pppp -> 0, ..., ffff -> 9.
pub fn category_to_class(category: DynamicCategory) -> Result<u8> {
    DynamicCategory::ABSOLUTE
        .iter()
        .position(|&c| c == category)
        .map(|i| i as u8)
        .ok_or(Error::UnresolvedCategory(category.as_str()))
}

pub fn class_to_category(class: u8) -> Option<DynamicCategory> {
    DynamicCategory::ABSOLUTE.get(class as usize).copied()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLabelSequence {
    /// Class per frame, or [`MASKED`].
    pub classes: Vec<u8>,
    pub hop_seconds: f64,
}

impl FrameLabelSequence {
    pub fn masked(frames: usize, hop_seconds: f64) -> Self {
        FrameLabelSequence { classes: alloc::vec![MASKED; frames], hop_seconds }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn is_labeled(&self, t: usize) -> bool {
        self.classes[t] != MASKED
    }

    pub fn labeled_count(&self) -> usize {
        self.classes.iter().filter(|&&c| c != MASKED).count()
    }

    pub fn mask(&self) -> Vec<bool> {
        self.classes.iter().map(|&c| c != MASKED).collect()
    }

    /// Fails unless `hop_seconds` matches this sequence's hop.
    pub fn check_hop(&self, hop_seconds: f64) -> Result<()> {
        if Float::abs(self.hop_seconds - hop_seconds) > HOP_TOLERANCE {
            return Err(Error::HopMismatch { label_hop: self.hop_seconds, feature_hop: hop_seconds });
        }
        Ok(())
    }

    /// Fails unless hop and frame count match the features.
    pub fn check_features(&self, features: &FeatureMatrix) -> Result<()> {
        self.check_hop(features.hop_seconds)?;
        if self.len() != features.rows {
            return Err(Error::LengthMismatch(self.len(), features.rows));
        }
        Ok(())
    }
}

/// Half-open range of frame indices whose center `t * hop` lies in `[start, end)`.
pub fn frames_in(start: f64, end: f64, hop_seconds: f64, total_frames: usize) -> core::ops::Range<usize> {
    let first = Float::ceil(start / hop_seconds - 1e-9).max(0.0) as usize;
    let last = (Float::ceil(end / hop_seconds - 1e-9).max(0.0) as usize).min(total_frames);
    first.min(last)..last
}

/// Order in which notes are painted: by onset, so later onsets win overlaps.
fn paint_order(aligned: &[AlignedNote]) -> Vec<&AlignedNote> {
    let mut notes: Vec<&AlignedNote> = aligned.iter().collect();
    notes.sort_by(|a, b| a.onset_seconds.total_cmp(&b.onset_seconds));
    notes
}

/// Frame targets: frames whose center lies in a note's `[onset, offset)` get the
/// note's class. Frames outside notes, and frames of notes labeled sf or left
/// without a label, are masked.
pub fn frames_from_alignment(
    aligned: &[AlignedNote],
    labels: &[NoteDynamicLabel],
    hop_seconds: f64,
    total_frames: usize,
) -> Result<FrameLabelSequence> {
    if !(hop_seconds > 0.0) {
        return Err(Error::InvalidConfig(alloc::format!("hop {hop_seconds} must be positive")));
    }
    let mut out = FrameLabelSequence::masked(total_frames, hop_seconds);
    for note in paint_order(aligned) {
        let class = match labels.iter().find(|l| l.note_id == note.note_id) {
            Some(l) if l.category.is_absolute() => category_to_class(l.category)?,
            _ => MASKED,
        };
        for t in frames_in(note.onset_seconds, note.offset_seconds, hop_seconds, total_frames) {
            out.classes[t] = class;
        }
    }
    Ok(out)
}

/// As [`frames_from_alignment`], sized to a feature matrix. Fails when
/// `expected_hop` (the hop the caller intends to train at) differs from the
/// features' hop.
pub fn frames_for_features(
    aligned: &[AlignedNote],
    labels: &[NoteDynamicLabel],
    features: &FeatureMatrix,
    expected_hop: f64,
) -> Result<FrameLabelSequence> {
    if Float::abs(features.hop_seconds - expected_hop) > HOP_TOLERANCE {
        return Err(Error::HopMismatch { label_hop: expected_hop, feature_hop: features.hop_seconds });
    }
    frames_from_alignment(aligned, labels, features.hop_seconds, features.rows)
}

/// Wedge region flag per frame, painted with the same rule as the classes.
pub fn frame_wedge_regions(
    aligned: &[AlignedNote],
    labels: &[NoteDynamicLabel],
    hop_seconds: f64,
    total_frames: usize,
) -> Vec<Option<WedgeRegion>> {
    let mut out = alloc::vec![None; total_frames];
    for note in paint_order(aligned) {
        let region = labels.iter().find(|l| l.note_id == note.note_id).and_then(|l| l.region);
        for t in frames_in(note.onset_seconds, note.offset_seconds, hop_seconds, total_frames) {
            out[t] = region;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use DynamicCategory as D;

    fn an(id: usize, on: f64, off: f64) -> AlignedNote {
        AlignedNote { note_id: id, pitch: 60, onset_seconds: on, offset_seconds: off }
    }

    fn lab(id: usize, c: DynamicCategory) -> NoteDynamicLabel {
        NoteDynamicLabel { note_id: id, category: c, region: None }
    }

    #[test]
    fn class_mapping() {
        assert_eq!(category_to_class(D::Pppp), Ok(0));
        assert_eq!(category_to_class(D::Ffff), Ok(9));
        assert_eq!(category_to_class(D::Mf), Ok(5));
        for (i, &c) in DynamicCategory::ABSOLUTE.iter().enumerate() {
            assert_eq!(category_to_class(c), Ok(i as u8));
            assert_eq!(class_to_category(i as u8), Some(c));
        }
        assert_eq!(category_to_class(D::Sf), Err(Error::UnresolvedCategory("sf")));
        assert!(category_to_class(D::Crescendo).is_err());
        assert!(category_to_class(D::Diminuendo).is_err());
        assert_eq!(class_to_category(10), None);
    }

    #[test]
    fn single_note() {
        let f = frames_from_alignment(&[an(0, 0.0, 1.0)], &[lab(0, D::P)], 0.1, 15).unwrap();
        assert_eq!(f.classes[..10], [3; 10]);
        assert_eq!(f.classes[10..], [MASKED; 5]);
    }

    #[test]
    fn no_notes() {
        let f = frames_from_alignment(&[], &[], 0.1, 7).unwrap();
        assert_eq!(f.labeled_count(), 0);
    }

    #[test]
    fn abutting_notes() {
        let f = frames_from_alignment(&[an(0, 0.0, 0.5), an(1, 0.5, 1.0)], &[lab(0, D::P), lab(1, D::F)], 0.1, 10)
            .unwrap();
        assert_eq!(f.classes, vec![3, 3, 3, 3, 3, 6, 6, 6, 6, 6]);
    }

    #[test]
    fn later_onset_wins_and_sf_masked() {
        let f = frames_from_alignment(&[an(1, 0.3, 0.6), an(0, 0.0, 0.5)], &[lab(0, D::P), lab(1, D::F)], 0.1, 8)
            .unwrap();
        assert_eq!(f.classes, vec![3, 3, 3, 6, 6, 6, MASKED, MASKED]);
        let f = frames_from_alignment(&[an(0, 0.0, 0.3)], &[lab(0, D::Sf)], 0.1, 4).unwrap();
        assert_eq!(f.labeled_count(), 0);
    }

    #[test]
    fn hop_checks() {
        let m = crate::dsp::FeatureMatrix::new(crate::dsp::FeatureKind::LogMel, 3, 1, 0.0174, 44100, vec![0.0; 3])
            .unwrap();
        assert!(frames_for_features(&[], &[], &m, 0.0174).is_ok());
        assert_eq!(
            frames_for_features(&[], &[], &m, 0.016),
            Err(Error::HopMismatch { label_hop: 0.016, feature_hop: 0.0174 })
        );
        let l = FrameLabelSequence::masked(3, 0.02);
        assert!(l.check_features(&m).is_err());
    }
}
