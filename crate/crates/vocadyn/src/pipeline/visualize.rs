use serde::{Deserialize, Serialize};
use vocadyn_core::align::{midi_to_hz, AlignedNote};
use vocadyn_core::dsp::AudioBuffer;
use vocadyn_core::score::{propagate, DynamicCategory, NoteDynamicLabel, WedgeRegion};

use super::stages::{load_aligned, load_score};
use super::Workspace;
use crate::audio::read_wav;
use crate::error::{Error, Result};
use crate::formats::read_f0_csv;
use crate::manifest::PerformanceRecord;

pub const DEFAULT_WIDTH: usize = 1200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F0Point {
    pub time: f64,
    pub hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteRect {
    pub note_id: usize,
    pub onset: f64,
    pub offset: f64,
    pub pitch: i32,
    pub hz: f64,
}

/// Min/max sample per bucket; bucket `i` covers
/// `[i * seconds_per_bucket, (i + 1) * seconds_per_bucket)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub seconds_per_bucket: f64,
    pub buckets: Vec<[f32; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsRegion {
    pub start: f64,
    pub end: f64,
    pub category: DynamicCategory,
    pub wedge: Option<WedgeRegion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualizationBundle {
    pub id: String,
    pub duration: f64,
    pub alignment_score: Option<f64>,
    pub f0: Vec<F0Point>,
    pub notes: Vec<NoteRect>,
    pub envelope: Envelope,
    pub regions: Vec<DynamicsRegion>,
}

/// Builds the three-panel review view of an aligned record. The waveform and
/// duration come from the vocal stem.
pub fn build_visualization(ws: &Workspace, record: &PerformanceRecord, width: usize) -> Result<VisualizationBundle> {
    if !record.status.has_alignment() {
        return Err(Error::StageOrder {
            id: record.id.clone(),
            status: record.status,
            action: "visualization",
            required: "an alignment",
        });
    }
    let aligned = load_aligned(ws, record)?;
    let f0_path = ws.f0_path(&record.id);
    if !f0_path.is_file() {
        return Err(Error::MissingFile { id: record.id.clone(), what: "f0 track", path: f0_path });
    }
    let f0 = read_f0_csv(&f0_path)?;
    let stem_path = ws.resolve(&record.stem_path);
    if !stem_path.is_file() {
        return Err(Error::MissingFile { id: record.id.clone(), what: "vocal stem", path: stem_path });
    }
    let audio = read_wav(&stem_path)?;
    let duration = audio.duration();
    let labels = propagate(&load_score(ws, record)?)?.labels;

    let f0 = (0..f0.len())
        .filter(|&i| f0.f0[i] > 0.0 && f0.time(i) <= duration)
        .map(|i| F0Point { time: f0.time(i), hz: f0.f0[i] })
        .collect();
    let notes = aligned
        .iter()
        .filter(|n| n.onset_seconds < duration)
        .map(|n| NoteRect {
            note_id: n.note_id,
            onset: n.onset_seconds.max(0.0),
            offset: n.offset_seconds.min(duration),
            pitch: n.pitch,
            hz: midi_to_hz(n.pitch as f64),
        })
        .collect();
    Ok(VisualizationBundle {
        id: record.id.clone(),
        duration,
        alignment_score: record.alignment_score,
        f0,
        notes,
        envelope: envelope(&audio, width),
        regions: regions(&aligned, &labels, duration),
    })
}

/// Min/max envelope with exactly `width` buckets (at least one).
pub fn envelope(audio: &AudioBuffer, width: usize) -> Envelope {
    let width = width.max(1);
    let samples = audio.samples();
    let n = samples.len();
    let buckets = (0..width)
        .map(|i| {
            let (a, b) = (i * n / width, (i + 1) * n / width);
            let chunk = &samples[a..b.max(a)];
            if chunk.is_empty() {
                [0.0, 0.0]
            } else {
                chunk.iter().fold([f32::INFINITY, f32::NEG_INFINITY], |[lo, hi], &s| [lo.min(s), hi.max(s)])
            }
        })
        .collect();
    Envelope { seconds_per_bucket: audio.duration() / width as f64, buckets }
}

/// Runs of consecutive labeled notes sharing category and wedge. A region is
/// held until the next one starts; the last ends with its last note.
fn regions(aligned: &[AlignedNote], labels: &[NoteDynamicLabel], duration: f64) -> Vec<DynamicsRegion> {
    let mut notes: Vec<(&AlignedNote, &NoteDynamicLabel)> = aligned
        .iter()
        .filter_map(|n| labels.iter().find(|l| l.note_id == n.note_id).map(|l| (n, l)))
        .collect();
    notes.sort_by(|a, b| a.0.onset_seconds.total_cmp(&b.0.onset_seconds));
    let mut out: Vec<DynamicsRegion> = Vec::new();
    for (note, label) in notes {
        let start = note.onset_seconds.clamp(0.0, duration);
        let end = note.offset_seconds.clamp(start, duration);
        match out.last_mut() {
            Some(r) if r.category == label.category && r.wedge == label.region => r.end = r.end.max(end),
            _ => {
                if let Some(prev) = out.last_mut() {
                    prev.end = start;
                }
                out.push(DynamicsRegion { start, end, category: label.category, wedge: label.region });
            }
        }
    }
    out.retain(|r| r.end > r.start);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use DynamicCategory as D;

    fn an(id: usize, on: f64, off: f64) -> AlignedNote {
        AlignedNote { note_id: id, pitch: 69, onset_seconds: on, offset_seconds: off }
    }

    fn lab(id: usize, c: DynamicCategory, w: Option<WedgeRegion>) -> NoteDynamicLabel {
        NoteDynamicLabel { note_id: id, category: c, region: w }
    }

    #[test]
    fn envelope_has_requested_width() {
        let audio = AudioBuffer::new(vec![0.5, -1.0, 0.25, 0.0, 1.0], 5).unwrap();
        for w in [1, 2, 5, 7, 1000] {
            assert_eq!(envelope(&audio, w).buckets.len(), w);
        }
        let e = envelope(&audio, 2);
        assert_eq!(e.buckets, vec![[-1.0, 0.5], [0.0, 1.0]]);
        assert_eq!(e.seconds_per_bucket, 0.5);
        assert_eq!(envelope(&audio, 0).buckets.len(), 1);
    }

    #[test]
    fn regions_hold_until_next_and_never_overlap() {
        let aligned = [an(0, 0.0, 1.0), an(1, 1.5, 2.0), an(2, 2.0, 3.0), an(3, 3.0, 3.5), an(4, 4.0, 5.0)];
        let labels = [
            lab(0, D::P, None),
            lab(1, D::P, None),
            lab(2, D::Sf, None),
            lab(3, D::F, Some(WedgeRegion::Diminuendo)),
            lab(4, D::F, None),
        ];
        let r = regions(&aligned, &labels, 4.5);
        let spans: Vec<(f64, f64, DynamicCategory)> = r.iter().map(|r| (r.start, r.end, r.category)).collect();
        assert_eq!(spans, vec![(0.0, 2.0, D::P), (2.0, 3.0, D::Sf), (3.0, 4.0, D::F), (4.0, 4.5, D::F)]);
        assert_eq!(r[2].wedge, Some(WedgeRegion::Diminuendo));
        for w in r.windows(2) {
            assert!(w[0].end <= w[1].start);
        }
    }

    #[test]
    fn unlabeled_notes_have_no_region() {
        let r = regions(&[an(0, 0.0, 1.0), an(1, 1.0, 2.0)], &[lab(1, D::Mf, None)], 2.0);
        assert_eq!(r.len(), 1);
        assert_eq!((r[0].start, r[0].end), (1.0, 2.0));
    }
}
