//! Alignment of synthetic renditions whose note timing is known.

use vocadyn_core::align::{align_score_to_audio, extract_f0, validate_alignment, AlignConfig, AlignedNote};
use vocadyn_core::score::{DynamicCategory, DynamicMarking, NoteEvent, Part, PartId, ScoreDocument};
use vocadyn_core::synth::{render, SynthConfig};

const MELODY: [i32; 16] = [60, 62, 64, 65, 67, 65, 64, 62, 64, 67, 72, 71, 69, 67, 65, 64];

fn score() -> ScoreDocument {
    let mut vocal = Vec::new();
    let mut t = 0.0;
    for (i, &p) in MELODY.iter().cycle().take(40).enumerate() {
        let d = if i % 3 == 2 { 2.0 } else { 1.0 };
        vocal.push(NoteEvent { pitch: p, onset: t, duration: d, part_id: PartId::Vocal, measure: (t / 4.0) as u32 + 1 });
        t += d;
    }
    let bass = (0..(t / 4.0) as usize)
        .map(|m| NoteEvent { pitch: 36 + (m % 3) as i32 * 5, onset: m as f64 * 4.0, duration: 4.0, part_id: PartId::PianoLh, measure: m as u32 + 1 })
        .collect();
    ScoreDocument::new(
        vec![Part { id: PartId::Vocal, notes: vocal }, Part { id: PartId::PianoLh, notes: bass }],
        vec![
            DynamicMarking::point(DynamicCategory::P, 0.0, PartId::Vocal),
            DynamicMarking::point(DynamicCategory::F, 20.0, PartId::Vocal),
        ],
        Default::default(),
        Some(120.0),
    )
    .unwrap()
}

fn onset_errors(found: &[AlignedNote], truth: &[AlignedNote]) -> Vec<f64> {
    found.iter().zip(truth).map(|(a, b)| (a.onset_seconds - b.onset_seconds).abs()).collect()
}

fn check(tempo: f64) {
    let score = score();
    let rendition = render(&score, &SynthConfig { tempo_qpm: Some(tempo), ..SynthConfig::default() }).unwrap();
    let alignment = align_score_to_audio(&score, &rendition.mix, &AlignConfig::default()).unwrap();
    assert_eq!(alignment.notes.len(), rendition.notes.len());
    let mut errors = onset_errors(&alignment.notes, &rendition.notes);
    errors.sort_by(f64::total_cmp);
    let median = errors[errors.len() / 2];
    assert!(median <= 0.1, "tempo {tempo}: median onset error {median}");
    assert!(errors[errors.len() * 9 / 10] <= 0.2, "tempo {tempo}: {errors:?}");
    for w in alignment.notes.windows(2) {
        assert!(w[0].onset_seconds <= w[1].onset_seconds);
    }
    let f0 = extract_f0(&rendition.stem).unwrap();
    let quality = validate_alignment(&alignment.notes, &f0).unwrap();
    assert!(quality >= 0.9, "tempo {tempo}: alignment score {quality}");
}

#[test]
fn self_rendition_at_score_tempo() {
    check(120.0);
}

#[test]
fn rendition_at_other_tempo() {
    check(96.0);
}

#[test]
fn ground_truth_timing_scores_high() {
    let score = score();
    let rendition = render(&score, &SynthConfig::default()).unwrap();
    let f0 = extract_f0(&rendition.stem).unwrap();
    assert!(validate_alignment(&rendition.notes, &f0).unwrap() >= 0.95);
    let shifted: Vec<AlignedNote> = rendition
        .notes
        .iter()
        .map(|n| AlignedNote { pitch: n.pitch + 3, ..n.clone() })
        .collect();
    assert!(validate_alignment(&shifted, &f0).unwrap() < 0.2);
}
