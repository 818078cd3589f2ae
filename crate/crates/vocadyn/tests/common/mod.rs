//! Synthetic workspaces: scores, renditions and manifests on disk.
#![allow(dead_code)]

use std::path::Path;

use vocadyn::audio::write_wav;
use vocadyn::manifest::PerformanceRecord;
use vocadyn::musicxml::to_musicxml;
use vocadyn_core::score::{DynamicCategory, DynamicMarking, NoteEvent, Part, PartId, ScoreDocument};
use vocadyn_core::synth::{render, Rendition, SynthConfig};

pub const MELODY: [i32; 8] = [69, 71, 72, 74, 76, 74, 72, 71];

/// Voice and two-hand piano; `tiers` gives one absolute dynamic per block of
/// `block` quarters.
pub fn score(measures: usize, tiers: &[DynamicCategory], block: f64) -> ScoreDocument {
    let quarters = measures * 4;
    let mut vocal = Vec::new();
    let mut t = 0;
    let mut k = 0;
    while t < quarters {
        let d = if k % 4 == 3 { 2 } else { 1 };
        let d = d.min(quarters - t);
        vocal.push(NoteEvent {
            pitch: MELODY[k % MELODY.len()],
            onset: t as f64,
            duration: d as f64,
            part_id: PartId::Vocal,
            measure: (t / 4) as u32 + 1,
        });
        t += d;
        k += 1;
    }
    let piano = |id: PartId, base: i32| {
        let notes = (0..measures)
            .map(|m| NoteEvent {
                pitch: base + [0, 5, 7, 3][m % 4],
                onset: (m * 4) as f64,
                duration: 4.0,
                part_id: id.clone(),
                measure: m as u32 + 1,
            })
            .collect();
        Part { id, notes }
    };
    let mut markings: Vec<DynamicMarking> = (0..)
        .map(|i| i as f64 * block)
        .take_while(|&at| at < quarters as f64)
        .enumerate()
        .map(|(i, at)| DynamicMarking::point(tiers[i % tiers.len()], at, PartId::Vocal))
        .collect();
    markings.push(DynamicMarking::point(DynamicCategory::Mp, 0.0, PartId::PianoRh));
    ScoreDocument::new(
        vec![Part { id: PartId::Vocal, notes: vocal }, piano(PartId::PianoRh, 60), piano(PartId::PianoLh, 48)],
        markings,
        Default::default(),
        Some(120.0),
    )
    .unwrap()
}

pub fn small_score() -> ScoreDocument {
    score(4, &[DynamicCategory::P, DynamicCategory::Mf, DynamicCategory::F], 4.0)
}

/// Writes score, mix and stem for `id` under `root` and returns its record.
pub fn write_record(root: &Path, id: &str, score: &ScoreDocument, tempo: Option<f64>) -> (PerformanceRecord, Rendition) {
    for dir in ["scores", "audio", "stems"] {
        std::fs::create_dir_all(root.join(dir)).unwrap();
    }
    let rendition = render(score, &SynthConfig { tempo_qpm: tempo, ..SynthConfig::default() }).unwrap();
    let record = PerformanceRecord::new(
        id,
        format!("scores/{id}.musicxml"),
        format!("audio/{id}.wav"),
        format!("stems/{id}.wav"),
    );
    std::fs::write(root.join(&record.score_path), to_musicxml(score)).unwrap();
    write_wav(&root.join(&record.audio_path), &rendition.mix).unwrap();
    write_wav(&root.join(&record.stem_path), &rendition.stem).unwrap();
    (record, rendition)
}
