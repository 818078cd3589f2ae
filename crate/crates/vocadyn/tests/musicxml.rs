use std::path::PathBuf;

use proptest::prelude::*;
use vocadyn::musicxml::{parse_musicxml, parse_musicxml_with, to_musicxml, ParseOptions};
use vocadyn::Error;
use vocadyn_core::score::{
    propagate_note_dynamics, score_passes_filter, DynamicCategory, DynamicMarking, Metadata, NoteEvent, Part, PartId,
    ScoreDocument, WedgeRegion,
};

fn fixture(name: &str) -> Vec<u8> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    std::fs::read(path).unwrap()
}

#[test]
fn minimal_document() {
    let score = parse_musicxml(&fixture("minimal.musicxml")).unwrap();
    assert_eq!(score.parts.len(), 1);
    let notes = score.vocal_notes();
    assert_eq!(notes.len(), 1);
    assert_eq!((notes[0].pitch, notes[0].onset, notes[0].duration), (60, 0.0, 1.0));
    assert_eq!(score.markings, vec![DynamicMarking::point(DynamicCategory::P, 0.0, PartId::Vocal)]);
}

#[test]
fn tied_half_notes_merge() {
    let score = parse_musicxml(&fixture("tied.musicxml")).unwrap();
    let notes = score.vocal_notes();
    assert_eq!(notes.len(), 1);
    assert_eq!((notes[0].pitch, notes[0].onset, notes[0].duration), (64, 0.0, 4.0));
}

#[test]
fn lied_parts_markings_and_wedge_span() {
    let score = parse_musicxml(&fixture("lied.musicxml")).unwrap();
    let ids: Vec<&PartId> = score.parts.iter().map(|p| &p.id).collect();
    assert_eq!(ids, [&PartId::Vocal, &PartId::PianoRh, &PartId::PianoLh]);
    assert_eq!(score.vocal_notes().len(), 13);
    assert_eq!(score.part(&PartId::PianoRh).unwrap().notes.len(), 24);
    assert_eq!(score.part(&PartId::PianoLh).unwrap().notes.len(), 4);
    assert_eq!(score.tempo_hint, Some(72.0));
    assert_eq!(
        score.metadata,
        Metadata { composer: Some("Anon.".into()), title: Some("Abendlied".into()), catalogue_id: Some("lied-001".into()) }
    );

    let wedge = score.markings.iter().find(|m| m.category == DynamicCategory::Crescendo).unwrap();
    // two 4/4 measures
    assert_eq!((wedge.offset, wedge.span_end - wedge.offset), (4.0, 8.0));
    assert_eq!(score.markings.len(), 4);
    assert!(score.markings.iter().any(|m| m.category == DynamicCategory::Pp && m.part_id == PartId::PianoRh));
    assert!(score_passes_filter(&score));

    let labels = propagate_note_dynamics(&score).unwrap();
    let cats: Vec<DynamicCategory> = labels.iter().map(|l| l.category).collect();
    let mut want = vec![DynamicCategory::P; 12];
    want.push(DynamicCategory::F);
    assert_eq!(cats, want);
    for l in &labels {
        let inside = (4..12).contains(&l.note_id);
        assert_eq!(l.region, inside.then_some(WedgeRegion::Crescendo), "note {}", l.note_id);
    }
}

#[test]
fn malformed_xml_reports_line() {
    let text = "<?xml version=\"1.0\"?>\n<score-partwise>\n  <part-list>\n  </part>\n</score-partwise>\n";
    match parse_musicxml(text.as_bytes()) {
        Err(Error::Xml { line, .. }) => assert_eq!(line, 4),
        other => panic!("expected an XML error, got {other:?}"),
    }
    let mut bad = fixture("minimal.musicxml");
    let at = bad.iter().position(|&b| b == b'V').unwrap();
    bad[at] = 0xff;
    assert!(matches!(parse_musicxml(&bad), Err(Error::Xml { line: 5, .. })));
}

#[test]
fn structural_errors() {
    assert!(matches!(parse_musicxml(b"<score-timewise/>"), Err(Error::MusicXml(_))));
    assert!(matches!(
        parse_musicxml(b"<score-partwise><part-list/></score-partwise>"),
        Err(Error::Core(vocadyn_core::Error::EmptyScore))
    ));
    let opts = ParseOptions { vocal_part: Some("P9".into()) };
    assert!(parse_musicxml_with(&fixture("lied.musicxml"), &opts).is_err());
}

#[test]
fn vocal_part_can_be_chosen() {
    let opts = ParseOptions { vocal_part: Some("P2".into()) };
    let score = parse_musicxml_with(&fixture("lied.musicxml"), &opts).unwrap();
    // the piano becomes the vocal line, one note per onset; the voice is another part
    assert_eq!(score.vocal_notes().len(), 8);
    assert!(score.part(&PartId::Other("P1".into())).is_some());
}

fn canonical(mut score: ScoreDocument) -> ScoreDocument {
    for p in &mut score.parts {
        p.notes.sort_by(|a, b| a.onset.total_cmp(&b.onset).then(a.pitch.cmp(&b.pitch)));
    }
    score.parts.sort_by(|a, b| a.id.cmp(&b.id));
    score.markings.sort_by(|a, b| {
        a.offset
            .total_cmp(&b.offset)
            .then(a.part_id.cmp(&b.part_id))
            .then(a.category.cmp(&b.category))
            .then(a.span_end.total_cmp(&b.span_end))
    });
    score
}

#[test]
fn fixtures_round_trip() {
    for name in ["minimal.musicxml", "tied.musicxml", "lied.musicxml"] {
        let score = parse_musicxml(&fixture(name)).unwrap();
        let again = parse_musicxml(to_musicxml(&score).as_bytes()).unwrap();
        assert_eq!(canonical(again), canonical(score), "{name}");
    }
}

/// Positions on a 1/24 quarter grid, which the writer's divisions represent exactly.
const GRID: f64 = 24.0;

fn stream(part: PartId, chords: Vec<(u32, u32, Vec<i32>)>) -> Part {
    let mut t = 0u32;
    let mut notes = Vec::new();
    for (gap, len, pitches) in chords {
        t += gap;
        for p in pitches {
            notes.push(NoteEvent {
                pitch: p,
                onset: t as f64 / GRID,
                duration: len as f64 / GRID,
                part_id: part.clone(),
                measure: t / 96 + 1,
            });
        }
        t += len;
    }
    Part { id: part, notes }
}

fn chords(max_size: usize) -> impl Strategy<Value = Vec<(u32, u32, Vec<i32>)>> {
    prop::collection::vec(
        (0u32..30, 1u32..200, prop::collection::btree_set(36i32..90, 1..=max_size)),
        1..14,
    )
    .prop_map(|v| v.into_iter().map(|(g, l, p)| (g, l, p.into_iter().collect())).collect())
}

fn marking() -> impl Strategy<Value = (u8, u32, u32, u8)> {
    (0u8..13, 0u32..800, 1u32..300, 0u8..3)
}

fn build(
    vocal: Vec<(u32, u32, Vec<i32>)>,
    rh: Vec<(u32, u32, Vec<i32>)>,
    lh: Vec<(u32, u32, Vec<i32>)>,
    marks: Vec<(u8, u32, u32, u8)>,
    tempo: Option<u16>,
    title: Option<String>,
) -> ScoreDocument {
    let parts = vec![stream(PartId::Vocal, vocal), stream(PartId::PianoRh, rh), stream(PartId::PianoLh, lh)];
    let markings = marks
        .into_iter()
        .map(|(c, at, len, part)| {
            let category = DynamicCategory::ALL[c as usize];
            let part_id = [PartId::Vocal, PartId::PianoRh, PartId::PianoLh][part as usize].clone();
            let offset = at as f64 / GRID;
            if category.is_wedge() {
                DynamicMarking::wedge(category, offset, (at + len) as f64 / GRID, part_id)
            } else {
                DynamicMarking::point(category, offset, part_id)
            }
        })
        .collect();
    let metadata = Metadata { composer: Some("A & B <c>".into()), title, catalogue_id: None };
    ScoreDocument::new(parts, markings, metadata, tempo.map(f64::from)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_scores_round_trip(
        vocal in chords(1),
        rh in chords(3),
        lh in chords(2),
        marks in prop::collection::vec(marking(), 0..8),
        tempo in prop::option::of(30u16..200),
        title in prop::option::of("[A-Za-z][A-Za-z ]{0,10}[a-z]"),
    ) {
        let score = build(vocal, rh, lh, marks, tempo, title);
        let xml = to_musicxml(&score);
        let again = parse_musicxml(xml.as_bytes()).unwrap();
        prop_assert_eq!(canonical(again), canonical(score));
    }
}
