//! Score model and note-level dynamics.
//!
//! A [`ScoreDocument`] holds the pitched notes of each part and the dynamic
//! markings found in the score. [`propagate_note_dynamics`] turns the markings
//! into one [`NoteDynamicLabel`] per vocal note:
//!
//! - a note takes the most recent absolute marking at or before its onset;
//! - a note marked *sf* keeps *sf*, and the notes after it fall back to the
//!   absolute value that was in force before the accent;
//! - notes starting inside a crescendo/diminuendo wedge hold the preceding
//!   absolute value and carry a region flag. Wedges never become labels.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The 13 dynamics categories found in scores.
///
/// The ten absolute levels are declared in loudness order, so the derived
/// `Ord` ranks `Pppp < Ppp < ... < Ffff`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DynamicCategory {
    Pppp,
    Ppp,
    Pp,
    P,
    Mp,
    Mf,
    F,
    Ff,
    Fff,
    Ffff,
    /// Accents: sf, sfz, fz and their variants.
    Sf,
    Crescendo,
    Diminuendo,
}

impl DynamicCategory {
    pub const ALL: [DynamicCategory; 13] = [
        Self::Pppp,
        Self::Ppp,
        Self::Pp,
        Self::P,
        Self::Mp,
        Self::Mf,
        Self::F,
        Self::Ff,
        Self::Fff,
        Self::Ffff,
        Self::Sf,
        Self::Crescendo,
        Self::Diminuendo,
    ];

    /// Absolute levels, softest first.
    pub const ABSOLUTE: [DynamicCategory; 10] = [
        Self::Pppp,
        Self::Ppp,
        Self::Pp,
        Self::P,
        Self::Mp,
        Self::Mf,
        Self::F,
        Self::Ff,
        Self::Fff,
        Self::Ffff,
    ];

    pub fn is_absolute(self) -> bool {
        !matches!(self, Self::Sf | Self::Crescendo | Self::Diminuendo)
    }

    pub fn is_wedge(self) -> bool {
        matches!(self, Self::Crescendo | Self::Diminuendo)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pppp => "pppp",
            Self::Ppp => "ppp",
            Self::Pp => "pp",
            Self::P => "p",
            Self::Mp => "mp",
            Self::Mf => "mf",
            Self::F => "f",
            Self::Ff => "ff",
            Self::Fff => "fff",
            Self::Ffff => "ffff",
            Self::Sf => "sf",
            Self::Crescendo => "crescendo",
            Self::Diminuendo => "diminuendo",
        }
    }

    /// Maps a MusicXML `<dynamics>` child element name to a category.
    ///
    /// Accent variants are consolidated into [`DynamicCategory::Sf`]. Returns
    /// `None` for marks outside the 13 categories (e.g. `fp`, `n`, `pf`).
    pub fn from_musicxml(name: &str) -> Option<Self> {
        match name {
            "sf" | "sfz" | "fz" | "sffz" | "rf" | "rfz" | "sfp" | "sfpp" | "sfzp" => Some(Self::Sf),
            other => other.parse().ok().filter(|c: &Self| !c.is_wedge()),
        }
    }
}

impl fmt::Display for DynamicCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DynamicCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidScore(format!("unknown dynamic category {s:?}")))
    }
}

/// Role of a part (stream) in the score.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PartId {
    Vocal,
    PianoLh,
    PianoRh,
    /// Any further stream, keyed by its source identifier.
    Other(String),
}

impl PartId {
    pub fn as_string(&self) -> String {
        match self {
            PartId::Vocal => "vocal".to_string(),
            PartId::PianoLh => "piano_lh".to_string(),
            PartId::PianoRh => "piano_rh".to_string(),
            PartId::Other(name) => format!("other:{name}"),
        }
    }
}

impl fmt::Display for PartId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_string())
    }
}

impl TryFrom<String> for PartId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        match s.as_str() {
            "vocal" => Ok(PartId::Vocal),
            "piano_lh" => Ok(PartId::PianoLh),
            "piano_rh" => Ok(PartId::PianoRh),
            other => match other.strip_prefix("other:") {
                Some(name) => Ok(PartId::Other(name.to_string())),
                None => Err(Error::InvalidScore(format!("unknown part id {other:?}"))),
            },
        }
    }
}

impl From<PartId> for String {
    fn from(p: PartId) -> String {
        p.as_string()
    }
}

/// A pitched note. Offsets and durations are in quarter notes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteEvent {
    /// Semitone number, 60 = middle C.
    pub pitch: i32,
    pub onset: f64,
    pub duration: f64,
    pub part_id: PartId,
    pub measure: u32,
}

impl NoteEvent {
    pub fn offset(&self) -> f64 {
        self.onset + self.duration
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicMarking {
    pub category: DynamicCategory,
    pub offset: f64,
    pub part_id: PartId,
    /// End of a wedge; equal to `offset` for point markings.
    pub span_end: f64,
}

impl DynamicMarking {
    pub fn point(category: DynamicCategory, offset: f64, part_id: PartId) -> Self {
        DynamicMarking { category, offset, part_id, span_end: offset }
    }

    pub fn wedge(category: DynamicCategory, offset: f64, span_end: f64, part_id: PartId) -> Self {
        DynamicMarking { category, offset, part_id, span_end }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub id: PartId,
    pub notes: Vec<NoteEvent>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub composer: Option<String>,
    pub title: Option<String>,
    /// External catalogue identifier (e.g. a MuseScore id).
    pub catalogue_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreDocument {
    pub parts: Vec<Part>,
    pub markings: Vec<DynamicMarking>,
    pub metadata: Metadata,
    /// Quarter notes per minute.
    pub tempo_hint: Option<f64>,
}

impl ScoreDocument {
    /// Builds a document, sorting notes and markings and checking invariants.
    pub fn new(
        mut parts: Vec<Part>,
        mut markings: Vec<DynamicMarking>,
        metadata: Metadata,
        tempo_hint: Option<f64>,
    ) -> Result<Self> {
        for part in &mut parts {
            part.notes.sort_by(|a, b| a.onset.total_cmp(&b.onset));
        }
        markings.sort_by(|a, b| a.offset.total_cmp(&b.offset));
        let doc = ScoreDocument { parts, markings, metadata, tempo_hint };
        doc.validate()?;
        Ok(doc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.parts.is_empty() {
            return Err(Error::EmptyScore);
        }
        for (i, part) in self.parts.iter().enumerate() {
            if self.parts[..i].iter().any(|p| p.id == part.id) {
                return Err(Error::InvalidScore(format!("duplicate part {}", part.id)));
            }
            for n in &part.notes {
                if !(n.duration > 0.0) || !(n.onset >= 0.0) {
                    return Err(Error::InvalidScore(format!(
                        "note at {} in {} has onset {} duration {}",
                        n.onset, part.id, n.onset, n.duration
                    )));
                }
                if n.part_id != part.id {
                    return Err(Error::InvalidScore(format!("note tagged {} inside part {}", n.part_id, part.id)));
                }
            }
            if part.notes.windows(2).any(|w| w[1].onset < w[0].onset) {
                return Err(Error::InvalidScore(format!("notes of {} not sorted by onset", part.id)));
            }
        }
        if self.markings.windows(2).any(|w| w[1].offset < w[0].offset) {
            return Err(Error::InvalidScore("markings not sorted by offset".to_string()));
        }
        for m in &self.markings {
            if !self.parts.iter().any(|p| p.id == m.part_id) {
                return Err(Error::InvalidScore(format!("marking {} refers to missing part {}", m.category, m.part_id)));
            }
            if m.span_end < m.offset || (m.span_end > m.offset && !m.category.is_wedge()) {
                return Err(Error::InvalidScore(format!(
                    "marking {} at {} has span end {}",
                    m.category, m.offset, m.span_end
                )));
            }
        }
        Ok(())
    }

    pub fn part(&self, id: &PartId) -> Option<&Part> {
        self.parts.iter().find(|p| &p.id == id)
    }

    pub fn vocal_notes(&self) -> &[NoteEvent] {
        self.part(&PartId::Vocal).map(|p| p.notes.as_slice()).unwrap_or(&[])
    }

    /// End of the last sounding note, in quarter notes.
    pub fn end_offset(&self) -> f64 {
        self.parts
            .iter()
            .flat_map(|p| p.notes.iter())
            .map(NoteEvent::offset)
            .fold(0.0, f64::max)
    }

    pub fn all_notes(&self) -> impl Iterator<Item = &NoteEvent> {
        self.parts.iter().flat_map(|p| p.notes.iter())
    }
}

/// True iff the score has more than three dynamics markings and exactly the
/// three streams vocal, piano left hand and piano right hand.
pub fn score_passes_filter(score: &ScoreDocument) -> bool {
    let roles = [PartId::Vocal, PartId::PianoLh, PartId::PianoRh];
    score.markings.len() > 3
        && score.parts.len() == 3
        && roles.iter().all(|r| score.parts.iter().any(|p| &p.id == r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WedgeRegion {
    Crescendo,
    Diminuendo,
}

/// Dynamic label of one vocal note. `category` is absolute or `Sf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoteDynamicLabel {
    /// Index of the note within the vocal part.
    pub note_id: usize,
    pub category: DynamicCategory,
    pub region: Option<WedgeRegion>,
}

/// Result of dynamics propagation when unlabeled notes are tolerated.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    pub labels: Vec<NoteDynamicLabel>,
    /// Vocal notes before the first absolute marking.
    pub unlabeled: Vec<usize>,
}

/// Markings that drive the vocal labels: those attached to the vocal part, or
/// every marking when the vocal part carries none.
fn vocal_markings(score: &ScoreDocument) -> Vec<&DynamicMarking> {
    let own: Vec<&DynamicMarking> = score.markings.iter().filter(|m| m.part_id == PartId::Vocal).collect();
    if own.is_empty() {
        score.markings.iter().collect()
    } else {
        own
    }
}

/// Propagates markings onto vocal notes, reporting unlabeled notes instead of failing.
pub fn propagate(score: &ScoreDocument) -> Result<Propagation> {
    let notes = score.vocal_notes();
    if notes.is_empty() {
        return Err(Error::EmptyVocalPart);
    }
    let markings = vocal_markings(score);

    // Each sf marking accents the first vocal note starting at or after it.
    let mut accented = alloc::vec![false; notes.len()];
    for m in markings.iter().filter(|m| m.category == DynamicCategory::Sf) {
        if let Some(idx) = notes.iter().position(|n| n.onset >= m.offset) {
            accented[idx] = true;
        }
    }

    let absolutes: Vec<&&DynamicMarking> = markings.iter().filter(|m| m.category.is_absolute()).collect();
    let wedges: Vec<&&DynamicMarking> = markings.iter().filter(|m| m.category.is_wedge()).collect();

    let mut labels = Vec::with_capacity(notes.len());
    let mut unlabeled = Vec::new();
    let mut cursor = 0;
    let mut held: Option<DynamicCategory> = None;
    for (idx, note) in notes.iter().enumerate() {
        while cursor < absolutes.len() && absolutes[cursor].offset <= note.onset {
            held = Some(absolutes[cursor].category);
            cursor += 1;
        }
        let region = wedges
            .iter()
            .rev()
            .find(|w| w.offset <= note.onset && note.onset < w.span_end)
            .map(|w| match w.category {
                DynamicCategory::Crescendo => WedgeRegion::Crescendo,
                _ => WedgeRegion::Diminuendo,
            });
        let category = if accented[idx] { Some(DynamicCategory::Sf) } else { held };
        match category {
            Some(category) => labels.push(NoteDynamicLabel { note_id: idx, category, region }),
            None => unlabeled.push(idx),
        }
    }
    Ok(Propagation { labels, unlabeled })
}

/// Labels every vocal note, failing when notes precede the first absolute marking.
///
/// The error carries the affected note indices and the labels of the
/// remaining notes so callers can drop or default the prefix.
pub fn propagate_note_dynamics(score: &ScoreDocument) -> Result<Vec<NoteDynamicLabel>> {
    let Propagation { labels, unlabeled } = propagate(score)?;
    if unlabeled.is_empty() {
        Ok(labels)
    } else {
        Err(Error::UnlabeledPrefix { notes: unlabeled, labeled: labels })
    }
}

/// Marking counts for all 13 categories across a corpus.
pub fn corpus_marking_statistics(scores: &[ScoreDocument]) -> BTreeMap<DynamicCategory, usize> {
    let mut counts: BTreeMap<DynamicCategory, usize> = DynamicCategory::ALL.iter().map(|c| (*c, 0)).collect();
    for m in scores.iter().flat_map(|s| s.markings.iter()) {
        *counts.entry(m.category).or_default() += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use DynamicCategory::*;

    fn note(onset: f64, part: PartId) -> NoteEvent {
        NoteEvent { pitch: 60, onset, duration: 1.0, part_id: part, measure: 1 + (onset / 4.0) as u32 }
    }

    fn lied(vocal_onsets: &[f64], markings: Vec<DynamicMarking>) -> ScoreDocument {
        let parts = vec![
            Part { id: PartId::Vocal, notes: vocal_onsets.iter().map(|&o| note(o, PartId::Vocal)).collect() },
            Part { id: PartId::PianoRh, notes: vec![note(0.0, PartId::PianoRh)] },
            Part { id: PartId::PianoLh, notes: vec![note(0.0, PartId::PianoLh)] },
        ];
        ScoreDocument::new(parts, markings, Metadata::default(), None).unwrap()
    }

    fn cats(labels: &[NoteDynamicLabel]) -> Vec<(DynamicCategory, Option<WedgeRegion>)> {
        labels.iter().map(|l| (l.category, l.region)).collect()
    }

    #[test]
    fn absolute_order_and_count() {
        assert_eq!(DynamicCategory::ALL.len(), 13);
        assert!(DynamicCategory::ABSOLUTE.windows(2).all(|w| w[0] < w[1]));
        assert!(DynamicCategory::ABSOLUTE.iter().all(|c| c.is_absolute()));
    }

    #[test]
    fn accent_variants_consolidate() {
        for name in ["sf", "sfz", "fz", "sffz", "rfz"] {
            assert_eq!(DynamicCategory::from_musicxml(name), Some(Sf));
        }
        assert_eq!(DynamicCategory::from_musicxml("mp"), Some(Mp));
        assert_eq!(DynamicCategory::from_musicxml("crescendo"), None);
        assert_eq!(DynamicCategory::from_musicxml("fp"), None);
    }

    #[test]
    fn filter_boundaries() {
        let m = |n: usize| (0..n).map(|i| DynamicMarking::point(P, i as f64, PartId::Vocal)).collect::<Vec<_>>();
        assert!(score_passes_filter(&lied(&[0.0], m(4))));
        assert!(!score_passes_filter(&lied(&[0.0], m(3))));

        let two = ScoreDocument::new(
            vec![
                Part { id: PartId::Vocal, notes: vec![note(0.0, PartId::Vocal)] },
                Part { id: PartId::PianoRh, notes: vec![] },
            ],
            m(10),
            Metadata::default(),
            None,
        )
        .unwrap();
        assert!(!score_passes_filter(&two));
    }

    #[test]
    fn hold_rule() {
        let s = lied(
            &[0.0, 1.0, 2.0, 3.0],
            vec![DynamicMarking::point(P, 0.0, PartId::Vocal), DynamicMarking::point(F, 3.0, PartId::Vocal)],
        );
        let labels = propagate_note_dynamics(&s).unwrap();
        assert_eq!(cats(&labels), vec![(P, None), (P, None), (P, None), (F, None)]);
    }

    #[test]
    fn sf_rule() {
        let s = lied(
            &[0.0, 1.0, 2.0],
            vec![DynamicMarking::point(P, 0.0, PartId::Vocal), DynamicMarking::point(Sf, 1.0, PartId::Vocal)],
        );
        let labels = propagate_note_dynamics(&s).unwrap();
        assert_eq!(cats(&labels), vec![(P, None), (Sf, None), (P, None)]);
    }

    #[test]
    fn wedge_rule() {
        let s = lied(
            &[0.0, 1.0, 2.0, 3.0],
            vec![
                DynamicMarking::point(P, 0.0, PartId::Vocal),
                DynamicMarking::wedge(Crescendo, 1.0, 3.0, PartId::Vocal),
                DynamicMarking::point(F, 3.0, PartId::Vocal),
            ],
        );
        let labels = propagate_note_dynamics(&s).unwrap();
        let c = Some(WedgeRegion::Crescendo);
        assert_eq!(cats(&labels), vec![(P, None), (P, c), (P, c), (F, None)]);
    }

    #[test]
    fn unlabeled_prefix_reports_notes() {
        let s = lied(&[0.0, 1.0, 2.0], vec![DynamicMarking::point(Mf, 1.0, PartId::Vocal)]);
        match propagate_note_dynamics(&s) {
            Err(Error::UnlabeledPrefix { notes, labeled }) => {
                assert_eq!(notes, vec![0]);
                assert_eq!(labeled.len(), 2);
                assert!(labeled.iter().all(|l| l.category == Mf));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn piano_markings_ignored_when_vocal_has_its_own() {
        let s = lied(
            &[0.0, 2.0],
            vec![DynamicMarking::point(P, 0.0, PartId::Vocal), DynamicMarking::point(Ff, 1.0, PartId::PianoRh)],
        );
        let labels = propagate_note_dynamics(&s).unwrap();
        assert_eq!(cats(&labels), vec![(P, None), (P, None)]);
    }

    #[test]
    fn marking_statistics() {
        assert!(corpus_marking_statistics(&[]).values().all(|&c| c == 0));
        let s = lied(
            &[0.0],
            vec![
                DynamicMarking::point(P, 0.0, PartId::Vocal),
                DynamicMarking::point(P, 1.0, PartId::Vocal),
                DynamicMarking::point(F, 2.0, PartId::Vocal),
            ],
        );
        let stats = corpus_marking_statistics(&[s]);
        assert_eq!(stats.len(), 13);
        assert_eq!(stats[&P], 2);
        assert_eq!(stats[&F], 1);
        assert_eq!(stats.values().sum::<usize>(), 3);
    }

    #[test]
    fn rejects_broken_invariants() {
        let bad = ScoreDocument::new(
            vec![Part { id: PartId::Vocal, notes: vec![] }],
            vec![DynamicMarking::point(P, 0.0, PartId::PianoLh)],
            Metadata::default(),
            None,
        );
        assert!(matches!(bad, Err(Error::InvalidScore(_))));
        assert_eq!(ScoreDocument::new(vec![], vec![], Metadata::default(), None), Err(Error::EmptyScore));
        let wedge_point = DynamicMarking { category: P, offset: 0.0, part_id: PartId::Vocal, span_end: 2.0 };
        let bad = ScoreDocument::new(
            vec![Part { id: PartId::Vocal, notes: vec![] }],
            vec![wedge_point],
            Metadata::default(),
            None,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn part_id_serde_names() {
        assert_eq!(String::from(PartId::PianoLh), "piano_lh");
        assert_eq!(PartId::try_from("other:P4".to_string()).unwrap(), PartId::Other("P4".into()));
        assert!(PartId::try_from("tenor".to_string()).is_err());
    }
}
