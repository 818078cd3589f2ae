//! Partwise MusicXML reading and writing.
//!
//! Supported subset: pitched notes (chords, ties, rests, backup/forward),
//! `<dynamics>`, `<wedge>`, `<sound tempo>`, work title and number, composer.
//! Grace and cue notes are ignored.
//!
//! The first part is the vocal line unless another part id is requested. The
//! first two-staff part after it becomes the piano: staff 1 is the right hand,
//! staff 2 the left. Any other part is kept as [`PartId::Other`].

use std::collections::HashMap;
use std::fmt::Write as _;

use roxmltree::{Document, Node, ParsingOptions};
use vocadyn_core::score::{DynamicCategory, DynamicMarking, Metadata, NoteEvent, Part, PartId, ScoreDocument};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// MusicXML part id of the vocal line; defaults to the first part.
    pub vocal_part: Option<String>,
}

pub fn parse_musicxml(bytes: &[u8]) -> Result<ScoreDocument> {
    parse_musicxml_with(bytes, &ParseOptions::default())
}

pub fn parse_musicxml_with(bytes: &[u8], options: &ParseOptions) -> Result<ScoreDocument> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let prefix = &bytes[..e.valid_up_to()];
        let line = 1 + prefix.iter().filter(|&&b| b == b'\n').count() as u32;
        let column = 1 + prefix.iter().rev().take_while(|&&b| b != b'\n').count() as u32;
        Error::Xml { line, column, message: "invalid UTF-8".into() }
    })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let doc = Document::parse_with_options(text, ParsingOptions { allow_dtd: true, ..Default::default() }).map_err(|e| {
        let pos = e.pos();
        Error::Xml { line: pos.row, column: pos.col, message: e.to_string() }
    })?;
    let root = doc.root_element();
    if root.tag_name().name() != "score-partwise" {
        return Err(Error::MusicXml(format!("root element <{}> is not <score-partwise>", root.tag_name().name())));
    }

    let sources: Vec<Node> = children(root, "part").collect();
    if sources.is_empty() {
        return Err(vocadyn_core::Error::EmptyScore.into());
    }
    let vocal_idx = match &options.vocal_part {
        None => 0,
        Some(id) => sources
            .iter()
            .position(|p| p.attribute("id") == Some(id.as_str()))
            .ok_or_else(|| Error::MusicXml(format!("no part with id {id:?}")))?,
    };

    let mut order = vec![vocal_idx];
    order.extend((0..sources.len()).filter(|&i| i != vocal_idx));
    let mut parts: Vec<Part> = Vec::new();
    let mut markings = Vec::new();
    let mut tempo = None;
    let mut piano_taken = false;
    for idx in order {
        let node = sources[idx];
        let id = node.attribute("id").unwrap_or("").to_string();
        let roles = if idx == vocal_idx {
            Roles::Single(PartId::Vocal)
        } else if !piano_taken && max_staves(node) >= 2 {
            piano_taken = true;
            Roles::Piano
        } else {
            Roles::Single(PartId::Other(if id.is_empty() { format!("P{}", idx + 1) } else { id }))
        };
        let parsed = parse_part(node, &roles)?;
        tempo = tempo.or(parsed.tempo);
        markings.extend(parsed.markings);
        match roles {
            Roles::Single(pid) => {
                let mut notes: Vec<NoteEvent> = parsed.notes.into_iter().map(|(_, n)| n).collect();
                if pid == PartId::Vocal {
                    notes = highest_of_chords(notes);
                }
                parts.push(Part { id: pid, notes });
            }
            Roles::Piano => {
                let (rh, lh): (Vec<_>, Vec<_>) = parsed.notes.into_iter().partition(|(staff, _)| *staff < 2);
                parts.push(Part { id: PartId::PianoRh, notes: rh.into_iter().map(|(_, n)| n).collect() });
                parts.push(Part { id: PartId::PianoLh, notes: lh.into_iter().map(|(_, n)| n).collect() });
            }
        }
    }
    Ok(ScoreDocument::new(parts, markings, metadata(root), tempo)?)
}

enum Roles {
    Single(PartId),
    Piano,
}

impl Roles {
    fn for_staff(&self, staff: u32) -> PartId {
        match self {
            Roles::Single(id) => id.clone(),
            Roles::Piano if staff >= 2 => PartId::PianoLh,
            Roles::Piano => PartId::PianoRh,
        }
    }
}

fn children<'a, 'i>(node: Node<'a, 'i>, name: &'static str) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children().filter(move |c| c.has_tag_name(name))
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &'static str) -> Option<Node<'a, 'i>> {
    children(node, name).next()
}

fn child_text<'a>(node: Node<'a, '_>, name: &'static str) -> Option<&'a str> {
    child(node, name).and_then(|c| c.text()).map(str::trim)
}

fn max_staves(part: Node) -> u32 {
    part.descendants()
        .filter(|n| n.has_tag_name("staves"))
        .filter_map(|n| n.text().and_then(|t| t.trim().parse().ok()))
        .max()
        .unwrap_or(1)
}

fn metadata(root: Node) -> Metadata {
    let work = child(root, "work");
    let title = work
        .and_then(|w| child_text(w, "work-title"))
        .or_else(|| child_text(root, "movement-title"))
        .filter(|t| !t.is_empty())
        .map(String::from);
    let catalogue_id = work.and_then(|w| child_text(w, "work-number")).filter(|t| !t.is_empty()).map(String::from);
    let composer = child(root, "identification")
        .into_iter()
        .flat_map(|i| children(i, "creator"))
        .find(|c| c.attribute("type") == Some("composer"))
        .and_then(|c| c.text())
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty());
    Metadata { composer, title, catalogue_id }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn parse_int(node: Node, name: &'static str) -> Result<Option<i64>> {
    match child_text(node, name) {
        None => Ok(None),
        Some(t) => t.parse::<f64>().map(|v| Some(v.round() as i64)).map_err(|_| {
            Error::MusicXml(format!("<{name}> value {t:?} at byte {} is not a number", node.range().start))
        }),
    }
}

fn semitone(note: Node) -> Result<Option<i32>> {
    let Some(pitch) = child(note, "pitch") else { return Ok(None) };
    let step = child_text(pitch, "step").unwrap_or("");
    let base = match step {
        "C" => 0,
        "D" => 2,
        "E" => 4,
        "F" => 5,
        "G" => 7,
        "A" => 9,
        "B" => 11,
        other => return Err(Error::MusicXml(format!("pitch step {other:?}"))),
    };
    let alter = child_text(pitch, "alter").and_then(|a| a.parse::<f64>().ok()).unwrap_or(0.0).round() as i32;
    let octave = parse_int(pitch, "octave")?.ok_or_else(|| Error::MusicXml("pitch without octave".into()))? as i32;
    Ok(Some((octave + 1) * 12 + base + alter))
}

struct ParsedPart {
    /// Staff number and note.
    notes: Vec<(u32, NoteEvent)>,
    markings: Vec<DynamicMarking>,
    tempo: Option<f64>,
}

fn parse_part(part: Node, roles: &Roles) -> Result<ParsedPart> {
    // positions are integers in units of 1/lcm(divisions) quarter notes
    let unit = part
        .descendants()
        .filter(|n| n.has_tag_name("divisions"))
        .filter_map(|n| n.text().and_then(|t| t.trim().parse::<i64>().ok()))
        .filter(|&d| d > 0)
        .fold(1i64, |acc, d| acc / gcd(acc, d) * d);
    let to_q = |u: i64| u as f64 / unit as f64;

    let mut scale = unit;
    let mut notes: Vec<(u32, NoteEvent)> = Vec::new();
    let mut markings: Vec<(DynamicMarking, bool)> = Vec::new();
    // tied note index and its onset in units
    let mut open_ties: HashMap<(PartId, i32), (usize, i64)> = HashMap::new();
    let mut open_wedges: HashMap<(PartId, String), usize> = HashMap::new();
    let mut tempo = None;
    let mut start = 0i64;

    for (m_idx, measure) in children(part, "measure").enumerate() {
        let number = measure
            .attribute("number")
            .and_then(|n| n.trim().parse::<u32>().ok())
            .filter(|&n| n > 0)
            .unwrap_or(m_idx as u32 + 1);
        let (mut pos, mut max_pos, mut last_onset) = (0i64, 0i64, 0i64);
        for el in measure.children().filter(Node::is_element) {
            match el.tag_name().name() {
                "attributes" => {
                    if let Some(d) = parse_int(el, "divisions")?.filter(|&d| d > 0) {
                        scale = unit / d;
                    }
                }
                "backup" => pos = (pos - parse_int(el, "duration")?.unwrap_or(0) * scale).max(0),
                "forward" => {
                    pos += parse_int(el, "duration")?.unwrap_or(0) * scale;
                    max_pos = max_pos.max(pos);
                }
                "note" => {
                    if child(el, "grace").is_some() || child(el, "cue").is_some() {
                        continue;
                    }
                    let dur = parse_int(el, "duration")?.unwrap_or(0) * scale;
                    let chord = child(el, "chord").is_some();
                    let onset = if chord { last_onset } else { pos };
                    if !chord {
                        last_onset = pos;
                        pos += dur;
                        max_pos = max_pos.max(pos);
                    }
                    let Some(pitch) = semitone(el)? else { continue };
                    if dur <= 0 {
                        continue;
                    }
                    let staff = parse_int(el, "staff")?.unwrap_or(1).max(1) as u32;
                    let pid = roles.for_staff(staff);
                    let ties: Vec<&str> = el
                        .descendants()
                        .filter(|n| n.has_tag_name("tie") || n.has_tag_name("tied"))
                        .filter_map(|n| n.attribute("type"))
                        .collect();
                    let (tie_start, tie_stop) = (ties.contains(&"start"), ties.contains(&"stop"));
                    let key = (pid.clone(), pitch);
                    let abs_onset = start + onset;
                    if let (true, Some(&(i, first))) = (tie_stop, open_ties.get(&key)) {
                        notes[i].1.duration = to_q(abs_onset + dur - first);
                        if !tie_start {
                            open_ties.remove(&key);
                        }
                        continue;
                    }
                    let event = NoteEvent { pitch, onset: to_q(abs_onset), duration: to_q(dur), part_id: pid, measure: number };
                    notes.push((staff, event));
                    if tie_start {
                        open_ties.insert(key, (notes.len() - 1, abs_onset));
                    }
                }
                "direction" => {
                    let offset = parse_int(el, "offset")?.unwrap_or(0) * scale;
                    let at = start + (pos + offset).max(0);
                    let staff = parse_int(el, "staff")?.unwrap_or(1).max(1) as u32;
                    let pid = roles.for_staff(staff);
                    for dt in children(el, "direction-type") {
                        for dynamics in children(dt, "dynamics") {
                            for mark in dynamics.children().filter(Node::is_element) {
                                if let Some(cat) = DynamicCategory::from_musicxml(mark.tag_name().name()) {
                                    markings.push((DynamicMarking::point(cat, to_q(at), pid.clone()), true));
                                }
                            }
                        }
                        for wedge in children(dt, "wedge") {
                            let key = (pid.clone(), wedge.attribute("number").unwrap_or("1").to_string());
                            let cat = match wedge.attribute("type") {
                                Some("crescendo") => DynamicCategory::Crescendo,
                                Some("diminuendo") => DynamicCategory::Diminuendo,
                                Some("stop") => {
                                    if let Some(i) = open_wedges.remove(&key) {
                                        markings[i].0.span_end = to_q(at).max(markings[i].0.offset);
                                        markings[i].1 = true;
                                    }
                                    continue;
                                }
                                _ => continue,
                            };
                            open_wedges.insert(key, markings.len());
                            markings.push((DynamicMarking::wedge(cat, to_q(at), to_q(at), pid.clone()), false));
                        }
                    }
                    if let Some(t) = child(el, "sound").and_then(|s| s.attribute("tempo")) {
                        tempo = tempo.or(t.trim().parse::<f64>().ok().filter(|t| *t > 0.0));
                    }
                }
                "sound" => {
                    if let Some(t) = el.attribute("tempo") {
                        tempo = tempo.or(t.trim().parse::<f64>().ok().filter(|t| *t > 0.0));
                    }
                }
                _ => {}
            }
        }
        start += max_pos;
    }
    // wedges left open run to the end of the part
    for (m, closed) in &mut markings {
        if !*closed {
            m.span_end = to_q(start).max(m.offset);
        }
    }
    Ok(ParsedPart { notes, markings: markings.into_iter().map(|(m, _)| m).collect(), tempo })
}

/// Keeps the highest pitch among notes sharing an onset.
fn highest_of_chords(notes: Vec<NoteEvent>) -> Vec<NoteEvent> {
    let mut out: Vec<NoteEvent> = Vec::with_capacity(notes.len());
    for n in notes {
        match out.iter_mut().find(|o| o.onset == n.onset) {
            Some(o) if n.pitch > o.pitch => *o = n,
            Some(_) => {}
            None => out.push(n),
        }
    }
    out
}

/// Divisions per quarter note used when writing. Covers the common divisions
/// values (powers of two up to 256, 3, 5, 7, 9, 480, 960, 1008) exactly.
pub const WRITE_DIVISIONS: i64 = 80_640;

fn ticks(q: f64) -> i64 {
    (q * WRITE_DIVISIONS as f64).round() as i64
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn pitch_xml(midi: i32) -> String {
    const NAMES: [(&str, i32); 12] =
        [("C", 0), ("C", 1), ("D", 0), ("D", 1), ("E", 0), ("F", 0), ("F", 1), ("G", 0), ("G", 1), ("A", 0), ("A", 1), ("B", 0)];
    let (step, alter) = NAMES[midi.rem_euclid(12) as usize];
    let octave = midi.div_euclid(12) - 1;
    let alter = if alter != 0 { format!("<alter>{alter}</alter>") } else { String::new() };
    format!("<pitch><step>{step}</step>{alter}<octave>{octave}</octave></pitch>")
}

struct Segment {
    start: i64,
    end: i64,
    pitch: i32,
    staff: u32,
    tie_stop: bool,
    tie_start: bool,
}

/// Something written into a measure, positioned relative to its start.
enum Event<'a> {
    Note(Segment),
    Point { at: i64, marking: &'a DynamicMarking, staff: u32 },
    WedgeStart { at: i64, marking: &'a DynamicMarking, staff: u32, number: usize },
    WedgeStop { at: i64, staff: u32, number: usize },
}

impl Event<'_> {
    fn at(&self) -> i64 {
        match self {
            Event::Note(s) => s.start,
            Event::Point { at, .. } | Event::WedgeStart { at, .. } | Event::WedgeStop { at, .. } => *at,
        }
    }
}

fn write_event(xml: &mut String, ev: &Event) {
    let direction = |xml: &mut String, body: String, staff: u32| {
        let _ = writeln!(xml, "      <direction><direction-type>{body}</direction-type><staff>{staff}</staff></direction>");
    };
    match ev {
        Event::Note(seg) => {
            let (mut ties, mut tied) = (String::new(), String::new());
            for (flag, kind) in [(seg.tie_stop, "stop"), (seg.tie_start, "start")] {
                if flag {
                    let _ = write!(ties, "<tie type=\"{kind}\"/>");
                    let _ = write!(tied, "<tied type=\"{kind}\"/>");
                }
            }
            let notations = if tied.is_empty() { String::new() } else { format!("<notations>{tied}</notations>") };
            let _ = writeln!(
                xml,
                "      <note>{}<duration>{}</duration>{ties}<voice>{}</voice><staff>{}</staff>{notations}</note>",
                pitch_xml(seg.pitch),
                seg.end - seg.start,
                seg.staff,
                seg.staff
            );
        }
        Event::Point { marking, staff, .. } => {
            direction(xml, format!("<dynamics><{}/></dynamics>", marking.category.as_str()), *staff)
        }
        Event::WedgeStart { marking, staff, number, .. } => direction(
            xml,
            format!("<wedge type=\"{}\" number=\"{number}\"/>", marking.category.as_str()),
            *staff,
        ),
        Event::WedgeStop { staff, number, .. } => {
            direction(xml, format!("<wedge type=\"stop\" number=\"{number}\"/>"), *staff)
        }
    }
}

/// Serializes to a partwise document that parses back to the same score.
///
/// Measures are rebuilt from the notes' measure numbers; notes crossing a
/// barline are written as tied segments.
pub fn to_musicxml(score: &ScoreDocument) -> String {
    // output parts: vocal, piano (both hands), then any others
    let mut outputs: Vec<(String, Vec<(PartId, u32)>)> = Vec::new();
    if score.part(&PartId::Vocal).is_some() {
        outputs.push(("P1".into(), vec![(PartId::Vocal, 1)]));
    }
    if score.part(&PartId::PianoRh).is_some() || score.part(&PartId::PianoLh).is_some() {
        outputs.push(("P2".into(), vec![(PartId::PianoRh, 1), (PartId::PianoLh, 2)]));
    }
    for p in &score.parts {
        if let PartId::Other(name) = &p.id {
            outputs.push((name.clone(), vec![(p.id.clone(), 1)]));
        }
    }

    // measure starts: earliest onset carrying each measure number
    let mut starts: Vec<(i64, u32)> = Vec::new();
    for n in score.all_notes() {
        let t = ticks(n.onset);
        match starts.iter_mut().find(|(_, m)| *m == n.measure) {
            Some(s) => s.0 = s.0.min(t),
            None => starts.push((t, n.measure)),
        }
    }
    starts.sort();
    starts.dedup_by_key(|s| s.0);
    if starts.is_empty() {
        starts.push((0, 1));
    }
    starts[0].0 = 0;
    let end = score
        .all_notes()
        .map(|n| ticks(n.offset()))
        .chain(score.markings.iter().map(|m| ticks(m.span_end)))
        .max()
        .unwrap_or(0)
        .max(starts.last().map_or(0, |s| s.0));
    let bounds: Vec<(i64, i64, u32)> = starts
        .iter()
        .enumerate()
        .map(|(i, &(s, num))| (s, starts.get(i + 1).map_or(end, |n| n.0), num))
        .collect();
    let measure_of = |t: i64| bounds.iter().rposition(|b| b.0 <= t).unwrap_or(0);

    let mut xml = String::new();
    xml.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<score-partwise version=\"4.0\">\n");
    let md = &score.metadata;
    if md.title.is_some() || md.catalogue_id.is_some() {
        xml.push_str("  <work>\n");
        if let Some(n) = &md.catalogue_id {
            let _ = writeln!(xml, "    <work-number>{}</work-number>", escape(n));
        }
        if let Some(t) = &md.title {
            let _ = writeln!(xml, "    <work-title>{}</work-title>", escape(t));
        }
        xml.push_str("  </work>\n");
    }
    if let Some(c) = &md.composer {
        let _ = writeln!(xml, "  <identification>\n    <creator type=\"composer\">{}</creator>\n  </identification>", escape(c));
    }
    xml.push_str("  <part-list>\n");
    for (id, _) in &outputs {
        let _ = writeln!(xml, "    <score-part id=\"{0}\"><part-name>{0}</part-name></score-part>", escape(id));
    }
    xml.push_str("  </part-list>\n");

    for (p_idx, (id, streams)) in outputs.iter().enumerate() {
        let mut per_measure: Vec<Vec<Event>> = (0..bounds.len()).map(|_| Vec::new()).collect();
        for (stream, staff) in streams {
            let Some(part) = score.part(stream) else { continue };
            for n in &part.notes {
                let (s, e) = (ticks(n.onset), ticks(n.offset()));
                let mut cur = s;
                while cur < e {
                    let k = measure_of(cur);
                    let seg_end = if k + 1 < bounds.len() { e.min(bounds[k].1) } else { e };
                    per_measure[k].push(Event::Note(Segment {
                        start: cur - bounds[k].0,
                        end: seg_end - bounds[k].0,
                        pitch: n.pitch,
                        staff: *staff,
                        tie_stop: cur > s,
                        tie_start: seg_end < e,
                    }));
                    cur = seg_end;
                }
            }
        }
        let mut number = 0;
        for m in &score.markings {
            let Some(&(_, staff)) = streams.iter().find(|(s, _)| *s == m.part_id) else { continue };
            let t = ticks(m.offset);
            let k = measure_of(t);
            let at = t - bounds[k].0;
            if m.category.is_wedge() {
                number = number % 6 + 1;
                per_measure[k].push(Event::WedgeStart { at, marking: m, staff, number });
                let te = ticks(m.span_end);
                let ke = measure_of(te);
                per_measure[ke].push(Event::WedgeStop { at: te - bounds[ke].0, staff, number });
            } else {
                per_measure[k].push(Event::Point { at, marking: m, staff });
            }
        }

        let _ = writeln!(xml, "  <part id=\"{}\">", escape(id));
        for (k, &(s, e, num)) in bounds.iter().enumerate() {
            let _ = writeln!(xml, "    <measure number=\"{num}\">");
            if k == 0 {
                let staves = if streams.len() > 1 { "<staves>2</staves>" } else { "" };
                let _ = writeln!(xml, "      <attributes><divisions>{WRITE_DIVISIONS}</divisions>{staves}</attributes>");
                if let (0, Some(t)) = (p_idx, score.tempo_hint) {
                    let _ = writeln!(xml, "      <sound tempo=\"{t}\"/>");
                }
            }
            let mut cursor = 0i64;
            let mut events = std::mem::take(&mut per_measure[k]);
            events.push(Event::WedgeStop { at: e - s, staff: 0, number: 0 });
            let last = events.len() - 1;
            for (i, ev) in events.iter().enumerate() {
                let target = ev.at();
                if target > cursor {
                    let _ = writeln!(xml, "      <forward><duration>{}</duration></forward>", target - cursor);
                } else if target < cursor {
                    let _ = writeln!(xml, "      <backup><duration>{}</duration></backup>", cursor - target);
                }
                cursor = target;
                if i == last {
                    // sentinel: only pads the measure to its full length
                    break;
                }
                write_event(&mut xml, ev);
                if let Event::Note(seg) = ev {
                    cursor = seg.end;
                }
            }
            xml.push_str("    </measure>\n");
        }
        xml.push_str("  </part>\n");
    }
    xml.push_str("</score-partwise>\n");
    xml
}
