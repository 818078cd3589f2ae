use std::path::{Path, PathBuf};

use rayon::prelude::*;
use vocadyn_core::align::{align_score_to_audio, extract_f0, validate_alignment, AlignConfig, AlignedNote};
use vocadyn_core::dsp::loudness::{LoudnessConfig, LOUDNESS_RATE};
use vocadyn_core::dsp::{bark_specific_loudness, downsample_time, log_mel, resample, AudioBuffer, FeatureKind, LogMelConfig};
use vocadyn_core::labeling::frames_for_features;
use vocadyn_core::score::{propagate, ScoreDocument};

use super::{Workspace, LABEL_CONFIGS};
use crate::audio::read_wav;
use crate::error::{Error, Result};
use crate::formats::{read_bytes, read_f0_csv, read_features, read_json, write_f0_csv, write_features, write_json, write_labels};
use crate::manifest::{PerformanceRecord, Status};
use crate::musicxml::{parse_musicxml_with, ParseOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Features,
    Align,
    Label,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Features => "features",
            Stage::Align => "align",
            Stage::Label => "label",
        }
    }

    fn required(self) -> &'static str {
        match self {
            Stage::Features => "a status other than rejected",
            Stage::Align => "features_done or aligned",
            Stage::Label => "accepted or labeled",
        }
    }

    /// Whether a record in `status` may run this stage. Re-running a completed
    /// stage is allowed and leaves the status unchanged.
    pub fn accepts(self, status: Status) -> bool {
        match self {
            Stage::Features => status != Status::Rejected,
            Stage::Align => matches!(status, Status::FeaturesDone | Status::Aligned),
            Stage::Label => matches!(status, Status::Accepted | Status::Labeled),
        }
    }
}

/// Which recording the chroma alignment uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlignSource {
    #[default]
    Mix,
    Stem,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOptions {
    pub align_source: AlignSource,
    pub align: AlignConfig,
    pub calibration_db_spl_fs: f64,
}

impl Default for StageOptions {
    fn default() -> Self {
        StageOptions {
            align_source: AlignSource::Mix,
            align: AlignConfig::default(),
            calibration_db_spl_fs: LoudnessConfig::default().calibration_db_spl_fs,
        }
    }
}

/// Runs one stage and returns the updated record. Artifacts are written
/// atomically before the status changes, so a crash leaves a record that can
/// simply be re-run.
pub fn run_stage(ws: &Workspace, record: &PerformanceRecord, stage: Stage, opts: &StageOptions) -> Result<PerformanceRecord> {
    if !stage.accepts(record.status) {
        return Err(Error::StageOrder {
            id: record.id.clone(),
            status: record.status,
            action: stage.name(),
            required: stage.required(),
        });
    }
    let mut out = record.clone();
    match stage {
        Stage::Features => {
            features(ws, record, opts)?;
            if out.status == Status::Pending {
                out.status = Status::FeaturesDone;
            }
        }
        Stage::Align => {
            out.alignment_score = align(ws, record, opts)?;
            out.status = Status::Aligned;
        }
        Stage::Label => {
            label(ws, record)?;
            out.status = Status::Labeled;
        }
    }
    Ok(out)
}

/// Runs a stage over many records in parallel and updates them in place.
///
/// With `ids` empty every eligible record is processed and ineligible ones are
/// skipped; otherwise exactly the named records are processed and unknown ids
/// or ineligible records are reported as errors. The caller persists the
/// manifest.
pub fn run_stage_all(
    ws: &Workspace,
    records: &mut [PerformanceRecord],
    stage: Stage,
    opts: &StageOptions,
    ids: &[String],
) -> Vec<(String, Result<Status>)> {
    let mut report: Vec<(String, Result<Status>)> = ids
        .iter()
        .filter(|id| !records.iter().any(|r| &r.id == *id))
        .map(|id| (id.clone(), Err(Error::UnknownId(id.clone()))))
        .collect();
    let selected: Vec<&mut PerformanceRecord> = records
        .iter_mut()
        .filter(|r| if ids.is_empty() { stage.accepts(r.status) } else { ids.contains(&r.id) })
        .collect();
    let results: Vec<(String, Result<Status>)> = selected
        .into_par_iter()
        .map(|r| {
            let result = run_stage(ws, r, stage, opts).map(|updated| {
                *r = updated;
                r.status
            });
            (r.id.clone(), result)
        })
        .collect();
    report.extend(results);
    report
}

fn existing(ws: &Workspace, record: &PerformanceRecord, path: &Path, what: &'static str) -> Result<PathBuf> {
    let full = ws.resolve(path);
    if full.is_file() {
        Ok(full)
    } else {
        Err(Error::MissingFile { id: record.id.clone(), what, path: full })
    }
}

fn stem(ws: &Workspace, record: &PerformanceRecord) -> Result<AudioBuffer> {
    read_wav(&existing(ws, record, &record.stem_path, "vocal stem")?)
}

/// Parse options for a record; an optional `vocal_part` manifest field names
/// the vocal part when it is not the first one.
fn parse_options(record: &PerformanceRecord) -> ParseOptions {
    ParseOptions { vocal_part: record.extra.get("vocal_part").and_then(|v| v.as_str()).map(str::to_owned) }
}

pub(super) fn load_score(ws: &Workspace, record: &PerformanceRecord) -> Result<ScoreDocument> {
    let path = existing(ws, record, &record.score_path, "score")?;
    parse_musicxml_with(&read_bytes(&path)?, &parse_options(record))
}

pub(super) fn load_aligned(ws: &Workspace, record: &PerformanceRecord) -> Result<Vec<AlignedNote>> {
    let path = ws.aligned_path(&record.id);
    if !path.is_file() {
        return Err(Error::MissingFile { id: record.id.clone(), what: "alignment", path });
    }
    read_json(&path)
}

fn features(ws: &Workspace, record: &PerformanceRecord, opts: &StageOptions) -> Result<()> {
    let audio = stem(ws, record)?;
    let mel_config = LogMelConfig::default();
    let mel = log_mel(&resample(&audio, mel_config.sample_rate)?, &mel_config)?.features;
    let bark = bark_specific_loudness(&resample(&audio, LOUDNESS_RATE)?, opts.calibration_db_spl_fs)?;
    write_features(&ws.logmel_path(&record.id), &mel)?;
    write_features(&ws.bark_path(&record.id), &bark)
}

/// Returns the alignment score, or `None` when no voiced frame falls inside a note.
fn align(ws: &Workspace, record: &PerformanceRecord, opts: &StageOptions) -> Result<Option<f64>> {
    let score = load_score(ws, record)?;
    let vocals = stem(ws, record)?;
    let alignment = match opts.align_source {
        AlignSource::Stem => align_score_to_audio(&score, &vocals, &opts.align)?,
        AlignSource::Mix => {
            let mix = read_wav(&existing(ws, record, &record.audio_path, "audio")?)?;
            align_score_to_audio(&score, &mix, &opts.align)?
        }
    };
    let external = ws.f0_input_path(&record.id);
    let f0 = if external.is_file() { read_f0_csv(&external)? } else { extract_f0(&vocals)? };
    let quality = match validate_alignment(&alignment.notes, &f0) {
        Ok(q) => Some(q),
        Err(vocadyn_core::Error::UndefinedScore) => None,
        Err(e) => return Err(e.into()),
    };
    write_f0_csv(&ws.f0_path(&record.id), &f0)?;
    write_json(&ws.aligned_path(&record.id), &alignment.notes)?;
    Ok(quality)
}

fn label(ws: &Workspace, record: &PerformanceRecord) -> Result<()> {
    let score = load_score(ws, record)?;
    let notes = propagate(&score)?.labels;
    let aligned = load_aligned(ws, record)?;
    let read = |path: PathBuf| {
        if path.is_file() {
            read_features(&path)
        } else {
            Err(Error::MissingFile { id: record.id.clone(), what: "features", path })
        }
    };
    let mel = read(ws.logmel_path(&record.id))?;
    let bark = read(ws.bark_path(&record.id))?;
    for config in &LABEL_CONFIGS {
        let base = if config.kind == FeatureKind::BarkLoudness { &bark } else { &mel };
        let pooled = downsample_time(base, config.factor)?;
        let labels = frames_for_features(&aligned, &notes, &pooled, config.hop_seconds)?;
        write_features(&ws.features_path(&record.id, config), &pooled)?;
        write_labels(&ws.labels_path(&record.id, config), &labels)?;
    }
    Ok(())
}
