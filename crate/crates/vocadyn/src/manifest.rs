//! The manifest: a JSON array of performance records, the single source of
//! truth for curation status.
//!
//! Saving writes the canonical form (two-space indented JSON, known fields in
//! declaration order, unknown fields after them sorted by key, trailing
//! newline) through a temporary file and a rename.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{atomic_write, read_bytes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pending,
    FeaturesDone,
    Aligned,
    Accepted,
    Rejected,
    Labeled,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pending => "pending",
            Status::FeaturesDone => "features_done",
            Status::Aligned => "aligned",
            Status::Accepted => "accepted",
            Status::Rejected => "rejected",
            Status::Labeled => "labeled",
        }
    }

    /// Whether the record has been through feature extraction.
    pub fn has_features(self) -> bool {
        self != Status::Pending
    }

    /// Whether the record has an alignment.
    pub fn has_alignment(self) -> bool {
        !matches!(self, Status::Pending | Status::FeaturesDone)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub by: String,
    /// RFC 3339 timestamp.
    pub at: String,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRecord {
    pub id: String,
    pub score_path: PathBuf,
    pub audio_path: PathBuf,
    pub stem_path: PathBuf,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
    /// Fields this version does not know about, kept verbatim.
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl PerformanceRecord {
    pub fn new(id: impl Into<String>, score: impl Into<PathBuf>, audio: impl Into<PathBuf>, stem: impl Into<PathBuf>) -> Self {
        PerformanceRecord {
            id: id.into(),
            score_path: score.into(),
            audio_path: audio.into(),
            stem_path: stem.into(),
            status: Status::Pending,
            alignment_score: None,
            decision: None,
            extra: Default::default(),
        }
    }
}

pub fn parse_manifest(bytes: &[u8], path: &Path) -> Result<Vec<PerformanceRecord>> {
    let records: Vec<PerformanceRecord> =
        serde_json::from_slice(bytes).map_err(|source| Error::Json { path: path.into(), source })?;
    for (i, r) in records.iter().enumerate() {
        if records[..i].iter().any(|o| o.id == r.id) {
            return Err(Error::DuplicateId(r.id.clone()));
        }
    }
    Ok(records)
}

pub fn encode_manifest(records: &[PerformanceRecord]) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(records).expect("records serialize");
    bytes.push(b'\n');
    bytes
}

pub fn load(path: &Path) -> Result<Vec<PerformanceRecord>> {
    parse_manifest(&read_bytes(path)?, path)
}

pub fn save(path: &Path, records: &[PerformanceRecord]) -> Result<()> {
    for (i, r) in records.iter().enumerate() {
        if records[..i].iter().any(|o| o.id == r.id) {
            return Err(Error::DuplicateId(r.id.clone()));
        }
    }
    atomic_write(path, &encode_manifest(records))
}
