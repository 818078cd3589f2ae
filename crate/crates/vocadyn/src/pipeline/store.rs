use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, PoisonError, RwLock};

use chrono::{SecondsFormat, Utc};

use crate::error::{Error, Result};
use crate::manifest::{self, Decision, PerformanceRecord, Status, Verdict};

/// Applies a review verdict to an aligned record.
pub fn apply_decision(
    records: &mut [PerformanceRecord],
    id: &str,
    verdict: Verdict,
    decision: Decision,
) -> Result<PerformanceRecord> {
    let record = records.iter_mut().find(|r| r.id == id).ok_or_else(|| Error::UnknownId(id.to_owned()))?;
    if record.status != Status::Aligned {
        return Err(Error::StageOrder {
            id: id.to_owned(),
            status: record.status,
            action: "a review decision",
            required: "aligned",
        });
    }
    record.status = match verdict {
        Verdict::Accept => Status::Accepted,
        Verdict::Reject => Status::Rejected,
    };
    record.decision = Some(decision);
    Ok(record.clone())
}

/// The manifest as shared by the review service. Readers take an immutable
/// snapshot; decisions go through a single writer that saves the file before
/// publishing the new snapshot.
#[derive(Debug)]
pub struct ManifestStore {
    path: PathBuf,
    snapshot: RwLock<Arc<Vec<PerformanceRecord>>>,
    writer: Mutex<()>,
}

impl ManifestStore {
    pub fn open(path: &Path) -> Result<Self> {
        let records = manifest::load(path)?;
        Ok(ManifestStore { path: path.to_path_buf(), snapshot: RwLock::new(Arc::new(records)), writer: Mutex::new(()) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn snapshot(&self) -> Arc<Vec<PerformanceRecord>> {
        self.snapshot.read().unwrap_or_else(PoisonError::into_inner).clone()
    }

    pub fn get(&self, id: &str) -> Option<PerformanceRecord> {
        self.snapshot().iter().find(|r| r.id == id).cloned()
    }

    pub fn record_decision(&self, id: &str, verdict: Verdict, note: &str, by: &str) -> Result<PerformanceRecord> {
        let _guard = self.writer.lock().unwrap_or_else(PoisonError::into_inner);
        let mut records = self.snapshot().as_ref().clone();
        let decision = Decision {
            by: by.to_owned(),
            at: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, false),
            note: note.to_owned(),
        };
        let updated = apply_decision(&mut records, id, verdict, decision)?;
        manifest::save(&self.path, &records)?;
        *self.snapshot.write().unwrap_or_else(PoisonError::into_inner) = Arc::new(records);
        Ok(updated)
    }
}
