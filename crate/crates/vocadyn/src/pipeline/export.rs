use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vocadyn_core::eval::duration_statistics;
use vocadyn_core::labeling::class_to_category;
use vocadyn_core::score::DynamicCategory;

use super::{Workspace, LABEL_CONFIGS};
use crate::error::{Error, IoContext, Result};
use crate::formats::{atomic_write, read_bytes, read_labels, write_json};
use crate::manifest::{PerformanceRecord, Status};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub hop_seconds: f64,
    pub class_frames: BTreeMap<DynamicCategory, u64>,
    pub class_seconds: BTreeMap<DynamicCategory, f64>,
    /// Labeled (unmasked) time across all records.
    pub total_hours: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub records: Vec<String>,
    pub configurations: BTreeMap<String, ConfigSummary>,
}

/// Copies features and labels of every labeled record to
/// `out_dir/<id>/` and writes `out_dir/summary.json`.
pub fn export_dataset(ws: &Workspace, records: &[PerformanceRecord], out_dir: &Path) -> Result<DatasetSummary> {
    let labeled: Vec<&PerformanceRecord> = records.iter().filter(|r| r.status == Status::Labeled).collect();
    if labeled.is_empty() {
        return Err(Error::NothingLabeled);
    }
    let mut configurations = BTreeMap::new();
    for config in &LABEL_CONFIGS {
        let mut files = Vec::with_capacity(labeled.len());
        for r in &labeled {
            let dir = out_dir.join(&r.id);
            std::fs::create_dir_all(&dir).at(&dir)?;
            let labels_path = ws.labels_path(&r.id, config);
            let features_path = ws.features_path(&r.id, config);
            for (src, what) in [(&labels_path, "labels"), (&features_path, "features")] {
                if !src.is_file() {
                    return Err(Error::MissingFile { id: r.id.clone(), what, path: src.clone() });
                }
                let name = src.file_name().expect("artifact paths have file names");
                atomic_write(&dir.join(name), &read_bytes(src)?)?;
            }
            files.push(read_labels(&labels_path)?);
        }
        let mut class_frames: BTreeMap<DynamicCategory, u64> = (0..10u8)
            .map(|c| (class_to_category(c).expect("ten classes"), 0))
            .collect();
        for f in &files {
            for &c in &f.classes {
                if let Some(cat) = class_to_category(c) {
                    *class_frames.get_mut(&cat).expect("all classes present") += 1;
                }
            }
        }
        let class_seconds = duration_statistics(&files);
        let total_hours = class_seconds.values().sum::<f64>() / 3600.0;
        configurations.insert(
            config.tag.to_owned(),
            ConfigSummary { hop_seconds: config.hop_seconds, class_frames, class_seconds, total_hours },
        );
    }
    let summary = DatasetSummary { records: labeled.iter().map(|r| r.id.clone()).collect(), configurations };
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}
