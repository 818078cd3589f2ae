use vocadyn_core::dsp::FeatureMatrix;
use vocadyn_core::labeling::FrameLabelSequence;

use super::{LabelConfig, Workspace};
use crate::error::{Error, Result};
use crate::formats::{read_features, read_labels};
use crate::manifest::{PerformanceRecord, Status};

/// Features and labels of one labeled record at one resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledItem {
    pub id: String,
    pub features: FeatureMatrix,
    pub labels: FrameLabelSequence,
}

/// Loads labeled records at `config`. With `ids` empty every labeled record is
/// used; named records must exist and be labeled.
pub fn load_labeled(
    ws: &Workspace,
    records: &[PerformanceRecord],
    config: &LabelConfig,
    ids: &[String],
) -> Result<Vec<LabeledItem>> {
    let selected: Vec<&PerformanceRecord> = if ids.is_empty() {
        records.iter().filter(|r| r.status == Status::Labeled).collect()
    } else {
        ids.iter()
            .map(|id| records.iter().find(|r| &r.id == id).ok_or_else(|| Error::UnknownId(id.clone())))
            .collect::<Result<_>>()?
    };
    if selected.is_empty() {
        return Err(Error::NothingLabeled);
    }
    selected
        .into_iter()
        .map(|r| {
            if r.status != Status::Labeled {
                return Err(Error::StageOrder { id: r.id.clone(), status: r.status, action: "loading labels", required: "labeled" });
            }
            let features = read_features(&ws.features_path(&r.id, config))?;
            let labels = read_labels(&ws.labels_path(&r.id, config))?;
            labels.check_features(&features)?;
            Ok(LabeledItem { id: r.id.clone(), features, labels })
        })
        .collect()
}
