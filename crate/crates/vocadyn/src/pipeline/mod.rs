//! Curation workflow over a manifest: stages, visualization, review decisions
//! and dataset export.
//!
//! Artifacts of record `id` live in `<data root>/artifacts/<id>/`. Relative
//! paths in the manifest resolve against the data root, which defaults to the
//! manifest's directory and can be overridden with `VOCADYN_DATA_ROOT`.

mod dataset;
mod export;
mod stages;
mod store;
mod visualize;

use std::path::{Path, PathBuf};

use vocadyn_core::dsp::loudness::LOUDNESS_HOP_SECONDS;
use vocadyn_core::dsp::{FeatureKind, LogMelConfig};

pub use dataset::{load_labeled, LabeledItem};
pub use export::{export_dataset, ConfigSummary, DatasetSummary};
pub use stages::{run_stage, run_stage_all, AlignSource, Stage, StageOptions};
pub use store::{apply_decision, ManifestStore};
pub use visualize::{
    build_visualization, DynamicsRegion, Envelope, F0Point, NoteRect, VisualizationBundle, DEFAULT_WIDTH,
};

pub const DATA_ROOT_ENV: &str = "VOCADYN_DATA_ROOT";

/// A training resolution: base features pooled by `factor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelConfig {
    pub tag: &'static str,
    pub kind: FeatureKind,
    pub factor: usize,
    pub hop_seconds: f64,
}

/// The four resolutions labels are produced at.
pub const LABEL_CONFIGS: [LabelConfig; 4] = [
    LabelConfig { tag: "bark_16ms", kind: FeatureKind::BarkLoudness, factor: 8, hop_seconds: 0.016 },
    LabelConfig { tag: "logmel_17.4ms", kind: FeatureKind::LogMel, factor: 3, hop_seconds: 0.0174 },
    LabelConfig { tag: "logmel_29ms", kind: FeatureKind::LogMel, factor: 5, hop_seconds: 0.029 },
    LabelConfig { tag: "bark_30ms", kind: FeatureKind::BarkLoudness, factor: 15, hop_seconds: 0.030 },
];

pub fn label_config(tag: &str) -> Option<LabelConfig> {
    LABEL_CONFIGS.iter().copied().find(|c| c.tag == tag)
}

impl LabelConfig {
    pub fn base_hop(&self) -> f64 {
        match self.kind {
            FeatureKind::BarkLoudness => LOUDNESS_HOP_SECONDS,
            _ => LogMelConfig::default().hop_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workspace {
    pub manifest_path: PathBuf,
    pub data_root: PathBuf,
}

impl Workspace {
    /// `data_root` defaults to the manifest's directory.
    pub fn new(manifest_path: impl Into<PathBuf>, data_root: Option<PathBuf>) -> Self {
        let manifest_path = manifest_path.into();
        let data_root = data_root.unwrap_or_else(|| match manifest_path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        });
        Workspace { manifest_path, data_root }
    }

    /// Reads the data root from `VOCADYN_DATA_ROOT` when set.
    pub fn from_env(manifest_path: impl Into<PathBuf>) -> Self {
        let root = std::env::var_os(DATA_ROOT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
        Workspace::new(manifest_path, root)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.data_root.join(path)
        }
    }

    pub fn artifact_dir(&self, id: &str) -> PathBuf {
        self.data_root.join("artifacts").join(id)
    }

    pub fn logmel_path(&self, id: &str) -> PathBuf {
        self.artifact_dir(id).join("logmel.dynf")
    }

    pub fn bark_path(&self, id: &str) -> PathBuf {
        self.artifact_dir(id).join("bark.dynf")
    }

    pub fn aligned_path(&self, id: &str) -> PathBuf {
        self.artifact_dir(id).join("aligned.json")
    }

    /// f0 track used for validation and display.
    pub fn f0_path(&self, id: &str) -> PathBuf {
        self.artifact_dir(id).join("f0.csv")
    }

    /// Externally produced f0 (e.g. from a neural tracker); preferred over YIN when present.
    pub fn f0_input_path(&self, id: &str) -> PathBuf {
        self.artifact_dir(id).join("f0_input.csv")
    }

    pub fn features_path(&self, id: &str, config: &LabelConfig) -> PathBuf {
        self.artifact_dir(id).join(format!("features_{}.dynf", config.tag))
    }

    pub fn labels_path(&self, id: &str, config: &LabelConfig) -> PathBuf {
        self.artifact_dir(id).join(format!("labels_{}.dynl", config.tag))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_hops_follow_from_pooling() {
        for c in LABEL_CONFIGS {
            assert!((c.base_hop() * c.factor as f64 - c.hop_seconds).abs() < 1e-9, "{}", c.tag);
        }
        assert_eq!(label_config("logmel_29ms").unwrap().factor, 5);
        assert!(label_config("nope").is_none());
    }

    #[test]
    fn paths_resolve_against_root() {
        let ws = Workspace::new("/data/manifest.json", None);
        assert_eq!(ws.data_root, PathBuf::from("/data"));
        assert_eq!(ws.resolve(Path::new("a/b.wav")), PathBuf::from("/data/a/b.wav"));
        assert_eq!(ws.resolve(Path::new("/x.wav")), PathBuf::from("/x.wav"));
        assert_eq!(ws.bark_path("r1"), PathBuf::from("/data/artifacts/r1/bark.dynf"));
        let ws = Workspace::new("manifest.json", Some("/root".into()));
        assert_eq!(ws.aligned_path("r"), PathBuf::from("/root/artifacts/r/aligned.json"));
        assert_eq!(Workspace::new("manifest.json", None).data_root, PathBuf::from("."));
    }
}
