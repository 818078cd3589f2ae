//! Perceptual input features and the signal plumbing they need.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) mod fft;
pub mod loudness;
pub mod mel;
pub mod resample;
pub mod stft;

pub use loudness::{bark_specific_loudness, time_varying_loudness, FieldType, LoudnessConfig, LoudnessTrack};
pub use mel::{log_mel, LogMel, LogMelConfig};
pub use resample::resample;

/// Mono audio with finite samples, nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::NonPositiveRate);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidAudio(format!("non-finite sample at index {i}")));
        }
        Ok(AudioBuffer { samples, sample_rate })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(alloc::vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    LogMel,
    BarkLoudness,
    Chroma,
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::LogMel => "log_mel",
            FeatureKind::BarkLoudness => "bark_loudness",
            FeatureKind::Chroma => "chroma",
        }
    }
}

/// Number of Bark bins: 0.1 Bark resolution over 0..24 Bark.
pub const BARK_BINS: usize = 240;

/// Frames x bins matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub kind: FeatureKind,
    pub rows: usize,
    pub cols: usize,
    pub hop_seconds: f64,
    pub source_rate: u32,
    pub values: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(
        kind: FeatureKind,
        rows: usize,
        cols: usize,
        hop_seconds: f64,
        source_rate: u32,
        values: Vec<f32>,
    ) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::LengthMismatch(values.len(), rows * cols));
        }
        if !(hop_seconds > 0.0) {
            return Err(Error::InvalidConfig(format!("hop {hop_seconds} must be positive")));
        }
        if kind == FeatureKind::BarkLoudness && cols != BARK_BINS {
            return Err(Error::InvalidConfig(format!("bark features need {BARK_BINS} bins, got {cols}")));
        }
        Ok(FeatureMatrix { kind, rows, cols, hop_seconds, source_rate, values })
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.values[t * self.cols..(t + 1) * self.cols]
    }

    pub fn get(&self, t: usize, bin: usize) -> f32 {
        self.values[t * self.cols + bin]
    }

    pub fn duration(&self) -> f64 {
        self.rows as f64 * self.hop_seconds
    }
}

/// Non-overlapping mean pooling over `factor` frames.
///
/// A trailing partial group is averaged over its actual length, so the output
/// has `ceil(rows / factor)` frames and a hop of `hop_seconds * factor`.
pub fn downsample_time(spec: &FeatureMatrix, factor: usize) -> Result<FeatureMatrix> {
    if factor == 0 {
        return Err(Error::ZeroFactor);
    }
    if factor == 1 {
        return Ok(spec.clone());
    }
    let rows = spec.rows.div_ceil(factor);
    let mut values = Vec::with_capacity(rows * spec.cols);
    let mut acc = alloc::vec![0.0f64; spec.cols];
    for g in 0..rows {
        let start = g * factor;
        let end = (start + factor).min(spec.rows);
        acc.iter_mut().for_each(|a| *a = 0.0);
        for t in start..end {
            for (a, &v) in acc.iter_mut().zip(spec.row(t)) {
                *a += v as f64;
            }
        }
        let n = (end - start) as f64;
        values.extend(acc.iter().map(|a| (a / n) as f32));
    }
    FeatureMatrix::new(spec.kind, rows, spec.cols, spec.hop_seconds * factor as f64, spec.source_rate, values)
}
