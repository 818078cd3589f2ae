use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{accumulate_window, forward};
use super::{ModelParams, Scalar};
use crate::dsp::FeatureMatrix;
use crate::error::{Error, Result};
use crate::labeling::{FrameLabelSequence, MASKED, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    /// Windows per optimizer step.
    pub batch_size: usize,
    /// Seeds the window order.
    pub seed: u64,
    /// Per-class loss weights, e.g. from [`class_frequency_weights`].
    pub class_weights: Option<[f64; NUM_CLASSES]>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 30,
            batch_size: 4,
            seed: 0,
            class_weights: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrainItem<'a> {
    pub features: &'a FeatureMatrix,
    pub labels: &'a FrameLabelSequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub masked_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput<T> {
    pub params: ModelParams<T>,
    pub history: Vec<EpochLog>,
}

pub struct Adam<T> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    m: ModelParams<T>,
    v: ModelParams<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &ModelParams<T>, config: &TrainConfig) -> Self {
        Adam {
            learning_rate: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            step: 0,
            m: ModelParams::zeros(&params.config),
            v: ModelParams::zeros(&params.config),
        }
    }

    pub fn step(&mut self, params: &mut ModelParams<T>, grads: &ModelParams<T>) {
        self.step += 1;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let c1 = T::of(1.0 - num_traits::Float::powi(self.beta1, self.step));
        let c2 = T::of(1.0 - num_traits::Float::powi(self.beta2, self.step));
        let (lr, eps) = (T::of(self.learning_rate), T::of(self.epsilon));
        for (name, p) in params.tensors.iter_mut() {
            let g = &grads.tensors[name].data;
            let m = &mut self.m.tensors.get_mut(name).expect("tensor").data;
            let v = &mut self.v.tensors.get_mut(name).expect("tensor").data;
            for i in 0..p.data.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p.data[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

/// Inverse class frequency over labeled frames, scaled to average 1 over the
/// classes present. Absent classes get weight 0.
pub fn class_frequency_weights(items: &[TrainItem<'_>]) -> [f64; NUM_CLASSES] {
    let mut counts = [0u64; NUM_CLASSES];
    for item in items {
        for &c in &item.labels.classes {
            if (c as usize) < NUM_CLASSES {
                counts[c as usize] += 1;
            }
        }
    }
    let mut w = [0.0; NUM_CLASSES];
    let present = counts.iter().filter(|&&c| c > 0).count();
    if present == 0 {
        return w;
    }
    for c in 0..NUM_CLASSES {
        if counts[c] > 0 {
            w[c] = 1.0 / counts[c] as f64;
        }
    }
    let mean = w.iter().sum::<f64>() / present as f64;
    w.map(|v| v / mean)
}

/// Frames `start..start + len` zero-padded to `frames` rows.
fn window<T: Scalar>(features: &FeatureMatrix, start: usize, len: usize, frames: usize) -> Vec<T> {
    let mut x: Vec<T> =
        features.values[start * features.cols..(start + len) * features.cols].iter().map(|&v| T::of(v as f64)).collect();
    x.resize(frames * features.cols, T::zero());
    x
}

fn argmax(row: &[impl Scalar]) -> u8 {
    let mut best = 0;
    for c in 1..row.len() {
        if row[c] > row[best] {
            best = c;
        }
    }
    best as u8
}

fn check_bins<T: Scalar>(params: &ModelParams<T>, features: &FeatureMatrix) -> Result<()> {
    if features.cols != params.config.input_bins {
        return Err(Error::BinMismatch { expected: params.config.input_bins, actual: features.cols });
    }
    Ok(())
}

/// Trains with Adam on masked cross-entropy. Each item is cut into abutting
/// windows of `sequence_length` frames, the last one zero-padded with its
/// padding masked; windows without labeled frames are skipped. `on_epoch` sees each epoch's mean loss and accuracy over labeled
/// frames, measured before each step's update.
pub fn train<T: Scalar>(
    mut params: ModelParams<T>,
    items: &[TrainItem<'_>],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutput<T>> {
    if items.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if config.batch_size == 0 || !(config.learning_rate >= 0.0) {
        return Err(Error::InvalidConfig("batch_size must be positive and learning_rate non-negative".into()));
    }
    let seq = params.config.sequence_length;
    let mut windows = Vec::new();
    for (idx, item) in items.iter().enumerate() {
        check_bins(&params, item.features)?;
        item.labels.check_features(item.features)?;
        items[0].labels.check_hop(item.features.hop_seconds)?;
        let frames = item.features.rows;
        let mut start = 0;
        while start < frames {
            let len = seq.min(frames - start);
            if item.labels.classes[start..start + len].iter().any(|&c| c != MASKED) {
                windows.push((idx, start, len));
            }
            start += len;
        }
    }
    if windows.is_empty() {
        return Err(Error::AllMasked);
    }
    let weight = |c: u8| config.class_weights.map_or(1.0, |w| w[c as usize]);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(&params, config);
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        windows.shuffle(&mut rng);
        let (mut loss_sum, mut weight_sum) = (0.0, 0.0);
        let (mut hits, mut labeled) = (0u64, 0u64);
        for batch in windows.chunks(config.batch_size) {
            let denom: f64 = batch
                .iter()
                .flat_map(|&(i, s, l)| items[i].labels.classes[s..s + l].iter())
                .filter(|&&c| c != MASKED)
                .map(|&c| weight(c))
                .sum();
            if denom <= 0.0 {
                continue;
            }
            let mut grads = ModelParams::zeros(&params.config);
            for &(i, s, l) in batch {
                let x = window::<T>(items[i].features, s, l, seq);
                let mut labels = items[i].labels.classes[s..s + l].to_vec();
                labels.resize(seq, MASKED);
                let (loss, w, fw) =
                    accumulate_window(&params, &x, &labels, l, config.class_weights.as_ref(), 1.0 / denom, &mut grads)?;
                loss_sum += loss;
                weight_sum += w;
                for (t, &y) in labels.iter().enumerate() {
                    if y != MASKED {
                        labeled += 1;
                        hits += (argmax(&fw.logits[t * NUM_CLASSES..(t + 1) * NUM_CLASSES]) == y) as u64;
                    }
                }
            }
            adam.step(&mut params, &grads);
        }
        let log = EpochLog {
            epoch: epoch + 1,
            loss: if weight_sum > 0.0 { loss_sum / weight_sum } else { f64::NAN },
            masked_accuracy: if labeled > 0 { hits as f64 / labeled as f64 } else { 0.0 },
        };
        on_epoch(&log);
        history.push(log);
    }
    Ok(TrainOutput { params, history })
}

/// Logits for `len` frames starting at `start`, run as one zero-padded and
/// masked window of `sequence_length` frames.
pub fn predict_window<T: Scalar>(params: &ModelParams<T>, features: &FeatureMatrix, start: usize, len: usize) -> Result<Vec<T>> {
    check_bins(params, features)?;
    let seq = params.config.sequence_length;
    if len == 0 || len > seq || start + len > features.rows {
        return Err(Error::BadTensor(alloc::format!("window {start}+{len} outside {} frames", features.rows)));
    }
    let x = window::<T>(features, start, len, seq);
    let mut logits = forward(params, &x, seq, len)?.logits;
    logits.truncate(len * NUM_CLASSES);
    Ok(logits)
}

/// Per-frame class predictions, computed over abutting windows of
/// `sequence_length` frames. Ties resolve to the lowest class index.
pub fn predict<T: Scalar>(params: &ModelParams<T>, features: &FeatureMatrix) -> Result<Vec<u8>> {
    check_bins(params, features)?;
    if features.rows == 0 {
        return Err(Error::EmptyInput("features"));
    }
    let seq = params.config.sequence_length;
    let mut out = Vec::with_capacity(features.rows);
    let mut start = 0;
    while start < features.rows {
        let len = seq.min(features.rows - start);
        let logits = predict_window(params, features, start, len)?;
        out.extend(logits.chunks(NUM_CLASSES).map(argmax));
        start += len;
    }
    Ok(out)
}
