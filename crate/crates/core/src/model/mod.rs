//! Frame-wise dynamics classifier: multi-scale temporal convolutions followed
//! by multi-head self-attention.
//!
//! Layers, for an input window of `L` frames by `B` bins:
//!
//! | name            | shape                    | operation                              |
//! |-----------------|--------------------------|----------------------------------------|
//! | `embed`         | `[C0, B]`                | per-frame linear embedding             |
//! | `msconv.{s}`    | `[C0, C0, k_s]`          | temporal conv per scale, ReLU          |
//! | `fuse`          | `[C1, S*C0, 3]`          | conv over concatenated scales, ReLU    |
//! | `proj`          | `[A, C1]`                | linear to attention width              |
//! | `attn.{q,k,v}`  | `[A, A]`                 | multi-head self-attention, residual    |
//! | `attn.out`      | `[A, A]`                 |                                        |
//! | `head`          | `[10, A]`                | per-frame class logits                 |
//!
//! Every layer has a bias. Convolutions pad by repeating the edge frames so a
//! constant input stays constant along time. Padded frames at the end of a
//! window are excluded as attention keys.
//!
//! Parameter count: `C0(B+1) + sum_s (k_s C0^2 + C0) + 3 S C0 C1 + C1 + C1 A + A
//! + 4(A^2 + A) + 10 A + 10`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::NUM_CLASSES;

mod net;
mod train;

pub use net::{forward, loss_and_gradients, masked_cross_entropy, ForwardOutput};
pub use train::{
    class_frequency_weights, predict, predict_window, train, Adam, EpochLog, TrainConfig, TrainItem, TrainOutput,
};

/// Floating point type the network runs in.
pub trait Scalar:
    Float
    + Default
    + core::iter::Sum
    + core::ops::AddAssign
    + core::ops::SubAssign
    + core::ops::MulAssign
    + core::fmt::Debug
    + Send
    + Sync
    + 'static
{
    fn of(v: f64) -> Self;
    fn f64(self) -> f64;
}

impl Scalar for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }
    fn f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_bins: usize,
    pub conv_scales: Vec<usize>,
    /// Channels of the per-scale stage and the fusion stage.
    pub channels: Vec<usize>,
    pub attention_heads: usize,
    pub attention_dim: usize,
    pub classes: usize,
    pub sequence_length: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_bins: 240,
            conv_scales: alloc::vec![3, 7, 15],
            channels: alloc::vec![16, 32],
            attention_heads: 4,
            attention_dim: 64,
            classes: NUM_CLASSES,
            sequence_length: 4096,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.input_bins == 0 {
            return bad("input_bins must be positive".into());
        }
        if self.conv_scales.is_empty() || self.conv_scales.contains(&0) {
            return bad(format!("conv_scales {:?} must be non-empty and positive", self.conv_scales));
        }
        if self.channels.len() != 2 || self.channels.contains(&0) {
            return bad(format!("channels {:?} must be two positive sizes", self.channels));
        }
        if self.attention_heads == 0 || self.attention_dim == 0 || !self.attention_dim.is_multiple_of(self.attention_heads) {
            return bad(format!(
                "attention_dim {} must be a positive multiple of attention_heads {}",
                self.attention_dim, self.attention_heads
            ));
        }
        if self.classes != NUM_CLASSES {
            return bad(format!("classes must be {NUM_CLASSES}, got {}", self.classes));
        }
        if self.sequence_length == 0 {
            return bad("sequence_length must be positive".into());
        }
        Ok(())
    }

    pub fn c0(&self) -> usize {
        self.channels[0]
    }

    pub fn c1(&self) -> usize {
        self.channels[1]
    }

    /// Tensor names and shapes in initialization order.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let (b, c0, c1, a) = (self.input_bins, self.c0(), self.c1(), self.attention_dim);
        let mut out = alloc::vec![("embed.weight".into(), alloc::vec![c0, b]), ("embed.bias".into(), alloc::vec![c0])];
        for (s, &k) in self.conv_scales.iter().enumerate() {
            out.push((format!("msconv.{s}.weight"), alloc::vec![c0, c0, k]));
            out.push((format!("msconv.{s}.bias"), alloc::vec![c0]));
        }
        let cat = c0 * self.conv_scales.len();
        out.push(("fuse.weight".into(), alloc::vec![c1, cat, 3]));
        out.push(("fuse.bias".into(), alloc::vec![c1]));
        out.push(("proj.weight".into(), alloc::vec![a, c1]));
        out.push(("proj.bias".into(), alloc::vec![a]));
        for m in ["q", "k", "v", "out"] {
            out.push((format!("attn.{m}.weight"), alloc::vec![a, a]));
            out.push((format!("attn.{m}.bias"), alloc::vec![a]));
        }
        out.push(("head.weight".into(), alloc::vec![self.classes, a]));
        out.push(("head.bias".into(), alloc::vec![self.classes]));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.layout().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: alloc::vec![T::zero(); n] }
    }
}

/// Named tensors of a model (or gradients, or optimizer moments).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub config: ModelConfig,
    pub tensors: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(config: &ModelConfig) -> Self {
        let tensors = config.layout().into_iter().map(|(n, s)| (n, Tensor::zeros(s))).collect();
        ModelParams { config: config.clone(), tensors }
    }

    pub fn get(&self, name: &str) -> &[T] {
        &self.tensors[name].data
    }

    pub fn get_mut(&mut self, name: &str) -> &mut [T] {
        &mut self.tensors.get_mut(name).expect("tensor exists").data
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.values().map(|t| t.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.values().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            config: self.config.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|(n, t)| (n.clone(), Tensor { shape: t.shape.clone(), data: t.data.iter().map(|v| U::of(v.f64())).collect() }))
                .collect(),
        }
    }

    /// Builds params from named tensors, checking names and shapes against the config.
    pub fn from_tensors(config: ModelConfig, tensors: BTreeMap<String, Tensor<T>>) -> Result<Self> {
        config.validate()?;
        let layout = config.layout();
        if layout.len() != tensors.len() {
            return Err(Error::BadTensor(format!("expected {} tensors, got {}", layout.len(), tensors.len())));
        }
        for (name, shape) in &layout {
            match tensors.get(name) {
                None => return Err(Error::BadTensor(format!("missing tensor {name}"))),
                Some(t) if &t.shape != shape || t.data.len() != shape.iter().product::<usize>() => {
                    return Err(Error::BadTensor(format!("tensor {name} has shape {:?}, expected {shape:?}", t.shape)))
                }
                Some(t) if !t.data.iter().all(|v| v.is_finite()) => {
                    return Err(Error::BadTensor(format!("tensor {name} has non-finite values")))
                }
                _ => {}
            }
        }
        Ok(ModelParams { config, tensors })
    }
}

/// Uniform `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` for weights and biases, drawn
/// in layout order from a ChaCha stream seeded with `config.seed`.
pub fn init_model<T: Scalar>(config: &ModelConfig) -> Result<ModelParams<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut tensors = BTreeMap::new();
    let layout = config.layout();
    for (idx, (name, shape)) in layout.iter().enumerate() {
        // a bias shares the fan-in of the weight before it
        let weight_shape = if name.ends_with(".bias") { &layout[idx - 1].1 } else { shape };
        let fan_in: usize = weight_shape[1..].iter().product();
        let bound = 1.0 / Float::sqrt(fan_in as f64);
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| T::of(rng.random_range(-bound..bound))).collect();
        tensors.insert(name.clone(), Tensor { shape: shape.clone(), data });
    }
    Ok(ModelParams { config: config.clone(), tensors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_parameter_count() {
        let c = ModelConfig::default();
        // embed 3856, scales 6448, fuse 4640, proj 2112, attention 16640, head 650
        let embed = 16 * 240 + 16;
        let scales = (3 + 7 + 15) * 16 * 16 + 3 * 16;
        let fuse = 3 * 48 * 32 + 32;
        let proj = 32 * 64 + 64;
        let attn = 4 * (64 * 64 + 64);
        let head = 64 * 10 + 10;
        assert_eq!(c.parameter_count(), embed + scales + fuse + proj + attn + head);
        assert_eq!(c.parameter_count(), 34346);
        let p = init_model::<f32>(&c).unwrap();
        assert_eq!(p.parameter_count(), 34346);
    }

    #[test]
    fn init_is_seeded() {
        let c = ModelConfig::default();
        let a = init_model::<f32>(&c).unwrap();
        let b = init_model::<f32>(&c).unwrap();
        assert_eq!(a, b);
        let d = init_model::<f32>(&ModelConfig { seed: 1, ..c }).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn init_bounds() {
        let c = ModelConfig::default();
        let p = init_model::<f64>(&c).unwrap();
        let bound = 1.0 / (240f64).sqrt();
        assert!(p.get("embed.weight").iter().all(|v| v.abs() <= bound));
        let bound = 1.0 / (16.0 * 15.0f64).sqrt();
        assert!(p.get("msconv.2.bias").iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn config_validation() {
        let ok = ModelConfig::default();
        assert!(ok.validate().is_ok());
        assert!(ModelConfig { attention_dim: 62, ..ok.clone() }.validate().is_err());
        assert!(ModelConfig { classes: 9, ..ok.clone() }.validate().is_err());
        assert!(ModelConfig { channels: alloc::vec![16], ..ok.clone() }.validate().is_err());
        assert!(ModelConfig { conv_scales: alloc::vec![], ..ok }.validate().is_err());
    }
}
