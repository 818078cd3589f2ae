//! Core algorithms for curating and modelling musical dynamics in singing voice.
//!
//! Everything in this crate is pure computation over in-memory values and
//! builds without `std` (an allocator is required):
//!
//! - [`score`]: score model, dynamics propagation onto vocal notes, corpus filters.
//! - [`dsp`]: resampling, log-Mel spectra, time-varying Zwicker specific loudness,
//!   temporal pooling.
//! - [`align`]: chroma features, DTW, score-to-audio alignment, f0 tracking and an
//!   alignment quality score.
//! - [`labeling`]: frame-wise 10-class targets from aligned notes.
//! - [`model`]: multi-scale CNN with multi-head self-attention, hand-written
//!   backpropagation and Adam training.
//! - [`eval`]: exact and relaxed accuracies, confusion matrices, report tables.
//! - [`synth`]: additive renditions of scores, used for synthetic end-to-end checks.
//!
//! File formats, audio decoding, the curation pipeline and the CLI live in the
//! `vocadyn` crate.

#![no_std]
#![warn(clippy::all)]
// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod align;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod labeling;
pub mod model;
pub mod score;
pub mod synth;

pub use error::{Error, Result};
