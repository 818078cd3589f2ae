//! Dataset curation and model tooling for singing-voice dynamics.
//!
//! This crate adds the parts that need `std` on top of `vocadyn-core`: audio
//! and MusicXML input, the binary artifact formats, the manifest-driven
//! curation pipeline and the review HTTP service. The `vocadyn` binary
//! exposes all of it on the command line.

pub mod audio;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod musicxml;
pub mod pipeline;
pub mod server;

pub use error::{Error, Result};
pub use vocadyn_core as core;
