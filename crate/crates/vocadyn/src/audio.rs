//! WAV input and output. Multichannel input is averaged to mono.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use vocadyn_core::dsp::AudioBuffer;

use crate::error::{Error, IoContext, Result};
use crate::formats::atomic_write_with;

pub fn read_wav(path: &Path) -> Result<AudioBuffer> {
    let reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(source) => Error::Io { path: path.into(), source },
        other => Error::Format { path: path.into(), message: other.to_string() },
    })?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader.into_samples::<f32>().collect::<Result<_, _>>()?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            reader.into_samples::<i32>().map(|s| s.map(|v| (v as f64 * scale) as f32)).collect::<Result<_, _>>()?
        }
        (format, bits) => {
            return Err(Error::Format { path: path.into(), message: format!("unsupported sample format {format:?} {bits}-bit") })
        }
    };
    let mono = interleaved.chunks(channels).map(|frame| frame.iter().sum::<f32>() / channels as f32).collect();
    Ok(AudioBuffer::new(mono, spec.sample_rate)?)
}

/// Writes 32-bit float mono WAV, atomically.
pub fn write_wav(path: &Path, audio: &AudioBuffer) -> Result<()> {
    let spec = WavSpec { channels: 1, sample_rate: audio.sample_rate(), bits_per_sample: 32, sample_format: SampleFormat::Float };
    atomic_write_with(path, |file| {
        let mut w = WavWriter::new(std::io::BufWriter::new(file), spec).map_err(to_io)?;
        for &s in audio.samples() {
            w.write_sample(s).map_err(to_io)?;
        }
        w.finalize().map_err(to_io)
    })
    .at(path)
}

fn to_io(e: hound::Error) -> std::io::Error {
    match e {
        hound::Error::IoError(e) => e,
        other => std::io::Error::other(other.to_string()),
    }
}
