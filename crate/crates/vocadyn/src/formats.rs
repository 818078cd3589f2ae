//! On-disk formats. All integers and floats are little-endian.
//!
//! | file  | layout                                                                   |
//! |-------|--------------------------------------------------------------------------|
//! | DYNF  | `"DYNF"`, version u32, kind u8 (0 log-Mel, 1 Bark, 2 chroma), rows u32, cols u32, hop f64, source rate u32, rows*cols f32 row-major |
//! | DYNL  | `"DYNL"`, version u32, frames u32, hop f64, one class u8 per frame (255 masked) |
//! | DYNM  | `"DYNM"`, version u32, config JSON length u32, config JSON, then tensors to end of file: name length u16, name, rank u8, dims u32 each, f32 data |
//!
//! f0 tracks are CSV with a `time,frequency,confidence` header.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use vocadyn_core::align::F0Track;
use vocadyn_core::dsp::{FeatureKind, FeatureMatrix};
use vocadyn_core::labeling::FrameLabelSequence;
use vocadyn_core::model::{ModelConfig, ModelParams, Tensor};

use crate::error::{Error, IoContext, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Writes through a temporary file in the target directory, then renames it
/// into place, so readers never see a partial file.
pub fn atomic_write_with(path: &Path, write: impl FnOnce(&mut File) -> std::io::Result<()>) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    write(tmp.as_file_mut())?;
    tmp.as_file_mut().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    atomic_write_with(path, |f| f.write_all(bytes)).at(path)
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).at(path)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable value");
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json { path: path.into(), source })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

type Decode<T> = std::result::Result<T, String>;

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Decode<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(format!("truncated: needed {n} bytes at offset {}", self.pos)),
        }
    }

    fn array<const N: usize>(&mut self) -> Decode<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Decode<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Decode<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Decode<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Decode<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn f32s(&mut self, n: usize) -> Decode<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or("size overflow")?)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }

    fn header(&mut self, magic: &[u8; 4]) -> Decode<()> {
        let found = self.array::<4>()?;
        if &found != magic {
            return Err(format!("bad magic {:?}, expected {:?}", String::from_utf8_lossy(&found), String::from_utf8_lossy(magic)));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(format!("unsupported version {version}"));
        }
        Ok(())
    }

    fn finish(&self) -> Decode<()> {
        if self.pos != self.bytes.len() {
            return Err(format!("{} trailing bytes", self.bytes.len() - self.pos));
        }
        Ok(())
    }

    fn at_end(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

fn kind_code(kind: FeatureKind) -> u8 {
    match kind {
        FeatureKind::LogMel => 0,
        FeatureKind::BarkLoudness => 1,
        FeatureKind::Chroma => 2,
    }
}

pub fn encode_features(m: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(29 + m.values.len() * 4);
    out.extend_from_slice(b"DYNF");
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(kind_code(m.kind));
    out.extend_from_slice(&(m.rows as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols as u32).to_le_bytes());
    out.extend_from_slice(&m.hop_seconds.to_le_bytes());
    out.extend_from_slice(&m.source_rate.to_le_bytes());
    for v in &m.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8]) -> Decode<FeatureMatrix> {
    let mut r = Reader::new(bytes);
    r.header(b"DYNF")?;
    let kind = match r.u8()? {
        0 => FeatureKind::LogMel,
        1 => FeatureKind::BarkLoudness,
        2 => FeatureKind::Chroma,
        k => return Err(format!("unknown feature kind {k}")),
    };
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let hop = r.f64()?;
    let rate = r.u32()?;
    let values = r.f32s(rows.checked_mul(cols).ok_or("size overflow")?)?;
    r.finish()?;
    FeatureMatrix::new(kind, rows, cols, hop, rate, values).map_err(|e| e.to_string())
}

pub fn encode_labels(l: &FrameLabelSequence) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + l.classes.len());
    out.extend_from_slice(b"DYNL");
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(l.classes.len() as u32).to_le_bytes());
    out.extend_from_slice(&l.hop_seconds.to_le_bytes());
    out.extend_from_slice(&l.classes);
    out
}

pub fn decode_labels(bytes: &[u8]) -> Decode<FrameLabelSequence> {
    let mut r = Reader::new(bytes);
    r.header(b"DYNL")?;
    let frames = r.u32()? as usize;
    let hop_seconds = r.f64()?;
    if hop_seconds.is_nan() || hop_seconds <= 0.0 {
        return Err(format!("hop {hop_seconds} must be positive"));
    }
    let classes = r.take(frames)?.to_vec();
    if let Some(c) = classes.iter().find(|&&c| c != vocadyn_core::labeling::MASKED && c as usize >= 10) {
        return Err(format!("invalid class {c}"));
    }
    r.finish()?;
    Ok(FrameLabelSequence { classes, hop_seconds })
}

pub fn encode_checkpoint(params: &ModelParams<f32>) -> Vec<u8> {
    let config = serde_json::to_vec(&params.config).expect("config serializes");
    let mut out = Vec::new();
    out.extend_from_slice(b"DYNM");
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(&config);
    for (name, t) in &params.tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.shape.len() as u8);
        for &d in &t.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Decode<ModelParams<f32>> {
    let mut r = Reader::new(bytes);
    r.header(b"DYNM")?;
    let len = r.u32()? as usize;
    let config: ModelConfig = serde_json::from_slice(r.take(len)?).map_err(|e| format!("config: {e}"))?;
    let mut tensors = BTreeMap::new();
    while !r.at_end() {
        let n = r.u16()? as usize;
        let name = String::from_utf8(r.take(n)?.to_vec()).map_err(|_| "tensor name is not UTF-8".to_string())?;
        let rank = r.u8()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Decode<Vec<_>>>()?;
        let count = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or("size overflow")?;
        let data = r.f32s(count)?;
        if tensors.insert(name.clone(), Tensor { shape, data }).is_some() {
            return Err(format!("duplicate tensor {name}"));
        }
    }
    ModelParams::from_tensors(config, tensors).map_err(|e| e.to_string())
}

fn format_err(path: &Path) -> impl FnOnce(String) -> Error + '_ {
    move |message| Error::Format { path: path.into(), message }
}

pub fn write_features(path: &Path, m: &FeatureMatrix) -> Result<()> {
    atomic_write(path, &encode_features(m))
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    decode_features(&read_bytes(path)?).map_err(format_err(path))
}

pub fn write_labels(path: &Path, l: &FrameLabelSequence) -> Result<()> {
    atomic_write(path, &encode_labels(l))
}

pub fn read_labels(path: &Path) -> Result<FrameLabelSequence> {
    decode_labels(&read_bytes(path)?).map_err(format_err(path))
}

pub fn write_checkpoint(path: &Path, params: &ModelParams<f32>) -> Result<()> {
    atomic_write(path, &encode_checkpoint(params))
}

pub fn read_checkpoint(path: &Path) -> Result<ModelParams<f32>> {
    decode_checkpoint(&read_bytes(path)?).map_err(format_err(path))
}

pub fn encode_f0_csv(track: &F0Track) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time", "frequency", "confidence"]).expect("in-memory write");
    for i in 0..track.len() {
        w.serialize((track.time(i), track.f0[i], track.confidence[i])).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is UTF-8")
}

/// Rows of `time,frequency,confidence`. The header is optional.
pub fn decode_f0_csv(text: &str) -> Decode<Vec<(f64, f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        if i == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if record.len() != 3 {
            return Err(format!("line {}: expected 3 fields, got {}", i + 1, record.len()));
        }
        let field = |k: usize| record[k].parse::<f64>().map_err(|e| format!("line {}: {e}", i + 1));
        rows.push((field(0)?, field(1)?, field(2)?));
    }
    Ok(rows)
}

pub fn read_f0_csv(path: &Path) -> Result<F0Track> {
    let text = std::fs::read_to_string(path).at(path)?;
    let rows = decode_f0_csv(&text).map_err(format_err(path))?;
    Ok(vocadyn_core::align::ingest_f0_csv(&rows)?)
}

pub fn write_f0_csv(path: &Path, track: &F0Track) -> Result<()> {
    atomic_write(path, encode_f0_csv(track).as_bytes())
}
