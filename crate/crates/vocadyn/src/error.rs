use std::path::PathBuf;

use crate::manifest::Status;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] vocadyn_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("XML parse error at line {line}, column {column}: {message}")]
    Xml { line: u32, column: u32, message: String },
    #[error("unsupported MusicXML: {0}")]
    MusicXml(String),
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
    #[error("{path}: malformed JSON: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("unknown record id {0:?}")]
    UnknownId(String),
    #[error("record {id:?} is {status}; {action} requires {required}")]
    StageOrder { id: String, status: Status, action: &'static str, required: &'static str },
    #[error("record {id:?}: missing {what} at {path}")]
    MissingFile { id: String, what: &'static str, path: PathBuf },
    #[error("no labeled records to export")]
    NothingLabeled,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|source| Error::Io { path: path.into(), source })
    }
}
