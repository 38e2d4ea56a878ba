use std::io;
use std::time::Duration;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("line {line}: sequence data before any FASTA header")]
    OrphanSequence { line: usize },

    #[error("invalid residue '{residue}' at record \"{record}\"")]
    InvalidResidue { record: String, residue: char },

    #[error("record \"{0}\" has an empty sequence")]
    EmptySequence(String),

    #[error("dataset exceeds {} sequences", u32::MAX)]
    TooManySequences,

    #[error("sequence index {index} out of range (store holds {len})")]
    IndexOutOfRange { index: u32, len: usize },

    #[error("substitution matrix: {0}")]
    Matrix(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("cluster file line {line}: {msg}")]
    ClusterFormat { line: usize, msg: String },

    #[error("pair file: {0}")]
    PairFormat(String),

    #[error("metadata mismatch: {0}")]
    MetadataMismatch(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("dataset checksum mismatch: expected {expected:016x}, got {found:016x}")]
    ChecksumMismatch { expected: u64, found: u64 },

    #[error("remote error {code}: {text}")]
    Remote { code: u16, text: String },

    #[error("no worker progress for {0:?}")]
    Timeout(Duration),
}
