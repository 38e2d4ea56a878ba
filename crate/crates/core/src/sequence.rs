//! In-memory protein sequence store.
//!
//! Sequences are loaded once, addressed by their 32-bit load ordinal, and never
//! mutated afterwards. Every other module refers to sequences by index only.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::alphabet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    pub index: u32,
    pub id: String,
    /// Uppercase residue letters.
    pub residues: Vec<u8>,
    /// Dense alphabet codes, parallel to `residues`.
    pub codes: Vec<u8>,
}

impl Sequence {
    #[inline]
    pub fn len(&self) -> usize {
        self.residues.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SequenceStore {
    sequences: Vec<Sequence>,
    checksum: u64,
}

impl SequenceStore {
    /// Builds a store from `(id, residues)` records. Residues are normalized
    /// exactly as FASTA bodies are.
    pub fn from_records<I, S, R>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, R)>,
        S: Into<String>,
        R: AsRef<[u8]>,
    {
        let mut sequences = Vec::new();
        for (id, residues) in records {
            let index = u32::try_from(sequences.len()).map_err(|_| Error::TooManySequences)?;
            sequences.push(make_sequence(index, id.into(), residues.as_ref())?);
        }
        let checksum = digest(&sequences);
        Ok(SequenceStore { sequences, checksum })
    }

    pub fn load_fasta(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path.as_ref())?;
        Self::read_fasta(BufReader::new(file))
    }

    /// Parses FASTA text. Multi-line bodies are concatenated and blank lines
    /// skipped; ids run up to the first whitespace after `>`.
    pub fn read_fasta<R: BufRead>(reader: R) -> Result<Self> {
        let mut records: Vec<(String, Vec<u8>)> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('>') {
                let id = header.split_whitespace().next().unwrap_or("").to_string();
                records.push((id, Vec::new()));
            } else {
                let Some((_, body)) = records.last_mut() else {
                    return Err(Error::OrphanSequence { line: lineno + 1 });
                };
                body.extend(line.bytes().filter(|b| !b.is_ascii_whitespace()));
            }
        }
        Self::from_records(records)
    }

    pub fn write_fasta<W: Write>(&self, mut out: W) -> Result<()> {
        for seq in &self.sequences {
            writeln!(out, ">{}", seq.id)?;
            for chunk in seq.residues.chunks(60) {
                out.write_all(chunk)?;
                out.write_all(b"\n")?;
            }
        }
        Ok(())
    }

    pub fn get(&self, index: u32) -> Result<&Sequence> {
        self.sequences
            .get(index as usize)
            .ok_or(Error::IndexOutOfRange { index, len: self.sequences.len() })
    }

    /// Unchecked-by-contract accessor for indices that came out of this store.
    #[inline]
    pub fn seq(&self, index: u32) -> &Sequence {
        &self.sequences[index as usize]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sequence> {
        self.sequences.iter()
    }

    /// Order-sensitive 64-bit digest of all residue data.
    pub fn checksum(&self) -> u64 {
        self.checksum
    }

    pub fn total_residues(&self) -> usize {
        self.sequences.iter().map(Sequence::len).sum()
    }
}

fn make_sequence(index: u32, id: String, raw: &[u8]) -> Result<Sequence> {
    let mut body = raw;
    while let [rest @ .., b'*'] = body {
        body = rest;
    }
    if body.is_empty() {
        return Err(Error::EmptySequence(id));
    }
    let mut residues = Vec::with_capacity(body.len());
    let mut codes = Vec::with_capacity(body.len());
    for &b in body {
        let code = alphabet::encode(b)
            .ok_or_else(|| Error::InvalidResidue { record: id.clone(), residue: b as char })?;
        residues.push(alphabet::decode(code));
        codes.push(code);
    }
    Ok(Sequence { index, id, residues, codes })
}

// Length-prefixed so that record boundaries are part of the digest.
fn digest(sequences: &[Sequence]) -> u64 {
    let mut hasher = Sha256::new();
    for seq in sequences {
        hasher.update((seq.len() as u32).to_le_bytes());
        hasher.update(&seq.residues);
    }
    let out = hasher.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("sha256 is 32 bytes"))
}
