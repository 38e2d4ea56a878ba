//! On-disk formats shared by the runtimes and the evaluation tools.
//!
//! Cluster sets are stored one cluster per line as
//! `rep<TAB>member,member,...` (members in cluster order, representative
//! included), with run metadata in a JSON sidecar next to the file.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::alignment::{AlignmentParams, Thresholds};
use crate::cluster::{Cluster, ClusterSet};
use crate::error::{Error, Result};
use crate::sequence::SequenceStore;

/// Parameters and dataset identity a result was produced with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMeta {
    pub thresholds: Thresholds,
    pub gap_open: i32,
    pub gap_extend: i32,
    pub matrix: String,
    pub matrix_fingerprint: String,
    pub dataset_checksum: String,
    pub sequences: usize,
}

impl RunMeta {
    pub fn new(store: &SequenceStore, params: &AlignmentParams, thresholds: &Thresholds) -> Self {
        RunMeta {
            thresholds: *thresholds,
            gap_open: params.gap_open,
            gap_extend: params.gap_extend,
            matrix: params.matrix.name().to_string(),
            matrix_fingerprint: format!("{:016x}", params.matrix.fingerprint()),
            dataset_checksum: format!("{:016x}", store.checksum()),
            sequences: store.len(),
        }
    }

    /// Fails unless both runs used the same scoring and the same dataset.
    pub fn ensure_compatible(&self, other: &RunMeta) -> Result<()> {
        let mut diffs = Vec::new();
        if self.thresholds.similarity != other.thresholds.similarity {
            diffs.push(format!("similarity {} vs {}", self.thresholds.similarity, other.thresholds.similarity));
        }
        if (self.gap_open, self.gap_extend) != (other.gap_open, other.gap_extend) {
            diffs.push(format!(
                "gaps {}/{} vs {}/{}",
                self.gap_open, self.gap_extend, other.gap_open, other.gap_extend
            ));
        }
        if self.matrix_fingerprint != other.matrix_fingerprint {
            diffs.push(format!("matrix {} vs {}", self.matrix, other.matrix));
        }
        if self.dataset_checksum != other.dataset_checksum {
            diffs.push(format!("dataset {} vs {}", self.dataset_checksum, other.dataset_checksum));
        }
        if diffs.is_empty() {
            Ok(())
        } else {
            Err(Error::MetadataMismatch(diffs.join("; ")))
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }
}

/// `clusters.tsv` -> `clusters.tsv.json`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

pub fn write_clusters<W: Write>(set: &ClusterSet, mut out: W) -> Result<()> {
    for cluster in set.iter() {
        write!(out, "{}\t", cluster.representative())?;
        for (k, m) in cluster.members().iter().enumerate() {
            if k > 0 {
                out.write_all(b",")?;
            }
            write!(out, "{m}")?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_clusters<R: BufRead>(reader: R) -> Result<ClusterSet> {
    let mut set = ClusterSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::ClusterFormat { line: lineno + 1, msg: msg.to_string() };
        let (rep, members) = line.split_once('\t').ok_or_else(|| bad("missing tab"))?;
        let rep: u32 = rep.parse().map_err(|_| bad("bad representative"))?;
        let members = members
            .split(',')
            .map(|m| m.parse::<u32>().map_err(|_| bad("bad member index")))
            .collect::<Result<Vec<_>>>()?;
        if !members.contains(&rep) {
            return Err(bad("representative not among members"));
        }
        set.push(Cluster::from_members(rep, members, 0));
    }
    Ok(set)
}

/// Writes the cluster file and its metadata sidecar.
pub fn save_clusters(path: impl AsRef<Path>, set: &ClusterSet, meta: &RunMeta) -> Result<()> {
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path)?);
    write_clusters(set, &mut out)?;
    out.flush()?;
    meta.write(sidecar_path(path))
}

/// Reads a cluster file and, if present, its sidecar.
pub fn load_clusters(path: impl AsRef<Path>) -> Result<(ClusterSet, Option<RunMeta>)> {
    let path = path.as_ref();
    let set = read_clusters(BufReader::new(File::open(path)?))?;
    let sidecar = sidecar_path(path);
    let meta = if sidecar.exists() { Some(RunMeta::read(sidecar)?) } else { None };
    Ok((set, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tsv_round_trip() {
        let set = ClusterSet::from_clusters([Cluster::from_members(3, [3, 1, 7], 0), Cluster::from_members(0, [0], 0)]);
        let mut buf = Vec::new();
        write_clusters(&set, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "3\t3,1,7\n0\t0\n");
        assert_eq!(read_clusters(&buf[..]).unwrap(), set);
    }

    #[test]
    fn malformed_lines() {
        assert!(read_clusters(&b"3 3,1\n"[..]).is_err());
        assert!(read_clusters(&b"3\t1,2\n"[..]).is_err());
        assert!(read_clusters(&b"x\t1\n"[..]).is_err());
        assert!(matches!(read_clusters(&b"1\t1\n2\t2,y\n"[..]), Err(Error::ClusterFormat { line: 2, .. })));
    }

    #[test]
    fn meta_mismatch_is_reported() {
        let store = SequenceStore::from_records([("a", "MKV")]).unwrap();
        let other = SequenceStore::from_records([("a", "MKW")]).unwrap();
        let params = AlignmentParams::default();
        let th = Thresholds::default();
        let a = RunMeta::new(&store, &params, &th);
        a.ensure_compatible(&a.clone()).unwrap();
        let b = RunMeta::new(&other, &params, &th);
        assert!(matches!(a.ensure_compatible(&b), Err(Error::MetadataMismatch(_))));
        let c = RunMeta::new(&store, &params, &Thresholds { similarity: 100, ..th });
        assert!(a.ensure_compatible(&c).is_err());
    }
}
