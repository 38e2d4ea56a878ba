//! Significant-pair extraction, the all-against-all oracle, and recall
//! analytics.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::alignment::{is_similar, sw_score, AlignmentParams, Thresholds};
use crate::cluster::ClusterSet;
use crate::error::{Error, Result};
use crate::format::{sidecar_path, RunMeta};
use crate::sequence::SequenceStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScoredPair {
    pub i: u32,
    pub j: u32,
    pub score: i32,
}

/// Unordered significant pairs, stored sorted by `(i, j)` with `i < j`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairSet {
    pub meta: Option<RunMeta>,
    pairs: Vec<ScoredPair>,
}

impl PairSet {
    /// Normalizes orientation, sorts, and drops self-pairs and repeats.
    pub fn from_pairs(meta: Option<RunMeta>, pairs: impl IntoIterator<Item = ScoredPair>) -> Self {
        let mut pairs: Vec<ScoredPair> = pairs
            .into_iter()
            .filter(|p| p.i != p.j)
            .map(|p| if p.i < p.j { p } else { ScoredPair { i: p.j, j: p.i, score: p.score } })
            .collect();
        pairs.sort_unstable();
        pairs.dedup_by_key(|p| (p.i, p.j));
        PairSet { meta, pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[ScoredPair] {
        &self.pairs
    }

    pub fn get(&self, i: u32, j: u32) -> Option<i32> {
        let key = if i < j { (i, j) } else { (j, i) };
        self.pairs.binary_search_by_key(&key, |p| (p.i, p.j)).ok().map(|k| self.pairs[k].score)
    }

    pub fn contains(&self, i: u32, j: u32) -> bool {
        self.get(i, j).is_some()
    }

    /// Writes little-endian `(i u32, j u32, score i32)` triples plus a JSON
    /// sidecar when metadata is present.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = BufWriter::new(File::create(path)?);
        self.write(&mut out)?;
        out.flush()?;
        if let Some(meta) = &self.meta {
            meta.write(sidecar_path(path))?;
        }
        Ok(())
    }

    /// The triples alone, without the sidecar.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for p in &self.pairs {
            out.write_all(&p.i.to_le_bytes())?;
            out.write_all(&p.j.to_le_bytes())?;
            out.write_all(&p.score.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        if bytes.len() % 12 != 0 {
            return Err(Error::PairFormat(format!("length {} is not a multiple of 12", bytes.len())));
        }
        let word = |c: &[u8], k: usize| <[u8; 4]>::try_from(&c[4 * k..4 * k + 4]).expect("4 bytes");
        let mut pairs = Vec::with_capacity(bytes.len() / 12);
        for chunk in bytes.chunks_exact(12) {
            let p = ScoredPair {
                i: u32::from_le_bytes(word(chunk, 0)),
                j: u32::from_le_bytes(word(chunk, 1)),
                score: i32::from_le_bytes(word(chunk, 2)),
            };
            if p.i >= p.j {
                return Err(Error::PairFormat(format!("pair ({}, {}) is not ordered", p.i, p.j)));
            }
            if let Some(last) = pairs.last() {
                let last: &ScoredPair = last;
                if (last.i, last.j) >= (p.i, p.j) {
                    return Err(Error::PairFormat("pairs are not strictly sorted".into()));
                }
            }
            pairs.push(p);
        }
        let sidecar = sidecar_path(path);
        let meta = if sidecar.exists() { Some(RunMeta::read(sidecar)?) } else { None };
        Ok(PairSet { meta, pairs })
    }
}

/// Scores `pairs` on `threads` threads and keeps the similar ones.
fn score_pairs(
    candidates: &[(u32, u32)],
    store: &SequenceStore,
    params: &AlignmentParams,
    th: &Thresholds,
    threads: usize,
) -> Vec<ScoredPair> {
    const CHUNK: usize = 256;
    let next = AtomicUsize::new(0);
    let found = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..threads.max(1) {
            scope.spawn(|| {
                let mut local = Vec::new();
                loop {
                    let start = next.fetch_add(CHUNK, Ordering::Relaxed);
                    if start >= candidates.len() {
                        break;
                    }
                    for &(i, j) in &candidates[start..(start + CHUNK).min(candidates.len())] {
                        let score = sw_score(store.seq(i), store.seq(j), params);
                        if is_similar(score, th) {
                            local.push(ScoredPair { i, j, score });
                        }
                    }
                }
                found.lock().expect("result lock poisoned").extend(local);
            });
        }
    });
    found.into_inner().expect("result lock poisoned")
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub pairs: PairSet,
    pub alignments: u64,
}

/// Aligns every distinct within-cluster pair once and keeps significant ones.
pub fn extract_pairs(
    cs: &ClusterSet,
    store: &SequenceStore,
    params: &AlignmentParams,
    th: &Thresholds,
    threads: usize,
) -> Extraction {
    let mut candidates: Vec<(u32, u32)> = Vec::new();
    for cluster in cs.iter() {
        let m = cluster.members();
        for (k, &a) in m.iter().enumerate() {
            for &b in &m[k + 1..] {
                if a != b {
                    candidates.push((a.min(b), a.max(b)));
                }
            }
        }
    }
    candidates.sort_unstable();
    candidates.dedup();
    let found = score_pairs(&candidates, store, params, th, threads);
    Extraction {
        pairs: PairSet::from_pairs(Some(RunMeta::new(store, params, th)), found),
        alignments: candidates.len() as u64,
    }
}

/// Ground truth: aligns all n(n-1)/2 pairs.
pub fn brute_force_pairs(store: &SequenceStore, params: &AlignmentParams, th: &Thresholds, threads: usize) -> Extraction {
    let n = store.len() as u32;
    // Row blocks are claimed dynamically; rows shrink towards the end.
    let next_row = AtomicUsize::new(0);
    let found = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..threads.max(1) {
            scope.spawn(|| {
                let mut local = Vec::new();
                loop {
                    let i = next_row.fetch_add(1, Ordering::Relaxed) as u32;
                    if i >= n {
                        break;
                    }
                    let a = store.seq(i);
                    for j in i + 1..n {
                        let score = sw_score(a, store.seq(j), params);
                        if is_similar(score, th) {
                            local.push(ScoredPair { i, j, score });
                        }
                    }
                }
                found.lock().expect("result lock poisoned").extend(local);
            });
        }
    });
    let pairs = found.into_inner().expect("result lock poisoned");
    let total = u64::from(n) * u64::from(n.saturating_sub(1)) / 2;
    Extraction { pairs: PairSet::from_pairs(Some(RunMeta::new(store, params, th)), pairs), alignments: total }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub truth_count: usize,
    pub found_count: usize,
    pub missed_count: usize,
    /// Fraction in `[0, 1]`.
    pub recall: f64,
    pub missed_score_median: Option<i32>,
    pub missed_score_mean: Option<i32>,
    /// Missed pairs per score bucket of width 50 (key = bucket lower bound).
    pub missed_by_score: BTreeMap<i32, usize>,
    /// Found pairs that are not in the truth set. Always zero when both sides
    /// used the same scoring.
    pub anomalies: usize,
    pub alignments_clustering: Option<u64>,
    pub alignments_extraction: Option<u64>,
    pub alignments_oracle: Option<u64>,
}

impl RecallReport {
    pub fn recall_percent(&self) -> f64 {
        self.recall * 100.0
    }
}

/// Median of a sorted slice; the mean of the two middle values, rounded
/// down, for even lengths.
fn median_sorted(sorted: &[i32]) -> Option<i32> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some(((i64::from(sorted[n / 2 - 1]) + i64::from(sorted[n / 2])).div_euclid(2)) as i32),
    }
}

pub fn recall_report(truth: &PairSet, found: &PairSet) -> Result<RecallReport> {
    if let (Some(t), Some(f)) = (&truth.meta, &found.meta) {
        t.ensure_compatible(f)?;
    }
    let mut missed: Vec<i32> =
        truth.pairs.iter().filter(|p| !found.contains(p.i, p.j)).map(|p| p.score).collect();
    missed.sort_unstable();
    let anomalies = found.pairs.iter().filter(|p| !truth.contains(p.i, p.j)).count();
    let mut missed_by_score = BTreeMap::new();
    for &s in &missed {
        *missed_by_score.entry(s.div_euclid(50) * 50).or_insert(0) += 1;
    }
    let truth_count = truth.len();
    let recall = if truth_count == 0 { 1.0 } else { (truth_count - missed.len()) as f64 / truth_count as f64 };
    let mean = if missed.is_empty() {
        None
    } else {
        Some(missed.iter().map(|&s| i64::from(s)).sum::<i64>().div_euclid(missed.len() as i64) as i32)
    };
    Ok(RecallReport {
        truth_count,
        found_count: found.len(),
        missed_count: missed.len(),
        recall,
        missed_score_median: median_sorted(&missed),
        missed_score_mean: mean,
        missed_by_score,
        anomalies,
        alignments_clustering: None,
        alignments_extraction: None,
        alignments_oracle: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub total_clusters: usize,
    pub total_members: usize,
    pub largest: usize,
    pub frac_over_10: f64,
    pub frac_over_100: f64,
    pub frac_over_1000: f64,
    /// Cluster size -> number of clusters of that size.
    pub histogram: BTreeMap<usize, usize>,
}

pub fn cluster_stats(cs: &ClusterSet) -> ClusterStats {
    let mut histogram = BTreeMap::new();
    for c in cs.iter() {
        *histogram.entry(c.len()).or_insert(0) += 1;
    }
    let total = cs.len();
    let frac_over = |k: usize| {
        if total == 0 {
            0.0
        } else {
            cs.iter().filter(|c| c.len() > k).count() as f64 / total as f64
        }
    };
    ClusterStats {
        total_clusters: total,
        total_members: cs.total_members(),
        largest: cs.iter().map(|c| c.len()).max().unwrap_or(0),
        frac_over_10: frac_over(10),
        frac_over_100: frac_over(100),
        frac_over_1000: frac_over(1000),
        histogram,
    }
}

impl ClusterStats {
    pub fn write_histogram_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "size,count")?;
        for (size, count) in &self.histogram {
            writeln!(out, "{size},{count}")?;
        }
        Ok(())
    }
}
