//! Smith-Waterman local alignment with affine gaps.
//!
//! Provides the similarity score used throughout clustering and the aligned
//! footprints (spans) that the transitivity test inspects.

mod matrix;
mod striped;
mod sw;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::Sequence;

pub use matrix::SubstitutionMatrix;

pub const DEFAULT_GAP_OPEN: i32 = 37;
pub const DEFAULT_GAP_EXTEND: i32 = 7;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentParams {
    pub matrix: Arc<SubstitutionMatrix>,
    /// Penalty for the first residue of a gap.
    pub gap_open: i32,
    /// Penalty for every further residue of the same gap.
    pub gap_extend: i32,
}

impl Default for AlignmentParams {
    fn default() -> Self {
        AlignmentParams {
            matrix: Arc::new(SubstitutionMatrix::pam250()),
            gap_open: DEFAULT_GAP_OPEN,
            gap_extend: DEFAULT_GAP_EXTEND,
        }
    }
}

impl AlignmentParams {
    pub fn new(matrix: SubstitutionMatrix, gap_open: i32, gap_extend: i32) -> Result<Self> {
        let params = AlignmentParams { matrix: Arc::new(matrix), gap_open, gap_extend };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gap_open >= self.gap_extend && self.gap_extend >= 0) {
            return Err(Error::InvalidParams(format!(
                "need gap_open >= gap_extend >= 0, got {} / {}",
                self.gap_open, self.gap_extend
            )));
        }
        self.matrix.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Minimum score for two sequences to count as similar.
    pub similarity: i32,
    /// Minimum score for one representative to absorb another.
    pub full_merge: i32,
    /// A representative may only be absorbed if fewer residues than this are
    /// left outside the alignment.
    pub max_uncovered: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { similarity: 181, full_merge: 250, max_uncovered: 15 }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.full_merge >= self.similarity && self.similarity >= 0) {
            return Err(Error::InvalidParams(format!(
                "need full_merge >= similarity >= 0, got {} / {}",
                self.full_merge, self.similarity
            )));
        }
        Ok(())
    }
}

/// Half-open residue interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub const EMPTY: Span = Span { start: 0, end: 0 };

    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignmentResult {
    pub score: i32,
    pub span_a: Span,
    pub span_b: Span,
}

impl AlignmentResult {
    pub const EMPTY: AlignmentResult = AlignmentResult { score: 0, span_a: Span::EMPTY, span_b: Span::EMPTY };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

/// Full local alignment: best score plus the footprint of one optimal path.
pub fn sw_align(a: &Sequence, b: &Sequence, params: &AlignmentParams) -> AlignmentResult {
    sw::align(&a.codes, &b.codes, params)
}

/// Score-only variant of [`sw_align`]; always returns the same score.
pub fn sw_score(a: &Sequence, b: &Sequence, params: &AlignmentParams) -> i32 {
    sw_score_codes(&a.codes, &b.codes, params)
}

/// Kernels over raw residue codes, for callers without a `Sequence`.
pub fn sw_align_codes(a: &[u8], b: &[u8], params: &AlignmentParams) -> AlignmentResult {
    sw::align(a, b, params)
}

pub fn sw_score_codes(a: &[u8], b: &[u8], params: &AlignmentParams) -> i32 {
    striped::score(a, b, params).unwrap_or_else(|| sw::score(a, b, params))
}

/// The portable kernel behind [`sw_score_codes`], exposed for cross-checks.
pub fn sw_score_scalar(a: &[u8], b: &[u8], params: &AlignmentParams) -> i32 {
    sw::score(a, b, params)
}

/// Sum of diagonal substitution scores; the ungapped self-alignment.
pub fn self_score(seq: &Sequence, params: &AlignmentParams) -> i32 {
    seq.codes.iter().map(|&c| params.matrix.score(c, c)).sum()
}

/// Residues of one side left outside the aligned footprint.
pub fn uncovered(result: &AlignmentResult, which: Side, seq_len: usize) -> usize {
    let span = match which {
        Side::A => result.span_a,
        Side::B => result.span_b,
    };
    seq_len - span.len()
}

#[inline]
pub fn is_similar(score: i32, th: &Thresholds) -> bool {
    score >= th.similarity
}
