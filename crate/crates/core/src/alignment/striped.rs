//! Striped (Farrar) score-only kernel on 16 lanes of saturating i16.
//!
//! Same recurrence as the scalar kernel. Returns `None` when the inputs or the
//! score could leave the i16 range, in which case callers fall back to the
//! scalar kernel.

use super::AlignmentParams;
use crate::alphabet::RESIDUES;

const LANES: usize = 16;
// Anything at or above this may have saturated.
const SAFE_MAX: i32 = i16::MAX as i32 - 1024;
// Padding columns past the end of `b` score this against everything.
const PAD: i16 = -1024;

pub(super) fn score(a: &[u8], b: &[u8], params: &AlignmentParams) -> Option<i32> {
    #[cfg(target_arch = "x86_64")]
    {
        if !std::arch::is_x86_feature_detected!("avx2") {
            return None;
        }
        if params.gap_open > 1024 || params.matrix.max_abs() > 1024 {
            return None;
        }
        // SAFETY: avx2 availability checked above.
        let best = unsafe { avx2::score(a, b, params) };
        (best < SAFE_MAX).then_some(best)
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        let _ = (a, b, params);
        None
    }
}

/// Profile in striped order: for residue code `c`, segment `s`, lane `l`, the
/// score of `c` against `b[l * seg_len + s]`.
fn striped_profile(b: &[u8], params: &AlignmentParams, seg_len: usize) -> Vec<i16> {
    let mut prof = vec![PAD; RESIDUES.len() * seg_len * LANES];
    for code in 0..RESIDUES.len() {
        let row = params.matrix.row(code as u8);
        let base = code * seg_len * LANES;
        for s in 0..seg_len {
            for l in 0..LANES {
                let j = l * seg_len + s;
                if j < b.len() {
                    prof[base + s * LANES + l] = row[b[j] as usize] as i16;
                }
            }
        }
    }
    prof
}

#[cfg(target_arch = "x86_64")]
mod avx2 {
    use std::arch::x86_64::*;

    use super::{striped_profile, AlignmentParams, LANES};

    /// Shifts lanes up by one (lane 0 becomes 0).
    #[inline]
    #[target_feature(enable = "avx2")]
    fn shift(v: __m256i) -> __m256i {
        _mm256_alignr_epi8::<14>(v, _mm256_permute2x128_si256::<0x08>(v, v))
    }

    /// Like [`shift`] but lane 0 becomes `i16::MIN`.
    #[inline]
    #[target_feature(enable = "avx2")]
    fn shift_neg(v: __m256i) -> __m256i {
        let low_min = _mm256_setr_epi16(i16::MIN, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0);
        _mm256_adds_epi16(shift(v), low_min)
    }

    #[inline]
    #[target_feature(enable = "avx2")]
    fn hmax(v: __m256i) -> i16 {
        let m = _mm_max_epi16(_mm256_castsi256_si128(v), _mm256_extracti128_si256::<1>(v));
        let m = _mm_max_epi16(m, _mm_srli_si128::<8>(m));
        let m = _mm_max_epi16(m, _mm_srli_si128::<4>(m));
        let m = _mm_max_epi16(m, _mm_srli_si128::<2>(m));
        _mm_extract_epi16::<0>(m) as i16
    }

    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn score(a: &[u8], b: &[u8], params: &AlignmentParams) -> i32 {
        if a.is_empty() || b.is_empty() {
            return 0;
        }
        let seg_len = b.len().div_ceil(LANES);
        let prof = striped_profile(b, params, seg_len);
        let v_open = _mm256_set1_epi16(params.gap_open as i16);
        let v_extend = _mm256_set1_epi16(params.gap_extend as i16);
        let zero = _mm256_setzero_si256();
        let neg = _mm256_set1_epi16(i16::MIN);

        let mut h_load = vec![zero; seg_len];
        let mut h_store = vec![zero; seg_len];
        let mut e = vec![neg; seg_len];
        let mut v_max = zero;

        for &ra in a {
            let prof_row = prof.as_ptr().add(ra as usize * seg_len * LANES) as *const __m256i;
            let mut v_f = neg;
            let mut v_h = shift(h_store[seg_len - 1]);
            std::mem::swap(&mut h_load, &mut h_store);

            for s in 0..seg_len {
                v_h = _mm256_adds_epi16(v_h, _mm256_loadu_si256(prof_row.add(s)));
                let v_e = e[s];
                v_h = _mm256_max_epi16(v_h, v_e);
                v_h = _mm256_max_epi16(v_h, v_f);
                v_h = _mm256_max_epi16(v_h, zero);
                v_max = _mm256_max_epi16(v_max, v_h);
                h_store[s] = v_h;

                let h_open = _mm256_subs_epi16(v_h, v_open);
                e[s] = _mm256_max_epi16(_mm256_subs_epi16(v_e, v_extend), h_open);
                v_f = _mm256_max_epi16(_mm256_subs_epi16(v_f, v_extend), h_open);
                v_h = h_load[s];
            }

            // Lazy F: carry gaps in B across segment boundaries until they can
            // no longer improve any cell.
            v_f = shift_neg(v_f);
            let mut s = 0;
            loop {
                let v_h = h_store[s];
                let gt = _mm256_cmpgt_epi16(v_f, _mm256_subs_epi16(v_h, v_open));
                if _mm256_movemask_epi8(gt) == 0 {
                    break;
                }
                let v_h = _mm256_max_epi16(v_h, v_f);
                h_store[s] = v_h;
                e[s] = _mm256_max_epi16(e[s], _mm256_subs_epi16(v_h, v_open));
                v_f = _mm256_subs_epi16(v_f, v_extend);
                s += 1;
                if s == seg_len {
                    s = 0;
                    v_f = shift_neg(v_f);
                }
            }
        }
        i32::from(hmax(v_max))
    }
}
