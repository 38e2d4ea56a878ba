//! Scalar Gotoh-style Smith-Waterman kernels.
//!
//! Two kernels share one recurrence: `score` keeps only the best cell value,
//! `align` additionally carries the start coordinate of the path that a
//! traceback would follow, so spans come out in linear memory.
//!
//! Recurrence, with `i` over rows of A and `j` over columns of B:
//!   E(i,j) = max(H(i-1,j) - open, E(i-1,j) - extend)     gap in B ("up")
//!   F(i,j) = max(H(i,j-1) - open, F(i,j-1) - extend)     gap in A ("left")
//!   H(i,j) = max(0, H(i-1,j-1) + s(a_i, b_j), E(i,j), F(i,j))
//!
//! Ties: diagonal over up over left for H, opening over extending for E/F.
//! The reported end cell is the first maximum in row-major order.

use super::{AlignmentParams, AlignmentResult, Span};

const NEG: i32 = i32::MIN / 4;

fn profile(b: &[u8], params: &AlignmentParams) -> Vec<i32> {
    let m = b.len();
    let mut prof = vec![0i32; crate::alphabet::RESIDUES.len() * m];
    for (code, row) in prof.chunks_exact_mut(m.max(1)).enumerate().take(crate::alphabet::RESIDUES.len()) {
        let scores = params.matrix.row(code as u8);
        for (dst, &r) in row.iter_mut().zip(b) {
            *dst = scores[r as usize];
        }
    }
    prof
}

pub(super) fn score(a: &[u8], b: &[u8], params: &AlignmentParams) -> i32 {
    let m = b.len();
    if a.is_empty() || m == 0 {
        return 0;
    }
    let open = params.gap_open;
    let extend = params.gap_extend;
    let prof = profile(b, params);
    let mut h = vec![0i32; m];
    let mut e = vec![NEG; m];
    let mut best = 0;
    for &ra in a {
        let prof_row = &prof[ra as usize * m..(ra as usize + 1) * m];
        let mut diag = 0;
        let mut left = 0;
        let mut f = NEG;
        for ((h_cell, e_cell), &s) in h.iter_mut().zip(e.iter_mut()).zip(prof_row) {
            let up = *h_cell;
            let e_new = (up - open).max(*e_cell - extend);
            f = (left - open).max(f - extend);
            let v = (diag + s).max(e_new).max(f).max(0);
            diag = up;
            *h_cell = v;
            *e_cell = e_new;
            left = v;
            best = best.max(v);
        }
    }
    best
}

#[inline]
fn pack(i: usize, j: usize) -> u64 {
    ((i as u64) << 32) | j as u64
}

pub(super) fn align(a: &[u8], b: &[u8], params: &AlignmentParams) -> AlignmentResult {
    let n = a.len();
    let m = b.len();
    if n == 0 || m == 0 {
        return AlignmentResult::EMPTY;
    }
    let open = params.gap_open;
    let extend = params.gap_extend;
    let prof = profile(b, params);

    // Row i-1 values (index j-1 holds column j). Starts are packed (i, j).
    let mut h = vec![0i32; m];
    let mut h_start: Vec<u64> = (1..=m).map(|j| pack(0, j)).collect();
    let mut e = vec![NEG; m];
    let mut e_start = vec![0u64; m];

    let mut best = 0;
    let mut best_end = (0usize, 0usize);
    let mut best_start = 0u64;

    for (i, &ra) in a.iter().enumerate().map(|(i, r)| (i + 1, r)) {
        let prof_row = &prof[ra as usize * m..(ra as usize + 1) * m];
        let mut diag = 0;
        let mut diag_start = pack(i - 1, 0);
        let mut left = 0;
        let mut left_start = pack(i, 0);
        let mut f = NEG;
        let mut f_start = 0u64;
        for j in 1..=m {
            let up = h[j - 1];
            let up_start = h_start[j - 1];

            let (e_new, e_new_start) = if up - open >= e[j - 1] - extend {
                (up - open, up_start)
            } else {
                (e[j - 1] - extend, e_start[j - 1])
            };
            if left - open >= f - extend {
                f = left - open;
                f_start = left_start;
            } else {
                f -= extend;
            }

            let mut v = diag + prof_row[j - 1];
            let mut v_start = diag_start;
            if e_new > v {
                v = e_new;
                v_start = e_new_start;
            }
            if f > v {
                v = f;
                v_start = f_start;
            }
            if v <= 0 {
                v = 0;
                v_start = pack(i, j);
            }

            diag = up;
            diag_start = up_start;
            h[j - 1] = v;
            h_start[j - 1] = v_start;
            e[j - 1] = e_new;
            e_start[j - 1] = e_new_start;
            left = v;
            left_start = v_start;

            if v > best {
                best = v;
                best_end = (i, j);
                best_start = v_start;
            }
        }
    }

    if best == 0 {
        return AlignmentResult::EMPTY;
    }
    let start_a = (best_start >> 32) as usize;
    let start_b = (best_start & 0xffff_ffff) as usize;
    AlignmentResult {
        score: best,
        span_a: Span::new(start_a, best_end.0),
        span_b: Span::new(start_b, best_end.1),
    }
}
