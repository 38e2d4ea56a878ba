//! Naive full-matrix Smith-Waterman with explicit traceback.
//!
//! Deliberately shares nothing with the library kernels except the public
//! substitution lookup: three (n+1)x(m+1) matrices, i64 arithmetic, and a
//! pointer-free traceback that re-derives each move from the stored values.

use protclust::alignment::AlignmentParams;

const NEG: i64 = i64::MIN / 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleAlignment {
    pub score: i64,
    /// Half-open spans `(start, end)`; `(0, 0)` when the score is zero.
    pub span_a: (usize, usize),
    pub span_b: (usize, usize),
}

#[derive(Clone, Copy)]
enum State {
    H,
    E,
    F,
}

pub fn naive_sw(a: &[u8], b: &[u8], params: &AlignmentParams) -> OracleAlignment {
    let n = a.len();
    let m = b.len();
    let open = i64::from(params.gap_open);
    let ext = i64::from(params.gap_extend);
    let mut h = vec![vec![0i64; m + 1]; n + 1];
    let mut e = vec![vec![NEG; m + 1]; n + 1];
    let mut f = vec![vec![NEG; m + 1]; n + 1];
    let mut diag = vec![vec![NEG; m + 1]; n + 1];
    for i in 1..=n {
        for j in 1..=m {
            e[i][j] = (h[i - 1][j] - open).max(e[i - 1][j] - ext);
            f[i][j] = (h[i][j - 1] - open).max(f[i][j - 1] - ext);
            diag[i][j] = h[i - 1][j - 1] + i64::from(params.matrix.score(a[i - 1], b[j - 1]));
            h[i][j] = 0.max(diag[i][j]).max(e[i][j]).max(f[i][j]);
        }
    }
    let mut best = 0;
    let mut end = (0, 0);
    for i in 1..=n {
        for j in 1..=m {
            if h[i][j] > best {
                best = h[i][j];
                end = (i, j);
            }
        }
    }
    if best == 0 {
        return OracleAlignment { score: 0, span_a: (0, 0), span_b: (0, 0) };
    }
    let (mut i, mut j) = end;
    let mut state = State::H;
    loop {
        match state {
            State::H => {
                if i == 0 || j == 0 || h[i][j] == 0 {
                    break;
                }
                if h[i][j] == diag[i][j] {
                    i -= 1;
                    j -= 1;
                } else if h[i][j] == e[i][j] {
                    state = State::E;
                } else {
                    state = State::F;
                }
            }
            State::E => {
                if e[i][j] == h[i - 1][j] - open {
                    state = State::H;
                }
                i -= 1;
            }
            State::F => {
                if f[i][j] == h[i][j - 1] - open {
                    state = State::H;
                }
                j -= 1;
            }
        }
    }
    OracleAlignment { score: best, span_a: (i, end.0), span_b: (j, end.1) }
}
