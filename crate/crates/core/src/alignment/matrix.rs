use std::fmt::Write as _;
use std::path::Path;

use crate::alphabet::{RESIDUES, STANDARD};
use crate::error::{Error, Result};

const N: usize = RESIDUES.len();

// Dayhoff PAM250 in 1/3-bit units, rows/columns ARNDCQEGHILKMFPSTWYVX.
#[rustfmt::skip]
const PAM250: [[i8; N]; N] = [
    //A   R   N   D   C   Q   E   G   H   I   L   K   M   F   P   S   T   W   Y   V   X
    [ 2, -2,  0,  0, -2,  0,  0,  1, -1, -1, -2, -1, -1, -3,  1,  1,  1, -6, -3,  0,  0], // A
    [-2,  6,  0, -1, -4,  1, -1, -3,  2, -2, -3,  3,  0, -4,  0,  0, -1,  2, -4, -2, -1], // R
    [ 0,  0,  2,  2, -4,  1,  1,  0,  2, -2, -3,  1, -2, -3,  0,  1,  0, -4, -2, -2,  0], // N
    [ 0, -1,  2,  4, -5,  2,  3,  1,  1, -2, -4,  0, -3, -6, -1,  0,  0, -7, -4, -2, -1], // D
    [-2, -4, -4, -5, 12, -5, -5, -3, -3, -2, -6, -5, -5, -4, -3,  0, -2, -8,  0, -2, -3], // C
    [ 0,  1,  1,  2, -5,  4,  2, -1,  3, -2, -2,  1, -1, -5,  0, -1, -1, -5, -4, -2, -1], // Q
    [ 0, -1,  1,  3, -5,  2,  4,  0,  1, -2, -3,  0, -2, -5, -1,  0,  0, -7, -4, -2, -1], // E
    [ 1, -3,  0,  1, -3, -1,  0,  5, -2, -3, -4, -2, -3, -5,  0,  1,  0, -7, -5, -1, -1], // G
    [-1,  2,  2,  1, -3,  3,  1, -2,  6, -2, -2,  0, -2, -2,  0, -1, -1, -3,  0, -2, -1], // H
    [-1, -2, -2, -2, -2, -2, -2, -3, -2,  5,  2, -2,  2,  1, -2, -1,  0, -5, -1,  4, -1], // I
    [-2, -3, -3, -4, -6, -2, -3, -4, -2,  2,  6, -3,  4,  2, -3, -3, -2, -2, -1,  2, -1], // L
    [-1,  3,  1,  0, -5,  1,  0, -2,  0, -2, -3,  5,  0, -5, -1,  0,  0, -3, -4, -2, -1], // K
    [-1,  0, -2, -3, -5, -1, -2, -3, -2,  2,  4,  0,  6,  0, -2, -2, -1, -4, -2,  2, -1], // M
    [-3, -4, -3, -6, -4, -5, -5, -5, -2,  1,  2, -5,  0,  9, -5, -3, -3,  0,  7, -1, -2], // F
    [ 1,  0,  0, -1, -3,  0, -1,  0,  0, -2, -3, -1, -2, -5,  6,  1,  0, -6, -5, -1, -1], // P
    [ 1,  0,  1,  0,  0, -1,  0,  1, -1, -1, -3,  0, -2, -3,  1,  2,  1, -2, -3, -1,  0], // S
    [ 1, -1,  0,  0, -2, -1,  0,  0, -1,  0, -2,  0, -1, -3,  0,  1,  3, -5, -3,  0,  0], // T
    [-6,  2, -4, -7, -8, -5, -7, -7, -3, -5, -2, -3, -4,  0, -6, -2, -5, 17,  0, -6, -4], // W
    [-3, -4, -2, -4,  0, -4, -4, -5,  0, -1, -1, -4, -2,  7, -5, -3, -3,  0, 10, -2, -2], // Y
    [ 0, -2, -2, -2, -2, -2, -2, -1, -2,  4,  2, -2,  2, -1, -1, -1,  0, -6, -2,  4, -1], // V
    [ 0, -1,  0, -1, -3, -1, -1, -1, -1, -1, -1, -1, -1, -2, -1,  0,  0, -4, -2, -1, -1], // X
];

/// Symmetric integer substitution matrix over the 20 standard residues plus `X`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubstitutionMatrix {
    name: String,
    scores: [[i32; N]; N],
}

impl Default for SubstitutionMatrix {
    fn default() -> Self {
        Self::pam250()
    }
}

impl SubstitutionMatrix {
    pub fn pam250() -> Self {
        let mut scores = [[0i32; N]; N];
        for (row, src) in scores.iter_mut().zip(PAM250.iter()) {
            for (dst, &s) in row.iter_mut().zip(src.iter()) {
                *dst = i32::from(s);
            }
        }
        SubstitutionMatrix { name: "PAM250".into(), scores }
    }

    #[inline]
    pub fn score(&self, a: u8, b: u8) -> i32 {
        self.scores[a as usize][b as usize]
    }

    #[inline]
    pub(crate) fn row(&self, a: u8) -> &[i32; N] {
        &self.scores[a as usize]
    }

    pub(crate) fn max_abs(&self) -> i32 {
        self.scores.iter().flatten().map(|s| s.abs()).max().unwrap_or(0)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Loads a whitespace-delimited 20x20 or 21x21 matrix in
    /// `ARNDCQEGHILKMFPSTWYV[X]` order. `#` lines, a letter header row and
    /// leading row labels are tolerated. Without an `X` row, `X` scores 0.
    pub fn from_text(name: &str, text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<i32>> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields: Vec<&str> = line.split_whitespace().collect();
            if fields.iter().all(|f| f.len() == 1 && f.as_bytes()[0].is_ascii_alphabetic()) {
                continue;
            }
            if fields[0].len() == 1 && fields[0].as_bytes()[0].is_ascii_alphabetic() {
                fields.remove(0);
            }
            let row = fields
                .iter()
                .map(|f| f.parse::<i32>().map_err(|_| Error::Matrix(format!("bad entry {f:?}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let dim = rows.len();
        if dim != STANDARD && dim != N {
            return Err(Error::Matrix(format!("expected {STANDARD} or {N} rows, found {dim}")));
        }
        let mut scores = [[0i32; N]; N];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Matrix(format!("row {i} has {} entries, expected {dim}", row.len())));
            }
            scores[i][..dim].copy_from_slice(row);
        }
        let matrix = SubstitutionMatrix { name: name.to_string(), scores };
        matrix.validate()?;
        Ok(matrix)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        Self::from_text(&name, &text)
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..N {
            for j in 0..i {
                if self.scores[i][j] != self.scores[j][i] {
                    return Err(Error::Matrix(format!(
                        "not symmetric at {}/{}",
                        RESIDUES[i] as char, RESIDUES[j] as char
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in &self.scores {
            let line: Vec<String> = row.iter().map(|s| format!("{s:3}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    /// Order-sensitive fingerprint of all entries, for run metadata.
    pub fn fingerprint(&self) -> u64 {
        // FNV-1a
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for row in &self.scores {
            for &s in row {
                for b in s.to_le_bytes() {
                    h ^= u64::from(b);
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::encode;

    fn code(c: u8) -> u8 {
        encode(c).unwrap()
    }

    #[test]
    fn published_entries() {
        let m = SubstitutionMatrix::pam250();
        assert_eq!(m.score(code(b'A'), code(b'A')), 2);
        assert_eq!(m.score(code(b'W'), code(b'W')), 17);
        assert_eq!(m.score(code(b'C'), code(b'C')), 12);
        assert_eq!(m.score(code(b'W'), code(b'C')), -8);
        assert_eq!(m.score(code(b'F'), code(b'Y')), 7);
        assert_eq!(m.score(code(b'X'), code(b'X')), -1);
        m.validate().unwrap();
    }

    // The self-score bound property of the aligner relies on this.
    #[test]
    fn off_diagonal_never_exceeds_either_diagonal() {
        let m = SubstitutionMatrix::pam250();
        for a in 0..STANDARD as u8 {
            assert!(m.score(a, a) > 0);
            for b in 0..STANDARD as u8 {
                assert!(m.score(a, b) <= m.score(a, a).min(m.score(b, b)));
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let m = SubstitutionMatrix::pam250();
        let again = SubstitutionMatrix::from_text("PAM250", &m.to_text()).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn labelled_twenty_by_twenty_without_x() {
        let m = SubstitutionMatrix::pam250();
        let mut text = String::from("# comment\n   A R N D C Q E G H I L K M F P S T W Y V\n");
        for i in 0..STANDARD {
            let row: Vec<String> = (0..STANDARD).map(|j| m.scores[i][j].to_string()).collect();
            text.push_str(&format!("{} {}\n", RESIDUES[i] as char, row.join(" ")));
        }
        let loaded = SubstitutionMatrix::from_text("custom", &text).unwrap();
        assert_eq!(loaded.score(code(b'W'), code(b'W')), 17);
        assert_eq!(loaded.score(code(b'X'), code(b'A')), 0);
        assert_eq!(loaded.score(code(b'X'), code(b'X')), 0);
    }

    #[test]
    fn rejects_asymmetric_and_ragged() {
        let mut text = SubstitutionMatrix::pam250().to_text();
        text = text.replacen(" -2", " -3", 1);
        assert!(SubstitutionMatrix::from_text("bad", &text).is_err());
        assert!(SubstitutionMatrix::from_text("bad", "1 2\n3\n").is_err());
    }
}
