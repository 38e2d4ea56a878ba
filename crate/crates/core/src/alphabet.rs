//! Amino-acid alphabet and the dense residue codes used by the aligner.

/// Residue letters in matrix row/column order. `X` (unknown) is last.
pub const RESIDUES: &[u8; 21] = b"ARNDCQEGHILKMFPSTWYVX";

/// Number of standard residues (everything except `X`).
pub const STANDARD: usize = 20;

/// Code of the unknown residue `X`.
pub const UNKNOWN: u8 = 20;

const INVALID: u8 = 0xff;

const fn build_codes() -> [u8; 256] {
    let mut table = [INVALID; 256];
    let mut i = 0;
    while i < RESIDUES.len() {
        table[RESIDUES[i] as usize] = i as u8;
        table[RESIDUES[i].to_ascii_lowercase() as usize] = i as u8;
        i += 1;
    }
    table
}

static CODES: [u8; 256] = build_codes();

/// Dense code for a residue letter (case-insensitive).
#[inline]
pub fn encode(letter: u8) -> Option<u8> {
    match CODES[letter as usize] {
        INVALID => None,
        c => Some(c),
    }
}

#[inline]
pub fn decode(code: u8) -> u8 {
    RESIDUES[code as usize]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_round_trip() {
        for (i, &r) in RESIDUES.iter().enumerate() {
            assert_eq!(encode(r), Some(i as u8));
            assert_eq!(encode(r.to_ascii_lowercase()), Some(i as u8));
            assert_eq!(decode(i as u8), r);
        }
        assert_eq!(encode(b'X'), Some(UNKNOWN));
    }

    #[test]
    fn rejects_non_residues() {
        for b in *b"1BZJOU*- " {
            assert_eq!(encode(b), None, "{}", b as char);
        }
    }
}
