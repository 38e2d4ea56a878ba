//! Synthetic datasets with planted homologous families.
//!
//! Each family starts from a random seed sequence drawn from background amino
//! acid frequencies. Family members are independent copies of the seed with
//! point substitutions: every position is replaced, with the copy's mutation
//! rate as probability, by a different background-drawn residue. The seed
//! itself is not emitted. Records are shuffled so families are spread across
//! the input order.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alphabet::{RESIDUES, STANDARD};
use crate::error::{Error, Result};
use crate::sequence::SequenceStore;

// Robinson & Robinson background frequencies, ARNDCQEGHILKMFPSTWYV order.
const BACKGROUND: [f64; STANDARD] = [
    0.07805, 0.05129, 0.04487, 0.05364, 0.01925, 0.04264, 0.06295, 0.07377, 0.02199, 0.05142, 0.09019, 0.05744,
    0.02243, 0.03856, 0.05203, 0.07120, 0.05841, 0.01330, 0.03216, 0.06441,
];

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub families: usize,
    pub copies: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub min_rate: f64,
    pub max_rate: f64,
    pub shuffle: bool,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            families: 100,
            copies: 10,
            min_len: 100,
            max_len: 200,
            min_rate: 0.05,
            max_rate: 0.15,
            shuffle: true,
            seed: 1,
        }
    }
}

impl PlantedConfig {
    fn validate(&self) -> Result<()> {
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::InvalidParams(format!("bad length range {}..={}", self.min_len, self.max_len)));
        }
        if !(0.0..=1.0).contains(&self.min_rate) || !(self.min_rate..=1.0).contains(&self.max_rate) {
            return Err(Error::InvalidParams(format!("bad mutation rates {}..{}", self.min_rate, self.max_rate)));
        }
        Ok(())
    }
}

pub struct Generator {
    rng: ChaCha8Rng,
    background: WeightedIndex<f64>,
}

impl Generator {
    pub fn new(seed: u64) -> Self {
        Generator {
            rng: ChaCha8Rng::seed_from_u64(seed),
            background: WeightedIndex::new(BACKGROUND).expect("static weights are valid"),
        }
    }

    fn residue(&mut self) -> u8 {
        RESIDUES[self.background.sample(&mut self.rng)]
    }

    pub fn random_sequence(&mut self, len: usize) -> Vec<u8> {
        (0..len).map(|_| self.residue()).collect()
    }

    pub fn mutate(&mut self, seed: &[u8], rate: f64) -> Vec<u8> {
        seed.iter()
            .map(|&r| {
                if self.rng.gen_bool(rate) {
                    loop {
                        let s = self.residue();
                        if s != r {
                            break s;
                        }
                    }
                } else {
                    r
                }
            })
            .collect()
    }

    pub fn length(&mut self, min: usize, max: usize) -> usize {
        self.rng.gen_range(min..=max)
    }
}

/// FASTA-ready `(id, residues)` records for a planted-family dataset.
pub fn planted_records(cfg: &PlantedConfig) -> Result<Vec<(String, Vec<u8>)>> {
    cfg.validate()?;
    let mut gen = Generator::new(cfg.seed);
    let mut records = Vec::with_capacity(cfg.families * cfg.copies);
    for fam in 0..cfg.families {
        let len = gen.length(cfg.min_len, cfg.max_len);
        let seed = gen.random_sequence(len);
        for copy in 0..cfg.copies {
            let rate = gen.rng.gen_range(cfg.min_rate..=cfg.max_rate);
            records.push((format!("fam{fam}_copy{copy}"), gen.mutate(&seed, rate)));
        }
    }
    if cfg.shuffle {
        records.shuffle(&mut gen.rng);
    }
    Ok(records)
}

pub fn planted_families(cfg: &PlantedConfig) -> Result<SequenceStore> {
    SequenceStore::from_records(planted_records(cfg)?)
}

/// Unrelated random sequences with lengths uniform in `min_len..=max_len`.
pub fn random_store(n: usize, min_len: usize, max_len: usize, seed: u64) -> Result<SequenceStore> {
    let mut gen = Generator::new(seed);
    let records: Vec<_> = (0..n)
        .map(|i| {
            let len = gen.length(min_len.max(1), max_len.max(min_len.max(1)));
            (format!("rand{i}"), gen.random_sequence(len))
        })
        .collect();
    SequenceStore::from_records(records)
}

/// Family label from a generated id (`fam12_copy3` -> 12).
pub fn family_of(id: &str) -> Option<usize> {
    id.strip_prefix("fam")?.split('_').next()?.parse().ok()
}
