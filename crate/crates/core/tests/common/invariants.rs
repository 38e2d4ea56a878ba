//! Structural checks every final cluster set must pass, plus small data
//! builders shared by the integration tests.

use std::collections::HashSet;

use protclust::cluster::ClusterSet;
use protclust::sequence::SequenceStore;
use protclust::synth::Generator;

/// Representative membership, no duplicates, no tombstones, full coverage of
/// `0..n`, and no foreign indices.
pub fn assert_well_formed(cs: &ClusterSet, n: usize) {
    let mut covered = HashSet::new();
    for (k, c) in cs.iter().enumerate() {
        assert!(!c.is_fully_merged(), "cluster {k} is a tombstone");
        assert!(c.members().contains(&c.representative()), "cluster {k} lost its representative");
        let distinct: HashSet<u32> = c.members().iter().copied().collect();
        assert_eq!(distinct.len(), c.len(), "cluster {k} holds a duplicate");
        for &m in c.members() {
            assert!((m as usize) < n, "cluster {k} holds foreign index {m}");
            covered.insert(m);
        }
    }
    assert_eq!(covered.len(), n, "some sequences are not covered");
}

/// Sorted member lists, for order-insensitive comparisons.
pub fn canonical(cs: &ClusterSet) -> Vec<(u32, Vec<u32>)> {
    let mut out: Vec<_> = cs
        .iter()
        .map(|c| {
            let mut m = c.members().to_vec();
            m.sort_unstable();
            (c.representative(), m)
        })
        .collect();
    out.sort();
    out
}

/// Copies of one core with private random flanks, so that copies are similar
/// but often leave too much uncovered to absorb one another.
pub fn flanked_family(seed: u64, copies: usize, core_len: usize, max_flank: usize, rate: f64) -> Vec<Vec<u8>> {
    let mut gen = Generator::new(seed);
    let core = gen.random_sequence(core_len);
    (0..copies)
        .map(|_| {
            let left = gen.length(0, max_flank);
            let right = gen.length(0, max_flank);
            let mut s = gen.random_sequence(left);
            s.extend(gen.mutate(&core, rate));
            s.extend(gen.random_sequence(right));
            s
        })
        .collect()
}

pub fn store_of(seqs: &[Vec<u8>]) -> SequenceStore {
    SequenceStore::from_records(seqs.iter().enumerate().map(|(i, s)| (format!("s{i}"), s.clone()))).unwrap()
}
