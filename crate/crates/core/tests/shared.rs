mod common;

use std::sync::mpsc;
use std::time::Duration;

use common::invariants::{assert_well_formed, canonical, flanked_family, store_of};
use proptest::prelude::*;
use protclust::alignment::{AlignmentParams, Thresholds};
use protclust::cluster::{bottom_up, AlignmentCounter, ClusterSet, MergeContext};
use protclust::eval::{brute_force_pairs, extract_pairs, recall_report};
use protclust::sequence::SequenceStore;
use protclust::shared::{cluster, SharedConfig};
use protclust::synth::{planted_families, random_store, PlantedConfig};

fn config(threads: usize, granularity: u64, jitter: Option<u64>) -> SharedConfig {
    SharedConfig { threads, granularity, jitter }
}

fn pairs(n: usize) -> u64 {
    (n * n.saturating_sub(1) / 2) as u64
}

/// Flanked families give plenty of exchanges and overlapping clusters.
fn mixed_store(seed: u64, families: usize, copies: usize) -> SequenceStore {
    let mut seqs = Vec::new();
    for f in 0..families as u64 {
        seqs.extend(flanked_family(seed * 1000 + f, copies, 70, 30, 0.08));
    }
    store_of(&seqs)
}

#[test]
fn trivial_inputs() {
    let params = AlignmentParams::default();
    let th = Thresholds::default();
    let empty = SequenceStore::from_records(Vec::<(String, Vec<u8>)>::new()).unwrap();
    for threads in [1, 3] {
        assert!(cluster(&empty, &params, &th, &SharedConfig::with_threads(threads)).clusters.is_empty());
        let one = random_store(1, 50, 50, 1).unwrap();
        let run = cluster(&one, &params, &th, &SharedConfig::with_threads(threads));
        assert_eq!(run.clusters.len(), 1);
        assert_eq!(run.stats.alignments_total(), 0);
    }
}

#[test]
fn dissimilar_sequences_cost_every_pair_once() {
    let store = random_store(60, 30, 120, 3).unwrap();
    let params = AlignmentParams::default();
    let th = Thresholds::default();
    // Confirm the input really has no similar pair.
    assert!(brute_force_pairs(&store, &params, &th, 1).pairs.is_empty());
    for cfg in [config(1, 4_000_000, None), config(3, 1, None), config(4, 20_000, Some(9))] {
        let run = cluster(&store, &params, &th, &cfg);
        assert_eq!(run.clusters.len(), 60);
        assert_eq!(run.stats.alignments_representative, pairs(60));
        assert_eq!(run.stats.alignments_exchange, 0);
        assert_well_formed(&run.clusters, 60);
    }
}

#[test]
fn identical_sequences_collapse() {
    let seq = random_store(1, 150, 150, 11).unwrap().seq(0).residues.clone();
    let store = store_of(&vec![seq; 40]);
    let params = AlignmentParams::default();
    let th = Thresholds::default();
    for cfg in [config(1, 4_000_000, None), config(4, 1, Some(3))] {
        let run = cluster(&store, &params, &th, &cfg);
        assert_eq!(run.clusters.len(), 1);
        assert_eq!(run.clusters.clusters()[0].len(), 40);
        assert_eq!(run.stats.alignments_representative, 39);
    }
}

#[test]
fn single_thread_matches_sequential_merge() {
    let store = mixed_store(4, 6, 8);
    let params = AlignmentParams::default();
    let th = Thresholds::default();
    let counter = AlignmentCounter::new();
    let ctx = MergeContext::new(&store, &params, &th, &counter);
    let expected = bottom_up(ClusterSet::singletons(&store, &params), &ctx);
    let a = cluster(&store, &params, &th, &SharedConfig::with_threads(1));
    let b = cluster(&store, &params, &th, &SharedConfig::with_threads(1));
    assert_eq!(a.clusters, expected);
    assert_eq!(b.clusters, expected);
    assert_eq!(a.stats.alignments_total(), counter.total());
}

/// Runs `f` on its own thread and fails if it does not finish in time.
fn within<T: Send + 'static>(limit: Duration, f: impl FnOnce() -> T + Send + 'static) -> T {
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let _ = tx.send(f());
    });
    rx.recv_timeout(limit).expect("run did not finish: possible deadlock")
}

// Heavy scheduling noise around every lock, tiny tasks so that many partial
// merges of the same set merge race on the same clusters.
#[test]
fn stress_with_jitter() {
    for seed in 0..12u64 {
        let store = mixed_store(seed, 5, 10);
        let n = store.len();
        let threads = 2 + (seed as usize % 3);
        let run = within(Duration::from_secs(120), move || {
            let params = AlignmentParams::default();
            let th = Thresholds::default();
            cluster(&store, &params, &th, &config(threads, 1 + seed * 3_000, Some(seed + 1)))
        });
        assert_well_formed(&run.clusters, n);
        assert!(run.stats.alignments_total() <= pairs(n));
        assert!(run.stats.partial_tasks > 0);
    }
}

#[test]
fn parallel_recall_matches_single_thread() {
    let cfg = PlantedConfig { families: 30, copies: 10, ..PlantedConfig::default() };
    let store = planted_families(&cfg).unwrap();
    let params = AlignmentParams::default();
    let th = Thresholds::default();
    let truth = brute_force_pairs(&store, &params, &th, 2).pairs;
    let recall = |cfg: SharedConfig| {
        let run = cluster(&store, &params, &th, &cfg);
        assert_well_formed(&run.clusters, store.len());
        let found = extract_pairs(&run.clusters, &store, &params, &th, 2).pairs;
        let report = recall_report(&truth, &found).unwrap();
        assert_eq!(report.anomalies, 0);
        report.recall_percent()
    };
    let base = recall(SharedConfig::with_threads(1));
    for (threads, jitter) in [(2, None), (4, Some(5)), (3, Some(77))] {
        let r = recall(config(threads, 50_000, jitter));
        assert!((r - base).abs() <= 0.1, "threads {threads}: {r} vs {base}");
    }
}

#[test]
fn planted_families_are_recovered() {
    let cfg = PlantedConfig { families: 10, copies: 6, min_rate: 0.0, max_rate: 0.02, ..PlantedConfig::default() };
    let store = planted_families(&cfg).unwrap();
    let run = cluster(&store, &AlignmentParams::default(), &Thresholds::default(), &config(3, 10_000, None));
    // Near-identical copies absorb one another completely.
    let mut got: Vec<Vec<u32>> = canonical(&run.clusters).into_iter().map(|(_, m)| m).collect();
    got.sort();
    let mut want: Vec<Vec<u32>> = (0..10)
        .map(|f| {
            store
                .iter()
                .filter(|s| protclust::synth::family_of(&s.id) == Some(f))
                .map(|s| s.index)
                .collect()
        })
        .collect();
    want.sort();
    assert_eq!(got, want);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_interleavings_keep_invariants(
        seed in any::<u64>(),
        threads in 2usize..5,
        granularity in 1u64..100_000,
        families in 1usize..5,
        copies in 1usize..8,
    ) {
        let store = mixed_store(seed % 10_000, families, copies);
        let n = store.len();
        let run = cluster(&store, &AlignmentParams::default(), &Thresholds::default(), &config(threads, granularity, Some(seed)));
        assert_well_formed(&run.clusters, n);
        prop_assert!(run.stats.alignments_total() <= pairs(n));
        prop_assert!(run.clusters.len() <= n);
    }
}
