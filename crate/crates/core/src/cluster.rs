//! Clusters, cluster sets, and the merge algebra over them.
//!
//! A cluster is a representative plus the members known to be similar to it
//! (directly or through a transitive representative). Two clusters whose
//! representatives are transitively similar are fully merged; merely similar
//! representatives exchange the members that score against the other side.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use crate::alignment::{
    is_similar, self_score, sw_align, sw_score, uncovered, AlignmentParams, AlignmentResult, Side, Thresholds,
};
use crate::sequence::{Sequence, SequenceStore};

#[derive(Debug, Clone)]
pub struct Cluster {
    representative: u32,
    members: Vec<u32>,
    member_set: HashSet<u32>,
    fully_merged: bool,
    rep_self_score: i32,
}

impl PartialEq for Cluster {
    fn eq(&self, other: &Self) -> bool {
        self.representative == other.representative
            && self.members == other.members
            && self.fully_merged == other.fully_merged
    }
}

impl Eq for Cluster {}

impl Cluster {
    pub fn singleton(seq: &Sequence, params: &AlignmentParams) -> Self {
        Cluster {
            representative: seq.index,
            members: vec![seq.index],
            member_set: HashSet::from([seq.index]),
            fully_merged: false,
            rep_self_score: self_score(seq, params),
        }
    }

    /// Rebuilds a cluster from a member list. Duplicates are dropped (first
    /// occurrence kept) and the representative is prepended if missing.
    pub fn from_members(representative: u32, members: impl IntoIterator<Item = u32>, rep_self_score: i32) -> Self {
        let mut cluster = Cluster {
            representative,
            members: Vec::new(),
            member_set: HashSet::new(),
            fully_merged: false,
            rep_self_score,
        };
        let mut iter = members.into_iter().peekable();
        if iter.peek().is_none() {
            cluster.add_member(representative);
        }
        for m in iter {
            cluster.add_member(m);
        }
        if !cluster.member_set.contains(&representative) {
            cluster.members.insert(0, representative);
            cluster.member_set.insert(representative);
        }
        cluster
    }

    #[inline]
    pub fn representative(&self) -> u32 {
        self.representative
    }

    #[inline]
    pub fn members(&self) -> &[u32] {
        &self.members
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.members.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    #[inline]
    pub fn contains(&self, index: u32) -> bool {
        self.member_set.contains(&index)
    }

    #[inline]
    pub fn is_fully_merged(&self) -> bool {
        self.fully_merged
    }

    pub fn rep_self_score(&self) -> i32 {
        self.rep_self_score
    }

    /// Appends `index` unless already present. Returns whether it was added.
    pub fn add_member(&mut self, index: u32) -> bool {
        if self.member_set.insert(index) {
            self.members.push(index);
            true
        } else {
            false
        }
    }

    pub fn extend_members(&mut self, indices: impl IntoIterator<Item = u32>) -> usize {
        indices.into_iter().filter(|&i| self.add_member(i)).count()
    }

    pub fn mark_fully_merged(&mut self) {
        self.fully_merged = true;
    }

    /// Clears the tombstone. Only used when a distributed merge has to keep a
    /// cluster whose absorber did not survive.
    pub(crate) fn revive(&mut self) {
        self.fully_merged = false;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClusterSet {
    clusters: Vec<Cluster>,
}

impl ClusterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(seq: &Sequence, params: &AlignmentParams) -> Self {
        ClusterSet { clusters: vec![Cluster::singleton(seq, params)] }
    }

    /// One singleton set per sequence, in store order.
    pub fn singletons(store: &SequenceStore, params: &AlignmentParams) -> Vec<ClusterSet> {
        store.iter().map(|s| ClusterSet::singleton(s, params)).collect()
    }

    /// Builds a set from clusters, dropping any tombstones.
    pub fn from_clusters(clusters: impl IntoIterator<Item = Cluster>) -> Self {
        ClusterSet { clusters: clusters.into_iter().filter(|c| !c.fully_merged).collect() }
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Cluster> {
        self.clusters.iter()
    }

    pub fn into_clusters(self) -> Vec<Cluster> {
        self.clusters
    }

    pub fn push(&mut self, cluster: Cluster) {
        if !cluster.fully_merged {
            self.clusters.push(cluster);
        }
    }

    pub fn total_members(&self) -> usize {
        self.clusters.iter().map(Cluster::len).sum()
    }

    /// Distinct sequence indices covered by any cluster.
    pub fn covered(&self) -> HashSet<u32> {
        self.clusters.iter().flat_map(|c| c.members.iter().copied()).collect()
    }
}

const SHARDS: usize = 64;

/// Counts of Smith-Waterman invocations made while clustering.
///
/// Scores are remembered per unordered pair, so a pair met again (a member
/// copied into several clusters, or a representative that is also a member
/// elsewhere) is never aligned or counted twice. A shard stays locked while
/// its pair is aligned, so racing threads cannot both do the work.
#[derive(Debug)]
pub struct AlignmentCounter {
    representative: AtomicU64,
    exchange: AtomicU64,
    scores: Vec<Mutex<HashMap<u64, i32>>>,
}

impl Default for AlignmentCounter {
    fn default() -> Self {
        AlignmentCounter {
            representative: AtomicU64::new(0),
            exchange: AtomicU64::new(0),
            scores: (0..SHARDS).map(|_| Mutex::new(HashMap::new())).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignmentKind {
    Representative,
    Exchange,
}

impl AlignmentCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_representative(&self, n: u64) {
        self.representative.fetch_add(n, Ordering::Relaxed);
    }

    pub fn add_exchange(&self, n: u64) {
        self.exchange.fetch_add(n, Ordering::Relaxed);
    }

    /// Score of the pair `(a, b)`, running `align` and counting it under
    /// `kind` only the first time the pair is seen.
    pub fn score(&self, a: u32, b: u32, kind: AlignmentKind, align: impl FnOnce() -> i32) -> i32 {
        let key = (u64::from(a.min(b)) << 32) | u64::from(a.max(b));
        let shard = (key.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 58) as usize % SHARDS;
        let mut map = self.scores[shard].lock().unwrap_or_else(|e| e.into_inner());
        if let Some(&s) = map.get(&key) {
            return s;
        }
        let s = align();
        map.insert(key, s);
        match kind {
            AlignmentKind::Representative => self.add_representative(1),
            AlignmentKind::Exchange => self.add_exchange(1),
        }
        s
    }

    pub fn representative(&self) -> u64 {
        self.representative.load(Ordering::Relaxed)
    }

    pub fn exchange(&self) -> u64 {
        self.exchange.load(Ordering::Relaxed)
    }

    pub fn total(&self) -> u64 {
        self.representative() + self.exchange()
    }
}

/// Everything a merge needs besides the clusters themselves.
#[derive(Clone, Copy)]
pub struct MergeContext<'a> {
    pub store: &'a SequenceStore,
    pub params: &'a AlignmentParams,
    pub thresholds: &'a Thresholds,
    pub counter: &'a AlignmentCounter,
}

impl<'a> MergeContext<'a> {
    pub fn new(
        store: &'a SequenceStore,
        params: &'a AlignmentParams,
        thresholds: &'a Thresholds,
        counter: &'a AlignmentCounter,
    ) -> Self {
        MergeContext { store, params, thresholds, counter }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitivityVerdict {
    /// The first representative can stand in for the second.
    FirstRepresentsSecond,
    /// The second representative can stand in for the first.
    SecondRepresentsFirst,
    SimilarOnly,
    Dissimilar,
}

/// Decides how two representatives relate given their alignment.
///
/// Absorption needs a score of at least `full_merge` and the absorbed side must
/// be almost entirely covered (fewer than `max_uncovered` residues outside the
/// alignment). Absorption into the second cluster is checked first.
pub fn transitivity_check(
    rep_a: &Sequence,
    rep_b: &Sequence,
    aln: &AlignmentResult,
    th: &Thresholds,
) -> TransitivityVerdict {
    if !is_similar(aln.score, th) {
        return TransitivityVerdict::Dissimilar;
    }
    if aln.score >= th.full_merge {
        if uncovered(aln, Side::A, rep_a.len()) < th.max_uncovered {
            return TransitivityVerdict::SecondRepresentsFirst;
        }
        if uncovered(aln, Side::B, rep_b.len()) < th.max_uncovered {
            return TransitivityVerdict::FirstRepresentsSecond;
        }
    }
    TransitivityVerdict::SimilarOnly
}

/// Aligns two representatives and classifies them. Counts one alignment
/// unless the pair was already aligned in this run.
pub fn representative_verdict(rep_a: u32, rep_b: u32, ctx: &MergeContext<'_>) -> TransitivityVerdict {
    let a = ctx.store.seq(rep_a);
    let b = ctx.store.seq(rep_b);
    // Spans only matter once the score reaches the full-merge threshold.
    let score = ctx.counter.score(rep_a, rep_b, AlignmentKind::Representative, || sw_score(a, b, ctx.params));
    if score < ctx.thresholds.full_merge {
        let aln = AlignmentResult { score, ..AlignmentResult::EMPTY };
        return transitivity_check(a, b, &aln, ctx.thresholds);
    }
    transitivity_check(a, b, &sw_align(a, b, ctx.params), ctx.thresholds)
}

/// Members of `from` (in order) that should be copied into a cluster with
/// representative `target_rep`. `from_rep` is included without alignment
/// since the representatives are already known to be similar; members that
/// `already_in_target` reports as present are skipped without alignment.
pub fn exchange_candidates(
    from: &[u32],
    from_rep: u32,
    target_rep: u32,
    already_in_target: impl Fn(u32) -> bool,
    ctx: &MergeContext<'_>,
) -> Vec<u32> {
    let target = ctx.store.seq(target_rep);
    let mut out = Vec::new();
    for &m in from {
        if already_in_target(m) {
            continue;
        }
        if m == from_rep {
            out.push(m);
            continue;
        }
        let score =
            ctx.counter.score(m, target_rep, AlignmentKind::Exchange, || sw_score(ctx.store.seq(m), target, ctx.params));
        if is_similar(score, ctx.thresholds) {
            out.push(m);
        }
    }
    out
}

/// Copies members that are similar to the other cluster's representative
/// across, in both directions. Representatives never change.
pub fn exchange_similar(c1: &mut Cluster, c2: &mut Cluster, ctx: &MergeContext<'_>) {
    let into_c2 = exchange_candidates(&c1.members, c1.representative, c2.representative, |m| c2.contains(m), ctx);
    let into_c1 = exchange_candidates(&c2.members, c2.representative, c1.representative, |m| c1.contains(m), ctx);
    c2.extend_members(into_c2);
    c1.extend_members(into_c1);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeOutcome {
    MergedIntoFirst,
    MergedIntoSecond,
    Exchanged,
    Untouched,
}

/// Absorbs `from` into `into` and tombstones `from`.
pub fn absorb(into: &mut Cluster, from: &mut Cluster) {
    into.extend_members(from.members.iter().copied());
    from.mark_fully_merged();
}

/// Merges two live clusters according to their representatives' verdict.
pub fn merge_clusters(c1: &mut Cluster, c2: &mut Cluster, ctx: &MergeContext<'_>) -> MergeOutcome {
    debug_assert!(!c1.fully_merged && !c2.fully_merged);
    match representative_verdict(c1.representative, c2.representative, ctx) {
        TransitivityVerdict::SecondRepresentsFirst => {
            absorb(c2, c1);
            MergeOutcome::MergedIntoSecond
        }
        TransitivityVerdict::FirstRepresentsSecond => {
            absorb(c1, c2);
            MergeOutcome::MergedIntoFirst
        }
        TransitivityVerdict::SimilarOnly => {
            exchange_similar(c1, c2, ctx);
            MergeOutcome::Exchanged
        }
        TransitivityVerdict::Dissimilar => MergeOutcome::Untouched,
    }
}

/// Runs one cluster of the first set against a run of second-set clusters:
/// the inner loop of a set merge. Stops early once `c1` has been absorbed.
/// Tombstoned clusters in `others` are skipped.
pub fn merge_into_slice<'c>(
    c1: &mut Cluster,
    others: impl IntoIterator<Item = &'c mut Cluster>,
    ctx: &MergeContext<'_>,
) {
    for c2 in others {
        if c1.fully_merged {
            break;
        }
        if c2.fully_merged {
            continue;
        }
        if merge_clusters(c1, c2, ctx) == MergeOutcome::MergedIntoSecond {
            break;
        }
    }
}

/// Merges two cluster sets. Every cluster of `cs1` is run against every live
/// cluster of `cs2`; survivors of `cs1` come first in the result.
pub fn merge_sets(cs1: ClusterSet, cs2: ClusterSet, ctx: &MergeContext<'_>) -> ClusterSet {
    let mut first = cs1.clusters;
    let mut second = cs2.clusters;
    for c1 in first.iter_mut() {
        merge_into_slice(c1, second.iter_mut(), ctx);
    }
    ClusterSet::from_clusters(first.into_iter().chain(second))
}

/// Sequential bottom-up merge over a FIFO of sets until one set remains.
pub fn bottom_up(sets: Vec<ClusterSet>, ctx: &MergeContext<'_>) -> ClusterSet {
    let mut queue: VecDeque<ClusterSet> = sets.into();
    while queue.len() > 1 {
        let cs1 = queue.pop_front().expect("len > 1");
        let cs2 = queue.pop_front().expect("len > 1");
        queue.push_back(merge_sets(cs1, cs2, ctx));
    }
    queue.pop_front().unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::Span;

    fn store(seqs: &[&str]) -> SequenceStore {
        SequenceStore::from_records(seqs.iter().enumerate().map(|(i, s)| (format!("s{i}"), s.as_bytes()))).unwrap()
    }

    fn aln(score: i32, a: (usize, usize), b: (usize, usize)) -> AlignmentResult {
        AlignmentResult { score, span_a: Span::new(a.0, a.1), span_b: Span::new(b.0, b.1) }
    }

    const SEQ_A: &str = "MKVLAAGWYTRNDCQEHIFPSTWYVMKVLAAGWYT";

    fn long_seq(len: usize, seed: u64) -> String {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| crate::alphabet::RESIDUES[rng.gen_range(0..20)] as char).collect()
    }

    #[test]
    fn verdict_rules() {
        let th = Thresholds::default();
        let a = "A".repeat(100);
        let b = "A".repeat(300);
        let st = store(&[&a, &b]);
        let (ra, rb) = (st.seq(0), st.seq(1));
        // A nearly covered, B not: B can represent A.
        assert_eq!(
            transitivity_check(ra, rb, &aln(260, (2, 99), (0, 100)), &th),
            TransitivityVerdict::SecondRepresentsFirst
        );
        assert_eq!(transitivity_check(ra, rb, &aln(200, (0, 100), (0, 100)), &th), TransitivityVerdict::SimilarOnly);
        assert_eq!(transitivity_check(ra, rb, &aln(300, (30, 90), (40, 100)), &th), TransitivityVerdict::SimilarOnly);
        assert_eq!(transitivity_check(ra, rb, &aln(180, (0, 100), (0, 100)), &th), TransitivityVerdict::Dissimilar);
        // Only B covered.
        assert_eq!(
            transitivity_check(rb, ra, &aln(260, (0, 100), (2, 99)), &th),
            TransitivityVerdict::FirstRepresentsSecond
        );
        // Both covered: the second side wins.
        assert_eq!(
            transitivity_check(ra, ra, &aln(260, (0, 100), (0, 100)), &th),
            TransitivityVerdict::SecondRepresentsFirst
        );
        // Exactly max_uncovered left over is not enough.
        assert_eq!(transitivity_check(ra, ra, &aln(260, (15, 100), (0, 85)), &th), TransitivityVerdict::SimilarOnly);
    }

    #[test]
    fn identical_singletons_merge_into_second() {
        let st = store(&[SEQ_A, SEQ_A]);
        let params = AlignmentParams::default();
        let th = Thresholds { similarity: 10, full_merge: 20, max_uncovered: 15 };
        let counter = AlignmentCounter::new();
        let ctx = MergeContext::new(&st, &params, &th, &counter);
        let mut c1 = Cluster::singleton(st.seq(0), &params);
        let mut c2 = Cluster::singleton(st.seq(1), &params);
        assert_eq!(merge_clusters(&mut c1, &mut c2, &ctx), MergeOutcome::MergedIntoSecond);
        assert!(c1.is_fully_merged());
        assert_eq!(c2.representative(), 1);
        assert_eq!(c2.members(), &[1, 0]);
        assert_eq!(counter.representative(), 1);
    }

    #[test]
    fn dissimilar_is_untouched() {
        let st = store(&["WWWWWWWW", "AAAAAAAA"]);
        let params = AlignmentParams::default();
        let th = Thresholds::default();
        let counter = AlignmentCounter::new();
        let ctx = MergeContext::new(&st, &params, &th, &counter);
        let mut c1 = Cluster::singleton(st.seq(0), &params);
        let mut c2 = Cluster::singleton(st.seq(1), &params);
        let before = (c1.clone(), c2.clone());
        assert_eq!(merge_clusters(&mut c1, &mut c2, &ctx), MergeOutcome::Untouched);
        assert_eq!((c1, c2), before);
    }

    #[test]
    fn exchange_copies_similar_members_without_duplicates() {
        // r1 and r2 share a 60-residue core but each has a long private tail,
        // so they are similar without either covering the other. x is similar
        // to r2 only through the core; y is unrelated.
        let core = long_seq(60, 1);
        let r1 = format!("{core}{}", long_seq(40, 2));
        let r2 = format!("{}{core}", long_seq(40, 3));
        let x = core.clone();
        let y = long_seq(60, 4);
        let st = store(&[&r1, &r2, &x, &y]);
        let params = AlignmentParams::default();
        let th = Thresholds { similarity: 181, full_merge: 250, max_uncovered: 15 };
        let counter = AlignmentCounter::new();
        let ctx = MergeContext::new(&st, &params, &th, &counter);
        assert_eq!(representative_verdict(0, 1, &ctx), TransitivityVerdict::SimilarOnly);

        let mut c1 = Cluster::from_members(0, [0, 2, 3], 0);
        let mut c2 = Cluster::singleton(st.seq(1), &params);
        exchange_similar(&mut c1, &mut c2, &ctx);
        assert_eq!(c2.members(), &[1, 0, 2]);
        assert_eq!(c1.members(), &[0, 2, 3, 1]);
        assert_eq!(c1.representative(), 0);
        assert_eq!(c2.representative(), 1);

        // Already-present members are not duplicated, and y against r2 is
        // remembered rather than realigned.
        let before = counter.exchange();
        exchange_similar(&mut c1, &mut c2, &ctx);
        assert_eq!(c2.members(), &[1, 0, 2]);
        assert_eq!(c1.members(), &[0, 2, 3, 1]);
        assert_eq!(counter.exchange(), before);
    }

    #[test]
    fn counter_aligns_each_pair_once() {
        let counter = AlignmentCounter::new();
        let mut calls = 0;
        assert_eq!(counter.score(3, 9, AlignmentKind::Exchange, || { calls += 1; 42 }), 42);
        assert_eq!(counter.score(9, 3, AlignmentKind::Representative, || { calls += 1; 0 }), 42);
        assert_eq!(calls, 1);
        assert_eq!((counter.representative(), counter.exchange()), (0, 1));
        counter.score(3, 8, AlignmentKind::Representative, || 1);
        assert_eq!(counter.total(), 2);
    }

    #[test]
    fn merge_sets_identity_and_dissimilar_pairs() {
        let st = store(&["WWWWWWWW", "AAAAAAAA", "CCCCCCCC"]);
        let params = AlignmentParams::default();
        let th = Thresholds::default();
        let counter = AlignmentCounter::new();
        let ctx = MergeContext::new(&st, &params, &th, &counter);
        let x = ClusterSet::from_clusters(st.iter().map(|s| Cluster::singleton(s, &params)));
        assert_eq!(merge_sets(x.clone(), ClusterSet::new(), &ctx), x);
        assert_eq!(merge_sets(ClusterSet::new(), x.clone(), &ctx), x);
        assert_eq!(counter.total(), 0);

        let a = ClusterSet::singleton(st.seq(0), &params);
        let b = ClusterSet::singleton(st.seq(1), &params);
        let merged = merge_sets(a, b, &ctx);
        assert_eq!(merged.len(), 2);
        assert_eq!(counter.representative(), 1);
    }

    #[test]
    fn no_similarity_costs_m_times_n() {
        let seqs: Vec<String> = (0..7).map(|i| long_seq(30, 100 + i)).collect();
        let refs: Vec<&str> = seqs.iter().map(String::as_str).collect();
        let st = store(&refs);
        let params = AlignmentParams::default();
        let th = Thresholds::default();
        let counter = AlignmentCounter::new();
        let ctx = MergeContext::new(&st, &params, &th, &counter);
        let cs1 = ClusterSet::from_clusters((0..3).map(|i| Cluster::singleton(st.seq(i), &params)));
        let cs2 = ClusterSet::from_clusters((3..7).map(|i| Cluster::singleton(st.seq(i), &params)));
        let merged = merge_sets(cs1, cs2, &ctx);
        assert_eq!(merged.len(), 7);
        assert_eq!(counter.representative(), 12);
        let order: Vec<u32> = merged.iter().map(Cluster::representative).collect();
        assert_eq!(order, vec![0, 1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn merged_into_first_keeps_scanning() {
        // Set 1 holds a long sequence that covers both shorter second-set
        // sequences; it absorbs both instead of stopping after the first.
        let core = long_seq(80, 9);
        let long = format!("{core}{}", long_seq(60, 10));
        let st = store(&[&long, &core, &core]);
        let params = AlignmentParams::default();
        let th = Thresholds::default();
        let counter = AlignmentCounter::new();
        let ctx = MergeContext::new(&st, &params, &th, &counter);
        let cs1 = ClusterSet::singleton(st.seq(0), &params);
        let cs2 = ClusterSet::from_clusters([Cluster::singleton(st.seq(1), &params), Cluster::singleton(st.seq(2), &params)]);
        // Each core copy is fully covered by `long` but not the other way round.
        let merged = merge_sets(cs1, cs2, &ctx);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged.clusters()[0].representative(), 0);
        assert_eq!(merged.clusters()[0].members(), &[0, 1, 2]);
        assert_eq!(counter.representative(), 2);
    }

    #[test]
    fn bottom_up_identical_sequences_collapse() {
        let seqs = vec![SEQ_A.repeat(3); 9];
        let refs: Vec<&str> = seqs.iter().map(String::as_str).collect();
        let st = store(&refs);
        let params = AlignmentParams::default();
        let th = Thresholds::default();
        let counter = AlignmentCounter::new();
        let ctx = MergeContext::new(&st, &params, &th, &counter);
        let out = bottom_up(ClusterSet::singletons(&st, &params), &ctx);
        assert_eq!(out.len(), 1);
        assert_eq!(out.clusters()[0].len(), 9);
        assert!(bottom_up(Vec::new(), &ctx).is_empty());
    }

    #[test]
    fn from_members_dedups_and_keeps_representative() {
        let c = Cluster::from_members(5, [1, 1, 2], 0);
        assert_eq!(c.members(), &[5, 1, 2]);
        let c = Cluster::from_members(5, [], 0);
        assert_eq!(c.members(), &[5]);
    }
}
