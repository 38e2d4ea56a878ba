//! Shared-memory clustering runtime.
//!
//! A coordinator pops pairs of cluster sets off a FIFO frontier, splits each
//! set merge into partial merges (one first-set cluster against a slice of the
//! second set) and hands them to a pool of worker threads. Workers update
//! clusters in place: alignments run without locks, member lists are mutated
//! under a per-cluster mutex, and full merges are serialized per set merge so
//! tombstoning is atomic. When the last partial of a merge finishes, the
//! surviving clusters of both sets are pushed back onto the frontier.
//!
//! Lock order: a merge's commit lock may be held while taking one cluster
//! lock; no code path ever holds two cluster locks.

use std::collections::VecDeque;
use std::ops::Range;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::alignment::{AlignmentParams, Thresholds};
use crate::cluster::{
    bottom_up, exchange_candidates, representative_verdict, AlignmentCounter, Cluster, ClusterSet, MergeContext,
    TransitivityVerdict,
};
use crate::sequence::SequenceStore;

/// Estimated residue-cell comparisons per partial merge.
pub const DEFAULT_GRANULARITY: u64 = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SharedConfig {
    pub threads: usize,
    pub granularity: u64,
    /// Randomly yields or sleeps around lock acquisitions. Stress tests only.
    #[doc(hidden)]
    pub jitter: Option<u64>,
}

impl Default for SharedConfig {
    fn default() -> Self {
        SharedConfig { threads: default_threads(), granularity: DEFAULT_GRANULARITY, jitter: None }
    }
}

impl SharedConfig {
    pub fn with_threads(threads: usize) -> Self {
        SharedConfig { threads, ..Self::default() }
    }
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// One first-set cluster against a contiguous run of second-set slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialMergeTask {
    pub merge_id: u64,
    pub c1: usize,
    pub slice: Range<usize>,
    pub cost_estimate: u64,
}

/// Splits the merge of two sets into partial merges whose estimated cost
/// (sum of representative length products) stays within `granularity`,
/// except when a single pair alone exceeds it.
pub fn split_by_lengths(merge_id: u64, lens1: &[usize], lens2: &[usize], granularity: u64) -> Vec<PartialMergeTask> {
    let mut tasks = Vec::new();
    for (c1, &l1) in lens1.iter().enumerate() {
        let mut start = 0;
        let mut acc = 0u64;
        for (j, &l2) in lens2.iter().enumerate() {
            let cost = (l1 as u64 * l2 as u64).max(1);
            if j > start && acc + cost > granularity {
                tasks.push(PartialMergeTask { merge_id, c1, slice: start..j, cost_estimate: acc });
                start = j;
                acc = 0;
            }
            acc += cost;
        }
        if start < lens2.len() {
            tasks.push(PartialMergeTask { merge_id, c1, slice: start..lens2.len(), cost_estimate: acc });
        }
    }
    tasks
}

pub fn split_into_partials(
    merge_id: u64,
    cs1: &ClusterSet,
    cs2: &ClusterSet,
    store: &SequenceStore,
    granularity: u64,
) -> Vec<PartialMergeTask> {
    let lens = |cs: &ClusterSet| cs.iter().map(|c| store.seq(c.representative()).len()).collect::<Vec<_>>();
    split_by_lengths(merge_id, &lens(cs1), &lens(cs2), granularity)
}

/// FIFO of sets awaiting merge plus the number of merges in flight.
#[derive(Debug, Default)]
pub struct MergeFrontier {
    pub sets: VecDeque<ClusterSet>,
    pub outstanding: usize,
}

impl MergeFrontier {
    pub fn new(sets: Vec<ClusterSet>) -> Self {
        MergeFrontier { sets: sets.into(), outstanding: 0 }
    }

    pub fn is_done(&self) -> bool {
        self.sets.len() <= 1 && self.outstanding == 0
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunStats {
    pub alignments_representative: u64,
    pub alignments_exchange: u64,
    pub set_merges: u64,
    pub partial_tasks: u64,
    pub wall_seconds: f64,
}

impl RunStats {
    pub fn alignments_total(&self) -> u64 {
        self.alignments_representative + self.alignments_exchange
    }
}

#[derive(Debug, Clone)]
pub struct SharedRun {
    pub clusters: ClusterSet,
    pub stats: RunStats,
}

/// Clusters every sequence of `store`.
pub fn cluster(store: &SequenceStore, params: &AlignmentParams, th: &Thresholds, cfg: &SharedConfig) -> SharedRun {
    merge_all(ClusterSet::singletons(store, params), store, params, th, cfg)
}

/// Bottom-up merge of arbitrary starting sets. With one thread this is the
/// plain sequential algorithm and fully deterministic.
pub fn merge_all(
    sets: Vec<ClusterSet>,
    store: &SequenceStore,
    params: &AlignmentParams,
    th: &Thresholds,
    cfg: &SharedConfig,
) -> SharedRun {
    let started = Instant::now();
    let counter = AlignmentCounter::new();
    let ctx = MergeContext::new(store, params, th, &counter);
    let merges = sets.len().saturating_sub(1) as u64;
    let (clusters, set_merges, partial_tasks) = if cfg.threads <= 1 {
        (bottom_up(sets, &ctx), merges, 0)
    } else {
        Engine::new(cfg, sets).run(&ctx)
    };
    SharedRun {
        clusters,
        stats: RunStats {
            alignments_representative: counter.representative(),
            alignments_exchange: counter.exchange(),
            set_merges,
            partial_tasks,
            wall_seconds: started.elapsed().as_secs_f64(),
        },
    }
}

struct SharedCluster {
    rep: u32,
    tombstoned: AtomicBool,
    body: Mutex<Body>,
}

struct Body {
    cluster: Cluster,
    /// Slot of the cluster that absorbed this one.
    merged_into: Option<usize>,
}

enum Commit {
    Done,
    AbsorberGone,
    AbsorbedGone,
}

/// Shared state of one in-flight set merge: first-set clusters occupy slots
/// `0..split`, second-set clusters `split..`.
pub struct ActiveMerge {
    id: u64,
    slots: Vec<SharedCluster>,
    split: usize,
    remaining: AtomicUsize,
    commit: Mutex<()>,
    jitter: Option<Jitter>,
}

impl ActiveMerge {
    pub fn new(id: u64, cs1: ClusterSet, cs2: ClusterSet, jitter: Option<u64>) -> Self {
        let split = cs1.len();
        let slots = cs1
            .into_clusters()
            .into_iter()
            .chain(cs2.into_clusters())
            .map(|c| SharedCluster {
                rep: c.representative(),
                tombstoned: AtomicBool::new(false),
                body: Mutex::new(Body { cluster: c, merged_into: None }),
            })
            .collect();
        ActiveMerge {
            id,
            slots,
            split,
            remaining: AtomicUsize::new(0),
            commit: Mutex::new(()),
            jitter: jitter.map(|seed| Jitter { state: AtomicU64::new(seed | 1) }),
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    fn dead(&self, slot: usize) -> bool {
        self.slots[slot].tombstoned.load(Ordering::Acquire)
    }

    fn lock(&self, slot: usize) -> MutexGuard<'_, Body> {
        self.noise();
        self.slots[slot].body.lock().expect("cluster lock poisoned")
    }

    fn noise(&self) {
        if let Some(j) = &self.jitter {
            j.perturb();
        }
    }

    /// Runs the set-merge inner loop for one first-set cluster over a slice of
    /// the second set, mutating clusters in place.
    pub fn execute(&self, task: &PartialMergeTask, ctx: &MergeContext<'_>) {
        debug_assert_eq!(task.merge_id, self.id);
        let c1 = task.c1;
        for k in task.slice.clone() {
            let c2 = self.split + k;
            if self.dead(c1) {
                break;
            }
            if self.dead(c2) {
                continue;
            }
            match representative_verdict(self.slots[c1].rep, self.slots[c2].rep, ctx) {
                TransitivityVerdict::SecondRepresentsFirst => match self.full_merge(c2, c1) {
                    Commit::AbsorberGone => continue,
                    Commit::Done | Commit::AbsorbedGone => break,
                },
                TransitivityVerdict::FirstRepresentsSecond => match self.full_merge(c1, c2) {
                    Commit::AbsorberGone => break,
                    Commit::Done | Commit::AbsorbedGone => continue,
                },
                TransitivityVerdict::SimilarOnly => self.exchange(c1, c2, ctx),
                TransitivityVerdict::Dissimilar => {}
            }
        }
    }

    fn full_merge(&self, into: usize, from: usize) -> Commit {
        let _commit = self.commit.lock().expect("commit lock poisoned");
        if self.dead(from) {
            return Commit::AbsorbedGone;
        }
        if self.dead(into) {
            return Commit::AbsorberGone;
        }
        let moved = {
            let mut body = self.lock(from);
            body.cluster.mark_fully_merged();
            body.merged_into = Some(into);
            self.slots[from].tombstoned.store(true, Ordering::Release);
            body.cluster.members().to_vec()
        };
        self.lock(into).cluster.extend_members(moved);
        Commit::Done
    }

    fn exchange(&self, c1: usize, c2: usize, ctx: &MergeContext<'_>) {
        let snap1 = self.lock(c1).cluster.clone();
        let snap2 = self.lock(c2).cluster.clone();
        let into_c2 = exchange_candidates(snap1.members(), snap1.representative(), snap2.representative(), |m| snap2.contains(m), ctx);
        let into_c1 = exchange_candidates(snap2.members(), snap2.representative(), snap1.representative(), |m| snap1.contains(m), ctx);
        self.add_members(c2, &into_c2);
        self.add_members(c1, &into_c1);
    }

    /// Appends to a cluster, following absorptions if it has been merged away
    /// in the meantime so that no exchanged member is lost.
    fn add_members(&self, mut slot: usize, members: &[u32]) {
        if members.is_empty() {
            return;
        }
        loop {
            let mut body = self.lock(slot);
            match body.merged_into {
                Some(next) => slot = next,
                None => {
                    body.cluster.extend_members(members.iter().copied());
                    return;
                }
            }
        }
    }

    /// Surviving clusters, first set then second set.
    pub fn into_set(self) -> ClusterSet {
        ClusterSet::from_clusters(
            self.slots.into_iter().map(|s| s.body.into_inner().expect("cluster lock poisoned").cluster),
        )
    }
}

// Cheap xorshift; no need for a real RNG on the hot path.
struct Jitter {
    state: AtomicU64,
}

impl Jitter {
    fn perturb(&self) {
        let mut x = self.state.load(Ordering::Relaxed);
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.state.store(x, Ordering::Relaxed);
        match x % 8 {
            0 => std::thread::sleep(Duration::from_micros(x % 50)),
            1 | 2 => std::thread::yield_now(),
            _ => {}
        }
    }
}

struct Sched {
    frontier: MergeFrontier,
    tasks: VecDeque<(Arc<ActiveMerge>, PartialMergeTask)>,
    next_merge_id: u64,
    set_merges: u64,
    partial_tasks: u64,
    shutdown: bool,
}

struct Engine {
    cfg: SharedConfig,
    sched: Mutex<Sched>,
    wake: Condvar,
}

impl Engine {
    fn new(cfg: &SharedConfig, sets: Vec<ClusterSet>) -> Self {
        Engine {
            cfg: *cfg,
            sched: Mutex::new(Sched {
                frontier: MergeFrontier::new(sets),
                tasks: VecDeque::new(),
                next_merge_id: 0,
                set_merges: 0,
                partial_tasks: 0,
                shutdown: false,
            }),
            wake: Condvar::new(),
        }
    }

    fn run(self, ctx: &MergeContext<'_>) -> (ClusterSet, u64, u64) {
        std::thread::scope(|scope| {
            for _ in 0..self.cfg.threads {
                scope.spawn(|| self.worker(ctx));
            }
            self.coordinate(ctx.store);
        });
        let mut sched = self.sched.into_inner().expect("scheduler lock poisoned");
        let set = sched.frontier.sets.pop_front().unwrap_or_default();
        (set, sched.set_merges, sched.partial_tasks)
    }

    fn coordinate(&self, store: &SequenceStore) {
        let cap = 2 * self.cfg.threads;
        let mut sched = self.sched.lock().expect("scheduler lock poisoned");
        loop {
            if sched.frontier.is_done() {
                sched.shutdown = true;
                self.wake.notify_all();
                return;
            }
            if sched.frontier.sets.len() >= 2 && sched.tasks.len() < cap {
                let cs1 = sched.frontier.sets.pop_front().expect("len >= 2");
                let cs2 = sched.frontier.sets.pop_front().expect("len >= 2");
                sched.set_merges += 1;
                if cs1.is_empty() || cs2.is_empty() {
                    let merged = if cs1.is_empty() { cs2 } else { cs1 };
                    sched.frontier.sets.push_back(merged);
                    continue;
                }
                let id = sched.next_merge_id;
                sched.next_merge_id += 1;
                let tasks = split_into_partials(id, &cs1, &cs2, store, self.cfg.granularity);
                let merge = Arc::new(ActiveMerge::new(id, cs1, cs2, self.cfg.jitter.map(|s| s ^ id)));
                merge.remaining.store(tasks.len(), Ordering::Release);
                sched.partial_tasks += tasks.len() as u64;
                sched.frontier.outstanding += 1;
                sched.tasks.extend(tasks.into_iter().map(|t| (Arc::clone(&merge), t)));
                self.wake.notify_all();
                continue;
            }
            sched = self.wake.wait(sched).expect("scheduler lock poisoned");
        }
    }

    fn worker(&self, ctx: &MergeContext<'_>) {
        loop {
            let (merge, task) = {
                let mut sched = self.sched.lock().expect("scheduler lock poisoned");
                loop {
                    if let Some(item) = sched.tasks.pop_front() {
                        break item;
                    }
                    if sched.shutdown {
                        return;
                    }
                    sched = self.wake.wait(sched).expect("scheduler lock poisoned");
                }
            };
            merge.execute(&task, ctx);
            if merge.remaining.fetch_sub(1, Ordering::AcqRel) == 1 {
                // Last partial: every other reference is about to be dropped
                // by workers that already finished their tasks.
                let merge = wait_unwrap(merge);
                let merged = merge.into_set();
                let mut sched = self.sched.lock().expect("scheduler lock poisoned");
                sched.frontier.sets.push_back(merged);
                sched.frontier.outstanding -= 1;
                self.wake.notify_all();
            } else {
                // Let the finishing thread take sole ownership.
                drop(merge);
            }
        }
    }
}

fn wait_unwrap(mut merge: Arc<ActiveMerge>) -> ActiveMerge {
    loop {
        match Arc::try_unwrap(merge) {
            Ok(m) => return m,
            Err(shared) => {
                merge = shared;
                std::thread::yield_now();
            }
        }
    }
}
