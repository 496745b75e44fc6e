use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::partial::{path_refined, PartialTraj};
use crate::ssp::{probability_f64, NodeId, PolicyTree};

#[derive(Clone, Debug, PartialEq)]
pub struct QueueEntry {
    pub leaf: NodeId,
    pub p: f64,
    pub c: f64,
}

impl QueueEntry {
    pub fn key(&self) -> f64 {
        self.p / self.c
    }
}

struct Keyed(QueueEntry);

impl PartialEq for Keyed {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Keyed {}

impl PartialOrd for Keyed {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Keyed {
    // Larger p/c first; equal keys pop the smaller node id first.
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .key()
            .total_cmp(&other.0.key())
            .then_with(|| other.0.leaf.cmp(&self.0.leaf))
    }
}

/// Max-priority queue of unrefined leaves keyed by probability per cost.
#[derive(Default)]
pub struct LeafQueue {
    heap: BinaryHeap<Keyed>,
}

impl LeafQueue {
    /// Panics on a non-positive key.
    pub fn from_entries(entries: impl IntoIterator<Item = QueueEntry>) -> Self {
        let heap = entries
            .into_iter()
            .inspect(|e| assert!(e.key() > 0.0, "queue keys must be positive: {e:?}"))
            .map(Keyed)
            .collect();
        LeafQueue { heap }
    }

    pub fn pop(&mut self) -> Option<QueueEntry> {
        self.heap.pop().map(|k| k.0)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

impl Iterator for LeafQueue {
    type Item = QueueEntry;

    fn next(&mut self) -> Option<QueueEntry> {
        self.pop()
    }
}

/// One entry per live, non-dead-end leaf whose path is not fully refined.
/// The cost is the
/// product of `measure` over the path's unrefined actions.
pub fn estimate_path_costs(
    tree: &PolicyTree,
    partial: &PartialTraj,
    mut measure: impl FnMut(NodeId) -> f64,
) -> LeafQueue {
    let entries: Vec<QueueEntry> = tree
        .leaves()
        .into_iter()
        .filter(|&l| !tree.node(l).dead_end && !path_refined(tree, partial, l))
        .map(|leaf| {
            let path = tree.path_to(leaf);
            let c = path[..path.len() - 1]
                .iter()
                .filter(|n| !partial.contains(**n))
                .map(|n| measure(*n))
                .product();
            QueueEntry {
                leaf,
                p: probability_f64(&tree.node(leaf).path_probability),
                c,
            }
        })
        .collect();
    LeafQueue::from_entries(entries)
}

/// Completion times and covered probability when paths with pinned costs
/// are refined one after another in queue order.
pub fn greedy_schedule(entries: &[QueueEntry]) -> Vec<(f64, f64)> {
    let mut t = 0.0;
    let mut covered = 0.0;
    LeafQueue::from_entries(entries.iter().cloned())
        .map(|e| {
            t += e.c;
            covered += e.p;
            (t, covered)
        })
        .collect()
}
