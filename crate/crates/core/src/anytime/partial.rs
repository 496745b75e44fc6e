use std::collections::BTreeMap;

use num_traits::{ToPrimitive, Zero};

use crate::geom::{Pose, Trajectory};
use crate::lang::Probability;
use crate::ssp::{NodeId, PolicyTree, RefinementStatus};

/// One concrete realization of a node's action for a group of outcomes that
/// share a destination.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    /// Region the trajectory ends in, or the inspected component.
    pub destination: Option<String>,
    pub trajectory: Trajectory,
    pub battery_after: f64,
}

/// The refinement of a node's action.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinedStep {
    pub pose_before: Pose,
    pub battery_before: f64,
    pub branches: Vec<Branch>,
    /// For each child (in outcome order), the index of its branch.
    pub child_branch: Vec<usize>,
}

impl RefinedStep {
    /// Pose and charge on entering the `child_index`-th child.
    pub fn exit(&self, child_index: usize) -> (Pose, f64) {
        let b = &self.branches[self.child_branch[child_index]];
        (b.trajectory.end(), b.battery_after)
    }
}

/// Refined actions keyed by the node that takes them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PartialTraj {
    steps: BTreeMap<NodeId, RefinedStep>,
}

impl PartialTraj {
    pub fn get(&self, node: NodeId) -> Option<&RefinedStep> {
        self.steps.get(&node)
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.steps.contains_key(&node)
    }

    pub fn insert(&mut self, node: NodeId, step: RefinedStep) {
        self.steps.insert(node, step);
    }

    pub fn remove(&mut self, node: NodeId) -> Option<RefinedStep> {
        self.steps.remove(&node)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &RefinedStep)> {
        self.steps.iter().map(|(k, v)| (*k, v))
    }

    pub fn merge(&mut self, fragment: PartialTraj) {
        self.steps.extend(fragment.steps);
    }

    /// Drops `node` and every descendant.
    pub fn remove_subtree(&mut self, tree: &PolicyTree, node: NodeId) {
        self.steps.remove(&node);
        for d in tree.descendants(node) {
            self.steps.remove(&d);
        }
    }
}

/// Whether every action on the root path of `leaf` is refined. Dead-end
/// leaves never are.
pub fn path_refined(tree: &PolicyTree, partial: &PartialTraj, leaf: NodeId) -> bool {
    if tree.node(leaf).dead_end {
        return false;
    }
    let path = tree.path_to(leaf);
    path[..path.len() - 1].iter().all(|n| partial.contains(*n))
}

/// Exact probability mass of live leaves with fully refined root paths.
pub fn proportion_refined_exact(tree: &PolicyTree, partial: &PartialTraj) -> Probability {
    tree.leaves()
        .into_iter()
        .filter(|&l| path_refined(tree, partial, l))
        .fold(Probability::zero(), |acc, l| acc + &tree.node(l).path_probability)
}

pub fn compute_proportion_refined(tree: &PolicyTree, partial: &PartialTraj) -> f64 {
    proportion_refined_exact(tree, partial).to_f64().unwrap_or(0.0)
}

/// Marks live actions refined when present in `partial` and live leaves
/// refined when their whole path is.
pub fn sync_statuses(tree: &mut PolicyTree, partial: &PartialTraj) {
    for id in tree.live_nodes() {
        let refined = if tree.node(id).is_leaf() {
            path_refined(tree, partial, id)
        } else {
            partial.contains(id)
        };
        let status = if refined { RefinementStatus::Refined } else { RefinementStatus::Unrefined };
        tree.set_status(id, status);
    }
}

/// Share of live nodes whose status is refined.
pub fn fraction_nodes_refined(tree: &PolicyTree) -> f64 {
    let live = tree.live_nodes();
    let refined = live
        .iter()
        .filter(|&&n| tree.node(n).status == RefinementStatus::Refined)
        .count();
    refined as f64 / live.len() as f64
}

/// Whether some live leaf under `node` (or `node` itself) is fully refined.
pub fn has_refined_leaf_under(tree: &PolicyTree, partial: &PartialTraj, node: NodeId) -> bool {
    let mut nodes = tree.descendants(node);
    nodes.push(node);
    nodes
        .into_iter()
        .any(|n| tree.node(n).is_leaf() && path_refined(tree, partial, n))
}
