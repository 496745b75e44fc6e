use std::collections::BTreeSet;
use std::fmt::Write;

use num_traits::One;

use super::{q_value, SspError, SspInstance, StateId, ValueTable, TIE_TOLERANCE};
use crate::abstraction::AbstractState;
use crate::lang::{rational_to_string, Probability};

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RefinementStatus {
    Unrefined,
    Refined,
    /// Detached by a replan; kept in the arena so ids stay stable.
    Invalidated,
}

impl RefinementStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RefinementStatus::Unrefined => "unrefined",
            RefinementStatus::Refined => "refined",
            RefinementStatus::Invalidated => "invalidated",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub depth: usize,
    pub state: AbstractState,
    pub goal: bool,
    /// `SspAction::id` of the chosen action; `None` at leaves.
    pub action: Option<usize>,
    pub action_label: Option<String>,
    pub children: Vec<NodeId>,
    pub outcome_probability: Probability,
    pub path_probability: Probability,
    pub status: RefinementStatus,
    /// Actions removed from the model for this node's subtree.
    pub banned: BTreeSet<usize>,
    /// No goal is reachable from here once failures are accounted for.
    pub dead_end: bool,
}

impl PolicyNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn is_live(&self) -> bool {
        self.status != RefinementStatus::Invalidated
    }
}

/// An unrolled non-stationary policy. Nodes live in an arena indexed by id;
/// the root is node 0 and depth encodes the time step.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyTree {
    nodes: Vec<PolicyNode>,
    horizon: usize,
}

impl PolicyTree {
    pub fn root(&self) -> &PolicyNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: NodeId) -> &PolicyNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[PolicyNode] {
        &self.nodes
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn set_status(&mut self, id: NodeId, status: RefinementStatus) {
        self.nodes[id].status = status;
    }

    /// Live nodes in depth-first order, children in outcome order.
    pub fn live_nodes(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(id) = stack.pop() {
            out.push(id);
            stack.extend(self.nodes[id].children.iter().rev());
        }
        out
    }

    pub fn leaves(&self) -> Vec<NodeId> {
        self.live_nodes()
            .into_iter()
            .filter(|&id| self.nodes[id].is_leaf())
            .collect()
    }

    /// Node ids from the root down to `id`, inclusive.
    pub fn path_to(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Strict descendants of `id` through current child links.
    pub fn descendants(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack: Vec<NodeId> = self.nodes[id].children.clone();
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n].children.iter().copied());
        }
        out
    }

    /// One line per arena node:
    /// `id,parent_id,depth,action,outcome_probability,path_probability,status`.
    /// Probabilities are exact rationals; `-` marks an absent field and
    /// `deadEnd` a pruned node.
    pub fn serialize(&self) -> String {
        let mut out = String::from("id,parent_id,depth,action,outcome_probability,path_probability,status\n");
        for n in &self.nodes {
            let parent = n.parent.map_or("-".to_string(), |p| p.to_string());
            let action = match (&n.action_label, n.dead_end) {
                (Some(label), _) => label.as_str(),
                (None, true) => "deadEnd",
                (None, false) => "-",
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                n.id,
                parent,
                n.depth,
                action,
                rational_to_string(&n.outcome_probability),
                rational_to_string(&n.path_probability),
                n.status.as_str()
            )
            .expect("writing to a String");
        }
        out
    }

    fn push_child(&mut self, parent: NodeId, p: Probability) -> NodeId {
        let id = self.nodes.len();
        let par = &self.nodes[parent];
        let node = PolicyNode {
            id,
            parent: Some(parent),
            depth: par.depth + 1,
            state: AbstractState::default(),
            goal: false,
            action: None,
            action_label: None,
            children: Vec::new(),
            path_probability: &par.path_probability * &p,
            outcome_probability: p,
            status: RefinementStatus::Unrefined,
            banned: par.banned.clone(),
            dead_end: false,
        };
        self.nodes.push(node);
        self.nodes[parent].children.push(id);
        id
    }

    /// Turns `id` into a dead-end leaf, invalidating its former subtree.
    pub fn prune(&mut self, id: NodeId) -> Vec<NodeId> {
        let gone = self.descendants(id);
        for d in &gone {
            self.nodes[*d].status = RefinementStatus::Invalidated;
        }
        let node = &mut self.nodes[id];
        node.children.clear();
        node.action = None;
        node.action_label = None;
        node.dead_end = true;
        node.status = RefinementStatus::Unrefined;
        gone
    }

    /// Replaces the subtree under `id` with the policy of `ssp` from its
    /// initial state. Former descendants are invalidated and detached.
    pub(crate) fn regrow(
        &mut self,
        id: NodeId,
        ssp: &SspInstance,
        v: &ValueTable,
        banned: BTreeSet<usize>,
    ) -> Result<(), SspError> {
        for d in self.descendants(id) {
            self.nodes[d].status = RefinementStatus::Invalidated;
        }
        let node = &mut self.nodes[id];
        node.children.clear();
        node.banned = banned;
        node.status = RefinementStatus::Unrefined;
        self.fill(ssp, v, id, ssp.initial, ssp.horizon)
    }

    fn fill(&mut self, ssp: &SspInstance, v: &ValueTable, id: NodeId, s: StateId, i: usize) -> Result<(), SspError> {
        let goal = ssp.goal[s];
        {
            let node = &mut self.nodes[id];
            node.state = ssp.states[s].clone();
            node.goal = goal;
            node.action = None;
            node.action_label = None;
        }
        if goal || i == 0 {
            return Ok(());
        }
        let Some(t) = best_transition(ssp, v, s, i) else {
            return Err(SspError::DeadEnd {
                state: ssp.states[s].to_string(),
                depth: self.nodes[id].depth,
            });
        };
        let act = &ssp.actions[t.action];
        self.nodes[id].action = Some(act.id);
        self.nodes[id].action_label = Some(act.label());
        for (p, next) in &t.outcomes {
            let child = self.push_child(id, p.clone());
            self.fill(ssp, v, child, *next, i - 1)?;
        }
        Ok(())
    }
}

/// Argmax of the one-step lookahead, ties within `TIE_TOLERANCE` broken by
/// action name and then argument tuple. `None` when nothing is finite.
fn best_transition<'a>(ssp: &'a SspInstance, v: &ValueTable, s: StateId, i: usize) -> Option<&'a super::Transition> {
    let scored: Vec<(f64, &super::Transition)> =
        ssp.transitions[s].iter().map(|t| (q_value(ssp, v, t, i), t)).collect();
    let best = scored.iter().map(|(q, _)| *q).fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return None;
    }
    scored
        .into_iter()
        .filter(|(q, _)| *q >= best - TIE_TOLERANCE)
        .map(|(_, t)| t)
        .min_by(|a, b| {
            let (x, y) = (&ssp.actions[a.action], &ssp.actions[b.action]);
            (&x.name, &x.args).cmp(&(&y.name, &y.args))
        })
}

/// Unrolls the optimal non-stationary policy from the initial state until a
/// goal or the horizon.
pub fn extract_policy_tree(ssp: &SspInstance, v: &ValueTable) -> Result<PolicyTree, SspError> {
    let root = PolicyNode {
        id: 0,
        parent: None,
        depth: 0,
        state: AbstractState::default(),
        goal: false,
        action: None,
        action_label: None,
        children: Vec::new(),
        outcome_probability: Probability::one(),
        path_probability: Probability::one(),
        status: RefinementStatus::Unrefined,
        banned: BTreeSet::new(),
        dead_end: false,
    };
    let mut tree = PolicyTree {
        nodes: vec![root],
        horizon: ssp.horizon,
    };
    tree.fill(ssp, v, 0, ssp.initial, ssp.horizon)?;
    Ok(tree)
}
