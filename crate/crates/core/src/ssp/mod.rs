//! Finite-horizon stochastic shortest-path solving over abstract states.
//!
//! Values follow backward induction over steps-to-go:
//!
//! ```text
//! V(s, 0) = R(s)
//! V(s, i) = max_a [ -cost(a) + sum_s' T(s, a)(s') V(s', i - 1) ]   (i >= 1)
//! ```
//!
//! with goal states absorbing at value 0. `R(s)` is 0 at goals and -1
//! elsewhere for models built from a domain, which makes the recurrence the
//! textbook one for unit action costs.

mod replan;
mod tree;

use std::collections::{BTreeSet, HashMap, VecDeque};

use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::abstraction::{AbstractModel, AbstractState};
use crate::lang::Probability;

pub use replan::{replan, FailureKind, FailureReason, ReplanOutcome};
pub use tree::{extract_policy_tree, NodeId, PolicyNode, PolicyTree, RefinementStatus};

/// Values closer than this are treated as tied in the policy argmax.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Default cap on reachable abstract states.
pub const DEFAULT_STATE_CAP: usize = 200_000;

pub type StateId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SspError {
    #[error("reachable state count exceeds the cap of {0}")]
    StateCap(usize),
    #[error("dead end: no action with finite value at depth {depth} in state {state}")]
    DeadEnd { state: String, depth: usize },
    #[error("no policy exists after adjusting the model at node {node}")]
    Unsolvable { node: usize },
    #[error("invalid SSP: {0}")]
    Invalid(String),
}

/// An action label in an SSP. `id` is the caller's identifier, for models
/// built from a domain the index into `AbstractModel::actions`.
#[derive(Clone, Debug, PartialEq)]
pub struct SspAction {
    pub id: usize,
    pub name: String,
    pub args: Vec<String>,
    pub cost: f64,
}

impl SspAction {
    pub fn label(&self) -> String {
        format!("{}({})", self.name, self.args.join(" "))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    /// Index into `SspInstance::actions`.
    pub action: usize,
    pub outcomes: Vec<(Probability, StateId)>,
    probabilities: Vec<f64>,
}

impl Transition {
    pub fn new(action: usize, outcomes: Vec<(Probability, StateId)>) -> Self {
        let probabilities = outcomes
            .iter()
            .map(|(p, _)| p.to_f64().expect("finite probability"))
            .collect();
        Transition { action, outcomes, probabilities }
    }
}

/// A finite-horizon SSP. Goal states are absorbing with value 0 and carry no
/// transitions; every other state lists its applicable actions.
#[derive(Clone, Debug)]
pub struct SspInstance {
    pub states: Vec<AbstractState>,
    pub actions: Vec<SspAction>,
    pub transitions: Vec<Vec<Transition>>,
    pub goal: Vec<bool>,
    /// Terminal reward `R(s)`.
    pub reward: Vec<f64>,
    pub horizon: usize,
    pub initial: StateId,
}

impl SspInstance {
    /// Checks ids, exact probability sums and zero goal rewards.
    pub fn validate(&self) -> Result<(), SspError> {
        let n = self.states.len();
        let bad = |m: String| Err(SspError::Invalid(m));
        if self.transitions.len() != n || self.goal.len() != n || self.reward.len() != n {
            return bad("per-state tables differ in length".into());
        }
        if self.initial >= n {
            return bad("initial state out of range".into());
        }
        for s in 0..n {
            if self.goal[s] && (self.reward[s] != 0.0 || !self.transitions[s].is_empty()) {
                return bad(format!("goal state {s} must be absorbing with reward 0"));
            }
            for t in &self.transitions[s] {
                if t.action >= self.actions.len() {
                    return bad(format!("state {s}: action {} out of range", t.action));
                }
                let mut sum = Probability::zero();
                for (p, next) in &t.outcomes {
                    if *next >= n || p.is_zero() || *p < Probability::zero() {
                        return bad(format!("state {s}: bad outcome ({p}, {next})"));
                    }
                    sum += p;
                }
                if !sum.is_one() {
                    return bad(format!("state {s}: outcome probabilities sum to {sum}"));
                }
            }
        }
        Ok(())
    }

    /// Whether state `s` takes `self.actions[a]` as applicable.
    pub fn transition(&self, s: StateId, action: usize) -> Option<&Transition> {
        self.transitions[s].iter().find(|t| t.action == action)
    }
}

/// Forward exploration from `initial` to depth `horizon`.
///
/// States first reached at depth `horizon` are not expanded: only their
/// terminal reward can influence a policy rooted at `initial`. Actions whose
/// id is in `banned` are left out.
pub fn build_ssp(
    model: &AbstractModel,
    initial: AbstractState,
    horizon: usize,
    banned: &BTreeSet<usize>,
    state_cap: usize,
) -> Result<SspInstance, SspError> {
    let actions: Vec<SspAction> = model
        .actions
        .iter()
        .enumerate()
        .filter(|(i, _)| !banned.contains(i))
        .map(|(i, a)| SspAction {
            id: i,
            name: a.source.name.clone(),
            args: a.source.args.clone(),
            cost: a.cost,
        })
        .collect();
    let mut ssp = SspInstance {
        states: Vec::new(),
        actions,
        transitions: Vec::new(),
        goal: Vec::new(),
        reward: Vec::new(),
        horizon,
        initial: 0,
    };
    let mut index: HashMap<AbstractState, StateId> = HashMap::new();
    let mut intern = |ssp: &mut SspInstance, s: AbstractState| -> Result<(StateId, bool), SspError> {
        if let Some(&id) = index.get(&s) {
            return Ok((id, false));
        }
        if ssp.states.len() >= state_cap {
            return Err(SspError::StateCap(state_cap));
        }
        let id = ssp.states.len();
        let goal = model.is_goal(&s);
        ssp.goal.push(goal);
        ssp.reward.push(if goal { 0.0 } else { -1.0 });
        ssp.transitions.push(Vec::new());
        index.insert(s.clone(), id);
        ssp.states.push(s);
        Ok((id, true))
    };
    intern(&mut ssp, initial)?;
    let mut frontier = VecDeque::from([(0usize, 0usize)]);
    while let Some((s, depth)) = frontier.pop_front() {
        if ssp.goal[s] || depth >= horizon {
            continue;
        }
        let state = ssp.states[s].clone();
        let mut list = Vec::new();
        for k in 0..ssp.actions.len() {
            let a = &model.actions[ssp.actions[k].id];
            if !a.applicable(&state) {
                continue;
            }
            let mut outcomes = Vec::new();
            for (p, next) in a.successors(&state) {
                let (id, fresh) = intern(&mut ssp, next)?;
                if fresh {
                    frontier.push_back((id, depth + 1));
                }
                outcomes.push((p, id));
            }
            list.push(Transition::new(k, outcomes));
        }
        ssp.transitions[s] = list;
    }
    Ok(ssp)
}

/// `V[i][s]` for steps-to-go `i` in `0..=horizon`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    values: Vec<Vec<f64>>,
}

impl ValueTable {
    pub fn get(&self, s: StateId, steps_to_go: usize) -> f64 {
        self.values[steps_to_go][s]
    }

    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }
}

/// One-step lookahead value of `t` at steps-to-go `i >= 1`.
pub fn q_value(ssp: &SspInstance, v: &ValueTable, t: &Transition, i: usize) -> f64 {
    let mut expected = 0.0;
    for ((_, next), p) in t.outcomes.iter().zip(&t.probabilities) {
        expected += p * v.get(*next, i - 1);
    }
    -ssp.actions[t.action].cost + expected
}

/// Bellman backup of state `s` at steps-to-go `i >= 1`. A non-goal state with
/// no applicable action is worth negative infinity.
pub fn backup(ssp: &SspInstance, v: &ValueTable, s: StateId, i: usize) -> f64 {
    if ssp.goal[s] {
        return 0.0;
    }
    ssp.transitions[s]
        .iter()
        .map(|t| q_value(ssp, v, t, i))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Backward induction over steps-to-go.
pub fn solve(ssp: &SspInstance) -> ValueTable {
    let mut v = ValueTable {
        values: vec![ssp.reward.clone()],
    };
    for i in 1..=ssp.horizon {
        let layer = (0..ssp.states.len()).map(|s| backup(ssp, &v, s, i)).collect();
        v.values.push(layer);
    }
    v
}

/// Whether some policy reaches a goal from the initial state with positive
/// probability within the horizon.
pub fn goal_reachable(ssp: &SspInstance) -> bool {
    let mut reach = ssp.goal.clone();
    for _ in 0..ssp.horizon {
        let next: Vec<bool> = (0..ssp.states.len())
            .map(|s| {
                reach[s]
                    || ssp.transitions[s]
                        .iter()
                        .any(|t| t.outcomes.iter().any(|(_, n)| reach[*n]))
            })
            .collect();
        reach = next;
    }
    reach[ssp.initial]
}

/// Converts an exact probability for reporting.
pub fn probability_f64(p: &Probability) -> f64 {
    p.to_f64().unwrap_or(f64::NAN)
}
