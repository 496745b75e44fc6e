use std::ops::Range;

use super::{build_ssp, goal_reachable, solve, NodeId, PolicyTree, SspError};
use crate::abstraction::AbstractModel;

#[derive(Clone, Debug, PartialEq)]
pub enum FailureKind {
    /// The smallest battery shortfall seen among collision-free candidates.
    InsufficientBattery { deficit: f64 },
    /// The grounded action (index into `AbstractModel::actions`) whose
    /// generator ran dry.
    NoCollisionFreePath { action: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FailureReason {
    pub kind: FailureKind,
    pub node: NodeId,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ReplanOutcome {
    /// The node has no action to fail.
    NoOp,
    Replaced {
        invalidated: Vec<NodeId>,
        added: Range<NodeId>,
    },
}

/// Folds `reason` into the model and re-solves from the failure node.
///
/// A battery failure clears `batterySufficient` in the node's state; if the
/// flag is already clear, the node's action is banned instead. A path failure
/// bans the failing action for the whole subtree. The node keeps its id and
/// probabilities and receives the new policy for the remaining horizon. The
/// adjusted model is unsolvable when no goal is reachable within it.
pub fn replan(
    tree: &mut PolicyTree,
    model: &AbstractModel,
    reason: &FailureReason,
    state_cap: usize,
) -> Result<ReplanOutcome, SspError> {
    let node = tree.node(reason.node);
    if !node.is_live() {
        return Err(SspError::Invalid(format!("node {} is not live", reason.node)));
    }
    let Some(current) = node.action else {
        return Ok(ReplanOutcome::NoOp);
    };
    let mut state = node.state.clone();
    let mut banned = node.banned.clone();
    match reason.kind {
        FailureKind::InsufficientBattery { .. } if state.battery_sufficient() => {
            state = state.with_battery_sufficient(false);
        }
        FailureKind::InsufficientBattery { .. } => {
            banned.insert(current);
        }
        FailureKind::NoCollisionFreePath { action } => {
            banned.insert(action);
        }
    }
    let horizon = tree.horizon() - node.depth;
    let ssp = build_ssp(model, state, horizon, &banned, state_cap)?;
    if !goal_reachable(&ssp) {
        return Err(SspError::Unsolvable { node: reason.node });
    }
    let v = solve(&ssp);
    let invalidated = tree.descendants(reason.node);
    let start = tree.nodes().len();
    tree.regrow(reason.node, &ssp, &v, banned)?;
    Ok(ReplanOutcome::Replaced {
        invalidated,
        added: start..tree.nodes().len(),
    })
}
