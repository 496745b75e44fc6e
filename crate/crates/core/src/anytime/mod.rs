//! The anytime refinement loop.
//!
//! After the abstract policy is unrolled, root-to-leaf paths are refined in
//! decreasing order of probability per estimated refinement cost. A failed
//! action either discards its parent's refinement and retries (backtrack) or
//! feeds a failure fact back into the abstract model (replan).

mod partial;
mod queue;
mod refine;

use std::collections::BTreeMap;
use std::time::Instant;

use thiserror::Error;

use crate::abstraction::{AbstractModel, Concretization};
use crate::geom::{BatteryModel, GeomError, PlannerConfig, Pose, Workspace};
use crate::ssp::{
    build_ssp, extract_policy_tree, goal_reachable, replan, solve, FailureKind, NodeId, PolicyTree,
    ReplanOutcome, SspError, DEFAULT_STATE_CAP,
};

pub use partial::{
    compute_proportion_refined, fraction_nodes_refined, has_refined_leaf_under, path_refined,
    proportion_refined_exact, sync_statuses, Branch, PartialTraj, RefinedStep,
};
pub use queue::{estimate_path_costs, greedy_schedule, LeafQueue, QueueEntry};
pub use refine::{RefineOutcome, Refiner};

/// Simulated seconds per unit of planner work.
pub const WORK_UNIT_SECONDS: f64 = 1e-6;

/// Default generator budget for actions without an explicit one.
pub const DEFAULT_BUDGET: usize = 10;

#[derive(Debug, Error)]
pub enum AnytimeError {
    #[error(transparent)]
    Ssp(#[from] SspError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Everything the concrete layer needs to refine actions.
#[derive(Clone, Debug)]
pub struct ConcreteContext {
    pub workspace: Workspace,
    pub battery: BatteryModel,
    pub initial_battery: f64,
    pub start: Pose,
    pub planner: PlannerConfig,
    pub envelope_half_width: f64,
    pub budgets: BTreeMap<String, usize>,
    pub default_budget: usize,
}

impl ConcreteContext {
    /// Starts at the workspace's `start` pose, or the dock centroid, with a
    /// full battery and default planner settings.
    pub fn new(workspace: Workspace, battery: BatteryModel) -> Result<Self, AnytimeError> {
        workspace.validate()?;
        battery.validate()?;
        let start = workspace
            .start
            .or_else(|| workspace.dock_region().map(|r| r.centroid()))
            .ok_or_else(|| AnytimeError::Config("workspace has neither a start pose nor a dock".into()))?;
        Ok(ConcreteContext {
            planner: PlannerConfig::for_workspace(&workspace),
            initial_battery: battery.capacity,
            start,
            battery,
            envelope_half_width: 2.0,
            budgets: BTreeMap::new(),
            default_budget: DEFAULT_BUDGET,
            workspace,
        })
    }

    pub fn budget(&self, action: &str) -> usize {
        self.budgets.get(action).copied().unwrap_or(self.default_budget)
    }

    /// Area that normalizes range measures.
    pub fn reference_area(&self) -> f64 {
        self.workspace.bounds.area()
    }

    /// Straight-line distance to the dock centroid; zero without a dock.
    pub fn dock_distance(&self, p: &Pose) -> f64 {
        self.workspace
            .dock_region()
            .map_or(0.0, |r| r.centroid().distance(p))
    }

    /// Every grounded action's nominal target must exist in the workspace.
    pub fn check(&self, model: &AbstractModel) -> Result<(), AnytimeError> {
        for (i, a) in model.actions.iter().enumerate() {
            let target = a.target.as_deref().unwrap_or_default();
            match model.schema_of(i).concretization {
                Concretization::Stationary => {}
                Concretization::Reach { .. } => {
                    self.workspace.region(target)?;
                }
                Concretization::Inspect { .. } => {
                    self.workspace.component(target)?;
                }
            }
        }
        if !self.workspace.is_free(&self.start) {
            return Err(AnytimeError::Config("start pose is not collision-free".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClockMode {
    /// Deterministic: counts planner work units.
    Work,
    Wall,
}

#[derive(Clone, Debug)]
pub struct Clock {
    pub mode: ClockMode,
    pub work: u64,
    started: Instant,
}

impl Clock {
    pub fn new(mode: ClockMode) -> Self {
        Clock {
            mode,
            work: 0,
            started: Instant::now(),
        }
    }

    pub fn seconds(&self) -> f64 {
        match self.mode {
            ClockMode::Work => self.work as f64 * WORK_UNIT_SECONDS,
            ClockMode::Wall => self.started.elapsed().as_secs_f64(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnytimeConfig {
    /// Stop once this much probability mass is refined.
    pub threshold: f64,
    pub replan_bias: f64,
    /// Seconds on the configured clock.
    pub time_limit: f64,
    pub seed: u64,
    pub backtrack_cap: usize,
    pub state_cap: usize,
    pub clock: ClockMode,
}

impl Default for AnytimeConfig {
    fn default() -> Self {
        AnytimeConfig {
            threshold: 0.9,
            replan_bias: 0.5,
            time_limit: f64::INFINITY,
            seed: 0,
            backtrack_cap: 5,
            state_cap: DEFAULT_STATE_CAP,
            clock: ClockMode::Work,
        }
    }
}

impl AnytimeConfig {
    pub fn validate(&self) -> Result<(), AnytimeError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(AnytimeError::Config(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        if !(0.0..=1.0).contains(&self.replan_bias) {
            return Err(AnytimeError::Config(format!("replan bias {} outside [0, 1]", self.replan_bias)));
        }
        if self.time_limit.is_nan() || self.time_limit < 0.0 {
            return Err(AnytimeError::Config("time limit must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileSample {
    pub t_seconds: f64,
    pub proportion_refined: f64,
    pub fraction_nodes_refined: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    ThresholdReached,
    QueueEmpty,
    ResourceLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RefineEventKind {
    Success,
    Backtrack { to: NodeId },
    Replan { at: NodeId, kind: FailureKind, forced: bool },
    Interrupted,
}

/// One `refine_path` call.
#[derive(Clone, Debug, PartialEq)]
pub struct RefineEvent {
    pub iteration: usize,
    pub leaf: NodeId,
    pub t_seconds: f64,
    pub kind: RefineEventKind,
}

#[derive(Clone, Debug)]
pub struct AnytimeResult {
    pub tree: PolicyTree,
    pub partial: PartialTraj,
    /// An initial sample after unrolling, then one per outer iteration.
    pub profile: Vec<ProfileSample>,
    pub stop: StopReason,
    pub events: Vec<RefineEvent>,
    pub work_units: u64,
    pub wall_seconds: f64,
}

impl AnytimeResult {
    pub fn proportion_refined(&self) -> f64 {
        self.profile.last().map_or(0.0, |s| s.proportion_refined)
    }

    pub fn replans(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, RefineEventKind::Replan { .. }))
            .count()
    }

    pub fn backtracks(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, RefineEventKind::Backtrack { .. }))
            .count()
    }
}

/// Writes the profile as CSV.
pub fn profile_csv(profile: &[ProfileSample]) -> String {
    let mut out = String::from("t_seconds,proportion_refined,fraction_nodes_refined\n");
    for s in profile {
        out.push_str(&format!(
            "{:.6},{:.6},{:.6}\n",
            s.t_seconds, s.proportion_refined, s.fraction_nodes_refined
        ));
    }
    out
}

/// Solves the abstract model, unrolls its policy and refines it until the
/// threshold, the time limit or the end of the queue.
pub fn atm_mdp_solve(
    model: &AbstractModel,
    ctx: &ConcreteContext,
    config: &AnytimeConfig,
) -> Result<AnytimeResult, AnytimeError> {
    config.validate()?;
    ctx.check(model)?;
    let wall = Instant::now();
    let mut clock = Clock::new(config.clock);
    let horizon = model.problem.horizon;
    let ssp = build_ssp(model, model.initial.clone(), horizon, &Default::default(), config.state_cap)?;
    if !goal_reachable(&ssp) {
        return Err(SspError::Unsolvable { node: 0 }.into());
    }
    let v = solve(&ssp);
    clock.work += (ssp.states.len() * (horizon + 1)) as u64;
    let mut tree = extract_policy_tree(&ssp, &v)?;
    let mut partial = PartialTraj::default();
    let mut refiner = Refiner::new(model, ctx, config, clock);
    let mut profile = Vec::new();
    let mut events = Vec::new();

    let mut proportion = sample(&mut tree, &partial, &refiner.clock, &mut profile);
    let mut iteration = 0;
    let stop = loop {
        if proportion >= config.threshold {
            break StopReason::ThresholdReached;
        }
        if refiner.clock.seconds() >= config.time_limit {
            break StopReason::ResourceLimit;
        }
        let mut queue = estimate_path_costs(&tree, &partial, |n| refiner.node_measure(&tree, n));
        let Some(entry) = queue.pop() else {
            break StopReason::QueueEmpty;
        };
        iteration += 1;
        let path = tree.path_to(entry.leaf);
        loop {
            let outcome = refiner.refine_path(&tree, &partial, &path);
            let t_seconds = refiner.clock.seconds();
            let mut event = |kind| events.push(RefineEvent { iteration, leaf: entry.leaf, t_seconds, kind });
            match outcome {
                RefineOutcome::Success { fragment } => {
                    partial.merge(fragment);
                    event(RefineEventKind::Success);
                    break;
                }
                RefineOutcome::Backtrack { fragment, node } => {
                    partial.merge(fragment);
                    partial.remove_subtree(&tree, node);
                    event(RefineEventKind::Backtrack { to: node });
                }
                RefineOutcome::Replan { fragment, reason, forced } => {
                    partial.merge(fragment);
                    event(RefineEventKind::Replan { at: reason.node, kind: reason.kind.clone(), forced });
                    match replan(&mut tree, model, &reason, config.state_cap) {
                        Ok(ReplanOutcome::Replaced { invalidated, added }) => {
                            for n in invalidated {
                                partial.remove(n);
                            }
                            refiner.clock.work += added.len() as u64;
                        }
                        Ok(ReplanOutcome::NoOp) => {}
                        // Below the root, an unsolvable branch is given up.
                        Err(SspError::Unsolvable { node }) if node != 0 => {
                            for n in tree.prune(node) {
                                partial.remove(n);
                            }
                        }
                        Err(e) => return Err(e.into()),
                    }
                    break;
                }
                RefineOutcome::Interrupted { fragment } => {
                    partial.merge(fragment);
                    event(RefineEventKind::Interrupted);
                    break;
                }
            }
        }
        refiner.clock.work += 1;
        proportion = sample(&mut tree, &partial, &refiner.clock, &mut profile);
    };
    sync_statuses(&mut tree, &partial);
    Ok(AnytimeResult {
        tree,
        partial,
        profile,
        stop,
        events,
        work_units: refiner.clock.work,
        wall_seconds: wall.elapsed().as_secs_f64(),
    })
}

fn sample(tree: &mut PolicyTree, partial: &PartialTraj, clock: &Clock, profile: &mut Vec<ProfileSample>) -> f64 {
    sync_statuses(tree, partial);
    let proportion_refined = compute_proportion_refined(tree, partial);
    profile.push(ProfileSample {
        t_seconds: clock.seconds(),
        proportion_refined,
        fraction_nodes_refined: fraction_nodes_refined(tree),
    });
    proportion_refined
}
