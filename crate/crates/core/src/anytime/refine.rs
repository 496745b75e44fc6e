use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::partial::{has_refined_leaf_under, Branch, PartialTraj, RefinedStep};
use super::{AnytimeConfig, Clock, ConcreteContext};
use crate::abstraction::{AbstractModel, Binding, Concretization, Generator};
use crate::geom::{battery_cost, connect, plan_motion, Pose, Trajectory};
use crate::ssp::{FailureKind, FailureReason, NodeId, PolicyTree};

/// Result of one refinement attempt on a root-to-leaf path.
#[derive(Clone, Debug, PartialEq)]
pub enum RefineOutcome {
    /// Every action on the path is refined.
    Success { fragment: PartialTraj },
    /// Retry from `node` after its refinement (and everything below it) has
    /// been discarded.
    Backtrack { fragment: PartialTraj, node: NodeId },
    /// Re-solve the abstract model at `reason.node`. `forced` is set when no
    /// coin was flipped.
    Replan {
        fragment: PartialTraj,
        reason: FailureReason,
        forced: bool,
    },
    /// The resource limit was hit between samples.
    Interrupted { fragment: PartialTraj },
}

impl RefineOutcome {
    pub fn fragment(&self) -> &PartialTraj {
        match self {
            RefineOutcome::Success { fragment }
            | RefineOutcome::Backtrack { fragment, .. }
            | RefineOutcome::Replan { fragment, .. }
            | RefineOutcome::Interrupted { fragment } => fragment,
        }
    }
}

enum NodeFailure {
    Interrupted,
    Failed(FailureKind),
}

/// Refines policy paths. Owns the run's random stream, clock and
/// per-node backtrack counters.
pub struct Refiner<'a> {
    pub model: &'a AbstractModel,
    pub ctx: &'a ConcreteContext,
    pub config: &'a AnytimeConfig,
    pub clock: Clock,
    rng: ChaCha8Rng,
    backtracks: HashMap<NodeId, usize>,
}

impl<'a> Refiner<'a> {
    pub fn new(model: &'a AbstractModel, ctx: &'a ConcreteContext, config: &'a AnytimeConfig, clock: Clock) -> Self {
        Refiner {
            model,
            ctx,
            config,
            clock,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            backtracks: HashMap::new(),
        }
    }

    fn limit_reached(&self) -> bool {
        self.clock.seconds() >= self.config.time_limit
    }

    /// Refines the unrefined actions of `path` in order, starting each from
    /// the pose and charge left by its parent.
    pub fn refine_path(&mut self, tree: &PolicyTree, partial: &PartialTraj, path: &[NodeId]) -> RefineOutcome {
        let mut fragment = PartialTraj::default();
        for (k, &node) in path.iter().enumerate() {
            if tree.node(node).action.is_none() || partial.contains(node) {
                continue;
            }
            let (pose, battery) = if k == 0 {
                (self.ctx.start, self.ctx.initial_battery)
            } else {
                let parent = path[k - 1];
                let step = partial.get(parent).or_else(|| fragment.get(parent)).expect("parent refined first");
                let index = tree.node(parent).children.iter().position(|c| *c == node).expect("child of parent");
                step.exit(index)
            };
            match self.refine_node(tree, node, pose, battery) {
                Ok(step) => fragment.insert(node, step),
                Err(NodeFailure::Interrupted) => return RefineOutcome::Interrupted { fragment },
                Err(NodeFailure::Failed(kind)) => return self.on_failure(tree, partial, fragment, node, kind),
            }
        }
        RefineOutcome::Success { fragment }
    }

    fn on_failure(
        &mut self,
        tree: &PolicyTree,
        partial: &PartialTraj,
        mut fragment: PartialTraj,
        node: NodeId,
        kind: FailureKind,
    ) -> RefineOutcome {
        let count = self.backtracks.get(&node).copied().unwrap_or(0);
        let parent = tree.node(node).parent;
        let forced = match parent {
            None => true,
            Some(p) => count >= self.config.backtrack_cap || has_refined_leaf_under(tree, partial, p),
        };
        if forced || self.rng.gen_bool(self.config.replan_bias) {
            let reason = FailureReason { kind, node };
            return RefineOutcome::Replan { fragment, reason, forced };
        }
        let parent = parent.expect("checked above");
        self.backtracks.insert(node, count + 1);
        fragment.remove_subtree(tree, parent);
        RefineOutcome::Backtrack { fragment, node: parent }
    }

    /// Distinct destinations of the node's action and, per child, the index
    /// of its destination.
    fn branches(&self, tree: &PolicyTree, node: NodeId) -> (Vec<Option<String>>, Vec<usize>) {
        let n = tree.node(node);
        let action = &self.model.actions[n.action.expect("internal node")];
        let schema = self.model.schema_of(n.action.expect("internal node"));
        if !matches!(schema.concretization, Concretization::Reach { .. }) {
            return (vec![action.target.clone()], vec![0; n.children.len()]);
        }
        // A move outcome ends in the region of the location it newly makes
        // true; outcomes that change no location keep the nominal target.
        let mut destinations: Vec<Option<String>> = Vec::new();
        let mut child_branch = Vec::with_capacity(n.children.len());
        for &c in &n.children {
            let child = &tree.node(c).state;
            let dest = action
                .source
                .args
                .iter()
                .find(|o| {
                    self.ctx.workspace.region(o).is_ok()
                        && child
                            .facts()
                            .iter()
                            .any(|f| f.args.contains(o) && !n.state.holds(f))
                })
                .cloned()
                .or_else(|| action.target.clone());
            let idx = match destinations.iter().position(|d| *d == dest) {
                Some(i) => i,
                None => {
                    destinations.push(dest);
                    destinations.len() - 1
                }
            };
            child_branch.push(idx);
        }
        (destinations, child_branch)
    }

    /// Product of the range measures of the node's branches.
    pub fn node_measure(&self, tree: &PolicyTree, node: NodeId) -> f64 {
        let action = tree.node(node).action.expect("internal node");
        let schema = self.model.schema_of(action);
        let budget = self.ctx.budget(&schema.name);
        let (destinations, _) = self.branches(tree, node);
        destinations
            .iter()
            .map(|d| {
                Generator::new(
                    &schema.concretization,
                    d.as_deref(),
                    &self.ctx.workspace,
                    self.ctx.envelope_half_width,
                    budget,
                    0,
                )
                .map(|g| g.range_measure(self.ctx.reference_area()))
                .unwrap_or(budget as f64)
            })
            .product()
    }

    fn refine_node(&mut self, tree: &PolicyTree, node: NodeId, pose: Pose, battery: f64) -> Result<RefinedStep, NodeFailure> {
        let (destinations, child_branch) = self.branches(tree, node);
        let mut branches = Vec::with_capacity(destinations.len());
        for dest in destinations {
            branches.push(self.refine_branch(tree, node, dest, pose, battery)?);
        }
        Ok(RefinedStep {
            pose_before: pose,
            battery_before: battery,
            branches,
            child_branch,
        })
    }

    /// Draws bindings until one yields a collision-free trajectory whose
    /// battery use is admissible.
    fn refine_branch(
        &mut self,
        tree: &PolicyTree,
        node: NodeId,
        dest: Option<String>,
        pose: Pose,
        battery: f64,
    ) -> Result<Branch, NodeFailure> {
        let action = tree.node(node).action.expect("internal node");
        let schema = self.model.schema_of(action);
        let ctx = self.ctx;
        let w = &ctx.workspace;
        let is_inspection = matches!(schema.concretization, Concretization::Inspect { .. });
        let mut generator = Generator::new(
            &schema.concretization,
            dest.as_deref(),
            w,
            ctx.envelope_half_width,
            ctx.budget(&schema.name),
            self.rng.gen(),
        )
        .map_err(|_| NodeFailure::Failed(FailureKind::NoCollisionFreePath { action }))?;
        let mut min_deficit: Option<f64> = None;
        loop {
            if self.limit_reached() {
                return Err(NodeFailure::Interrupted);
            }
            let Some(binding) = generator.next_binding(w) else { break };
            self.clock.work += 1;
            let trajectory = match binding {
                Err(_) => continue,
                Ok(Binding::Stationary) => Trajectory::stationary(pose),
                Ok(Binding::TargetPose(target)) => {
                    let seed = self.rng.gen();
                    match plan_motion(pose, target, w, seed, &ctx.planner, &mut self.clock.work) {
                        Ok(t) => t,
                        Err(_) => continue,
                    }
                }
                Ok(Binding::InspectionWaypoints(points)) => {
                    let mut all = Vec::with_capacity(points.len() + 1);
                    all.push(pose);
                    all.extend(points);
                    match connect(&all, w, &mut self.rng, &ctx.planner, &mut self.clock.work) {
                        Ok(t) => t,
                        Err(_) => continue,
                    }
                }
            };
            let mut after = battery - schema.constant_drain;
            if schema.drains_battery {
                after -= battery_cost(&trajectory, &ctx.battery, is_inspection);
            }
            if schema.restores_battery {
                after = ctx.battery.capacity;
            }
            let required = if schema.battery_guarded {
                ctx.battery.reserve + ctx.battery.cost_per_meter * ctx.dock_distance(&trajectory.end())
            } else {
                0.0
            };
            if after < required {
                let deficit = required - after;
                min_deficit = Some(min_deficit.map_or(deficit, |m: f64| m.min(deficit)));
                continue;
            }
            return Ok(Branch {
                destination: dest,
                trajectory,
                battery_after: after,
            });
        }
        Err(NodeFailure::Failed(match min_deficit {
            Some(deficit) => FailureKind::InsufficientBattery { deficit },
            None => FailureKind::NoCollisionFreePath { action },
        }))
    }
}
