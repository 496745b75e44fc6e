use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Pose, Trajectory, Workspace};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlannerConfig {
    /// Extension step in meters.
    pub step: f64,
    pub goal_bias: f64,
    pub max_iterations: usize,
    /// Spacing used by sampled trajectory validation.
    pub collision_step: f64,
}

impl PlannerConfig {
    /// Step of 2% of the workspace diagonal, goal bias 0.1, 5000 iterations,
    /// validation spacing of a quarter step.
    pub fn for_workspace(w: &Workspace) -> Self {
        let step = 0.02 * w.bounds.diagonal();
        PlannerConfig {
            step,
            goal_bias: 0.1,
            max_iterations: 5000,
            collision_step: step / 4.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlanFailure {
    /// An endpoint lies outside the free space.
    BlockedEndpoint,
    IterationCap,
}

struct Node {
    pose: Pose,
    parent: usize,
}

/// RRT from `from` to `to` followed by greedy shortcutting.
///
/// Edges are validated with exact segment/polygon tests, so every returned
/// trajectory is collision-free at any sampling resolution. `work` is
/// incremented once per iteration (plus one per shortcut query).
pub fn plan_motion(
    from: Pose,
    to: Pose,
    w: &Workspace,
    seed: u64,
    config: &PlannerConfig,
    work: &mut u64,
) -> Result<Trajectory, PlanFailure> {
    *work += 1;
    if !w.is_free(&from) || !w.is_free(&to) {
        return Err(PlanFailure::BlockedEndpoint);
    }
    if from == to {
        return Ok(Trajectory::stationary(from));
    }
    if w.segment_free(&from, &to) {
        return Ok(Trajectory::new(vec![from, to]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = vec![Node { pose: from, parent: 0 }];
    let b = w.bounds;
    for _ in 0..config.max_iterations {
        *work += 1;
        let target = if rng.gen_bool(config.goal_bias) {
            to
        } else {
            Pose::new(rng.gen_range(b.min.x..=b.max.x), rng.gen_range(b.min.y..=b.max.y))
        };
        let (near_idx, near_dist) = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (i, n.pose.distance(&target)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("tree is never empty");
        if near_dist <= 0.0 {
            continue;
        }
        let near = nodes[near_idx].pose;
        let new = if near_dist <= config.step {
            target
        } else {
            near.lerp(&target, config.step / near_dist)
        };
        if !w.segment_free(&near, &new) {
            continue;
        }
        nodes.push(Node { pose: new, parent: near_idx });
        if new.distance(&to) <= config.step && w.segment_free(&new, &to) {
            let mut path = vec![to];
            let mut idx = nodes.len() - 1;
            loop {
                path.push(nodes[idx].pose);
                if idx == 0 {
                    break;
                }
                idx = nodes[idx].parent;
            }
            path.reverse();
            path.dedup();
            return Ok(Trajectory::new(shortcut(&path, w, work)));
        }
    }
    Err(PlanFailure::IterationCap)
}

/// Greedy shortcutting: from each kept waypoint jump to the farthest later
/// waypoint reachable by a free straight segment.
fn shortcut(path: &[Pose], w: &Workspace, work: &mut u64) -> Vec<Pose> {
    let mut out = vec![path[0]];
    let mut i = 0;
    while i + 1 < path.len() {
        let mut j = path.len() - 1;
        while j > i + 1 {
            *work += 1;
            if w.segment_free(&path[i], &path[j]) {
                break;
            }
            j -= 1;
        }
        out.push(path[j]);
        i = j;
    }
    out
}
