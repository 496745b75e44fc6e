//! The concrete layer: a 2D polygonal workspace, collision checking, RRT
//! motion planning, region sampling and linear battery accounting.

mod battery;
mod polygon;
mod rrt;
mod sampling;
mod workspace;

use std::fmt;

use thiserror::Error;

pub use battery::{battery_cost, BatteryModel};
pub use polygon::{point_in_polygon, polygon_area, segment_hits_polygon, segments_intersect};
pub use rrt::{plan_motion, PlanFailure, PlannerConfig};
pub use sampling::{
    inspection_trajectory, sample_inspection_waypoints, sample_pose_in_region, InspectionFailure,
    INSPECTION_WAYPOINTS,
};
pub use sampling::connect;
pub use workspace::{parse_workspace, Component, Envelope, Obstacle, Rect, Region, Workspace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("workspace line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid workspace: {0}")]
    Invalid(String),
    #[error("unknown region `{0}`")]
    UnknownRegion(String),
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("no collision-free pose found in `{0}`")]
    RegionUnsatisfiable(String),
    #[error("invalid battery model: {0}")]
    Battery(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64) -> Self {
        Pose { x, y }
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(&self, other: &Pose, t: f64) -> Pose {
        Pose::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.4}, {:.4})", self.x, self.y)
    }
}

/// An ordered waypoint list. The polyline length is cached on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    waypoints: Vec<Pose>,
    length: f64,
}

impl Trajectory {
    pub fn new(waypoints: Vec<Pose>) -> Self {
        assert!(!waypoints.is_empty(), "trajectory needs at least one waypoint");
        let length = polyline_length(&waypoints);
        Trajectory { waypoints, length }
    }

    pub fn stationary(pose: Pose) -> Self {
        Trajectory::new(vec![pose])
    }

    pub fn waypoints(&self) -> &[Pose] {
        &self.waypoints
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn start(&self) -> Pose {
        self.waypoints[0]
    }

    pub fn end(&self) -> Pose {
        *self.waypoints.last().expect("non-empty")
    }

    /// Appends `next`, dropping its first waypoint when it duplicates our end.
    pub fn concat(&self, next: &Trajectory) -> Trajectory {
        let mut pts = self.waypoints.clone();
        let skip = usize::from(next.start().distance(&self.end()) == 0.0);
        pts.extend_from_slice(&next.waypoints[skip..]);
        Trajectory::new(pts)
    }
}

pub fn polyline_length(points: &[Pose]) -> f64 {
    points.windows(2).map(|w| w[0].distance(&w[1])).sum()
}

/// Sampled collision check: every segment is densified with spacing at most
/// `step` (both endpoints included) and each sample must be free.
pub fn collision_free(tr: &Trajectory, w: &Workspace, step: f64) -> bool {
    densify(tr.waypoints(), step).all(|p| w.is_free(&p))
}

/// Evenly spaced samples along each segment with spacing at most `step`.
pub fn densify(points: &[Pose], step: f64) -> impl Iterator<Item = Pose> + '_ {
    assert!(step > 0.0);
    let single = (points.len() == 1).then(|| points[0]);
    single.into_iter().chain(points.windows(2).enumerate().flat_map(move |(i, seg)| {
        let n = ((seg[0].distance(&seg[1]) / step).ceil() as usize).max(1);
        // Interior joints are shared between consecutive segments.
        let first = usize::from(i > 0);
        (first..=n).map(move |k| seg[0].lerp(&seg[1], k as f64 / n as f64))
    }))
}
