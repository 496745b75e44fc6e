use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Concretization;
use crate::geom::{
    sample_inspection_waypoints, sample_pose_in_region, Envelope, GeomError, Pose, Workspace,
};

/// The sampling domain of a generator.
#[derive(Clone, Debug, PartialEq)]
pub enum RangeDescriptor {
    /// Nothing to sample.
    Point,
    Region { name: String, area: f64 },
    Envelope { component: String, envelope: Envelope },
}

impl RangeDescriptor {
    pub fn area(&self) -> f64 {
        match self {
            RangeDescriptor::Point => 0.0,
            RangeDescriptor::Region { area, .. } => *area,
            RangeDescriptor::Envelope { envelope, .. } => envelope.area(),
        }
    }
}

/// A concrete value for an action's continuous parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum Binding {
    Stationary,
    TargetPose(Pose),
    /// Waypoints ordered along the component axis.
    InspectionWaypoints(Vec<Pose>),
}

/// Lazily yields at most `budget` bindings from its own seeded stream.
#[derive(Clone, Debug)]
pub struct Generator {
    pub range: RangeDescriptor,
    pub budget: usize,
    yielded: usize,
    rng: ChaCha8Rng,
}

impl Generator {
    pub fn new(
        concretization: &Concretization,
        target: Option<&str>,
        w: &Workspace,
        half_width: f64,
        budget: usize,
        seed: u64,
    ) -> Result<Self, GeomError> {
        let range = match (concretization, target) {
            (Concretization::Stationary, _) => RangeDescriptor::Point,
            (Concretization::Reach { .. }, Some(name)) => RangeDescriptor::Region {
                name: name.to_string(),
                area: w.region(name)?.area(),
            },
            (Concretization::Inspect { .. }, Some(name)) => RangeDescriptor::Envelope {
                component: name.to_string(),
                envelope: w.component(name)?.envelope(half_width),
            },
            (_, None) => return Err(GeomError::Invalid("generator target is unbound".into())),
        };
        // A stationary action has exactly one concretization.
        let budget = if range == RangeDescriptor::Point { 1 } else { budget };
        Ok(Generator {
            range,
            budget,
            yielded: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Budget-weighted size of the sampling domain, normalized by
    /// `reference_area`. Sampleless generators measure 1.
    pub fn range_measure(&self, reference_area: f64) -> f64 {
        match self.range {
            RangeDescriptor::Point => 1.0,
            _ => self.budget as f64 * (1.0 + self.range.area() / reference_area),
        }
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.yielded
    }

    /// Next binding, or `None` once the budget is spent. A sampling failure
    /// consumes one unit of budget.
    pub fn next_binding(&mut self, w: &Workspace) -> Option<Result<Binding, GeomError>> {
        if self.yielded >= self.budget {
            return None;
        }
        self.yielded += 1;
        Some(match &self.range {
            RangeDescriptor::Point => Ok(Binding::Stationary),
            RangeDescriptor::Region { name, .. } => {
                sample_pose_in_region(name, w, &mut self.rng).map(Binding::TargetPose)
            }
            RangeDescriptor::Envelope { component, envelope } => {
                sample_inspection_waypoints(envelope, w, &mut self.rng)
                    .map(Binding::InspectionWaypoints)
                    .ok_or_else(|| GeomError::RegionUnsatisfiable(component.clone()))
            }
        })
    }
}

/// Estimated cost of refining a path: the product of the range measures of
/// its unrefined actions.
pub fn path_cost_estimate(measures: &[f64]) -> f64 {
    measures.iter().product()
}
