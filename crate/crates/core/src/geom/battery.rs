use super::{GeomError, Trajectory};

/// Linear battery model. All quantities are in abstract charge units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatteryModel {
    pub cost_per_meter: f64,
    /// Flat charge added to every inspection trajectory.
    pub inspect_overhead: f64,
    pub capacity: f64,
    /// Charge that must remain, on top of the straight-line cost to the
    /// dock, after any battery-guarded action.
    pub reserve: f64,
}

impl BatteryModel {
    pub fn validate(&self) -> Result<(), GeomError> {
        let all_positive = [self.cost_per_meter, self.inspect_overhead, self.capacity, self.reserve]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !all_positive {
            return Err(GeomError::Battery("all parameters must be positive".into()));
        }
        if self.reserve >= self.capacity {
            return Err(GeomError::Battery("reserve must be below capacity".into()));
        }
        Ok(())
    }
}

impl Default for BatteryModel {
    fn default() -> Self {
        BatteryModel {
            cost_per_meter: 1.0,
            inspect_overhead: 5.0,
            capacity: 400.0,
            reserve: 10.0,
        }
    }
}

/// Charge consumed by following `tr`.
pub fn battery_cost(tr: &Trajectory, model: &BatteryModel, is_inspection: bool) -> f64 {
    let overhead = if is_inspection { model.inspect_overhead } else { 0.0 };
    model.cost_per_meter * tr.length() + overhead
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Pose;
    use proptest::prelude::*;

    fn model(cost_per_meter: f64) -> BatteryModel {
        BatteryModel { cost_per_meter, ..BatteryModel::default() }
    }

    #[test]
    fn linear_cost() {
        let still = Trajectory::new(vec![Pose::new(1.0, 1.0), Pose::new(1.0, 1.0)]);
        assert_eq!(battery_cost(&still, &model(0.5), false), 0.0);
        let ten = Trajectory::new(vec![Pose::new(0.0, 0.0), Pose::new(10.0, 0.0)]);
        assert_eq!(battery_cost(&ten, &model(0.5), false), 5.0);
        assert_eq!(battery_cost(&ten, &model(0.5), true), 10.0);
    }

    #[test]
    fn validation() {
        assert!(BatteryModel::default().validate().is_ok());
        assert!(BatteryModel { reserve: 500.0, ..BatteryModel::default() }.validate().is_err());
        assert!(model(0.0).validate().is_err());
    }

    proptest! {
        #[test]
        fn additive_and_homogeneous(
            a in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 2..6),
            b in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..6),
            k in 0.1f64..10.0,
        ) {
            let m = model(0.7);
            let t1 = Trajectory::new(a.iter().map(|&(x, y)| Pose::new(x, y)).collect());
            let mut pts = vec![t1.end()];
            pts.extend(b.iter().map(|&(x, y)| Pose::new(x, y)));
            let t2 = Trajectory::new(pts);
            let joined = t1.concat(&t2);
            let sum = battery_cost(&t1, &m, false) + battery_cost(&t2, &m, false);
            prop_assert!((battery_cost(&joined, &m, false) - sum).abs() <= 1e-9 * (1.0 + sum));
            let scaled = Trajectory::new(t1.waypoints().iter().map(|p| Pose::new(p.x * k, p.y * k)).collect());
            let expect = k * battery_cost(&t1, &m, false);
            prop_assert!((battery_cost(&scaled, &m, false) - expect).abs() <= 1e-9 * (1.0 + expect));
        }
    }
}
