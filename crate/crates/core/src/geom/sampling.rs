use rand::Rng;

use super::polygon::polygon_area;
use super::{plan_motion, Envelope, GeomError, PlanFailure, PlannerConfig, Pose, Trajectory, Workspace};

/// Waypoints per inspection pattern.
pub const INSPECTION_WAYPOINTS: usize = 5;

const MAX_REJECTIONS: usize = 1000;
const MIN_REGION_AREA: f64 = 1e-9;

fn sample_triangle<R: Rng + ?Sized>(a: &Pose, b: &Pose, c: &Pose, rng: &mut R) -> Pose {
    let r1: f64 = rng.gen::<f64>().sqrt();
    let r2: f64 = rng.gen();
    Pose::new(
        (1.0 - r1) * a.x + r1 * (1.0 - r2) * b.x + r1 * r2 * c.x,
        (1.0 - r1) * a.y + r1 * (1.0 - r2) * b.y + r1 * r2 * c.y,
    )
}

/// Uniform sample over a convex polygon by area-weighted fan triangles.
fn sample_convex<R: Rng + ?Sized>(poly: &[Pose], rng: &mut R) -> Pose {
    let areas: Vec<f64> = (1..poly.len() - 1)
        .map(|i| polygon_area(&[poly[0], poly[i], poly[i + 1]]))
        .collect();
    let total: f64 = areas.iter().sum();
    let mut pick = rng.gen::<f64>() * total;
    let mut tri = areas.len() - 1;
    for (i, a) in areas.iter().enumerate() {
        if pick < *a {
            tri = i;
            break;
        }
        pick -= a;
    }
    sample_triangle(&poly[0], &poly[tri + 1], &poly[tri + 2], rng)
}

/// Uniform collision-free pose inside the named region, by rejection.
pub fn sample_pose_in_region<R: Rng + ?Sized>(
    region: &str,
    w: &Workspace,
    rng: &mut R,
) -> Result<Pose, GeomError> {
    let r = w.region(region)?;
    if r.area() < MIN_REGION_AREA {
        return Err(GeomError::RegionUnsatisfiable(region.to_string()));
    }
    for _ in 0..MAX_REJECTIONS {
        let p = sample_convex(&r.polygon, rng);
        if w.is_free(&p) {
            return Ok(p);
        }
    }
    Err(GeomError::RegionUnsatisfiable(region.to_string()))
}

/// Five free poses inside the envelope, sorted along its axis.
pub fn sample_inspection_waypoints<R: Rng + ?Sized>(
    envelope: &Envelope,
    w: &Workspace,
    rng: &mut R,
) -> Option<Vec<Pose>> {
    let len = envelope.axis_length();
    let hw = envelope.half_width;
    let mut pts = Vec::with_capacity(INSPECTION_WAYPOINTS);
    let mut attempts = 0;
    while pts.len() < INSPECTION_WAYPOINTS {
        attempts += 1;
        if attempts > MAX_REJECTIONS {
            return None;
        }
        let p = envelope.point(rng.gen_range(0.0..=len), rng.gen_range(-hw..=hw));
        if w.is_free(&p) {
            pts.push(p);
        }
    }
    pts.sort_by(|a, b| envelope.projection(a).total_cmp(&envelope.projection(b)));
    Some(pts)
}

/// Inspection pattern for a component: five sampled waypoints around it,
/// ordered along its major axis and connected by planned motions.
pub fn inspection_trajectory<R: Rng + ?Sized>(
    component: &str,
    half_width: f64,
    w: &Workspace,
    rng: &mut R,
    config: &PlannerConfig,
    work: &mut u64,
) -> Result<Trajectory, InspectionFailure> {
    let c = w.component(component).map_err(InspectionFailure::Geom)?;
    let waypoints = sample_inspection_waypoints(&c.envelope(half_width), w, rng)
        .ok_or(InspectionFailure::EnvelopeBlocked)?;
    connect(&waypoints, w, rng, config, work).map_err(InspectionFailure::Plan)
}

/// Chains `plan_motion` between consecutive poses.
pub fn connect<R: Rng + ?Sized>(
    poses: &[Pose],
    w: &Workspace,
    rng: &mut R,
    config: &PlannerConfig,
    work: &mut u64,
) -> Result<Trajectory, PlanFailure> {
    let mut tr = Trajectory::stationary(poses[0]);
    for pair in poses.windows(2) {
        let leg = plan_motion(pair[0], pair[1], w, rng.gen(), config, work)?;
        tr = tr.concat(&leg);
    }
    Ok(tr)
}

#[derive(Clone, Debug, PartialEq)]
pub enum InspectionFailure {
    Geom(GeomError),
    EnvelopeBlocked,
    Plan(PlanFailure),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{collision_free, parse_workspace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    const WS: &str = "\
bounds 0 0 40 20
obstacle Wing 10 9 30 9 30 11 10 11
region Box 2 2 6 2 6 6 2 6
region Sliver 2 15 6 15 6 15.0000000001
component Wing 10 10 30 10
";

    #[test]
    fn rectangular_region_is_uniform() {
        let w = parse_workspace(WS).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = [0usize; 16];
        let n = 10_000;
        for _ in 0..n {
            let p = sample_pose_in_region("Box", &w, &mut rng).unwrap();
            assert!(w.region("Box").unwrap().contains(&p));
            let cx = (((p.x - 2.0) / 1.0) as usize).min(3);
            let cy = (((p.y - 2.0) / 1.0) as usize).min(3);
            counts[cy * 4 + cx] += 1;
        }
        let expected = n as f64 / 16.0;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let p_value = 1.0 - ChiSquared::new(15.0).unwrap().cdf(stat);
        assert!(p_value > 0.01, "chi-square {stat}, p = {p_value}");
    }

    #[test]
    fn degenerate_region_is_unsatisfiable() {
        let w = parse_workspace(WS).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            sample_pose_in_region("Sliver", &w, &mut rng),
            Err(GeomError::RegionUnsatisfiable("Sliver".into()))
        );
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let w = parse_workspace(WS).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20).map(|_| sample_pose_in_region("Box", &w, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));
    }

    #[test]
    fn inspection_waypoints_are_ordered_along_the_axis() {
        let w = parse_workspace(WS).unwrap();
        let env = w.component("Wing").unwrap().envelope(3.0);
        let cfg = PlannerConfig::for_workspace(&w);
        let mut sets = Vec::new();
        for seed in [1u64, 2] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = sample_inspection_waypoints(&env, &w, &mut rng).unwrap();
            assert_eq!(pts.len(), INSPECTION_WAYPOINTS);
            assert!(pts.windows(2).all(|p| env.projection(&p[0]) <= env.projection(&p[1])));
            assert!(pts.iter().all(|p| env.contains(p) && w.is_free(p)));
            sets.push(pts);
        }
        assert_ne!(sets[0], sets[1]);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tr = inspection_trajectory("Wing", 3.0, &w, &mut rng, &cfg, &mut 0).unwrap();
        assert!(collision_free(&tr, &w, cfg.collision_step));
    }

    #[test]
    fn blocked_envelope_fails() {
        // The envelope coincides with the obstacle.
        let w = parse_workspace(WS).unwrap();
        let cfg = PlannerConfig::for_workspace(&w);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = inspection_trajectory("Wing", 0.9, &w, &mut rng, &cfg, &mut 0);
        assert_eq!(r, Err(InspectionFailure::EnvelopeBlocked));
    }
}
