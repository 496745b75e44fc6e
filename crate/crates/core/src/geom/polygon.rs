use super::Pose;

const EPS: f64 = 1e-12;

fn cross(o: &Pose, a: &Pose, b: &Pose) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn on_segment(p: &Pose, a: &Pose, b: &Pose) -> bool {
    cross(a, b, p).abs() <= EPS * (1.0 + a.distance(b))
        && p.x >= a.x.min(b.x) - EPS
        && p.x <= a.x.max(b.x) + EPS
        && p.y >= a.y.min(b.y) - EPS
        && p.y <= a.y.max(b.y) + EPS
}

/// Closed segment intersection, touching and collinear overlap included.
pub fn segments_intersect(a: &Pose, b: &Pose, c: &Pose, d: &Pose) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > EPS && d2 < -EPS) || (d1 < -EPS && d2 > EPS))
        && ((d3 > EPS && d4 < -EPS) || (d3 < -EPS && d4 > EPS))
    {
        return true;
    }
    on_segment(a, c, d) || on_segment(b, c, d) || on_segment(c, a, b) || on_segment(d, a, b)
}

/// Even-odd containment; points on the boundary count as inside.
pub fn point_in_polygon(p: &Pose, poly: &[Pose]) -> bool {
    let n = poly.len();
    if n == 0 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (&poly[i], &poly[j]);
        if on_segment(p, a, b) {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// True when the closed segment `a`-`b` touches the closed polygon.
pub fn segment_hits_polygon(a: &Pose, b: &Pose, poly: &[Pose]) -> bool {
    if point_in_polygon(a, poly) || point_in_polygon(b, poly) {
        return true;
    }
    let n = poly.len();
    (0..n).any(|i| segments_intersect(a, b, &poly[i], &poly[(i + 1) % n]))
}

pub fn polygon_area(poly: &[Pose]) -> f64 {
    signed_area(poly).abs()
}

pub(crate) fn signed_area(poly: &[Pose]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (&poly[i], &poly[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
        / 2.0
}

pub(crate) fn is_convex(poly: &[Pose]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let mut sign = 0.0f64;
    for i in 0..n {
        let c = cross(&poly[i], &poly[(i + 1) % n], &poly[(i + 2) % n]);
        if c.abs() <= EPS {
            continue;
        }
        if sign == 0.0 {
            sign = c.signum();
        } else if c.signum() != sign {
            return false;
        }
    }
    true
}

pub(crate) fn polygons_overlap(p: &[Pose], q: &[Pose]) -> bool {
    p.iter().any(|v| point_in_polygon(v, q))
        || q.iter().any(|v| point_in_polygon(v, p))
        || (0..p.len()).any(|i| {
            let (a, b) = (&p[i], &p[(i + 1) % p.len()]);
            (0..q.len()).any(|j| segments_intersect(a, b, &q[j], &q[(j + 1) % q.len()]))
        })
}

pub(crate) fn centroid(poly: &[Pose]) -> Pose {
    let a = signed_area(poly);
    if a.abs() < EPS {
        let n = poly.len() as f64;
        return Pose::new(
            poly.iter().map(|p| p.x).sum::<f64>() / n,
            poly.iter().map(|p| p.y).sum::<f64>() / n,
        );
    }
    let n = poly.len();
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let (p, q) = (&poly[i], &poly[(i + 1) % n]);
        let f = p.x * q.y - q.x * p.y;
        cx += (p.x + q.x) * f;
        cy += (p.y + q.y) * f;
    }
    Pose::new(cx / (6.0 * a), cy / (6.0 * a))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Vec<Pose> {
        vec![Pose::new(0.0, 0.0), Pose::new(2.0, 0.0), Pose::new(2.0, 2.0), Pose::new(0.0, 2.0)]
    }

    #[test]
    fn containment_includes_boundary() {
        let sq = square();
        assert!(point_in_polygon(&Pose::new(1.0, 1.0), &sq));
        assert!(point_in_polygon(&Pose::new(2.0, 1.0), &sq));
        assert!(point_in_polygon(&Pose::new(0.0, 0.0), &sq));
        assert!(!point_in_polygon(&Pose::new(2.1, 1.0), &sq));
        assert!(!point_in_polygon(&Pose::new(-1.0, 0.0), &sq));
    }

    #[test]
    fn segment_polygon_cases() {
        let sq = square();
        // Crossing without either endpoint inside.
        assert!(segment_hits_polygon(&Pose::new(-1.0, 1.0), &Pose::new(3.0, 1.0), &sq));
        // Grazing a corner.
        assert!(segment_hits_polygon(&Pose::new(-1.0, 1.0), &Pose::new(1.0, 3.0), &sq));
        assert!(!segment_hits_polygon(&Pose::new(-1.0, 3.0), &Pose::new(3.0, 3.0), &sq));
    }

    #[test]
    fn area_centroid_convexity() {
        let sq = square();
        assert!((polygon_area(&sq) - 4.0).abs() < 1e-12);
        assert_eq!(centroid(&sq), Pose::new(1.0, 1.0));
        assert!(is_convex(&sq));
        let dart = vec![Pose::new(0.0, 0.0), Pose::new(2.0, 1.0), Pose::new(0.0, 2.0), Pose::new(1.0, 1.0)];
        assert!(!is_convex(&dart));
    }

    #[test]
    fn overlap_detection() {
        let sq = square();
        let shifted: Vec<Pose> = sq.iter().map(|p| Pose::new(p.x + 1.0, p.y + 1.0)).collect();
        let far: Vec<Pose> = sq.iter().map(|p| Pose::new(p.x + 5.0, p.y)).collect();
        assert!(polygons_overlap(&sq, &shifted));
        assert!(!polygons_overlap(&sq, &far));
    }
}
