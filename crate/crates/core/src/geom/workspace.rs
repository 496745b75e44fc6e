use super::polygon::{centroid, is_convex, point_in_polygon, polygons_overlap, segment_hits_polygon};
use super::{polygon_area, GeomError, Pose};

/// Axis-aligned bounds in meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub min: Pose,
    pub max: Pose,
}

impl Rect {
    pub fn contains(&self, p: &Pose) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn area(&self) -> f64 {
        (self.max.x - self.min.x) * (self.max.y - self.min.y)
    }

    pub fn diagonal(&self) -> f64 {
        self.min.distance(&self.max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Obstacle {
    pub name: String,
    pub polygon: Vec<Pose>,
}

/// A named convex region (target or dock).
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub name: String,
    pub polygon: Vec<Pose>,
}

impl Region {
    pub fn contains(&self, p: &Pose) -> bool {
        point_in_polygon(p, &self.polygon)
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.polygon)
    }

    pub fn centroid(&self) -> Pose {
        centroid(&self.polygon)
    }
}

/// An aircraft component reduced to its major axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub name: String,
    pub axis_start: Pose,
    pub axis_end: Pose,
}

impl Component {
    pub fn envelope(&self, half_width: f64) -> Envelope {
        Envelope {
            axis_start: self.axis_start,
            axis_end: self.axis_end,
            half_width,
        }
    }
}

/// Band of half-width `half_width` around a component axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Envelope {
    pub axis_start: Pose,
    pub axis_end: Pose,
    pub half_width: f64,
}

impl Envelope {
    fn frame(&self) -> (f64, f64, f64) {
        let dx = self.axis_end.x - self.axis_start.x;
        let dy = self.axis_end.y - self.axis_start.y;
        let len = dx.hypot(dy);
        (dx / len, dy / len, len)
    }

    /// Signed distance of `p` along the axis from `axis_start`.
    pub fn projection(&self, p: &Pose) -> f64 {
        let (ux, uy, _) = self.frame();
        (p.x - self.axis_start.x) * ux + (p.y - self.axis_start.y) * uy
    }

    /// Maps axis coordinate `s` in `[0, len]` and offset `t` in
    /// `[-half_width, half_width]` to a workspace pose.
    pub fn point(&self, s: f64, t: f64) -> Pose {
        let (ux, uy, _) = self.frame();
        Pose::new(
            self.axis_start.x + ux * s - uy * t,
            self.axis_start.y + uy * s + ux * t,
        )
    }

    pub fn axis_length(&self) -> f64 {
        self.frame().2
    }

    pub fn area(&self) -> f64 {
        self.axis_length() * 2.0 * self.half_width
    }

    pub fn contains(&self, p: &Pose) -> bool {
        let (ux, uy, len) = self.frame();
        let s = self.projection(p);
        let t = -(p.x - self.axis_start.x) * uy + (p.y - self.axis_start.y) * ux;
        (-1e-9..=len + 1e-9).contains(&s) && t.abs() <= self.half_width + 1e-9
    }
}

/// The hangar: bounds, obstacles, named regions and components. Immutable
/// after loading.
#[derive(Clone, Debug, PartialEq)]
pub struct Workspace {
    pub bounds: Rect,
    pub obstacles: Vec<Obstacle>,
    pub regions: Vec<Region>,
    pub components: Vec<Component>,
    /// Initial robot pose, if the file declares one.
    pub start: Option<Pose>,
    /// Name of the docking region, if the file declares one.
    pub dock: Option<String>,
}

impl Workspace {
    pub fn new(bounds: Rect) -> Self {
        Workspace {
            bounds,
            obstacles: Vec::new(),
            regions: Vec::new(),
            components: Vec::new(),
            start: None,
            dock: None,
        }
    }

    pub fn region(&self, name: &str) -> Result<&Region, GeomError> {
        self.regions
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| GeomError::UnknownRegion(name.to_string()))
    }

    pub fn component(&self, name: &str) -> Result<&Component, GeomError> {
        self.components
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| GeomError::UnknownComponent(name.to_string()))
    }

    pub fn dock_region(&self) -> Option<&Region> {
        self.dock.as_deref().and_then(|d| self.region(d).ok())
    }

    /// Inside the bounds and outside every obstacle.
    pub fn is_free(&self, p: &Pose) -> bool {
        self.bounds.contains(p) && !self.obstacles.iter().any(|o| point_in_polygon(p, &o.polygon))
    }

    /// Exact check of a straight segment against all obstacles.
    pub fn segment_free(&self, a: &Pose, b: &Pose) -> bool {
        self.bounds.contains(a)
            && self.bounds.contains(b)
            && !self.obstacles.iter().any(|o| segment_hits_polygon(a, b, &o.polygon))
    }

    /// Checks the load-time invariants: regions convex, inside the bounds and
    /// obstacle-free; components inside the bounds; start pose free.
    pub fn validate(&self) -> Result<(), GeomError> {
        if !(self.bounds.max.x > self.bounds.min.x && self.bounds.max.y > self.bounds.min.y) {
            return Err(GeomError::Invalid("empty bounds".into()));
        }
        for o in &self.obstacles {
            if o.polygon.len() < 3 {
                return Err(GeomError::Invalid(format!("obstacle `{}` needs 3+ vertices", o.name)));
            }
        }
        for r in &self.regions {
            if r.polygon.len() < 3 || !is_convex(&r.polygon) {
                return Err(GeomError::Invalid(format!("region `{}` must be a convex polygon", r.name)));
            }
            if !r.polygon.iter().all(|p| self.bounds.contains(p)) {
                return Err(GeomError::Invalid(format!("region `{}` leaves the bounds", r.name)));
            }
            if let Some(o) = self.obstacles.iter().find(|o| polygons_overlap(&r.polygon, &o.polygon)) {
                return Err(GeomError::Invalid(format!(
                    "region `{}` overlaps obstacle `{}`",
                    r.name, o.name
                )));
            }
        }
        for c in &self.components {
            if !self.bounds.contains(&c.axis_start) || !self.bounds.contains(&c.axis_end) {
                return Err(GeomError::Invalid(format!("component `{}` leaves the bounds", c.name)));
            }
            if c.axis_start.distance(&c.axis_end) <= 0.0 {
                return Err(GeomError::Invalid(format!("component `{}` has a zero-length axis", c.name)));
            }
        }
        if let Some(s) = &self.start {
            if !self.is_free(s) {
                return Err(GeomError::Invalid(format!("start pose {s} is not free")));
            }
        }
        if let Some(d) = &self.dock {
            self.region(d)?;
        }
        Ok(())
    }
}

fn numbers(line: usize, toks: &[&str]) -> Result<Vec<f64>, GeomError> {
    toks.iter()
        .map(|t| {
            t.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| GeomError::Parse {
                line,
                message: format!("bad number `{t}`"),
            })
        })
        .collect()
}

fn polygon(line: usize, toks: &[&str]) -> Result<Vec<Pose>, GeomError> {
    let nums = numbers(line, toks)?;
    if nums.len() < 6 || nums.len() % 2 != 0 {
        return Err(GeomError::Parse {
            line,
            message: "polygon needs an even count of 6+ coordinates".into(),
        });
    }
    Ok(nums.chunks(2).map(|c| Pose::new(c[0], c[1])).collect())
}

/// Parses a `.wspc` workspace description and validates it.
///
/// ```text
/// bounds 0 0 60 40
/// obstacle Fuselage 8 18 52 18 52 22 8 22
/// region Dock 1 1 6 1 6 6 1 6
/// component LeftWing 30 22 30 36
/// start 3.5 3.5
/// dock Dock
/// ```
pub fn parse_workspace(text: &str) -> Result<Workspace, GeomError> {
    let mut ws: Option<Workspace> = None;
    let mut pending = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks[0] == "bounds" {
            let n = numbers(line, &toks[1..])?;
            let [x0, y0, x1, y1] = n[..] else {
                return Err(GeomError::Parse { line, message: "bounds takes 4 numbers".into() });
            };
            if ws.is_some() {
                return Err(GeomError::Parse { line, message: "duplicate bounds".into() });
            }
            ws = Some(Workspace::new(Rect {
                min: Pose::new(x0, y0),
                max: Pose::new(x1, y1),
            }));
        } else {
            pending.push((line, toks));
        }
    }
    let mut ws = ws.ok_or(GeomError::Parse { line: 0, message: "missing `bounds`".into() })?;
    for (line, toks) in pending {
        let name = || {
            toks.get(1).map(|s| s.to_string()).ok_or_else(|| GeomError::Parse {
                line,
                message: format!("`{}` needs a name", toks[0]),
            })
        };
        match toks[0] {
            "obstacle" => ws.obstacles.push(Obstacle { name: name()?, polygon: polygon(line, &toks[2..])? }),
            "region" => {
                let n = name()?;
                if ws.regions.iter().any(|r| r.name == n) {
                    return Err(GeomError::Parse { line, message: format!("duplicate region `{n}`") });
                }
                ws.regions.push(Region { name: n, polygon: polygon(line, &toks[2..])? });
            }
            "component" => {
                let n = numbers(line, &toks[2..])?;
                let [x0, y0, x1, y1] = n[..] else {
                    return Err(GeomError::Parse { line, message: "component takes 4 numbers".into() });
                };
                ws.components.push(Component {
                    name: name()?,
                    axis_start: Pose::new(x0, y0),
                    axis_end: Pose::new(x1, y1),
                });
            }
            "start" => {
                let n = numbers(line, &toks[1..])?;
                let [x, y] = n[..] else {
                    return Err(GeomError::Parse { line, message: "start takes 2 numbers".into() });
                };
                ws.start = Some(Pose::new(x, y));
            }
            "dock" => ws.dock = Some(name()?),
            other => {
                return Err(GeomError::Parse { line, message: format!("unknown directive `{other}`") });
            }
        }
    }
    ws.validate()?;
    Ok(ws)
}
