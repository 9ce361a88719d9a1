//! Planar geometry: points, polyline paths, trigger regions and exact
//! path/region crossing computation. Coordinates are centimeters.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

/// Crossings closer than this (cm of arclength) are merged.
pub const DEDUP_EPS: f64 = 1e-9;
/// A segment whose circle discriminant is within this bound grazes the circle.
pub const TANGENT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn lerp(self, o: Point, t: f64) -> Point {
        Point::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }

    /// Rotate counter-clockwise by `angle` radians.
    pub fn rotate(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

/// Euclidean distance.
pub fn distance(a: Point, b: Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeomError {
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("polyline needs at least two vertices")]
    TooFewVertices,
    #[error("polyline vertex {0} repeats its predecessor")]
    RepeatedVertex(usize),
    #[error("rectangle bounds are not increasing")]
    InvalidRect,
    #[error("disk radius must be positive")]
    NonPositiveRadius,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct Polyline {
    vertices: Vec<Point>,
    cumulative: Vec<f64>,
}

impl TryFrom<Vec<Point>> for Polyline {
    type Error = GeomError;
    fn try_from(v: Vec<Point>) -> Result<Self, GeomError> {
        Polyline::new(v)
    }
}

impl From<Polyline> for Vec<Point> {
    fn from(p: Polyline) -> Vec<Point> {
        p.vertices
    }
}

impl Polyline {
    pub fn new(vertices: Vec<Point>) -> Result<Self, GeomError> {
        if vertices.len() < 2 {
            return Err(GeomError::TooFewVertices);
        }
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(GeomError::NonFinite);
        }
        let mut cumulative = Vec::with_capacity(vertices.len());
        cumulative.push(0.0);
        for i in 1..vertices.len() {
            let d = distance(vertices[i - 1], vertices[i]);
            if d == 0.0 {
                return Err(GeomError::RepeatedVertex(i));
            }
            cumulative.push(cumulative[i - 1] + d);
        }
        Ok(Polyline {
            vertices,
            cumulative,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Arclength at each vertex.
    pub fn vertex_arclengths(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn start(&self) -> Point {
        self.vertices[0]
    }

    pub fn end(&self) -> Point {
        *self.vertices.last().unwrap()
    }

    /// Index of the segment containing arclength `s` (clamped).
    pub fn segment_at(&self, s: f64) -> usize {
        let n = self.vertices.len() - 1;
        match self.cumulative[1..].iter().position(|&c| s < c) {
            Some(i) => i,
            None => n - 1,
        }
    }

    pub fn point_at(&self, s: f64) -> Point {
        let s = s.clamp(0.0, self.length());
        let i = self.segment_at(s);
        let (a, b) = (self.vertices[i], self.vertices[i + 1]);
        let seg = self.cumulative[i + 1] - self.cumulative[i];
        a.lerp(b, ((s - self.cumulative[i]) / seg).clamp(0.0, 1.0))
    }

    /// Unit direction of travel at arclength `s`.
    pub fn direction_at(&self, s: f64) -> Point {
        let i = self.segment_at(s.clamp(0.0, self.length()));
        let d = self.vertices[i + 1] - self.vertices[i];
        d * (1.0 / d.norm())
    }

    /// The remainder of the path from arclength `s` on, or `None` when less
    /// than `DEDUP_EPS` of it is left.
    pub fn suffix(&self, s: f64) -> Option<Polyline> {
        if self.length() - s <= DEDUP_EPS {
            return None;
        }
        let s = s.max(0.0);
        let mut v = vec![self.point_at(s)];
        for (i, &c) in self.cumulative.iter().enumerate() {
            if c > s + DEDUP_EPS {
                v.push(self.vertices[i]);
            }
        }
        v.dedup_by(|a, b| distance(*a, *b) <= DEDUP_EPS);
        if v.len() < 2 {
            return None;
        }
        Polyline::new(v).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Below,
    Above,
}

/// Whether points on the boundary belong to the region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Closed,
    Open,
}

fn closed() -> Boundary {
    Boundary::Closed
}

fn open() -> Boundary {
    Boundary::Open
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Region {
    AxisRect {
        xmin: f64,
        xmax: f64,
        ymin: f64,
        ymax: f64,
    },
    Disk {
        center: Point,
        radius: f64,
        #[serde(default = "closed")]
        boundary: Boundary,
    },
    HalfPlane {
        axis: Axis,
        bound: f64,
        side: Side,
        #[serde(default = "open")]
        boundary: Boundary,
    },
    Union {
        regions: Vec<Region>,
    },
    Intersection {
        regions: Vec<Region>,
    },
    Complement {
        region: Box<Region>,
    },
}

impl Region {
    pub fn rect(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Region {
        Region::AxisRect {
            xmin,
            xmax,
            ymin,
            ymax,
        }
    }

    pub fn disk(center: Point, radius: f64) -> Region {
        Region::Disk {
            center,
            radius,
            boundary: Boundary::Closed,
        }
    }

    /// Strict half-plane, e.g. `half_plane(Axis::Y, 817.0, Side::Below)` is y < 817.
    pub fn half_plane(axis: Axis, bound: f64, side: Side) -> Region {
        Region::HalfPlane {
            axis,
            bound,
            side,
            boundary: Boundary::Open,
        }
    }

    pub fn universe() -> Region {
        Region::Intersection { regions: vec![] }
    }

    pub fn empty() -> Region {
        Region::Union { regions: vec![] }
    }

    pub fn complement(r: Region) -> Region {
        Region::Complement {
            region: Box::new(r),
        }
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        match self {
            Region::AxisRect {
                xmin,
                xmax,
                ymin,
                ymax,
            } => {
                if ![xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite()) {
                    return Err(GeomError::NonFinite);
                }
                if xmin >= xmax || ymin >= ymax {
                    return Err(GeomError::InvalidRect);
                }
                Ok(())
            }
            Region::Disk { center, radius, .. } => {
                if !center.is_finite() || !radius.is_finite() {
                    return Err(GeomError::NonFinite);
                }
                if *radius <= 0.0 {
                    return Err(GeomError::NonPositiveRadius);
                }
                Ok(())
            }
            Region::HalfPlane { bound, .. } => {
                if bound.is_finite() {
                    Ok(())
                } else {
                    Err(GeomError::NonFinite)
                }
            }
            Region::Union { regions } | Region::Intersection { regions } => {
                regions.iter().try_for_each(Region::validate)
            }
            Region::Complement { region } => region.validate(),
        }
    }

    /// Bounding box of the region's finite primitives, ignoring set operations.
    pub fn extent(&self) -> Option<(Point, Point)> {
        match self {
            Region::AxisRect {
                xmin,
                xmax,
                ymin,
                ymax,
            } => Some((Point::new(*xmin, *ymin), Point::new(*xmax, *ymax))),
            Region::Disk { center, radius, .. } => Some((
                Point::new(center.x - radius, center.y - radius),
                Point::new(center.x + radius, center.y + radius),
            )),
            Region::HalfPlane { .. } => None,
            Region::Union { regions } | Region::Intersection { regions } => {
                regions.iter().filter_map(Region::extent).reduce(|a, b| {
                    (
                        Point::new(a.0.x.min(b.0.x), a.0.y.min(b.0.y)),
                        Point::new(a.1.x.max(b.1.x), a.1.y.max(b.1.y)),
                    )
                })
            }
            Region::Complement { region } => region.extent(),
        }
    }
}

pub fn point_in_region(p: Point, r: &Region) -> bool {
    match r {
        Region::AxisRect {
            xmin,
            xmax,
            ymin,
            ymax,
        } => *xmin <= p.x && p.x <= *xmax && *ymin <= p.y && p.y <= *ymax,
        Region::Disk {
            center,
            radius,
            boundary,
        } => {
            let d = distance(p, *center);
            match boundary {
                Boundary::Closed => d <= *radius,
                Boundary::Open => d < *radius,
            }
        }
        Region::HalfPlane {
            axis,
            bound,
            side,
            boundary,
        } => {
            let v = match axis {
                Axis::X => p.x,
                Axis::Y => p.y,
            };
            match (side, boundary) {
                (Side::Below, Boundary::Open) => v < *bound,
                (Side::Below, Boundary::Closed) => v <= *bound,
                (Side::Above, Boundary::Open) => v > *bound,
                (Side::Above, Boundary::Closed) => v >= *bound,
            }
        }
        Region::Union { regions } => regions.iter().any(|r| point_in_region(p, r)),
        Region::Intersection { regions } => regions.iter().all(|r| point_in_region(p, r)),
        Region::Complement { region } => !point_in_region(p, region),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossingKind {
    Enter,
    Exit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub arclength: f64,
    pub point: Point,
    pub kind: CrossingKind,
}

/// Parameter values `s` (arclength from `a`) where the segment a→b meets a
/// boundary line or circle of any primitive in `r`.
fn boundary_hits(a: Point, b: Point, r: &Region, out: &mut Vec<f64>) {
    let len = distance(a, b);
    let u = (b - a) * (1.0 / len);
    let mut line = |coord_a: f64, coord_u: f64, bound: f64| {
        if coord_u.abs() > 1e-15 {
            let s = (bound - coord_a) / coord_u;
            if (-DEDUP_EPS..=len + DEDUP_EPS).contains(&s) {
                out.push(s.clamp(0.0, len));
            }
        }
    };
    match r {
        Region::AxisRect {
            xmin,
            xmax,
            ymin,
            ymax,
        } => {
            line(a.x, u.x, *xmin);
            line(a.x, u.x, *xmax);
            line(a.y, u.y, *ymin);
            line(a.y, u.y, *ymax);
        }
        Region::HalfPlane { axis, bound, .. } => match axis {
            Axis::X => line(a.x, u.x, *bound),
            Axis::Y => line(a.y, u.y, *bound),
        },
        Region::Disk { center, radius, .. } => {
            let w = a - *center;
            let half_b = u.dot(w);
            let disc = half_b * half_b - (w.dot(w) - radius * radius);
            if disc > TANGENT_EPS {
                let root = disc.sqrt();
                for s in [-half_b - root, -half_b + root] {
                    if (-DEDUP_EPS..=len + DEDUP_EPS).contains(&s) {
                        out.push(s.clamp(0.0, len));
                    }
                }
            }
        }
        Region::Union { regions } | Region::Intersection { regions } => {
            for r in regions {
                boundary_hits(a, b, r, out);
            }
        }
        Region::Complement { region } => boundary_hits(a, b, region, out),
    }
}

/// Membership of the path just after its start, together with every
/// boundary crossing in increasing arclength order.
pub fn path_region_profile(path: &Polyline, r: &Region) -> (bool, Vec<Crossing>) {
    let mut cuts = Vec::new();
    let verts = path.vertices();
    let arcs = path.vertex_arclengths();
    for i in 0..verts.len() - 1 {
        let mut local = Vec::new();
        boundary_hits(verts[i], verts[i + 1], r, &mut local);
        cuts.extend(local.into_iter().map(|s| arcs[i] + s));
    }
    let total = path.length();
    cuts.push(0.0);
    cuts.push(total);
    cuts.retain(|s| (0.0..=total).contains(s));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|b, a| *b - *a <= DEDUP_EPS);
    if total - cuts[cuts.len() - 1] > DEDUP_EPS {
        cuts.push(total);
    } else {
        let last = cuts.len() - 1;
        cuts[last] = total;
    }

    let inside = |lo: f64, hi: f64| point_in_region(path.point_at(0.5 * (lo + hi)), r);
    if cuts.len() < 2 {
        return (point_in_region(path.start(), r), Vec::new());
    }
    let initial = inside(cuts[0], cuts[1]);
    let mut state = initial;
    let mut crossings = Vec::new();
    for w in 1..cuts.len() - 1 {
        let next = inside(cuts[w], cuts[w + 1]);
        if next != state {
            crossings.push(Crossing {
                arclength: cuts[w],
                point: path.point_at(cuts[w]),
                kind: if next {
                    CrossingKind::Enter
                } else {
                    CrossingKind::Exit
                },
            });
            state = next;
        }
    }
    (initial, crossings)
}

pub fn path_region_crossings(path: &Polyline, r: &Region) -> Vec<Crossing> {
    path_region_profile(path, r).1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(a: (f64, f64), b: (f64, f64)) -> Polyline {
        Polyline::new(vec![Point::new(a.0, a.1), Point::new(b.0, b.1)]).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance(Point::new(0.0, 0.0), Point::new(3.0, 4.0)), 5.0);
        assert_eq!(distance(Point::new(7.0, 7.0), Point::new(7.0, 7.0)), 0.0);
        let d = distance(Point::new(2400.0, 600.0), Point::new(2300.0, 800.0));
        assert!((d - 223.6068).abs() < 1e-4);
    }

    #[test]
    fn dropoff_style_membership() {
        let r = Region::Intersection {
            regions: vec![
                Region::rect(860.0, 1265.0, -1e6, 1e6),
                Region::half_plane(Axis::Y, 817.0, Side::Below),
            ],
        };
        assert!(point_in_region(Point::new(1000.0, 500.0), &r));
        assert!(!point_in_region(Point::new(1000.0, 900.0), &r));
        assert!(!point_in_region(Point::new(1000.0, 817.0), &r));
        assert!(point_in_region(Point::new(860.0, 500.0), &r));
    }

    #[test]
    fn rect_crossings() {
        let c = path_region_crossings(
            &seg((0.0, 0.0), (10.0, 0.0)),
            &Region::rect(2.0, 5.0, -1.0, 1.0),
        );
        assert_eq!(c.len(), 2);
        assert!((c[0].arclength - 2.0).abs() < 1e-12 && c[0].kind == CrossingKind::Enter);
        assert!((c[1].arclength - 5.0).abs() < 1e-12 && c[1].kind == CrossingKind::Exit);
    }

    #[test]
    fn disk_chord() {
        let c = path_region_crossings(
            &seg((0.0, 0.0), (300.0, 0.0)),
            &Region::disk(Point::new(150.0, 0.0), 100.0),
        );
        assert_eq!(c.len(), 2);
        assert!((c[0].arclength - 50.0).abs() < 1e-9);
        assert!((c[1].arclength - 250.0).abs() < 1e-9);
    }

    #[test]
    fn tangent_grazes_silently() {
        let c = path_region_crossings(
            &seg((0.0, 100.0), (300.0, 100.0)),
            &Region::disk(Point::new(150.0, 0.0), 100.0),
        );
        assert!(c.is_empty());
    }

    #[test]
    fn start_inside_reports_only_exit() {
        let (init, c) = path_region_profile(
            &seg((150.0, 0.0), (400.0, 0.0)),
            &Region::disk(Point::new(150.0, 0.0), 100.0),
        );
        assert!(init);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].kind, CrossingKind::Exit);
    }

    #[test]
    fn polyline_rejects_bad_input() {
        assert_eq!(
            Polyline::new(vec![Point::new(0.0, 0.0)]),
            Err(GeomError::TooFewVertices)
        );
        assert_eq!(
            Polyline::new(vec![Point::new(0.0, 0.0), Point::new(0.0, 0.0)]),
            Err(GeomError::RepeatedVertex(1))
        );
        assert!(Region::rect(1.0, 0.0, 0.0, 1.0).validate().is_err());
        assert!(Region::disk(Point::new(0.0, 0.0), 0.0).validate().is_err());
    }

    #[test]
    fn suffix_keeps_remaining_vertices() {
        let p = Polyline::new(vec![
            Point::new(0.0, 0.0),
            Point::new(10.0, 0.0),
            Point::new(10.0, 10.0),
        ])
        .unwrap();
        let s = p.suffix(5.0).unwrap();
        assert_eq!(
            s.vertices(),
            &[
                Point::new(5.0, 0.0),
                Point::new(10.0, 0.0),
                Point::new(10.0, 10.0)
            ]
        );
        assert!((s.length() - 15.0).abs() < 1e-12);
        assert!(p.suffix(20.0).is_none());
    }

    #[test]
    fn region_json_shape() {
        let r: Region = serde_json::from_str(
            r#"{"kind":"intersection","regions":[{"kind":"half-plane","axis":"x","bound":860,"side":"above","boundary":"closed"},{"kind":"disk","center":{"x":0,"y":0},"radius":5}]}"#,
        )
        .unwrap();
        assert!(point_in_region(Point::new(860.0, 0.0), &r) == false);
        assert!(r.validate().is_ok());
    }
}
