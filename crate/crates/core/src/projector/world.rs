//! The environment map a projection runs in.

use crate::geom::{distance, point_in_region, Point, Polyline, Region};
use crate::lang::TravelMode;
use petgraph::graph::{NodeIndex, UnGraph};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Speeds {
    pub office: f64,
    pub doorway: f64,
    pub hallway: f64,
}

impl Default for Speeds {
    fn default() -> Self {
        Speeds {
            office: 30.0,
            doorway: 20.0,
            hallway: 80.0,
        }
    }
}

impl Speeds {
    pub fn of(&self, m: TravelMode) -> f64 {
        match m {
            TravelMode::Office => self.office,
            TravelMode::Doorway => self.doorway,
            TravelMode::Hallway => self.hallway,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub id: String,
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Room {
    pub fn region(&self) -> Region {
        Region::rect(self.xmin, self.xmax, self.ymin, self.ymax)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Door {
    pub id: String,
    pub room: String,
    pub center: Point,
    /// Radius of the doorway disk in which the robot travels in doorway mode.
    pub radius: f64,
    /// Region in front of the door that counts as passing it.
    pub passing: Region,
    /// Belief that the door is open, unless the beliefs file says otherwise.
    #[serde(default = "one")]
    pub open_probability: f64,
    /// Opening angle in degrees when open.
    #[serde(default = "ninety")]
    pub open_angle: f64,
}

fn one() -> f64 {
    1.0
}

fn ninety() -> f64 {
    90.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub id: String,
    pub at: Point,
    /// Room id or "hallway".
    pub area: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub id: String,
    pub at: Point,
    pub waypoint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub id: String,
    #[serde(default = "letter")]
    pub kind: String,
    pub location: String,
    /// Color distribution unless the beliefs file has `color-<id>`.
    pub color: BTreeMap<String, f64>,
}

fn letter() -> String {
    "letter".into()
}

/// An object the robot has been told about, e.g. a moved table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: String,
    pub region: Region,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub detection_probability: f64,
    #[serde(default)]
    pub false_positive_probability: f64,
    /// Standard deviation of the measured value (degrees for door angles,
    /// probability of misperceiving a color for cameras).
    #[serde(default)]
    pub noise: f64,
    pub range: f64,
}

impl SensorModel {
    pub fn validate(&self) -> Result<(), String> {
        let p = |v: f64| (0.0..=1.0).contains(&v);
        if !p(self.detection_probability) || !p(self.false_positive_probability) {
            return Err("sensor probabilities must lie in [0, 1]".into());
        }
        if !(self.range > 0.0) {
            return Err("sensor range must be positive".into());
        }
        if !(self.noise >= 0.0) {
            return Err("sensor noise must be nonnegative".into());
        }
        Ok(())
    }
}

pub fn default_sensors() -> BTreeMap<String, SensorModel> {
    let mut m = BTreeMap::new();
    m.insert(
        "laser".into(),
        SensorModel {
            detection_probability: 1.0,
            false_positive_probability: 0.0,
            noise: 2.0,
            range: 300.0,
        },
    );
    m.insert(
        "camera".into(),
        SensorModel {
            detection_probability: 0.9,
            false_positive_probability: 0.0,
            noise: 0.05,
            range: 250.0,
        },
    );
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub start: Point,
    #[serde(default)]
    pub speeds: Speeds,
    pub hallway: Room,
    pub rooms: Vec<Room>,
    pub doors: Vec<Door>,
    pub waypoints: Vec<Waypoint>,
    pub edges: Vec<(String, String)>,
    pub locations: Vec<Location>,
    #[serde(default)]
    pub objects: Vec<WorldObject>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default = "default_sensors")]
    pub sensors: BTreeMap<String, SensorModel>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorldError {
    #[error("world file: {0}")]
    Parse(String),
    #[error("invalid world: {0}")]
    Invalid(String),
    #[error("unknown location {0}")]
    UnknownLocation(String),
    #[error("no waypoint path to {0}")]
    Unreachable(String),
}

/// A travel-mode region of the map. Earlier regions take precedence.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeRegion {
    pub id: String,
    pub region: Region,
    pub mode: TravelMode,
}

/// Travel mode at `p`: the first region containing it, office otherwise.
pub fn mode_at(regions: &[ModeRegion], p: Point) -> TravelMode {
    regions
        .iter()
        .find(|r| point_in_region(p, &r.region))
        .map_or(TravelMode::Office, |r| r.mode)
}

fn overlap(a: &Room, b: &Room) -> bool {
    a.xmin < b.xmax && b.xmin < a.xmax && a.ymin < b.ymax && b.ymin < a.ymax
}

fn on_boundary(r: &Room, p: Point) -> bool {
    let eps = 1e-6;
    let inx = p.x >= r.xmin - eps && p.x <= r.xmax + eps;
    let iny = p.y >= r.ymin - eps && p.y <= r.ymax + eps;
    (inx && ((p.y - r.ymin).abs() < eps || (p.y - r.ymax).abs() < eps))
        || (iny && ((p.x - r.xmin).abs() < eps || (p.x - r.xmax).abs() < eps))
}

impl World {
    pub fn from_json(src: &str) -> Result<World, WorldError> {
        let w: World = serde_json::from_str(src).map_err(|e| WorldError::Parse(e.to_string()))?;
        w.validate()?;
        Ok(w)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("world serializes")
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |m: String| Err(WorldError::Invalid(m));
        if !self.start.is_finite() {
            return bad("start must be finite".into());
        }
        let sp = self.speeds;
        if !(sp.office > 0.0 && sp.doorway > 0.0 && sp.hallway > 0.0) {
            return bad("speeds must be positive".into());
        }
        let all: Vec<&Room> = self.rooms.iter().chain([&self.hallway]).collect();
        for r in &all {
            if !(r.xmin < r.xmax && r.ymin < r.ymax) {
                return bad(format!("room {} has an empty rectangle", r.id));
            }
        }
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                if overlap(a, b) {
                    return bad(format!("rooms {} and {} overlap", a.id, b.id));
                }
            }
        }
        let mut ids = BTreeSet::new();
        for r in &all {
            if !ids.insert(r.id.as_str()) {
                return bad(format!("duplicate room {}", r.id));
            }
        }
        for d in &self.doors {
            let Some(room) = self.room(&d.room) else {
                return bad(format!("door {} names unknown room {}", d.id, d.room));
            };
            if !on_boundary(room, d.center) {
                return bad(format!(
                    "door {} is not on the boundary of {}",
                    d.id, d.room
                ));
            }
            if !(d.radius > 0.0) || d.passing.validate().is_err() {
                return bad(format!("door {} has an invalid region", d.id));
            }
            if !(0.0..=1.0).contains(&d.open_probability) {
                return bad(format!("door {} open probability outside [0, 1]", d.id));
            }
        }
        let wp: BTreeSet<&str> = self.waypoints.iter().map(|w| w.id.as_str()).collect();
        if wp.len() != self.waypoints.len() {
            return bad("duplicate waypoint id".into());
        }
        for (a, b) in &self.edges {
            if !wp.contains(a.as_str()) || !wp.contains(b.as_str()) {
                return bad(format!("edge {a}-{b} names an unknown waypoint"));
            }
        }
        for l in &self.locations {
            if !wp.contains(l.waypoint.as_str()) {
                return bad(format!(
                    "location {} names unknown waypoint {}",
                    l.id, l.waypoint
                ));
            }
        }
        for o in &self.objects {
            if self.location(&o.location).is_none() {
                return bad(format!(
                    "object {} at unknown location {}",
                    o.id, o.location
                ));
            }
            let total: f64 = o.color.values().sum();
            if o.color.values().any(|p| *p < 0.0) || (total - 1.0).abs() > 1e-9 {
                return bad(format!(
                    "object {} color distribution does not sum to 1",
                    o.id
                ));
            }
        }
        for o in &self.obstacles {
            o.region
                .validate()
                .map_err(|e| WorldError::Invalid(format!("obstacle {}: {e}", o.id)))?;
        }
        for (name, s) in &self.sensors {
            s.validate()
                .map_err(|e| WorldError::Invalid(format!("sensor {name}: {e}")))?;
        }
        Ok(())
    }

    pub fn room(&self, id: &str) -> Option<&Room> {
        if self.hallway.id == id {
            return Some(&self.hallway);
        }
        self.rooms.iter().find(|r| r.id == id)
    }

    pub fn door(&self, id: &str) -> Option<&Door> {
        self.doors.iter().find(|d| d.id == id)
    }

    pub fn location(&self, id: &str) -> Option<&Location> {
        self.locations.iter().find(|l| l.id == id)
    }

    /// Doorway disks, then the hallway, then the offices.
    pub fn mode_regions(&self) -> Vec<ModeRegion> {
        let mut out: Vec<ModeRegion> = self
            .doors
            .iter()
            .map(|d| ModeRegion {
                id: format!("door-{}", d.id),
                region: Region::disk(d.center, d.radius),
                mode: TravelMode::Doorway,
            })
            .collect();
        out.push(ModeRegion {
            id: self.hallway.id.clone(),
            region: self.hallway.region(),
            mode: TravelMode::Hallway,
        });
        out.extend(self.rooms.iter().map(|r| ModeRegion {
            id: r.id.clone(),
            region: r.region(),
            mode: TravelMode::Office,
        }));
        out
    }

    /// Room (or hallway) containing `p`, if any.
    pub fn area_of(&self, p: Point) -> Option<&str> {
        if point_in_region(p, &self.hallway.region()) {
            return Some(&self.hallway.id);
        }
        self.rooms
            .iter()
            .find(|r| point_in_region(p, &r.region()))
            .map(|r| r.id.as_str())
    }

    /// The location nearest to `p` within `tolerance`.
    pub fn location_near(&self, p: Point, tolerance: f64) -> Option<&Location> {
        self.locations
            .iter()
            .filter(|l| distance(l.at, p) <= tolerance)
            .min_by(|a, b| distance(a.at, p).total_cmp(&distance(b.at, p)))
    }

    fn graph(&self, closed: &BTreeSet<String>) -> (UnGraph<usize, f64>, Vec<NodeIndex>) {
        let mut g = UnGraph::new_undirected();
        let nodes: Vec<NodeIndex> = (0..self.waypoints.len()).map(|i| g.add_node(i)).collect();
        let idx: BTreeMap<&str, usize> = self
            .waypoints
            .iter()
            .enumerate()
            .map(|(i, w)| (w.id.as_str(), i))
            .collect();
        // a closed door cuts every edge that touches its doorway disk
        let blocked = |w: &Waypoint| {
            self.doors
                .iter()
                .any(|d| closed.contains(&d.id) && distance(w.at, d.center) <= d.radius)
        };
        for (a, b) in &self.edges {
            let (i, j) = (idx[a.as_str()], idx[b.as_str()]);
            if blocked(&self.waypoints[i]) || blocked(&self.waypoints[j]) {
                continue;
            }
            g.add_edge(
                nodes[i],
                nodes[j],
                distance(self.waypoints[i].at, self.waypoints[j].at),
            );
        }
        (g, nodes)
    }

    /// Waypoint path from `from` to the named location, avoiding closed doors.
    pub fn path_to(
        &self,
        from: Point,
        dest: &str,
        closed: &BTreeSet<String>,
    ) -> Result<Polyline, WorldError> {
        let loc = self
            .location(dest)
            .ok_or_else(|| WorldError::UnknownLocation(dest.to_string()))?;
        let goal = self
            .waypoints
            .iter()
            .position(|w| w.id == loc.waypoint)
            .expect("validated");
        let area = self.area_of(from);
        let entry = self
            .waypoints
            .iter()
            .enumerate()
            .filter(|(_, w)| area.is_none_or(|a| w.area == a))
            .min_by(|a, b| distance(a.1.at, from).total_cmp(&distance(b.1.at, from)))
            .map(|(i, _)| i)
            .ok_or_else(|| WorldError::Unreachable(dest.to_string()))?;
        let (g, nodes) = self.graph(closed);
        let target = self.waypoints[goal].at;
        let (_, route) = petgraph::algo::astar(
            &g,
            nodes[entry],
            |n| n == nodes[goal],
            |e| *e.weight(),
            |n| distance(self.waypoints[g[n]].at, target),
        )
        .ok_or_else(|| WorldError::Unreachable(dest.to_string()))?;
        let mut pts = vec![from];
        pts.extend(route.into_iter().map(|n| self.waypoints[g[n]].at));
        pts.push(loc.at);
        pts.dedup_by(|b, a| distance(*a, *b) < 1e-6);
        if pts.len() < 2 {
            pts.push(loc.at);
        }
        Polyline::new(pts).map_err(|e| WorldError::Invalid(e.to_string()))
    }
}
