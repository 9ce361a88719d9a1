//! The office courier: a hallway with twelve offices, letters to carry
//! between desks, tour plans built from at-location steps, and the
//! two-letters-of-one-color scenario.

use crate::geom::{distance, Point, Region};
use crate::lang::{parse_plan, print_plan, Plan, SyntaxError};
use crate::projector::sensing::door_fluent;
use crate::projector::world::{
    default_sensors, Door, Location, Room, Speeds, Waypoint, World, WorldObject,
};
use crate::rules::Timeline;
use crate::term::{match_term, Bindings, Term};
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub const HALL_Y0: f64 = 817.0;
pub const HALL_Y1: f64 = 1017.0;
pub const HALL_X0: f64 = 400.0;
pub const HALL_X1: f64 = 2940.0;
pub const DOOR_RADIUS: f64 = 60.0;
pub const PASSING_HALF_WIDTH: f64 = 40.0;

/// (room, xmin, xmax, door x). Lower rooms sit below the hallway.
const LOWER: [(&str, f64, f64, f64); 6] = [
    ("A-121", 455.0, 860.0, 660.0),
    ("A-120", 860.0, 1265.0, 1000.0),
    ("A-119", 1265.0, 1670.0, 1400.0),
    ("A-118", 1670.0, 2075.0, 1780.0),
    ("A-117", 2075.0, 2480.0, 2300.0),
    ("A-116", 2480.0, 2885.0, 2700.0),
];
const UPPER: [(&str, f64, f64, f64); 6] = [
    ("A-110", 455.0, 860.0, 560.0),
    ("A-111", 860.0, 1265.0, 1200.0),
    ("A-112", 1265.0, 1670.0, 1500.0),
    ("A-113", 1670.0, 2075.0, 1870.0),
    ("A-114", 2075.0, 2480.0, 2200.0),
    ("A-115", 2480.0, 2885.0, 2820.0),
];

pub fn desk(room: &str) -> String {
    format!("{room}-desk")
}

fn front(room: &str) -> String {
    format!("{room}-front")
}

fn door_wp(room: &str) -> String {
    format!("{room}-door")
}

/// The fixed courier map. A-113's door was closed when the tour was
/// planned, so its open probability is 0 unless the beliefs say otherwise.
pub fn build_fixture_world() -> World {
    let mut rooms = Vec::new();
    let mut doors = Vec::new();
    let mut waypoints = Vec::new();
    let mut edges = Vec::new();
    let mut locations = Vec::new();
    let mut fronts: Vec<(f64, String)> = Vec::new();
    let mut add = |id: &str, xmin: f64, xmax: f64, dx: f64, upper: bool| {
        let (ymin, ymax, dy) = if upper {
            (HALL_Y1, HALL_Y1 + 400.0, HALL_Y1)
        } else {
            (HALL_Y0 - 400.0, HALL_Y0, HALL_Y0)
        };
        rooms.push(Room {
            id: id.into(),
            xmin,
            xmax,
            ymin,
            ymax,
        });
        let center = Point::new(dx, dy);
        doors.push(Door {
            id: id.into(),
            room: id.into(),
            center,
            radius: DOOR_RADIUS,
            passing: Region::rect(
                dx - PASSING_HALF_WIDTH,
                dx + PASSING_HALF_WIDTH,
                HALL_Y0,
                HALL_Y1,
            ),
            open_probability: if id == "A-113" { 0.0 } else { 1.0 },
            open_angle: 90.0,
        });
        let d = Point::new((xmin + xmax) / 2.0, (ymin + ymax) / 2.0);
        waypoints.push(Waypoint {
            id: desk(id),
            at: d,
            area: id.into(),
        });
        waypoints.push(Waypoint {
            id: door_wp(id),
            at: center,
            area: id.into(),
        });
        waypoints.push(Waypoint {
            id: front(id),
            at: Point::new(dx, (HALL_Y0 + HALL_Y1) / 2.0),
            area: "hallway".into(),
        });
        edges.push((desk(id), door_wp(id)));
        edges.push((door_wp(id), front(id)));
        locations.push(Location {
            id: desk(id),
            at: d,
            waypoint: desk(id),
        });
        fronts.push((dx, front(id)));
    };
    for (id, a, b, dx) in LOWER {
        add(id, a, b, dx, false);
    }
    for (id, a, b, dx) in UPPER {
        add(id, a, b, dx, true);
    }
    fronts.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in fronts.windows(2) {
        edges.push((w[0].1.clone(), w[1].1.clone()));
    }
    let start = Point::new(2300.0, (HALL_Y0 + HALL_Y1) / 2.0);
    locations.push(Location {
        id: "start".into(),
        at: start,
        waypoint: front("A-117"),
    });
    let color = |c: &[(&str, f64)]| {
        c.iter()
            .map(|(k, p)| (k.to_string(), *p))
            .collect::<BTreeMap<_, _>>()
    };
    World {
        start,
        speeds: Speeds::default(),
        hallway: Room {
            id: "hallway".into(),
            xmin: HALL_X0,
            xmax: HALL_X1,
            ymin: HALL_Y0,
            ymax: HALL_Y1,
        },
        rooms,
        doors,
        waypoints,
        edges,
        locations,
        objects: vec![
            WorldObject {
                id: "letter-1".into(),
                kind: "letter".into(),
                location: desk("A-111"),
                color: color(&[("yellow", 1.0)]),
            },
            WorldObject {
                id: "letter-2".into(),
                kind: "letter".into(),
                location: desk("A-113"),
                color: color(&[("white", 0.5), ("yellow", 0.5)]),
            },
        ],
        obstacles: Vec::new(),
        sensors: default_sensors(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryRequest {
    pub object: String,
    /// Location ids.
    pub pickup: String,
    pub dropoff: String,
    #[serde(default)]
    pub deadline: Option<f64>,
    #[serde(default)]
    pub color: BTreeMap<String, f64>,
}

/// The two commands of the scenario.
pub fn fixture_requests() -> Vec<DeliveryRequest> {
    vec![
        DeliveryRequest {
            object: "letter-1".into(),
            pickup: desk("A-111"),
            dropoff: desk("A-117"),
            deadline: None,
            color: BTreeMap::from([("yellow".to_string(), 1.0)]),
        },
        DeliveryRequest {
            object: "letter-2".into(),
            pickup: desk("A-113"),
            dropoff: desk("A-120"),
            deadline: None,
            color: BTreeMap::from([("white".to_string(), 0.5), ("yellow".to_string(), 0.5)]),
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    PickUp,
    Deliver,
}

/// One at-location subplan: go to the location and pick up or put down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TourStep {
    /// e.g. `pickup-a-111`.
    pub key: String,
    pub kind: StepKind,
    pub object: String,
    pub location: String,
}

/// Steps to run once a closed door is seen open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Opportunity {
    pub door: String,
    pub steps: Vec<TourStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TourPlan {
    pub requests: Vec<DeliveryRequest>,
    pub start: Point,
    pub main: Vec<TourStep>,
    pub opportunity: Option<Opportunity>,
    /// (before, after) pairs over step keys.
    pub orderings: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RevisionError {
    #[error("ordering {0} before {1} closes a cycle")]
    CycleIntroduced(String, String),
    #[error("no step {0}")]
    UnknownStep(String),
    #[error("tour has no opportunity {0}")]
    NoOpportunity(String),
    #[error("location {0} is not on the map")]
    UnknownLocation(String),
    #[error("no request")]
    NoRequests,
}

fn room_of(loc: &str) -> String {
    loc.trim_end_matches("-desk").to_string()
}

fn step_key(kind: StepKind, loc: &str) -> String {
    let p = match kind {
        StepKind::PickUp => "pickup",
        StepKind::Deliver => "deliver",
    };
    format!("{p}-{}", room_of(loc).to_lowercase())
}

fn steps_of(r: &DeliveryRequest) -> [TourStep; 2] {
    [
        TourStep {
            key: step_key(StepKind::PickUp, &r.pickup),
            kind: StepKind::PickUp,
            object: r.object.clone(),
            location: r.pickup.clone(),
        },
        TourStep {
            key: step_key(StepKind::Deliver, &r.dropoff),
            kind: StepKind::Deliver,
            object: r.object.clone(),
            location: r.dropoff.clone(),
        },
    ]
}

/// A door of the room holding `loc` that the map says is closed.
fn closed_door(world: &World, loc: &str) -> Option<String> {
    let room = world.area_of(world.location(loc)?.at)?;
    world
        .doors
        .iter()
        .find(|d| d.room == room && d.open_probability == 0.0)
        .map(|d| d.id.clone())
}

fn route_length(world: &World, from: Point, loc: &str) -> Result<f64, RevisionError> {
    let l = world
        .location(loc)
        .ok_or_else(|| RevisionError::UnknownLocation(loc.into()))?;
    if distance(l.at, from) < 1e-6 {
        return Ok(0.0);
    }
    Ok(world
        .path_to(from, loc, &BTreeSet::new())
        .map(|p| p.length())
        .unwrap_or(f64::INFINITY))
}

fn check_acyclic(
    steps: &[TourStep],
    requests: &[DeliveryRequest],
    orderings: &[(String, String)],
) -> Result<(), RevisionError> {
    let mut g = DiGraph::<&str, ()>::new();
    let idx: BTreeMap<&str, _> = steps
        .iter()
        .map(|s| (s.key.as_str(), g.add_node(s.key.as_str())))
        .collect();
    for r in requests {
        let [p, d] = steps_of(r);
        if let (Some(a), Some(b)) = (idx.get(p.key.as_str()), idx.get(d.key.as_str())) {
            g.add_edge(*a, *b, ());
        }
    }
    for (a, b) in orderings {
        if let (Some(x), Some(y)) = (idx.get(a.as_str()), idx.get(b.as_str())) {
            g.add_edge(*x, *y, ());
            if petgraph::algo::is_cyclic_directed(&g) {
                return Err(RevisionError::CycleIntroduced(a.clone(), b.clone()));
            }
        }
    }
    Ok(())
}

/// Nearest-neighbour sweep over the steps of `requests` from `from`,
/// taking a step only once its pick-up and every ordered predecessor is
/// done. Ties go to the earlier request.
pub fn order_steps(
    world: &World,
    from: Point,
    requests: &[DeliveryRequest],
    orderings: &[(String, String)],
) -> Result<Vec<TourStep>, RevisionError> {
    let all: Vec<TourStep> = requests.iter().flat_map(steps_of).collect();
    check_acyclic(&all, requests, orderings)?;
    let keys: BTreeSet<&str> = all.iter().map(|s| s.key.as_str()).collect();
    let mut preds: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in requests {
        let [p, d] = steps_of(r);
        let d = all.iter().find(|s| s.key == d.key).expect("own step");
        let p = all.iter().find(|s| s.key == p.key).expect("own step");
        preds
            .entry(d.key.as_str())
            .or_default()
            .push(p.key.as_str());
    }
    for (a, b) in orderings {
        if keys.contains(a.as_str()) && keys.contains(b.as_str()) {
            preds.entry(b.as_str()).or_default().push(a.as_str());
        }
    }
    let mut done: BTreeSet<&str> = BTreeSet::new();
    let mut out = Vec::new();
    let mut here = from;
    while out.len() < all.len() {
        let mut best: Option<(f64, usize)> = None;
        for (i, s) in all.iter().enumerate() {
            if done.contains(s.key.as_str()) {
                continue;
            }
            if preds
                .get(s.key.as_str())
                .is_some_and(|ps| ps.iter().any(|p| !done.contains(p)))
            {
                continue;
            }
            let d = route_length(world, here, &s.location)?;
            if best.is_none_or(|(bd, _)| d < bd - 1e-9) {
                best = Some((d, i));
            }
        }
        let (_, i) = best.expect("acyclic order always has a ready step");
        let s = &all[i];
        done.insert(s.key.as_str());
        here = world.location(&s.location).expect("checked").at;
        out.push(s.clone());
    }
    Ok(out)
}

/// Tour for `requests` from `start`. Requests touching a room whose door
/// is known closed are achieved opportunistically: once the door is seen
/// open, every request is rescheduled from that door.
pub fn heuristic_schedule(
    requests: &[DeliveryRequest],
    start: Point,
    world: &World,
) -> Result<TourPlan, RevisionError> {
    build_tour(requests, start, world, Vec::new(), true)
}

fn build_tour(
    requests: &[DeliveryRequest],
    start: Point,
    world: &World,
    orderings: Vec<(String, String)>,
    with_opportunity: bool,
) -> Result<TourPlan, RevisionError> {
    if requests.is_empty() {
        return Err(RevisionError::NoRequests);
    }
    for r in requests {
        for l in [&r.pickup, &r.dropoff] {
            if world.location(l).is_none() {
                return Err(RevisionError::UnknownLocation(l.clone()));
            }
        }
    }
    let blocked = |r: &DeliveryRequest| {
        closed_door(world, &r.pickup).or_else(|| closed_door(world, &r.dropoff))
    };
    let (later, now): (Vec<DeliveryRequest>, Vec<DeliveryRequest>) =
        requests.iter().cloned().partition(|r| blocked(r).is_some());
    let main = if now.is_empty() {
        Vec::new()
    } else {
        order_steps(world, start, &now, &orderings)?
    };
    let opportunity = match later.first().and_then(blocked) {
        Some(door) if with_opportunity => {
            let at = world.door(&door).expect("found above").center;
            Some(Opportunity {
                steps: order_steps(world, at, requests, &orderings)?,
                door,
            })
        }
        _ => None,
    };
    Ok(TourPlan {
        requests: requests.to_vec(),
        start,
        main,
        opportunity,
        orderings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum RevisionRule {
    AddOrdering { before: String, after: String },
    DropOpportunity { door: String },
}

pub fn apply_revision_rule(
    tour: &TourPlan,
    world: &World,
    rule: &RevisionRule,
) -> Result<TourPlan, RevisionError> {
    match rule {
        RevisionRule::AddOrdering { before, after } => {
            let keys: BTreeSet<String> = tour
                .requests
                .iter()
                .flat_map(steps_of)
                .map(|s| s.key)
                .collect();
            for k in [before, after] {
                if !keys.contains(k) {
                    return Err(RevisionError::UnknownStep(k.clone()));
                }
            }
            let mut orderings = tour.orderings.clone();
            orderings.push((before.clone(), after.clone()));
            let all: Vec<TourStep> = tour.requests.iter().flat_map(steps_of).collect();
            check_acyclic(&all, &tour.requests, &orderings)?;
            build_tour(
                &tour.requests,
                tour.start,
                world,
                orderings,
                tour.opportunity.is_some(),
            )
        }
        RevisionRule::DropOpportunity { door } => {
            if tour.opportunity.as_ref().is_none_or(|o| &o.door != door) {
                return Err(RevisionError::NoOpportunity(door.clone()));
            }
            let mut t = tour.clone();
            t.opportunity = None;
            t.requests.retain(|r| {
                closed_door(world, &r.pickup).is_none_or(|d| &d != door)
                    && closed_door(world, &r.dropoff).is_none_or(|d| &d != door)
            });
            Ok(t)
        }
    }
}

fn num(v: f64) -> String {
    let s = format!("{v}");
    s.trim_end_matches(".0").to_string()
}

fn rect_cond(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> String {
    format!(
        "(and (>= robot-x {}) (<= robot-x {}) (>= robot-y {}) (<= robot-y {}))",
        num(xmin),
        num(xmax),
        num(ymin),
        num(ymax)
    )
}

fn state_var(object: &str) -> String {
    format!("execution-state-{object}")
}

fn step_source(s: &TourStep, prefix: &str, priority: i64, world: &World) -> String {
    let (need, act, after) = match s.kind {
        StepKind::PickUp => ("to-be-acquired", "pick-up", "loaded"),
        StepKind::Deliver => ("loaded", "put-down", "delivered"),
    };
    let loc = world
        .location(&s.location)
        .map_or(s.location.clone(), |l| l.id.clone());
    format!(
        "(named {prefix}{key}\n        (if (= {var} {need})\n          (with-valve wheels :priority {priority}\n            (seq (go-to {loc}) ({act} {obj}) (set {var} {after})))))",
        key = s.key,
        var = state_var(&s.object),
        obj = s.object,
    )
}

/// Plan source for a tour: the hallway door-watching policy, the
/// travel-mode policy, then the main steps raced against the opportunity.
pub fn plan_source(tour: &TourPlan, world: &World) -> String {
    let raw = raw_plan_source(tour, world);
    match parse_plan(&raw) {
        Ok(p) => print_plan(&p),
        Err(_) => raw,
    }
}

fn raw_plan_source(tour: &TourPlan, world: &World) -> String {
    let hall = &world.hallway;
    let doorway = world
        .doors
        .iter()
        .map(|d| {
            format!(
                "(<= (dist robot-x robot-y {} {}) {})",
                num(d.center.x),
                num(d.center.y),
                num(d.radius)
            )
        })
        .collect::<Vec<_>>()
        .join("\n                   ");
    let passing = world
        .doors
        .iter()
        .filter_map(|d| match &d.passing {
            Region::AxisRect { xmin, xmax, .. } => Some(format!(
                "(and (>= robot-x {}) (<= robot-x {}))",
                num(*xmin),
                num(*xmax)
            )),
            _ => None,
        })
        .collect::<Vec<_>>()
        .join("\n                        ");
    let mut out = String::new();
    out.push_str("(seq\n");
    for r in &tour.requests {
        out.push_str(&format!(
            "  (set {} to-be-acquired)\n",
            state_var(&r.object)
        ));
    }
    out.push_str("  (with-local-fluents\n");
    out.push_str(&format!(
        "    ((in-hallway? {})\n     (out-of-hallway? (not in-hallway?))\n     (in-doorway? (or {doorway}))\n     (out-of-doorway? (not in-doorway?))\n     (passing-door? (and in-hallway? (or {passing}))))\n",
        rect_cond(hall.xmin, hall.xmax, hall.ymin, hall.ymax)
    ));
    out.push_str("    (with-policy\n      (loop (wait-for in-hallway?)\n            (try-in-parallel (wait-for out-of-hallway?)\n                             (whenever passing-door? (estimate-door-angle))))\n");
    out.push_str("      (with-policy\n        (loop (wait-for in-doorway?)\n              (set-navigation-mode doorway)\n              (wait-for out-of-doorway?)\n              (if in-hallway? (set-navigation-mode hallway))\n              (if out-of-hallway? (set-navigation-mode office)))\n");
    let main = tour
        .main
        .iter()
        .map(|s| format!("      {}", step_source(s, "", 1, world)))
        .collect::<Vec<_>>()
        .join("\n");
    let main = if tour.main.is_empty() {
        "(seq)".to_string()
    } else {
        format!("(seq\n{main})")
    };
    match &tour.opportunity {
        None => out.push_str(&format!("        {main}))))\n")),
        Some(o) => {
            let opp = o
                .steps
                .iter()
                .map(|s| format!("        {}", step_source(s, "opportunity-", 5, world)))
                .collect::<Vec<_>>()
                .join("\n");
            out.push_str(&format!(
                "        (try-in-parallel\n          {main}\n          (seq (wait-for (fluent {}))\n            (seq\n{opp})))))))\n",
                door_fluent(&o.door)
            ));
        }
    }
    out
}

pub fn tour_plan(tour: &TourPlan, world: &World) -> Result<Plan, SyntaxError> {
    parse_plan(&raw_plan_source(tour, world))
}

/// Outcome categories of one projected scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    /// The opportunity never arose.
    DoorClosed,
    OpportunityFailure,
    OpportunitySuccess,
    Residue,
}

fn occurs(tl: &Timeline, pat: &Term) -> bool {
    tl.occurrences()
        .iter()
        .any(|o| match_term(pat, &o.event, &mut Bindings::new()))
}

/// Which branch of the scenario a timeline shows.
pub fn classify(tl: &Timeline, opportunistic_object: &str) -> Category {
    let t = |s: &str| crate::rules::term(s);
    let picked = occurs(
        tl,
        &Term::app(
            "begin",
            vec![Term::app("pick-up", vec![Term::sym(opportunistic_object)])],
        ),
    );
    let failed = occurs(tl, &t("fail(pick-up(?o), two-same-color)"));
    let finished = occurs(tl, &Term::sym("plan-finished"));
    match (picked, failed, finished) {
        (false, false, true) => Category::DoorClosed,
        (true, true, _) => Category::OpportunityFailure,
        (true, false, true) => Category::OpportunitySuccess,
        _ => Category::Residue,
    }
}
