//! Endogenous event schedules: where along a navigation path the robot
//! changes travel mode, crosses trigger regions and passes waypoints.

use super::world::{mode_at, ModeRegion, Speeds};
use crate::geom::{
    distance, path_region_profile, point_in_region, CrossingKind, Point, Polyline, Region,
};
use crate::lang::TravelMode;
use crate::term::Term;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Cut points closer than this along the path are merged into one entry.
pub const MERGE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TriggerRegion {
    pub fluent: String,
    pub region: Region,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    /// Delay after the previous entry.
    pub dt: f64,
    /// Arclength along the scheduled path.
    pub s: f64,
    pub vals: Point,
    pub events: Vec<Term>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EndogenousEventSchedule {
    pub entries: Vec<ScheduleEntry>,
}

impl EndogenousEventSchedule {
    /// Entry dates relative to the schedule start.
    pub fn times(&self) -> Vec<f64> {
        let mut t = 0.0;
        self.entries
            .iter()
            .map(|e| {
                t += e.dt;
                t
            })
            .collect()
    }

    pub fn duration(&self) -> f64 {
        self.entries.iter().map(|e| e.dt).sum()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScheduleError {
    #[error("travel mode {0} has no positive speed")]
    ZeroSpeedMode(TravelMode),
}

fn sym(s: &str) -> Term {
    Term::sym(s)
}

pub fn set_travel_mode(m: TravelMode) -> Term {
    Term::app(
        "nav-event",
        vec![Term::app("set-travel-mode", vec![sym(m.name())])],
    )
}

fn rank(t: &Term) -> u8 {
    match t.functor() {
        "leave" => 0,
        "enter" => 1,
        "nav-event"
            if t.args()
                .first()
                .is_some_and(|a| a.functor() == "set-travel-mode") =>
        {
            2
        }
        "possible-bump" => 3,
        "passive-sensor-update" => 4,
        _ => 5,
    }
}

/// Canonical order of co-located events.
pub fn sort_events(v: &mut [Term]) {
    v.sort_by(|a, b| rank(a).cmp(&rank(b)).then_with(|| a.cmp(b)));
}

fn kind_sym(k: CrossingKind) -> Term {
    sym(match k {
        CrossingKind::Enter => "enter",
        CrossingKind::Exit => "exit",
    })
}

/// Follow `path` and collect every mode-region crossing (enter/leave plus a
/// set-travel-mode event where the prevailing mode changes), every trigger
/// crossing (passive sensor update), the first entry into each obstacle
/// (possible bump) and every vertex. Co-located events share one entry.
pub fn schedule_endogenous_events(
    path: &Polyline,
    modes: &[ModeRegion],
    triggers: &[TriggerRegion],
    obstacles: &[(String, Region)],
    speeds: &Speeds,
) -> Result<EndogenousEventSchedule, ScheduleError> {
    for m in TravelMode::ALL {
        if !(speeds.of(m) > 0.0) {
            return Err(ScheduleError::ZeroSpeedMode(m));
        }
    }
    let mut cuts: Vec<(f64, Term)> = Vec::new();
    for m in modes {
        for c in path_region_profile(path, &m.region).1 {
            let f = match c.kind {
                CrossingKind::Enter => "enter",
                CrossingKind::Exit => "leave",
            };
            cuts.push((c.arclength, Term::app(f, vec![sym(&m.id)])));
        }
    }
    for t in triggers {
        for c in path_region_profile(path, &t.region).1 {
            cuts.push((
                c.arclength,
                Term::app(
                    "passive-sensor-update",
                    vec![sym(&t.fluent), kind_sym(c.kind)],
                ),
            ));
        }
    }
    for (id, r) in obstacles {
        let first = path_region_profile(path, r)
            .1
            .into_iter()
            .find(|c| c.kind == CrossingKind::Enter);
        if let Some(c) = first {
            cuts.push((c.arclength, Term::app("possible-bump", vec![sym(id)])));
        }
    }
    let arcs = path.vertex_arclengths();
    let last = arcs.len() - 1;
    for (i, s) in arcs.iter().enumerate().skip(1) {
        let e = if i == last {
            Term::app("nav-event", vec![sym("arrive")])
        } else {
            Term::app(
                "nav-event",
                vec![Term::app("waypoint", vec![Term::num(i as f64)])],
            )
        };
        cuts.push((*s, e));
    }
    cuts.sort_by(|a, b| a.0.total_cmp(&b.0));

    // group co-located cuts
    let mut groups: Vec<(f64, Vec<Term>)> = Vec::new();
    for (s, e) in cuts {
        match groups.last_mut() {
            Some(g) if s - g.0 <= MERGE_EPS => g.1.push(e),
            _ => groups.push((s, vec![e])),
        }
    }
    let total = path.length();
    let mode_between = |a: f64, b: f64| mode_at(modes, path.point_at(0.5 * (a + b)));

    let mut entries = Vec::with_capacity(groups.len() + 1);
    let first_end = groups.first().map_or(total, |g| g.0);
    entries.push(ScheduleEntry {
        dt: 0.0,
        s: 0.0,
        vals: path.start(),
        events: vec![set_travel_mode(mode_between(
            0.0,
            first_end.max(MERGE_EPS.min(total)),
        ))],
    });
    let mut prev_s = 0.0;
    for (s, mut events) in groups {
        let s = s.clamp(0.0, total);
        if s <= MERGE_EPS {
            // crossings at the very start belong to the start entry
            entries[0].events.append(&mut events);
            continue;
        }
        let dt = (s - prev_s) / speeds.of(mode_between(prev_s, s));
        prev_s = s;
        entries.push(ScheduleEntry {
            dt,
            s,
            vals: path.point_at(s),
            events,
        });
    }
    // travel-mode changes: compare the prevailing mode on both sides
    let n = entries.len();
    for i in 1..n.saturating_sub(1) {
        let before = mode_between(entries[i - 1].s, entries[i].s);
        let after = mode_between(entries[i].s, entries[i + 1].s);
        if after != before {
            entries[i].events.push(set_travel_mode(after));
        }
    }
    for e in &mut entries {
        sort_events(&mut e.events);
    }
    Ok(EndogenousEventSchedule { entries })
}

/// One event of a fixed-step simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent {
    pub t: f64,
    pub pos: Point,
    pub event: Term,
}

/// Brute-force oracle: advance along the path in steps of `h` seconds at
/// the speed of the mode at the current point and report each membership
/// change at the end of the step that reveals it.
pub fn fixed_step_events(
    path: &Polyline,
    modes: &[ModeRegion],
    triggers: &[TriggerRegion],
    obstacles: &[(String, Region)],
    speeds: &Speeds,
    h: f64,
) -> Vec<SimEvent> {
    let total = path.length();
    let arcs = path.vertex_arclengths().to_vec();
    let p0 = path.start();
    let near = |s: f64| path.point_at((s + 1e-9).min(total));
    let mut in_mode: Vec<bool> = modes
        .iter()
        .map(|m| point_in_region(near(0.0), &m.region))
        .collect();
    let mut in_trig: Vec<bool> = triggers
        .iter()
        .map(|t| point_in_region(near(0.0), &t.region))
        .collect();
    // a start inside an obstacle is not an encounter; the first entry is
    let mut in_ob: Vec<bool> = obstacles
        .iter()
        .map(|(_, r)| point_in_region(near(0.0), r))
        .collect();
    let mut bumped = vec![false; obstacles.len()];
    let mut mode = mode_at(modes, near(0.0));
    let mut out = vec![SimEvent {
        t: 0.0,
        pos: p0,
        event: set_travel_mode(mode),
    }];
    let mut next_vertex = 1;
    let (mut s, mut t) = (0.0f64, 0.0f64);
    while s < total {
        let v = speeds.of(mode_at(modes, near(s)));
        s = (s + v * h).min(total);
        t += h;
        let p = path.point_at(s);
        let probe = if s < total {
            p
        } else {
            path.point_at(total - 1e-9)
        };
        let mut evs = Vec::new();
        for (i, m) in modes.iter().enumerate() {
            let now = point_in_region(probe, &m.region);
            if now != in_mode[i] {
                let f = if now { "enter" } else { "leave" };
                evs.push(Term::app(f, vec![sym(&m.id)]));
                in_mode[i] = now;
            }
        }
        for (i, tr) in triggers.iter().enumerate() {
            let now = point_in_region(probe, &tr.region);
            if now != in_trig[i] {
                let k = if now {
                    CrossingKind::Enter
                } else {
                    CrossingKind::Exit
                };
                evs.push(Term::app(
                    "passive-sensor-update",
                    vec![sym(&tr.fluent), kind_sym(k)],
                ));
                in_trig[i] = now;
            }
        }
        for (i, (id, r)) in obstacles.iter().enumerate() {
            let now = point_in_region(probe, r);
            if now && !in_ob[i] && !bumped[i] {
                evs.push(Term::app("possible-bump", vec![sym(id)]));
                bumped[i] = true;
            }
            in_ob[i] = now;
        }
        let m = mode_at(modes, probe);
        if m != mode && s < total {
            evs.push(set_travel_mode(m));
        }
        mode = m;
        while next_vertex < arcs.len() && arcs[next_vertex] <= s + 1e-12 {
            let e = if next_vertex == arcs.len() - 1 {
                Term::app("nav-event", vec![sym("arrive")])
            } else {
                Term::app(
                    "nav-event",
                    vec![Term::app("waypoint", vec![Term::num(next_vertex as f64)])],
                )
            };
            evs.push(e);
            next_vertex += 1;
        }
        sort_events(&mut evs);
        out.extend(evs.into_iter().map(|event| SimEvent { t, pos: p, event }));
    }
    out
}

/// Flatten a schedule into dated events.
pub fn schedule_events(s: &EndogenousEventSchedule) -> Vec<SimEvent> {
    s.times()
        .into_iter()
        .zip(&s.entries)
        .flat_map(|(t, e)| {
            e.events.iter().map(move |ev| SimEvent {
                t,
                pos: e.vals,
                event: ev.clone(),
            })
        })
        .collect()
}

/// Pair the two event lists in order, allowing events closer than `dt_tol`
/// to appear in either order. Returns the worst time and position errors,
/// or a description of the first disagreement.
pub fn compare_event_lists(
    exact: &[SimEvent],
    oracle: &[SimEvent],
    dt_tol: f64,
) -> Result<(f64, f64), String> {
    if exact.len() != oracle.len() {
        return Err(format!(
            "{} scheduled events vs {} simulated",
            exact.len(),
            oracle.len()
        ));
    }
    let mut used = vec![false; oracle.len()];
    let (mut wt, mut wp) = (0.0f64, 0.0f64);
    for (i, e) in exact.iter().enumerate() {
        let lo = i.saturating_sub(8);
        let hi = (i + 9).min(oracle.len());
        let j = (lo..hi)
            .filter(|&j| {
                !used[j] && oracle[j].event == e.event && (oracle[j].t - e.t).abs() <= dt_tol
            })
            .min_by(|&a, &b| {
                (oracle[a].t - e.t)
                    .abs()
                    .total_cmp(&(oracle[b].t - e.t).abs())
            })
            .ok_or_else(|| format!("no simulated match for {} at t={:.4}", e.event, e.t))?;
        used[j] = true;
        wt = wt.max((oracle[j].t - e.t).abs());
        wp = wp.max(distance(oracle[j].pos, e.pos));
    }
    Ok((wt, wp))
}

/// A random path with random mode, trigger and obstacle regions, for
/// checking schedules against the fixed-step oracle.
#[derive(Debug, Clone)]
pub struct OracleFixture {
    pub path: Polyline,
    pub modes: Vec<ModeRegion>,
    pub triggers: Vec<TriggerRegion>,
    pub obstacles: Vec<(String, Region)>,
}

fn random_region<R: Rng + ?Sized>(r: &mut R) -> Region {
    if r.random_bool(0.5) {
        let (x, y) = (r.random_range(0.0..800.0), r.random_range(0.0..800.0));
        Region::rect(
            x,
            x + r.random_range(50.0..300.0),
            y,
            y + r.random_range(50.0..300.0),
        )
    } else {
        let c = Point::new(r.random_range(100.0..900.0), r.random_range(100.0..900.0));
        Region::disk(c, r.random_range(30.0..200.0))
    }
}

pub fn random_oracle_fixture<R: Rng + ?Sized>(r: &mut R) -> OracleFixture {
    let n = r.random_range(2..6);
    let pts: Vec<Point> = (0..n)
        .map(|_| Point::new(r.random_range(0.0..1000.0), r.random_range(0.0..1000.0)))
        .collect();
    let modes = (0..r.random_range(1..4))
        .map(|k| ModeRegion {
            id: format!("m{k}"),
            region: random_region(r),
            mode: if r.random_bool(0.5) {
                TravelMode::Doorway
            } else {
                TravelMode::Hallway
            },
        })
        .collect();
    let triggers = (0..r.random_range(0..3))
        .map(|k| TriggerRegion {
            fluent: format!("f{k}?"),
            region: random_region(r),
        })
        .collect();
    let obstacles = (0..r.random_range(0..2))
        .map(|k| (format!("ob{k}"), random_region(r)))
        .collect();
    OracleFixture {
        path: Polyline::new(pts).expect("random vertices are distinct"),
        modes,
        triggers,
        obstacles,
    }
}

/// Schedule the fixture and compare with the fixed-step oracle at step
/// `h`; returns the worst time and position errors.
pub fn check_against_oracle(
    f: &OracleFixture,
    speeds: &Speeds,
    h: f64,
    dt_tol: f64,
) -> Result<(f64, f64), String> {
    let s = schedule_endogenous_events(&f.path, &f.modes, &f.triggers, &f.obstacles, speeds)
        .map_err(|e| e.to_string())?;
    let oracle = fixed_step_events(&f.path, &f.modes, &f.triggers, &f.obstacles, speeds, h);
    compare_event_lists(&schedule_events(&s), &oracle, dt_tol)
}
