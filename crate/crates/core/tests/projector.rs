use crpsim::courier::build_fixture_world;
use crpsim::geom::{Point, Polyline, Region};
use crpsim::lang::{parse_condition, parse_plan, TravelMode};
use crpsim::projector::sensing::{apply_sensing_model, SeenObject, SensingAction, SensingWorld};
use crpsim::projector::world::{ModeRegion, Obstacle, SensorModel, Speeds};
use crpsim::projector::*;
use crpsim::rng::stream;
use crpsim::rules::{RuleSet, Timeline};
use crpsim::term::Term;

#[test]
fn schedule_matches_fixed_step_oracle() {
    let speeds = Speeds::default();
    let mut worst = (0.0f64, 0.0f64);
    for i in 0..100 {
        let f = random_oracle_fixture(&mut stream(606, i));
        let (dt, dp) = check_against_oracle(&f, &speeds, 1e-3, 0.010)
            .unwrap_or_else(|e| panic!("fixture {i}: {e}"));
        worst = (worst.0.max(dt), worst.1.max(dp));
    }
    assert!(worst.0 <= 0.010 && worst.1 <= 1.0, "{worst:?}");
}

fn band(id: &str, y0: f64, y1: f64, mode: TravelMode) -> ModeRegion {
    ModeRegion {
        id: id.into(),
        region: Region::rect(-1e4, 1e4, y0, y1),
        mode,
    }
}

fn modes_of(s: &EndogenousEventSchedule) -> Vec<String> {
    s.entries
        .iter()
        .flat_map(|e| &e.events)
        .filter(|e| e.functor() == "nav-event" && e.args()[0].functor() == "set-travel-mode")
        .map(|e| e.args()[0].args()[0].to_string())
        .collect()
}

#[test]
fn straight_path_through_bands() {
    let modes = vec![
        band("doorway", 400.0, 500.0, TravelMode::Doorway),
        band("hallway", 500.0, 900.0, TravelMode::Hallway),
    ];
    let path = Polyline::new(vec![Point::new(0.0, 0.0), Point::new(0.0, 800.0)]).unwrap();
    let s = schedule_endogenous_events(&path, &modes, &[], &[], &Speeds::default()).unwrap();
    assert_eq!(modes_of(&s), ["office", "doorway", "hallway"]);
    let times = s.times();
    assert!((times[1] - 400.0 / 30.0).abs() < 1e-9);
    assert!((times[2] - times[1] - 100.0 / 20.0).abs() < 1e-9);
    assert!((times[3] - times[2] - 300.0 / 80.0).abs() < 1e-9);
}

#[test]
fn pure_mode_path_has_only_vertices() {
    let modes = vec![band("hallway", -1e4, 1e4, TravelMode::Hallway)];
    let path = Polyline::new(vec![
        Point::new(0.0, 0.0),
        Point::new(100.0, 0.0),
        Point::new(100.0, 80.0),
    ])
    .unwrap();
    let s = schedule_endogenous_events(&path, &modes, &[], &[], &Speeds::default()).unwrap();
    assert_eq!(s.entries.len(), 3);
    assert_eq!(
        s.entries[1].events,
        vec![Term::app(
            "nav-event",
            vec![Term::app("waypoint", vec![Term::num(1.0)])]
        )]
    );
    assert_eq!(
        s.entries[2].events,
        vec![Term::app("nav-event", vec![Term::sym("arrive")])]
    );
    let zero = Speeds {
        hallway: 0.0,
        ..Speeds::default()
    };
    assert!(schedule_endogenous_events(&path, &modes, &[], &[], &zero).is_err());
}

#[test]
fn reschedule_is_idempotent() {
    let path = Polyline::new(vec![Point::new(0.0, 0.0), Point::new(1000.0, 0.0)]).unwrap();
    let mut net = parse_condition("(<= (dist robot-x robot-y 600 0) 50)").unwrap();
    net.output = "near?".into();
    let nav = NavPrimitiveState::new(
        0,
        "nav-1".into(),
        Term::sym("go"),
        path,
        vec![],
        vec![],
        Speeds::default(),
        &[],
        0.0,
    )
    .unwrap();
    let a = reschedule_on_new_trigger(&nav, &[net.clone()], 0.0).unwrap();
    assert!(a
        .schedule
        .entries
        .iter()
        .flat_map(|e| &e.events)
        .any(|e| e.functor() == "passive-sensor-update"));
    let b = reschedule_on_new_trigger(&a, &[net], 0.0).unwrap();
    assert_eq!(a.remaining(), b.remaining());
    let c = reschedule_on_new_trigger(&a, &[], 0.0).unwrap();
    assert_eq!(a.remaining(), c.remaining());
}

fn project(
    src: &str,
    world: &World,
    seed: u64,
    cfg: &ProjectorConfig,
) -> Result<Projection, ProjectError> {
    let plan = parse_plan(src).unwrap();
    project_plan(
        &plan,
        world,
        &Beliefs::default(),
        &RuleSet::default(),
        cfg,
        &mut stream(seed, 0),
    )
}

fn events(tl: &Timeline) -> Vec<String> {
    tl.occurrences()
        .iter()
        .map(|o| o.event.to_string())
        .collect()
}

#[test]
fn blocked_plan_exceeds_horizon() {
    let world = build_fixture_world();
    let cfg = ProjectorConfig {
        horizon: 10.0,
        ..ProjectorConfig::default()
    };
    match project("(seq (wait-for (fluent never-true)))", &world, 1, &cfg) {
        Err(ProjectError::HorizonExceeded(p)) => assert_eq!(events(&p.timeline), ["start"]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn delivery_leg_mode_order() {
    let world = build_fixture_world();
    let p = project(
        "(seq (go-to A-117-desk) (go-to A-111-desk))",
        &world,
        1,
        &ProjectorConfig::default(),
    )
    .unwrap();
    assert!(p.finished);
    let modes: Vec<String> = events(&p.timeline)
        .into_iter()
        .filter_map(|e| {
            e.strip_prefix("nav-event(set-travel-mode(")
                .map(|m| m.trim_end_matches("))").to_string())
        })
        .collect();
    assert_eq!(
        modes,
        ["doorway", "office", "doorway", "hallway", "doorway", "office"]
    );
    let end = world.location("A-111-desk").unwrap().at;
    assert!((p.position.x - end.x).abs() < 1e-6 && (p.position.y - end.y).abs() < 1e-6);
    // entering and leaving a doorway come in pairs
    let ev = events(&p.timeline);
    let enters = ev.iter().filter(|e| e.starts_with("enter(")).count();
    let leaves = ev.iter().filter(|e| e.starts_with("leave(")).count();
    assert!(enters > 0 && enters == leaves);
}

#[test]
fn table_bump_depends_on_sonar() {
    let mut world = build_fixture_world();
    let door = world.door("A-111").unwrap().center;
    world.obstacles.push(Obstacle {
        id: "table".into(),
        region: Region::disk(door, 10.0),
    });
    let p = project("(go-to A-111-desk)", &world, 1, &ProjectorConfig::default()).unwrap();
    let ev = events(&p.timeline);
    assert!(ev.contains(&"bump(table)".to_string()), "{ev:?}");

    let mut world = build_fixture_world();
    let front = Point::new(door.x, 917.0);
    world.obstacles.push(Obstacle {
        id: "table".into(),
        region: Region::disk(front, 10.0),
    });
    let p = project("(go-to A-111-desk)", &world, 1, &ProjectorConfig::default()).unwrap();
    let ev = events(&p.timeline);
    assert!(ev.contains(&"path-blocked(table)".to_string()), "{ev:?}");
    assert!(
        ev.iter()
            .any(|e| e.starts_with("fail(") && e.contains("path-blocked")),
        "{ev:?}"
    );
}

#[test]
fn look_for_calibration() {
    let model = SensorModel {
        detection_probability: 0.8,
        false_positive_probability: 0.0,
        noise: 0.0,
        range: 100.0,
    };
    let w = SensingWorld {
        robot: Point::new(0.0, 0.0),
        objects: vec![SeenObject {
            id: "letter-1".into(),
            kind: "letter".into(),
            at: Point::new(10.0, 0.0),
            color: "yellow".into(),
        }],
        doors: vec![],
        colors: vec!["yellow".into(), "white".into()],
    };
    let act = SensingAction::LookFor {
        description: "letter".into(),
        camera: "camera".into(),
        look_time: 2.0,
    };
    let mut r = stream(8, 0);
    let n = 10_000;
    let hits = (0..n)
        .filter(|_| {
            let res = apply_sensing_model(&act, &w, &model, &mut r);
            res.value.as_ref().is_some_and(|v| !v.args().is_empty())
        })
        .count();
    assert!((hits as f64 / n as f64 - 0.8).abs() < 0.01, "{hits}");

    let sure = SensorModel {
        detection_probability: 1.0,
        ..model
    };
    let res = apply_sensing_model(&act, &w, &sure, &mut r);
    assert_eq!(res.value.unwrap().args().len(), 1);
    assert_eq!(res.events.len(), 2);
    assert_eq!(res.events[1].0 - res.events[0].0, 2.0);
}

#[test]
fn projection_is_reproducible() {
    let world = build_fixture_world();
    let src = "(par (go-to A-120-desk) (seq (wait-for (fluent never?)) (go-to A-117-desk)))";
    let cfg = ProjectorConfig {
        horizon: 300.0,
        ..ProjectorConfig::default()
    };
    let tl = |seed| match project(src, &world, seed, &cfg) {
        Ok(p) => p.timeline.to_jsonl(),
        Err(ProjectError::HorizonExceeded(p)) => p.timeline.to_jsonl(),
        Err(e) => panic!("{e}"),
    };
    assert_eq!(tl(3), tl(3));
}
