use crpsim::courier::*;
use crpsim::flaw::{count_matches, sample_scenarios};
use crpsim::geom::{distance, path_region_profile, CrossingKind, Region};
use crpsim::lang::parse_plan;
use crpsim::projector::*;
use crpsim::rules::{RuleSet, Timeline};
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/courier")
}

fn read(name: &str) -> String {
    std::fs::read_to_string(data_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn beliefs(p: f64, q: f64) -> String {
    let mut b = Beliefs::default();
    b.variables.insert("open-A-113".into(), Beliefs::door(p));
    b.variables.insert(
        "color-letter-2".into(),
        BTreeMap::from([("yellow".to_string(), q), ("white".to_string(), 1.0 - q)]),
    );
    serde_json::to_string_pretty(&b).unwrap() + "\n"
}

fn revision() -> RevisionRule {
    RevisionRule::AddOrdering {
        before: "deliver-a-120".into(),
        after: "pickup-a-111".into(),
    }
}

fn generated() -> Vec<(&'static str, String)> {
    let world = build_fixture_world();
    let initial = heuristic_schedule(&fixture_requests(), world.start, &world).unwrap();
    let revised = apply_revision_rule(&initial, &world, &revision()).unwrap();
    vec![
        ("world.json", world.to_json() + "\n"),
        ("initial.plan", plan_source(&initial, &world)),
        ("revised.plan", plan_source(&revised, &world)),
        ("beliefs-half.json", beliefs(0.5, 0.5)),
        ("beliefs-certain-flaw.json", beliefs(1.0, 1.0)),
        ("beliefs-impossible-flaw.json", beliefs(1.0, 0.0)),
        ("beliefs-full-tour.json", beliefs(1.0, 0.0)),
    ]
}

/// The checked-in fixture files are generator output. Run with
/// CRPSIM_BLESS=1 to rewrite them.
#[test]
fn data_files_match_generator() {
    let bless = std::env::var_os("CRPSIM_BLESS").is_some();
    for (name, body) in generated() {
        let path = data_dir().join(name);
        if bless {
            std::fs::create_dir_all(data_dir()).unwrap();
            std::fs::write(&path, &body).unwrap();
        }
        assert_eq!(read(name), body, "{name} is stale");
    }
    RuleSet::from_json(&read("rules.json")).unwrap();
}

struct Fixture {
    world: World,
    rules: RuleSet,
}

fn fixture() -> Fixture {
    Fixture {
        world: World::from_json(&read("world.json")).unwrap(),
        rules: RuleSet::from_json(&read("rules.json")).unwrap(),
    }
}

fn run(plan: &str, beliefs: &str, n: u64, seed: u64) -> Vec<Timeline> {
    let f = fixture();
    let plan = parse_plan(&read(plan)).unwrap();
    let b = Beliefs::from_json(&read(beliefs)).unwrap();
    sample_scenarios(
        &plan,
        &f.world,
        &b,
        &f.rules,
        &ProjectorConfig::default(),
        n,
        seed,
    )
    .into_iter()
    .map(|s| match s.result {
        Ok(p) => p.timeline,
        Err(e) => panic!("scenario {}: {e}", s.index),
    })
    .collect()
}

fn flaw_count(tls: &[Timeline]) -> usize {
    let f = fixture();
    count_matches(tls, &f.rules.flaw("two-same-color").unwrap().matcher)
}

#[test]
fn initial_plan_flaw_frequency_is_pq() {
    let n = 1000;
    let tls = run("initial.plan", "beliefs-half.json", n, 2024);
    let freq = flaw_count(&tls) as f64 / n as f64;
    let sigma = (0.25f64 * 0.75 / n as f64).sqrt();
    assert!((freq - 0.25).abs() <= 3.0 * sigma, "flaw frequency {freq}");

    let mut cats: BTreeMap<Category, usize> = BTreeMap::new();
    for tl in &tls {
        *cats.entry(classify(tl, "letter-2")).or_default() += 1;
    }
    assert_eq!(cats.get(&Category::Residue), None, "{cats:?}");
    assert_eq!(
        cats.get(&Category::OpportunityFailure)
            .copied()
            .unwrap_or(0),
        flaw_count(&tls)
    );
}

#[test]
fn revised_plan_has_no_flaw() {
    let tls = run("revised.plan", "beliefs-half.json", 1000, 2024);
    assert_eq!(flaw_count(&tls), 0);
    assert!(tls
        .iter()
        .all(|t| classify(t, "letter-2") != Category::Residue));
}

#[test]
fn certain_and_impossible_fixtures() {
    assert_eq!(
        flaw_count(&run("initial.plan", "beliefs-certain-flaw.json", 3, 1)),
        3
    );
    let tls = run("initial.plan", "beliefs-impossible-flaw.json", 3, 1);
    assert_eq!(flaw_count(&tls), 0);
    assert!(tls
        .iter()
        .all(|t| classify(t, "letter-2") == Category::OpportunitySuccess));
}

#[test]
fn full_tour_scale() {
    let tls = run("initial.plan", "beliefs-full-tour.json", 1, 7);
    let tl = &tls[0];
    assert!((210..=390).contains(&tl.len()), "{} events", tl.len());
}

#[test]
fn revision_rules() {
    let world = build_fixture_world();
    let tour = heuristic_schedule(&fixture_requests(), world.start, &world).unwrap();
    let once = apply_revision_rule(&tour, &world, &revision()).unwrap();
    let back = RevisionRule::AddOrdering {
        before: "pickup-a-111".into(),
        after: "deliver-a-120".into(),
    };
    assert!(matches!(
        apply_revision_rule(&once, &world, &back),
        Err(RevisionError::CycleIntroduced(..))
    ));
    let bad = RevisionRule::AddOrdering {
        before: "nowhere".into(),
        after: "pickup-a-111".into(),
    };
    assert!(matches!(
        apply_revision_rule(&tour, &world, &bad),
        Err(RevisionError::UnknownStep(_))
    ));

    let dropped = apply_revision_rule(
        &tour,
        &world,
        &RevisionRule::DropOpportunity {
            door: "A-113".into(),
        },
    )
    .unwrap();
    assert!(dropped.opportunity.is_none());
    assert!(dropped.requests.iter().all(|r| r.object != "letter-2"));
    let keys: Vec<&str> = dropped.main.iter().map(|s| s.key.as_str()).collect();
    assert_eq!(keys, ["pickup-a-111", "deliver-a-117"]);
    assert!(matches!(
        apply_revision_rule(
            &dropped,
            &world,
            &RevisionRule::DropOpportunity {
                door: "A-113".into()
            }
        ),
        Err(RevisionError::NoOpportunity(_))
    ));
}

fn tour_length(world: &World, order: &[TourStep]) -> f64 {
    let mut at = world.start;
    let mut len = 0.0;
    for s in order {
        let p = world.path_to(at, &s.location, &BTreeSet::new()).unwrap();
        len += p.length();
        at = world.location(&s.location).unwrap().at;
    }
    len
}

#[test]
fn heuristic_order_is_sane() {
    let mut world = build_fixture_world();
    for d in &mut world.doors {
        d.open_probability = 1.0;
    }
    let tour = heuristic_schedule(&fixture_requests(), world.start, &world).unwrap();
    assert!(tour.opportunity.is_none());
    let pos = |k: &str| tour.main.iter().position(|s| s.key == k).unwrap();
    assert!(pos("pickup-a-111") < pos("deliver-a-117"));
    assert!(pos("pickup-a-113") < pos("deliver-a-120"));

    // compare against every order that respects pickup before put-down
    let steps = tour.main.clone();
    let mut best = f64::INFINITY;
    let mut idx: Vec<usize> = (0..steps.len()).collect();
    permute(&mut idx, 0, &mut |p| {
        let order: Vec<TourStep> = p.iter().map(|&i| steps[i].clone()).collect();
        let ok = order.iter().enumerate().all(|(i, s)| {
            s.kind == StepKind::PickUp
                || order[..i]
                    .iter()
                    .any(|e| e.object == s.object && e.kind == StepKind::PickUp)
        });
        if ok {
            best = best.min(tour_length(&world, &order));
        }
    });
    assert!(tour_length(&world, &tour.main) <= 2.0 * best);

    let single = heuristic_schedule(&fixture_requests()[..1], world.start, &world).unwrap();
    let keys: Vec<&str> = single.main.iter().map(|s| s.key.as_str()).collect();
    assert_eq!(keys, ["pickup-a-111", "deliver-a-117"]);
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

#[test]
fn closed_door_request_is_opportunistic() {
    let world = build_fixture_world();
    let tour = heuristic_schedule(&fixture_requests(), world.start, &world).unwrap();
    let o = tour.opportunity.as_ref().unwrap();
    assert_eq!(o.door, "A-113");
    assert!(plan_source(&tour, &world).contains("(wait-for open-a-113?)"));
}

#[test]
fn fixture_world_geometry() {
    let world = build_fixture_world();
    world.validate().unwrap();
    // the drop-off region of room A-120 below the hallway
    let room = world.room("A-120").unwrap();
    assert_eq!((room.xmin, room.xmax, room.ymax), (860.0, 1265.0, 817.0));
    assert_eq!(room.region(), Region::rect(860.0, 1265.0, room.ymin, 817.0));

    let from = world.location("A-117-desk").unwrap().at;
    let path = world.path_to(from, "A-111-desk", &BTreeSet::new()).unwrap();
    let disks = world
        .doors
        .iter()
        .filter(|d| {
            let r = Region::disk(d.center, d.radius);
            path_region_profile(&path, &r)
                .1
                .iter()
                .any(|c| c.kind == CrossingKind::Enter)
                || distance(path.start(), d.center) <= d.radius
        })
        .count();
    assert_eq!(disks, 2);
}
