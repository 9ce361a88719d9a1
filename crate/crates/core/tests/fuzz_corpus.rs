//! Replays the checked-in fuzz seeds through the same checks the fuzz
//! targets make, so the seeds stay valid inputs.

use crpsim::lang::{parse_plan, print_plan};
use crpsim::projector::{Beliefs, World};
use crpsim::rules::{parse_timeline_jsonl, RuleSet};
use crpsim::term::parse_term;
use std::path::PathBuf;

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, String)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.display().to_string(), std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn plan_seeds_round_trip() {
    for (name, s) in seeds("parse_plan") {
        let p = parse_plan(&s).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(parse_plan(&print_plan(&p)).unwrap(), p, "{name}");
    }
}

#[test]
fn term_seeds_round_trip() {
    for (name, s) in seeds("parse_term") {
        let t = parse_term(&s).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(parse_term(&t.to_string()).unwrap(), t, "{name}");
    }
}

#[test]
fn json_seeds_parse() {
    for (name, s) in seeds("parse_world") {
        World::from_json(&s).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, s) in seeds("parse_rules") {
        RuleSet::from_json(&s).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, s) in seeds("parse_beliefs") {
        Beliefs::from_json(&s).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, s) in seeds("parse_timeline") {
        assert!(!parse_timeline_jsonl(&s).unwrap_or_else(|e| panic!("{name}: {e}")).is_empty());
    }
}

fn mutate(seed: &str, edits: &[(usize, u8, u8)]) -> String {
    let mut b = seed.as_bytes().to_vec();
    for &(pos, op, byte) in edits {
        let i = if b.is_empty() { 0 } else { pos % (b.len() + 1) };
        match op % 3 {
            0 => b.insert(i, b"()?:- \"{}[],0.e"[byte as usize % 15]),
            1 if i < b.len() => {
                b.remove(i);
            }
            _ => b.truncate(i),
        }
    }
    String::from_utf8_lossy(&b).into_owned()
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(400))]

    // stable-toolchain stand-in for the fuzz targets: mutated seeds must
    // not panic any parser, and accepted plans and terms must round-trip
    #[test]
    fn mutated_seeds_do_not_panic(which in 0usize..64, edits in proptest::collection::vec((0usize..4000, 0u8..3, 0u8..255), 1..6)) {
        let targets = ["parse_plan", "parse_term", "parse_world", "parse_rules", "parse_beliefs", "parse_timeline"];
        let target = targets[which % targets.len()];
        let all = seeds(target);
        let (_, seed) = &all[which % all.len()];
        let s = mutate(seed, &edits);
        match target {
            "parse_plan" => {
                if let Ok(p) = parse_plan(&s) {
                    proptest::prop_assert_eq!(parse_plan(&print_plan(&p)).unwrap(), p);
                }
            }
            "parse_term" => {
                if let Ok(t) = parse_term(&s) {
                    proptest::prop_assert_eq!(parse_term(&t.to_string()).unwrap(), t);
                }
            }
            "parse_world" => drop(World::from_json(&s)),
            "parse_rules" => drop(RuleSet::from_json(&s)),
            "parse_beliefs" => drop(Beliefs::from_json(&s)),
            _ => drop(parse_timeline_jsonl(&s)),
        }
    }
}
