use std::path::PathBuf;
use std::process::{Command, Output};

fn data(p: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data/courier")
        .join(p)
        .display()
        .to_string()
}

fn crpsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crpsim")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn inputs(beliefs: &str) -> Vec<String> {
    [
        "--plan",
        &data("initial.plan"),
        "--world",
        &data("world.json"),
        "--beliefs",
        &data(beliefs),
        "--rules",
        &data("rules.json"),
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn with<'a>(head: &[&'a str], rest: &'a [String]) -> Vec<&'a str> {
    head.iter().copied().chain(rest.iter().map(String::as_str)).collect()
}

#[test]
fn project_writes_timeline_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.jsonl").display().to_string();
    let args = inputs("beliefs-full-tour.json");
    let o = crpsim(&with(&["project", "--seed", "7", "--out", &out], &args));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    let events = summary["events"].as_u64().unwrap();
    assert!((210..=390).contains(&events), "{events}");
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count() as u64, events);
}

#[test]
fn missing_world_names_the_path() {
    let o = crpsim(&["project", "--plan", &data("initial.plan"), "--world", "/nonexistent/world.json"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/world.json"));
}

#[test]
fn horizon_exceeded_is_a_projection_error() {
    let args = inputs("beliefs-full-tour.json");
    let o = crpsim(&with(&["project", "--horizon", "5"], &args));
    assert_eq!(code(&o), 2);
}

#[test]
fn detect_exit_codes() {
    let args = inputs("beliefs-certain-flaw.json");
    let o = crpsim(&with(&["detect", "--flaw", "two-same-color", "--n", "3", "--k", "2", "--theta", "0.5"], &args));
    assert_eq!(code(&o), 3);
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["count"], 3);
    assert_eq!(r["decision"], true);
    assert!((r["analytic_power_at_theta"].as_f64().unwrap() - 0.5).abs() < 1e-12);

    let args = inputs("beliefs-impossible-flaw.json");
    let o = crpsim(&with(&["detect", "--flaw", "two-same-color", "--n", "3", "--k", "2"], &args));
    assert_eq!(code(&o), 0);
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["count"], 0);

    let o = crpsim(&with(&["detect", "--flaw", "no-such-flaw"], &args));
    assert_eq!(code(&o), 1);
}

#[test]
fn sample_lines_per_scenario() {
    let args = inputs("beliefs-half.json");
    let o = crpsim(&with(&["sample", "--n", "8", "--seed", "3"], &args));
    assert_eq!(code(&o), 0);
    let lines: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 8);
    for (i, l) in lines.iter().enumerate() {
        assert_eq!(l["scenario"], i as u64);
        assert_ne!(l["category"], "residue");
    }
}

#[test]
fn tables() {
    let o = crpsim(&["tables", "fig17"]);
    assert_eq!(code(&o), 0);
    let t = stdout(&o);
    let row3 = t.lines().find(|l| l.starts_with("DET(f,3,2)")).unwrap();
    assert!(row3.contains("78.4") && row3.contains("50.0"));
    let row5 = t.lines().find(|l| l.starts_with("DET(f,5,2)")).unwrap();
    assert!(row5.ends_with("100.0"));
    assert!(t.contains("DET(f,5,2) at 90%: 100.0 vs 99.9"));

    let o = crpsim(&["tables", "fig18"]);
    let t = stdout(&o);
    let row = t.lines().find(|l| l.starts_with("1%")).unwrap();
    assert!(row.contains("/ 121"), "{row}");
}

fn glyphs(svg: &str) -> usize {
    svg.matches("class=\"glyph ").count()
}

#[test]
fn plot_has_one_glyph_per_qualifying_event() {
    let dir = tempfile::tempdir().unwrap();
    let tl = dir.path().join("t.jsonl").display().to_string();
    let svg = dir.path().join("t.svg").display().to_string();
    let args = inputs("beliefs-full-tour.json");
    assert_eq!(code(&crpsim(&with(&["project", "--seed", "7", "--out", &tl], &args))), 0);
    let o = crpsim(&["plot", "--timeline", &tl, "--world", &data("world.json"), "--out", &svg]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&svg).unwrap();

    let qualifying = std::fs::read_to_string(&tl)
        .unwrap()
        .lines()
        .filter(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            let e = v["event"].as_str().unwrap();
            e.starts_with("nav-event(set-travel-mode(")
                || e.starts_with("passive-sensor-update(passing-door")
                || e.starts_with("enter(")
                || e.starts_with("leave(")
                || ["begin(", "end(", "abort(", "fail("]
                    .iter()
                    .any(|p| e.starts_with(&format!("{p}go-to(")) || e.starts_with(&format!("{p}low-level-nav-plan(")))
        })
        .count();
    assert!(qualifying > 0);
    assert_eq!(glyphs(&text), qualifying);
    assert!(text.contains("class=\"path\""));

    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let o = crpsim(&["plot", "--timeline", &empty.display().to_string(), "--world", &data("world.json"), "--out", &svg]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(glyphs(&text), 0);
    assert!(!text.contains("class=\"path\""));
    assert!(text.contains("class=\"outline\""));

    std::fs::write(&empty, "not json\n").unwrap();
    let o = crpsim(&["plot", "--timeline", &empty.display().to_string(), "--world", &data("world.json"), "--out", &svg]);
    assert_eq!(code(&o), 1);
}

#[test]
fn validate() {
    let o = crpsim(&[
        "validate",
        "--plan",
        &data("revised.plan"),
        "--world",
        &data("world.json"),
        "--beliefs",
        &data("beliefs-half.json"),
        "--rules",
        &data("rules.json"),
    ]);
    assert_eq!(code(&o), 0);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.plan");
    std::fs::write(&bad, "(seq (go-to").unwrap();
    assert_eq!(code(&crpsim(&["validate", "--plan", &bad.display().to_string()])), 1);
    assert_eq!(code(&crpsim(&["validate"])), 1);
}
