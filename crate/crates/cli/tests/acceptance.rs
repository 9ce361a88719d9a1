//! Acceptance harness: one PASS/FAIL line per criterion, with the measured
//! numbers. Exits nonzero if any criterion fails.

use crpsim::automaton::{replay, sample_successor, unfold, JumpCondition, JumpEdge, Successor, Trigger, UnfoldConfig};
use crpsim::courier::{classify, Category};
use crpsim::flaw::{self, count_matches, detection_probability, sample_scenarios};
use crpsim::geom::Point;
use crpsim::lang::parse_plan;
use crpsim::projector::world::Speeds;
use crpsim::projector::*;
use crpsim::reference::{choose_ref_parameters, convergence, jump_delay_rate, project_clock_tick, RefConfig};
use crpsim::rng::stream;
use crpsim::rules::{RuleSet, Timeline};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

fn core_data() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data")
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn ac1() -> Outcome {
    let m = flaw::detector_grid_mismatches();
    let cells: Vec<String> = m
        .iter()
        .map(|(n, p, c, published)| format!("DET({n},2)@{:.0}%: computed {c:.1} printed {published:.1}", p * 100.0))
        .collect();
    if cells.is_empty() {
        outcome(true, "15/15 cells match")
    } else {
        outcome(false, format!("{}/15 cells match; {}", 15 - cells.len(), cells.join("; ")))
    }
}

fn ac2() -> Outcome {
    let v: Vec<f64> = (3..=5).map(|n| detection_probability(n, 2, 0.05).unwrap()).collect();
    outcome(v.iter().all(|p| *p < 0.023), format!("n=3,4,5: {:.5} {:.5} {:.5}", v[0], v[1], v[2]))
}

fn ac3() -> Outcome {
    let (hits, n) = jump_delay_rate(0.05, 0.5, 10_000, 31).unwrap();
    let rate = hits as f64 / n as f64;
    // one-sided 99% binomial bound below 0.95
    let bound = 0.95 - 2.326 * (0.95f64 * 0.05 / n as f64).sqrt();
    outcome(rate >= bound, format!("{hits}/{n} = {rate:.4} (bound {bound:.4})"))
}

fn leave_office() -> (crpsim::lang::Plan, crpsim::automaton::HybridAutomaton) {
    let plan = parse_plan(&read(&core_data().join("plans/leave-office.plan"))).unwrap();
    let aut = unfold(&plan, Point::new(2400.0, 600.0), &UnfoldConfig::default()).unwrap();
    (plan, aut)
}

fn ac4() -> Outcome {
    let (plan, aut) = leave_office();
    let (tau, dt) = choose_ref_parameters(0.05, 0.5).unwrap();
    let cfg = RefConfig { dt, tau, horizon: 600.0 };
    let bad_eff = (0..10_000u64)
        .into_par_iter()
        .filter(|&i| replay(&plan, &aut, &project_automaton(&aut, 600.0, &mut stream(41, i))).is_err())
        .count();
    let bad_ref = (0..10_000u64)
        .into_par_iter()
        .filter(|&i| {
            let run = project_clock_tick(&aut, None, &cfg, false, &mut stream(42, i)).run;
            replay(&plan, &aut, &run).is_err()
        })
        .count();
    outcome(
        bad_eff + bad_ref == 0,
        format!("violations: efficient {bad_eff}/10000, reference {bad_ref}/10000"),
    )
}

fn ac5() -> Outcome {
    let (_, aut) = leave_office();
    let levels = convergence(&aut, 0.05, &[4.0, 2.0, 1.0, 0.5, 0.25], 10_000, 600.0, 51).unwrap();
    let tv: Vec<f64> = levels.iter().map(|l| l.tv).collect();
    let finest = *tv.last().unwrap();
    // count the trailing run of strictly decreasing levels
    let mut run = 1;
    for w in tv.windows(2).rev() {
        if w[1] < w[0] {
            run += 1;
        } else {
            break;
        }
    }
    let shown: Vec<String> = levels.iter().map(|l| format!("{}:{:.4}", l.delta, l.tv)).collect();
    outcome(
        finest < 0.05 && run >= 3,
        format!("TV by delta {}; decreasing over last {run} levels", shown.join(" ")),
    )
}

fn ac6() -> Outcome {
    let speeds = Speeds::default();
    let results: Vec<Result<(f64, f64), String>> = (0..100u64)
        .into_par_iter()
        .map(|i| check_against_oracle(&random_oracle_fixture(&mut stream(606, i)), &speeds, 1e-3, 0.010))
        .collect();
    let mut worst = (0.0f64, 0.0f64);
    let mut failed = Vec::new();
    for (i, r) in results.iter().enumerate() {
        match r {
            Ok((dt, dp)) => worst = (worst.0.max(*dt), worst.1.max(*dp)),
            Err(e) => failed.push(format!("#{i}: {e}")),
        }
    }
    let pass = failed.is_empty() && worst.0 <= 0.010 && worst.1 <= 1.0;
    outcome(
        pass,
        format!(
            "100 fixtures, worst {:.2} ms / {:.3} cm{}",
            worst.0 * 1e3,
            worst.1,
            if failed.is_empty() { String::new() } else { format!("; {}", failed.join("; ")) }
        ),
    )
}

fn ac7() -> Outcome {
    let e = JumpEdge {
        id: "e".into(),
        from: 0,
        label: "x".into(),
        condition: JumpCondition::Network { text: "x".into() },
        trigger: Trigger::Wait { thread: 0 },
        bits: 4,
        successors: vec![Successor { mode: 1, lo: 1, hi: 12 }, Successor { mode: 2, lo: 13, hi: 16 }],
    };
    let mut r = stream(71, 0);
    let n = 100_000;
    let first = (0..n).filter(|_| sample_successor(&e, &mut r) == 1).count() as f64 / n as f64;
    outcome(
        (first - 0.75).abs() <= 0.01,
        format!("{first:.4} / {:.4} over {n} draws", 1.0 - first),
    )
}

struct Courier {
    world: World,
    rules: RuleSet,
}

fn courier() -> Courier {
    let d = core_data().join("courier");
    Courier {
        world: World::from_json(&read(&d.join("world.json"))).unwrap(),
        rules: RuleSet::from_json(&read(&d.join("rules.json"))).unwrap(),
    }
}

fn courier_run(c: &Courier, plan: &str, beliefs: &str, n: u64, seed: u64) -> (Vec<Timeline>, usize) {
    let d = core_data().join("courier");
    let plan = parse_plan(&read(&d.join(plan))).unwrap();
    let b = Beliefs::from_json(&read(&d.join(beliefs))).unwrap();
    let s = sample_scenarios(&plan, &c.world, &b, &c.rules, &ProjectorConfig::default(), n, seed);
    let errors = s.iter().filter(|s| s.result.is_err()).count();
    (s.iter().filter_map(|s| s.timeline().cloned()).collect(), errors)
}

fn ac8() -> Outcome {
    let c = courier();
    let m = &c.rules.flaw("two-same-color").unwrap().matcher;
    let n = 1000;
    let (init, e1) = courier_run(&c, "initial.plan", "beliefs-half.json", n, 81);
    let (rev, e2) = courier_run(&c, "revised.plan", "beliefs-half.json", n, 82);
    let f_init = count_matches(&init, m) as f64 / n as f64;
    let f_rev = count_matches(&rev, m) as f64 / n as f64;
    let sigma = (0.25f64 * 0.75 / n as f64).sqrt();
    let mut counts = [0usize; 4];
    for tl in init.iter().chain(&rev) {
        counts[classify(tl, "letter-2") as usize] += 1;
    }
    let pass = e1 + e2 == 0
        && (f_init - 0.25).abs() <= 3.0 * sigma
        && f_rev == 0.0
        && counts[Category::Residue as usize] == 0;
    outcome(
        pass,
        format!(
            "initial {f_init:.3} (0.25 +- {:.3}), revised {f_rev:.3}; categories closed/failure/success/residue {}/{}/{}/{}; errors {}",
            3.0 * sigma,
            counts[0],
            counts[1],
            counts[2],
            counts[3],
            e1 + e2
        ),
    )
}

fn ac9() -> Outcome {
    let c = courier();
    let d = core_data().join("courier");
    let plan = parse_plan(&read(&d.join("initial.plan"))).unwrap();
    let b = Beliefs::from_json(&read(&d.join("beliefs-full-tour.json"))).unwrap();
    let t0 = Instant::now();
    let p = project_plan(&plan, &c.world, &b, &c.rules, &ProjectorConfig::default(), &mut stream(7, 0));
    let el = t0.elapsed();
    match p {
        Ok(p) => {
            let ev = p.timeline.len();
            let pass = (210..=390).contains(&ev) && (14.7..=27.3).contains(&(p.reschedules as f64)) && el.as_secs_f64() < 10.0;
            outcome(pass, format!("{ev} events, {} reschedules, {:.3} s", p.reschedules, el.as_secs_f64()))
        }
        Err(e) => outcome(false, format!("projection failed: {e}")),
    }
}

fn crpsim(args: &[&str]) -> (i32, Vec<u8>) {
    let o = Command::new(env!("CARGO_BIN_EXE_crpsim")).args(args).output().expect("run crpsim");
    (o.status.code().unwrap_or(-1), o.stdout)
}

fn ac10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = core_data().join("courier");
    let s = |p: &str| d.join(p).display().to_string();
    let (plan, world, rules) = (s("initial.plan"), s("world.json"), s("rules.json"));
    let beliefs = s("beliefs-half.json");
    let mut mismatched = Vec::new();
    let mut outputs = Vec::new();
    for round in 0..2 {
        let out = |name: &str| dir.path().join(format!("{name}-{round}")).display().to_string();
        let tl = out("timeline.jsonl");
        let (c1, s1) = crpsim(&[
            "project", "--plan", &plan, "--world", &world, "--beliefs", &beliefs, "--rules", &rules, "--seed", "5", "--out", &tl,
        ]);
        let (c2, s2) = crpsim(&[
            "detect", "--plan", &plan, "--world", &world, "--beliefs", &beliefs, "--rules", &rules, "--seed", "5",
            "--flaw", "two-same-color", "--n", "20", "--k", "2",
        ]);
        let svg = out("plot.svg");
        let (c3, s3) = crpsim(&["plot", "--timeline", &tl, "--world", &world, "--out", &svg]);
        let files = [std::fs::read(&tl).unwrap_or_default(), std::fs::read(&svg).unwrap_or_default()];
        outputs.push(([c1, c2, c3], [s1, s2, s3], files));
    }
    let (a, b) = (&outputs[0], &outputs[1]);
    for (i, name) in ["project", "detect", "plot"].iter().enumerate() {
        if a.0[i] != b.0[i] || a.1[i] != b.1[i] {
            mismatched.push(name.to_string());
        }
    }
    if a.2 != b.2 {
        mismatched.push("output files".into());
    }
    let sane = a.0[0] == 0 && (a.0[1] == 0 || a.0[1] == 3) && a.0[2] == 0 && !a.2[0].is_empty();
    outcome(
        mismatched.is_empty() && sane,
        if mismatched.is_empty() {
            format!("project/detect/plot byte-identical across runs (exit codes {:?})", a.0)
        } else {
            format!("differs: {}", mismatched.join(", "))
        },
    )
}

fn ac11() -> Outcome {
    let (code, out) = crpsim(&["tables", "fig18"]);
    let text = String::from_utf8_lossy(&out);
    let grid = flaw::sample_size_grid(0.95);
    let marked = text.matches('*').count().saturating_sub(1);
    let mismatches = grid.iter().flatten().filter(|c| !c.matches()).count();
    let has_published = text.contains("121");
    outcome(
        code == 0 && has_published && marked == mismatches,
        format!("computed and printed values side by side, {mismatches} mismatch markers"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 11] = [
        ("AC1 detector grid reproduction", ac1, Duration::from_secs(1)),
        ("AC2 false-alarm bound", ac2, Duration::from_secs(1)),
        ("AC3 jump within delta of condition", ac3, Duration::from_secs(60)),
        ("AC4 runs follow automaton branches", ac4, Duration::from_secs(60)),
        ("AC5 reference/efficient convergence", ac5, Duration::from_secs(300)),
        ("AC6 schedule vs fixed-step oracle", ac6, Duration::from_secs(60)),
        ("AC7 successor sampling calibration", ac7, Duration::from_secs(10)),
        ("AC8 courier flaw frequency", ac8, Duration::from_secs(300)),
        ("AC9 full tour scale", ac9, Duration::from_secs(10)),
        ("AC10 CLI determinism", ac10, Duration::from_secs(30)),
        ("AC11 sample-size table report", ac11, Duration::from_secs(5)),
    ];
    let mut failed = 0;
    for (name, f, budget) in criteria {
        let t0 = Instant::now();
        let o = f();
        let el = t0.elapsed();
        let pass = o.pass && el <= budget;
        if !pass {
            failed += 1;
        }
        let over = if el > budget { " OVER BUDGET" } else { "" };
        println!(
            "{} {name}: {} [{:.2} s of {} s{over}]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            el.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("{} of 11 criteria pass", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
