//! crpsim: project plans, sample scenarios, detect flaws, print the
//! detector tables and plot trajectories.
//!
//! Exit codes: 0 success (or no flaw), 1 I/O or parse failure, 2
//! projection error, 3 flaw detected.

mod plot;

use clap::{Args, Parser, Subcommand, ValueEnum};
use crpsim::courier::{classify, Category};
use crpsim::flaw::{self, DetectorSpec};
use crpsim::lang::{parse_plan, Plan};
use crpsim::projector::{project_plan, Beliefs, ProjectError, ProjectorConfig, World};
use crpsim::rules::{parse_timeline_jsonl, RuleSet};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "crpsim", version, about = "Probabilistic projection of concurrent reactive plans")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Inputs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    world: PathBuf,
    #[arg(long)]
    beliefs: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seconds of simulated time before a projection is cut off.
    #[arg(long)]
    horizon: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Project one scenario and write its timeline as JSONL.
    Project {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Project n scenarios and summarize each on one JSON line.
    Sample {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = 10)]
        n: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run DET(flaw, n, k) and print the report.
    Detect {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        flaw: String,
        #[arg(long, default_value_t = 3)]
        n: u64,
        #[arg(long, default_value_t = 2)]
        k: u64,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        #[arg(long, default_value_t = 0.05)]
        tau: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the detector probability grid or the sample-size table.
    Tables {
        which: Table,
        #[arg(long, default_value_t = 0.95)]
        beta: f64,
    },
    /// Render a timeline over the world map as SVG.
    Plot {
        #[arg(long)]
        timeline: PathBuf,
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and check whichever input files are given.
    Validate {
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long)]
        beliefs: Option<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        timeline: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Table {
    Fig17,
    Fig18,
}

/// A failure with its exit code.
struct Fail(u8, String);

type Res<T> = Result<T, Fail>;

fn read(path: &Path) -> Res<String> {
    std::fs::read_to_string(path).map_err(|e| Fail(1, format!("{}: {e}", path.display())))
}

fn parsed<T, E: std::fmt::Display>(path: &Path, r: Result<T, E>) -> Res<T> {
    r.map_err(|e| Fail(1, format!("{}: {e}", path.display())))
}

fn load_plan(p: &Path) -> Res<Plan> {
    parsed(p, parse_plan(&read(p)?))
}
fn load_world(p: &Path) -> Res<World> {
    parsed(p, World::from_json(&read(p)?))
}
fn load_beliefs(p: &Path) -> Res<Beliefs> {
    parsed(p, Beliefs::from_json(&read(p)?))
}
fn load_rules(p: &Path) -> Res<RuleSet> {
    parsed(p, RuleSet::from_json(&read(p)?))
}

struct Loaded {
    plan: Plan,
    world: World,
    beliefs: Beliefs,
    rules: RuleSet,
    cfg: ProjectorConfig,
    seed: u64,
}

fn load(i: &Inputs) -> Res<Loaded> {
    let mut cfg = ProjectorConfig::default();
    if let Some(h) = i.horizon {
        if !(h > 0.0) {
            return Err(Fail(1, format!("horizon must be positive, got {h}")));
        }
        cfg.horizon = h;
    }
    Ok(Loaded {
        plan: load_plan(&i.plan)?,
        world: load_world(&i.world)?,
        beliefs: i.beliefs.as_deref().map(load_beliefs).transpose()?.unwrap_or_default(),
        rules: i.rules.as_deref().map(load_rules).transpose()?.unwrap_or_default(),
        cfg,
        seed: i.seed,
    })
}

fn emit(out: Option<&Path>, body: &str) -> Res<()> {
    match out {
        Some(p) => std::fs::write(p, body).map_err(|e| Fail(1, format!("{}: {e}", p.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    events: usize,
    reschedules: usize,
    finished: bool,
    end_time: f64,
    x: f64,
    y: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    sampled: &'a BTreeMap<String, String>,
}

fn cmd_project(i: &Inputs, out: Option<&Path>) -> Res<()> {
    let l = load(i)?;
    let mut rng = crpsim::rng::stream(l.seed, 0);
    let r = project_plan(&l.plan, &l.world, &l.beliefs, &l.rules, &l.cfg, &mut rng);
    let (p, err) = match r {
        Ok(p) => (p, None),
        Err(ProjectError::HorizonExceeded(p)) => (*p, Some("horizon exceeded".to_string())),
        Err(e) => return Err(Fail(2, format!("projection failed: {e}"))),
    };
    let jsonl = p.timeline.to_jsonl();
    let summary = Summary {
        events: p.timeline.len(),
        reschedules: p.reschedules,
        finished: p.finished,
        end_time: p.end_time,
        x: p.position.x,
        y: p.position.y,
        error: err.clone(),
        sampled: &p.sampled,
    };
    let line = serde_json::to_string(&summary).expect("summary serializes");
    match out {
        Some(path) => {
            emit(Some(path), &jsonl)?;
            println!("{line}");
        }
        None => {
            print!("{jsonl}");
            eprintln!("{line}");
        }
    }
    match err {
        Some(e) => Err(Fail(2, e)),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct ScenarioLine {
    scenario: u64,
    events: usize,
    reschedules: usize,
    finished: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    flaws: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    category: Option<Category>,
}

fn cmd_sample(i: &Inputs, n: u64, out: Option<&Path>) -> Res<()> {
    if n == 0 {
        return Err(Fail(1, "--n must be at least 1".into()));
    }
    let l = load(i)?;
    let scenarios = flaw::sample_scenarios(&l.plan, &l.world, &l.beliefs, &l.rules, &l.cfg, n, l.seed);
    let courier = l.world.objects.iter().any(|o| o.id == "letter-2");
    let mut body = String::new();
    for s in &scenarios {
        let (events, reschedules, finished) = match &s.result {
            Ok(p) => (p.timeline.len(), p.reschedules, p.finished),
            Err(ProjectError::HorizonExceeded(p)) => (p.timeline.len(), p.reschedules, false),
            Err(_) => (0, 0, false),
        };
        let tl = s.timeline();
        let flaws = tl
            .map(|t| l.rules.flaws.iter().filter(|f| f.matcher.matches(t)).map(|f| f.name.clone()).collect())
            .unwrap_or_default();
        let line = ScenarioLine {
            scenario: s.index,
            events,
            reschedules,
            finished,
            error: s.result.as_ref().err().map(|e| e.to_string()),
            flaws,
            category: tl.filter(|_| courier).map(|t| classify(t, "letter-2")),
        };
        body.push_str(&serde_json::to_string(&line).expect("line serializes"));
        body.push('\n');
    }
    emit(out, &body)
}

fn cmd_detect(i: &Inputs, name: &str, spec: DetectorSpec, out: Option<&Path>) -> Res<bool> {
    let l = load(i)?;
    let f = l
        .rules
        .flaw(name)
        .ok_or_else(|| Fail(1, format!("unknown flaw {name}")))?
        .clone();
    spec.validate().map_err(|e| Fail(1, e.to_string()))?;
    let scenarios = flaw::sample_scenarios(&l.plan, &l.world, &l.beliefs, &l.rules, &l.cfg, spec.n, l.seed);
    for s in &scenarios {
        if let Err(e) = &s.result {
            log::warn!("scenario {}: {e}", s.index);
        }
    }
    let tls: Vec<_> = scenarios.iter().filter_map(|s| s.timeline().cloned()).collect();
    let report = flaw::report(name, &spec, &tls, &f.matcher).map_err(|e| Fail(1, e.to_string()))?;
    let body = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    emit(out, &body)?;
    Ok(report.decision)
}

fn cmd_validate(
    plan: Option<&Path>,
    world: Option<&Path>,
    beliefs: Option<&Path>,
    rules: Option<&Path>,
    timeline: Option<&Path>,
) -> Res<()> {
    let mut checked = 0;
    if let Some(p) = plan {
        load_plan(p)?;
        checked += 1;
    }
    if let Some(p) = world {
        load_world(p)?;
        checked += 1;
    }
    if let Some(p) = beliefs {
        load_beliefs(p)?;
        checked += 1;
    }
    if let Some(p) = rules {
        load_rules(p)?;
        checked += 1;
    }
    if let Some(p) = timeline {
        parsed(p, parse_timeline_jsonl(&read(p)?))?;
        checked += 1;
    }
    if checked == 0 {
        return Err(Fail(1, "nothing to validate".into()));
    }
    println!("ok ({checked} files)");
    Ok(())
}

fn cmd_plot(timeline: &Path, world: &Path, out: &Path) -> Res<()> {
    let w = load_world(world)?;
    let occ = parsed(timeline, parse_timeline_jsonl(&read(timeline)?))?;
    emit(Some(out), &plot::render(&w, &occ))
}

fn run(cli: Cli) -> Res<u8> {
    match cli.cmd {
        Cmd::Project { inputs, out } => cmd_project(&inputs, out.as_deref()).map(|_| 0),
        Cmd::Sample { inputs, n, out } => cmd_sample(&inputs, n, out.as_deref()).map(|_| 0),
        Cmd::Detect { inputs, flaw, n, k, theta, tau, out } => {
            let spec = DetectorSpec { n, k, theta, tau };
            cmd_detect(&inputs, &flaw, spec, out.as_deref()).map(|d| if d { 3 } else { 0 })
        }
        Cmd::Tables { which, beta } => {
            match which {
                Table::Fig17 => print!("{}", flaw::detector_grid_table()),
                Table::Fig18 => {
                    if !(0.0 < beta && beta < 1.0) {
                        return Err(Fail(1, "beta must lie in (0, 1)".into()));
                    }
                    print!("{}", flaw::sample_size_table(beta))
                }
            }
            Ok(0)
        }
        Cmd::Plot { timeline, world, out } => cmd_plot(&timeline, &world, &out).map(|_| 0),
        Cmd::Validate { plan, world, beliefs, rules, timeline } => cmd_validate(
            plan.as_deref(),
            world.as_deref(),
            beliefs.as_deref(),
            rules.as_deref(),
            timeline.as_deref(),
        )
        .map(|_| 0),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("crpsim: {msg}");
            ExitCode::from(code)
        }
    }
}
