//! Event-driven projection of a plan over a sampled world.
//!
//! Navigation is modelled by the FOLLOW-PATH chain: each leg between two
//! schedule entries starts a `follow-path` whose `sleeping` persist lapses
//! when the robot reaches the next entry; an immediate exogenous rule then
//! ends the leg and the entry's events are asserted.

use super::beliefs::{draw, Beliefs};
use super::schedule::{
    schedule_endogenous_events, set_travel_mode, EndogenousEventSchedule, ScheduleError,
    TriggerRegion,
};
use super::sensing::{
    apply_sensing_model, door_fluent, SeenDoor, SeenObject, SensingAction, SensingResult,
    SensingWorld, LOOK_TIME,
};
use super::world::{mode_at, ModeRegion, Speeds, World, WorldError};
use crate::fluents::{
    compile_to_region, pending_networks, ChangesModel, FluentError, FluentNetwork, Value, ROBOT_X,
    ROBOT_Y,
};
use crate::geom::{distance, Point, Polyline, Region};
use crate::lang::{
    Event, InterpError, InterpreterState, Plan, PrimitiveAction, PrimitiveOutcome, StepOutput,
    ThreadId, TravelMode,
};
use crate::rules::{
    apply_effect_rules, condition_solutions, enabled_exogenous, expire_persists,
    predict_next_exogenous, term, DurationError, Effect, EffectRule, EventClass, ExoCandidate,
    ExoRule, Lapsed, Literal, RuleSet, Timeline, TimelineError, IMMEDIATE_SPACING,
};
use crate::term::{match_term, substitute, Bindings, Term};
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Process name whose changes move the robot.
pub const NAV_PROCESS: &str = "low-level-navigation-plan";
/// Positions handed to the interpreter are nudged this far along the path
/// so that a boundary just crossed reads as crossed.
const NUDGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorConfig {
    pub horizon: f64,
    /// Hard cap on recorded occurrences.
    pub max_events: usize,
    pub pickup_time: f64,
    pub putdown_time: f64,
    /// Objects farther than this cannot be grasped.
    pub reach: f64,
    pub look_time: f64,
}

impl Default for ProjectorConfig {
    fn default() -> Self {
        ProjectorConfig {
            horizon: 7200.0,
            max_events: 50_000,
            pickup_time: 4.0,
            putdown_time: 3.0,
            reach: 50.0,
            look_time: LOOK_TIME,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub timeline: Timeline,
    pub reschedules: usize,
    pub finished: bool,
    pub end_time: f64,
    pub position: Point,
    /// The world sampled at start: random variable -> value.
    pub sampled: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProjectError {
    #[error("horizon exceeded at t={:.3}", .0.end_time)]
    HorizonExceeded(Box<Projection>),
    #[error("more than {0} occurrences")]
    TooManyEvents(usize),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error("trigger condition is not compilable: {0}")]
    NotCompilable(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Duration(#[from] DurationError),
    #[error(transparent)]
    Timeline(#[from] TimelineError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("two motion primitives run at once")]
    ConcurrentMotion,
}

impl From<FluentError> for ProjectError {
    fn from(e: FluentError) -> Self {
        match e {
            FluentError::NotCompilable(s) => ProjectError::NotCompilable(s),
            e => ProjectError::NotCompilable(e.to_string()),
        }
    }
}

fn effect_rule(name: &str, event: &str, cond: &[&str], effects: Vec<Effect>) -> EffectRule {
    EffectRule {
        name: name.into(),
        event: term(event),
        condition: cond.iter().map(|c| Literal::from_term(term(c))).collect(),
        probability: 1.0,
        effects,
    }
}

/// Rules of the navigation model, prepended to the user's rules.
pub fn builtin_rules() -> RuleSet {
    let a = |s: &str| Effect::Assert(term(s));
    let c = |s: &str| Effect::Clip(term(s));
    let effect_rules = vec![
        effect_rule(
            "follow-path",
            "begin(follow-path(?f, ?t, ?dt, ?id))",
            &[],
            vec![
                a("running(follow-path(?f, ?t, ?dt, ?id))"),
                Effect::Persist {
                    duration: term("?dt"),
                    prop: term("sleeping(?id)"),
                },
            ],
        ),
        effect_rule(
            "end-follow-path",
            "end(follow-path(?f, ?t, ?dt, ?id))",
            &[],
            vec![c("running(follow-path(?f, ?t, ?dt, ?id))")],
        ),
        effect_rule(
            "reschedule-running",
            "reschedule(?id)",
            &["running(follow-path(?f, ?t, ?dt, ?id))"],
            vec![c("running(follow-path(?f, ?t, ?dt, ?id))")],
        ),
        effect_rule(
            "reschedule-sleeping",
            "reschedule(?id)",
            &["sleeping(?id)"],
            vec![c("sleeping(?id)")],
        ),
        effect_rule(
            "travel-mode-frame",
            "nav-event(set-travel-mode(?new))",
            &["travel-mode(?m)", "neq(?m, ?new)"],
            vec![c("travel-mode(?m)")],
        ),
        effect_rule(
            "set-doorway-mode",
            "nav-event(set-travel-mode(doorway))",
            &[],
            vec![
                a("travel-mode(doorway)"),
                c("obstacle-avoidance-with(sonar)"),
            ],
        ),
        effect_rule(
            "set-hallway-mode",
            "nav-event(set-travel-mode(hallway))",
            &[],
            vec![
                a("travel-mode(hallway)"),
                a("obstacle-avoidance-with(sonar)"),
            ],
        ),
        effect_rule(
            "set-office-mode",
            "nav-event(set-travel-mode(office))",
            &[],
            vec![
                a("travel-mode(office)"),
                a("obstacle-avoidance-with(sonar)"),
            ],
        ),
        effect_rule("begin-primitive", "begin(?a)", &[], vec![a("running(?a)")]),
        effect_rule("end-primitive", "end(?a)", &[], vec![c("running(?a)")]),
        effect_rule(
            "fail-primitive",
            "fail(?a, ?why)",
            &[],
            vec![c("running(?a)")],
        ),
        effect_rule("abort-primitive", "abort(?a)", &[], vec![c("running(?a)")]),
        effect_rule(
            "abort-follow-path",
            "abort(?a)",
            &["running(follow-path(?f, ?t, ?dt, ?id))"],
            vec![
                c("running(follow-path(?f, ?t, ?dt, ?id))"),
                c("sleeping(?id)"),
            ],
        ),
    ];
    let exo_rules = vec![ExoRule {
        name: "terminate-follow-path".into(),
        condition: vec![
            Literal::Holds(term("running(follow-path(?f, ?t, ?dt, ?id))")),
            Literal::NotHolds(term("sleeping(?id)")),
        ],
        spacing: 0.0001,
        event: term("end(follow-path(?f, ?t, ?dt, ?id))"),
    }];
    RuleSet {
        effect_rules,
        exo_rules,
        ..RuleSet::default()
    }
}

fn r2(v: f64) -> f64 {
    let r = (v * 100.0).round() / 100.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn pt(p: Point) -> Term {
    Term::app("pt", vec![Term::num(r2(p.x)), Term::num(r2(p.y))])
}

fn compile_triggers(nets: &[FluentNetwork]) -> Result<Vec<TriggerRegion>, FluentError> {
    nets.iter()
        .map(|n| {
            Ok(TriggerRegion {
                fluent: n.output.clone(),
                region: compile_to_region(n)?,
            })
        })
        .collect()
}

/// A running navigation primitive and its endogenous event schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct NavPrimitiveState {
    pub thread: ThreadId,
    pub id: String,
    pub action: Term,
    /// Path the current schedule follows.
    pub path: Polyline,
    pub modes: Vec<ModeRegion>,
    pub obstacles: Vec<(String, Region)>,
    pub speeds: Speeds,
    pub triggers: Vec<TriggerRegion>,
    pub schedule: EndogenousEventSchedule,
    /// Entries already reached.
    pub done: usize,
    /// Date at which the last reached entry was reached.
    pub reached_at: f64,
    /// Expiry of the pending `sleeping(id)` persist, while a leg runs.
    pub sleeping_until: Option<f64>,
}

impl NavPrimitiveState {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        thread: ThreadId,
        id: String,
        action: Term,
        path: Polyline,
        modes: Vec<ModeRegion>,
        obstacles: Vec<(String, Region)>,
        speeds: Speeds,
        networks: &[FluentNetwork],
        t: f64,
    ) -> Result<Self, ProjectError> {
        let triggers = compile_triggers(networks)?;
        let schedule = schedule_endogenous_events(&path, &modes, &triggers, &obstacles, &speeds)?;
        Ok(NavPrimitiveState {
            thread,
            id,
            action,
            path,
            modes,
            obstacles,
            speeds,
            triggers,
            schedule,
            done: 0,
            reached_at: t,
            sleeping_until: None,
        })
    }

    pub fn remaining(&self) -> &[crate::projector::ScheduleEntry] {
        &self.schedule.entries[self.done.min(self.schedule.entries.len())..]
    }

    pub fn trigger_names(&self) -> BTreeSet<String> {
        self.triggers.iter().map(|t| t.fluent.clone()).collect()
    }

    /// Arclength along `path` at date `t`, interpolating within the
    /// running leg.
    pub fn arclength_at(&self, t: f64) -> f64 {
        let es = &self.schedule.entries;
        if self.done == 0 {
            return 0.0;
        }
        let prev = es[self.done - 1].s;
        match (self.sleeping_until, es.get(self.done)) {
            (Some(_), Some(e)) if e.dt > 0.0 => {
                let f = ((t - self.reached_at) / e.dt).clamp(0.0, 1.0);
                prev + f * (e.s - prev)
            }
            _ => prev,
        }
    }

    pub fn position_at(&self, t: f64) -> Point {
        self.path.point_at(self.arclength_at(t))
    }
}

/// Truncate the path at the position reached at `t`, add the trigger
/// regions of `networks` not already scheduled, and schedule the rest of
/// the path afresh. The new schedule starts at the current position; its
/// start entry counts as reached.
pub fn reschedule_on_new_trigger(
    nav: &NavPrimitiveState,
    networks: &[FluentNetwork],
    t: f64,
) -> Result<NavPrimitiveState, ProjectError> {
    let s = nav.arclength_at(t);
    let mut triggers = nav.triggers.clone();
    let known = nav.trigger_names();
    let fresh: Vec<FluentNetwork> = networks
        .iter()
        .filter(|n| !known.contains(&n.output))
        .cloned()
        .collect();
    triggers.extend(compile_triggers(&fresh)?);
    let mut out = nav.clone();
    out.triggers = triggers;
    out.sleeping_until = None;
    out.reached_at = t;
    match nav.path.suffix(s) {
        Some(rest) => {
            out.schedule = schedule_endogenous_events(
                &rest,
                &out.modes,
                &out.triggers,
                &out.obstacles,
                &out.speeds,
            )?;
            out.path = rest;
            out.done = 1;
        }
        None => {
            // nothing left to travel: only arrival remains
            let end = nav.path.end();
            out.schedule = EndogenousEventSchedule {
                entries: vec![crate::projector::ScheduleEntry {
                    dt: 0.0,
                    s: nav.path.length(),
                    vals: end,
                    events: vec![Term::app("nav-event", vec![Term::sym("arrive")])],
                }],
            };
            out.done = 0;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum Finish {
    Plain,
    PickUp(String),
    PutDown(String),
    Sensing(Box<SensingResult>),
}

#[derive(Debug, Clone)]
enum JobStep {
    Record(Term, EventClass),
    Finish(Finish),
}

#[derive(Debug, Clone)]
struct Job {
    t: f64,
    order: u64,
    thread: ThreadId,
    action: Term,
    step: JobStep,
}

struct Sampled {
    open: BTreeMap<String, bool>,
    color: BTreeMap<String, String>,
    values: BTreeMap<String, String>,
}

fn sample_world<R: Rng + ?Sized>(world: &World, beliefs: &Beliefs, rng: &mut R) -> Sampled {
    let mut open = BTreeMap::new();
    let mut color = BTreeMap::new();
    let mut values = BTreeMap::new();
    let mut doors: Vec<_> = world.doors.iter().collect();
    doors.sort_by(|a, b| a.id.cmp(&b.id));
    for d in doors {
        let var = format!("open-{}", d.id);
        let dist = beliefs
            .get(&var)
            .cloned()
            .unwrap_or_else(|| Beliefs::door(d.open_probability));
        let v = draw(&dist, rng);
        open.insert(d.id.clone(), v == "true");
        values.insert(var, v);
    }
    let mut objects: Vec<_> = world.objects.iter().collect();
    objects.sort_by(|a, b| a.id.cmp(&b.id));
    for o in objects {
        let var = format!("color-{}", o.id);
        let dist = beliefs.get(&var).unwrap_or(&o.color);
        if dist.is_empty() {
            continue;
        }
        let v = draw(dist, rng);
        color.insert(o.id.clone(), v.clone());
        values.insert(var, v);
    }
    Sampled {
        open,
        color,
        values,
    }
}

struct Projector<'a, R: Rng + ?Sized> {
    world: &'a World,
    rules: RuleSet,
    cfg: &'a ProjectorConfig,
    rng: &'a mut R,
    tl: Timeline,
    interp: InterpreterState,
    now: f64,
    pos: Point,
    mode: TravelMode,
    modes: Vec<ModeRegion>,
    nav: Option<NavPrimitiveState>,
    jobs: Vec<Job>,
    job_order: u64,
    inbox: VecDeque<Event>,
    fired: BTreeSet<(usize, Bindings)>,
    nav_count: usize,
    reschedules: usize,
    finished: bool,
    sampled: Sampled,
    closed: BTreeSet<String>,
}

impl<R: Rng + ?Sized> Projector<'_, R> {
    fn position(&self) -> Point {
        match &self.nav {
            Some(n) => n.position_at(self.now),
            None => self.pos,
        }
    }

    fn record(&mut self, ev: Term, class: EventClass) -> Result<(), ProjectError> {
        if self.tl.len() >= self.cfg.max_events {
            return Err(ProjectError::TooManyEvents(self.cfg.max_events));
        }
        let p = self.position();
        self.tl.record(self.now, ev, class)?;
        let o = self.tl.last_mut().expect("just recorded");
        o.x = Some(r2(p.x));
        o.y = Some(r2(p.y));
        o.mode = Some(self.mode.name().to_string());
        Ok(())
    }

    /// Record an occurrence and apply every effect rule it triggers.
    fn occur(&mut self, ev: Term, class: EventClass) -> Result<(), ProjectError> {
        self.record(ev.clone(), class)?;
        self.apply(ev)
    }

    fn apply(&mut self, ev: Term) -> Result<(), ProjectError> {
        apply_effect_rules(&mut self.tl, &ev, &self.rules.effect_rules, self.rng)?;
        if ev.functor() == "nav-event" {
            if let Some(m) = ev
                .args()
                .first()
                .filter(|a| a.functor() == "set-travel-mode")
            {
                if let Some(m) = m
                    .args()
                    .first()
                    .and_then(Term::as_sym)
                    .and_then(TravelMode::from_name)
                {
                    self.mode = m;
                }
            }
        }
        Ok(())
    }

    fn step(&mut self, ev: Event) -> Result<(), ProjectError> {
        self.inbox.push_back(ev);
        while let Some(ev) = self.inbox.pop_front() {
            if self.finished {
                break;
            }
            let out = self.interp.step(ev)?;
            self.handle(out)?;
        }
        self.check_reschedule()?;
        self.ensure_leg()
    }

    fn tell_position(&mut self, p: Point) -> Result<(), ProjectError> {
        self.interp.set_fluent(ROBOT_X, Value::Real(p.x));
        self.step(Event::FluentChange {
            name: ROBOT_Y.into(),
            value: Value::Real(p.y),
        })
    }

    fn handle(&mut self, out: StepOutput) -> Result<(), ProjectError> {
        for th in out.aborted {
            self.abort(th)?;
        }
        for req in out.started {
            self.start(req.thread, req.action)?;
        }
        if out.finished && !self.finished {
            self.finished = true;
            self.occur(Term::sym("plan-finished"), EventClass::Computational)?;
        }
        Ok(())
    }

    fn abort(&mut self, th: ThreadId) -> Result<(), ProjectError> {
        if self.nav.as_ref().is_some_and(|n| n.thread == th) {
            let nav = self.nav.as_ref().expect("checked");
            let p = nav.position_at(self.now);
            let act = nav.action.clone();
            self.occur(Term::app("abort", vec![act]), EventClass::Computational)?;
            self.nav = None;
            self.pos = p;
            if let Some(o) = self.tl.last_mut() {
                o.x = Some(r2(p.x));
                o.y = Some(r2(p.y));
            }
            return Ok(());
        }
        let mut act = None;
        self.jobs.retain(|j| {
            if j.thread == th {
                act = Some(j.action.clone());
                false
            } else {
                true
            }
        });
        if let Some(a) = act {
            self.occur(Term::app("abort", vec![a]), EventClass::Computational)?;
        }
        Ok(())
    }

    fn push_job(&mut self, dt: f64, thread: ThreadId, action: &Term, step: JobStep) {
        self.job_order += 1;
        self.jobs.push(Job {
            t: self.now + dt,
            order: self.job_order,
            thread,
            action: action.clone(),
            step,
        });
    }

    fn done(&mut self, thread: ThreadId, outcome: PrimitiveOutcome) {
        self.inbox
            .push_back(Event::PrimitiveDone { thread, outcome });
    }

    fn sensing_world(&self) -> SensingWorld {
        let mut objects = Vec::new();
        for o in &self.world.objects {
            let mut b = Bindings::new();
            b.insert("o".into(), Term::sym(&o.id));
            for sol in self.tl.matching(&term("at(?o, ?loc)"), &b) {
                let Some(loc) = sol
                    .get("loc")
                    .and_then(Term::as_sym)
                    .and_then(|l| self.world.location(l))
                else {
                    continue;
                };
                objects.push(SeenObject {
                    id: o.id.clone(),
                    kind: o.kind.clone(),
                    at: loc.at,
                    color: self.sampled.color.get(&o.id).cloned().unwrap_or_default(),
                });
            }
        }
        let doors = self
            .world
            .doors
            .iter()
            .map(|d| SeenDoor {
                id: d.id.clone(),
                center: d.center,
                angle: if self.sampled.open[&d.id] {
                    d.open_angle
                } else {
                    0.0
                },
            })
            .collect();
        let colors: BTreeSet<String> = self
            .world
            .objects
            .iter()
            .flat_map(|o| o.color.keys().cloned())
            .collect();
        SensingWorld {
            robot: self.position(),
            objects,
            doors,
            colors: colors.into_iter().collect(),
        }
    }

    fn sensor(&self, name: &str) -> super::world::SensorModel {
        self.world
            .sensors
            .get(name)
            .cloned()
            .or_else(|| super::world::default_sensors().remove(name))
            .unwrap_or(super::world::SensorModel {
                detection_probability: 1.0,
                false_positive_probability: 0.0,
                noise: 0.0,
                range: f64::INFINITY,
            })
    }

    fn positional_networks(&self) -> Vec<FluentNetwork> {
        pending_networks(&self.interp, &ChangesModel::navigation(), NAV_PROCESS)
    }

    fn start(&mut self, thread: ThreadId, action: PrimitiveAction) -> Result<(), ProjectError> {
        let act = action.term();
        // a matching project rule overrides the built-in model
        if !action.is_motion() {
            if let Some(events) = self.project_rule_events(&act) {
                let last = events.iter().map(|e| e.0).fold(0.0, f64::max);
                for (d, e) in events {
                    if d <= 0.0 {
                        self.occur(e, EventClass::Computational)?;
                    } else {
                        self.push_job(
                            d,
                            thread,
                            &act,
                            JobStep::Record(e, EventClass::Computational),
                        );
                    }
                }
                if last <= 0.0 {
                    self.done(thread, PrimitiveOutcome::Success);
                } else {
                    self.push_job(last, thread, &act, JobStep::Finish(Finish::Plain));
                }
                return Ok(());
            }
        }
        match &action {
            PrimitiveAction::SetNavigationMode(m) => {
                if *m != self.mode {
                    self.occur(set_travel_mode(*m), EventClass::Physical)?;
                }
                self.done(thread, PrimitiveOutcome::Success);
            }
            PrimitiveAction::MoveTo(_)
            | PrimitiveAction::GoTo(_)
            | PrimitiveAction::LowLevelNavPlan { .. } => {
                self.start_nav(thread, action.clone(), act)?;
            }
            PrimitiveAction::PickUp(o) => {
                self.occur(
                    Term::app("begin", vec![act.clone()]),
                    EventClass::Computational,
                )?;
                let d = self.cfg.pickup_time;
                self.push_job(d, thread, &act, JobStep::Finish(Finish::PickUp(o.clone())));
            }
            PrimitiveAction::PutDown(o) => {
                self.occur(
                    Term::app("begin", vec![act.clone()]),
                    EventClass::Computational,
                )?;
                let d = self.cfg.putdown_time;
                self.push_job(d, thread, &act, JobStep::Finish(Finish::PutDown(o.clone())));
            }
            PrimitiveAction::EstimateDoorAngle => {
                let model = self.sensor("laser");
                let sw = self.sensing_world();
                let r =
                    apply_sensing_model(&SensingAction::EstimateDoorAngle, &sw, &model, self.rng);
                self.occur(
                    Term::app("begin", vec![act.clone()]),
                    EventClass::Computational,
                )?;
                self.schedule_sensing(thread, &act, r)?;
            }
            PrimitiveAction::LookFor {
                description,
                camera,
            } => {
                let model = self.sensor(camera);
                let sw = self.sensing_world();
                let a = SensingAction::LookFor {
                    description: description.clone(),
                    camera: camera.clone(),
                    look_time: self.cfg.look_time,
                };
                let r = apply_sensing_model(&a, &sw, &model, self.rng);
                self.schedule_sensing(thread, &act, r)?;
            }
        }
        Ok(())
    }

    fn schedule_sensing(
        &mut self,
        thread: ThreadId,
        act: &Term,
        r: SensingResult,
    ) -> Result<(), ProjectError> {
        for (d, e) in &r.events {
            if *d <= 0.0 {
                self.occur(e.clone(), EventClass::Computational)?;
            } else {
                self.push_job(
                    *d,
                    thread,
                    act,
                    JobStep::Record(e.clone(), EventClass::SensorUpdate),
                );
            }
        }
        let d = r.duration;
        self.push_job(
            d,
            thread,
            act,
            JobStep::Finish(Finish::Sensing(Box::new(r))),
        );
        Ok(())
    }

    fn project_rule_events(&self, act: &Term) -> Option<Vec<(f64, Term)>> {
        for r in &self.rules.project_rules {
            let mut b = Bindings::new();
            if !match_term(&r.head, act, &mut b) {
                continue;
            }
            if let Some(sol) = condition_solutions(&self.tl, &r.condition, &b)
                .into_iter()
                .next()
            {
                return Some(
                    r.events
                        .iter()
                        .map(|(d, e)| (*d, substitute(e, &sol)))
                        .collect(),
                );
            }
        }
        None
    }

    fn start_nav(
        &mut self,
        thread: ThreadId,
        action: PrimitiveAction,
        act: Term,
    ) -> Result<(), ProjectError> {
        if self.nav.is_some() {
            return Err(ProjectError::ConcurrentMotion);
        }
        let from = self.pos;
        let path = match &action {
            PrimitiveAction::MoveTo(p) => Polyline::new(vec![from, *p]).ok(),
            PrimitiveAction::GoTo(l) | PrimitiveAction::LowLevelNavPlan { dest: l, .. } => {
                let loc = self
                    .world
                    .location(l)
                    .ok_or_else(|| WorldError::UnknownLocation(l.clone()))?;
                if distance(loc.at, from) < 1e-6 {
                    None
                } else {
                    match self.world.path_to(from, l, &self.closed) {
                        Ok(p) => Some(p),
                        Err(WorldError::Unreachable(_)) => {
                            self.occur(
                                Term::app("begin", vec![act.clone()]),
                                EventClass::Computational,
                            )?;
                            self.occur(
                                Term::app("fail", vec![act, Term::sym("unreachable")]),
                                EventClass::Computational,
                            )?;
                            self.done(thread, PrimitiveOutcome::Failure("unreachable".into()));
                            return Ok(());
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
            }
            _ => unreachable!("not a motion primitive"),
        };
        let id = match &action {
            PrimitiveAction::LowLevelNavPlan { id, .. } => id.clone(),
            _ => {
                self.nav_count += 1;
                format!("nav-{}", self.nav_count)
            }
        };
        self.occur(
            Term::app("begin", vec![act.clone()]),
            EventClass::Computational,
        )?;
        let Some(path) = path.filter(|p| p.length() > 1e-6) else {
            self.occur(Term::app("end", vec![act]), EventClass::Computational)?;
            self.done(thread, PrimitiveOutcome::Success);
            return Ok(());
        };
        let nets = self.positional_networks();
        let obstacles = self
            .world
            .obstacles
            .iter()
            .map(|o| (o.id.clone(), o.region.clone()))
            .collect();
        let nav = NavPrimitiveState::new(
            thread,
            id,
            act,
            path,
            self.modes.clone(),
            obstacles,
            self.world.speeds,
            &nets,
            self.now,
        )?;
        let first = nav.schedule.entries[0].clone();
        self.nav = Some(nav);
        // the start entry: only a travel-mode change is news here
        for e in first.events {
            if e.functor() == "nav-event"
                && e.args()
                    .first()
                    .is_some_and(|a| a.functor() == "set-travel-mode")
            {
                let m = e.args()[0]
                    .args()
                    .first()
                    .and_then(Term::as_sym)
                    .and_then(TravelMode::from_name);
                if m.is_some_and(|m| m != self.mode) {
                    self.occur(e, EventClass::Physical)?;
                }
            }
        }
        if let Some(n) = self.nav.as_mut() {
            n.done = 1;
            n.reached_at = self.now;
        }
        Ok(())
    }

    /// Start the next leg of the active navigation if none is running.
    fn ensure_leg(&mut self) -> Result<(), ProjectError> {
        let Some(nav) = &self.nav else { return Ok(()) };
        if nav.sleeping_until.is_some() {
            return Ok(());
        }
        let Some(e) = nav.schedule.entries.get(nav.done).cloned() else {
            return Ok(());
        };
        let from = nav.position_at(self.now);
        let id = nav.id.clone();
        let fp = Term::app(
            "follow-path",
            vec![pt(from), pt(e.vals), Term::num(e.dt), Term::sym(&id)],
        );
        self.occur(Term::app("begin", vec![fp]), EventClass::Computational)?;
        let until = self.now + e.dt;
        if let Some(n) = self.nav.as_mut() {
            n.sleeping_until = Some(until);
            n.reached_at = self.now;
        }
        Ok(())
    }

    fn check_reschedule(&mut self) -> Result<(), ProjectError> {
        let Some(nav) = &self.nav else { return Ok(()) };
        let pending = self.positional_networks();
        let known = nav.trigger_names();
        if pending.iter().all(|n| known.contains(&n.output)) {
            return Ok(());
        }
        // the causal model now watches what is pending
        let names: BTreeSet<String> = pending.iter().map(|n| n.output.clone()).collect();
        let mut base = nav.clone();
        base.triggers.retain(|t| names.contains(&t.fluent));
        let id = nav.id.clone();
        self.occur(
            Term::app("reschedule", vec![Term::sym(&id)]),
            EventClass::Computational,
        )?;
        self.reschedules += 1;
        let next = reschedule_on_new_trigger(&base, &pending, self.now)?;
        self.nav = Some(next);
        Ok(())
    }

    /// The robot reached the next entry of the active navigation.
    fn reach_entry(&mut self) -> Result<(), ProjectError> {
        let Some(nav) = self.nav.as_mut() else {
            return Ok(());
        };
        nav.sleeping_until = None;
        let idx = nav.done;
        let entry = nav.schedule.entries[idx].clone();
        nav.done += 1;
        nav.reached_at = self.now;
        let last = nav.done >= nav.schedule.entries.len();
        let (thread, act) = (nav.thread, nav.action.clone());
        let path_len = nav.path.length();
        let probe = nav.path.point_at((entry.s + NUDGE).min(path_len));
        for e in entry.events {
            let class = if e.functor() == "passive-sensor-update" {
                EventClass::SensorUpdate
            } else {
                EventClass::Physical
            };
            if e.functor() == "nav-event"
                && e.args()
                    .first()
                    .is_some_and(|a| a.functor() == "set-travel-mode")
            {
                let m = e.args()[0]
                    .args()
                    .first()
                    .and_then(Term::as_sym)
                    .and_then(TravelMode::from_name);
                if m == Some(self.mode) {
                    continue;
                }
            }
            let bump = (e.functor() == "possible-bump").then(|| e.args()[0].to_string());
            self.occur(e, class)?;
            if let Some(ob) = bump {
                let sonar_on = self.tl.holds(&term("obstacle-avoidance-with(sonar)"));
                let r = apply_sensing_model(
                    &SensingAction::PossibleBump {
                        obstacle: ob,
                        sonar_on,
                    },
                    &SensingWorld::default(),
                    &self.sensor("sonar"),
                    self.rng,
                );
                for (_, ev) in r.events {
                    self.occur(ev, EventClass::Physical)?;
                }
                if let Some(why) = r.failure {
                    self.pos = entry.vals;
                    self.occur(
                        Term::app("fail", vec![act.clone(), Term::sym(&why)]),
                        EventClass::Computational,
                    )?;
                    self.nav = None;
                    self.done(thread, PrimitiveOutcome::Failure(why));
                    return self.step(Event::Wakeup);
                }
            }
        }
        self.pos = entry.vals;
        if last {
            self.occur(Term::app("end", vec![act]), EventClass::Computational)?;
            self.nav = None;
            self.pos = entry.vals;
            self.interp.set_fluent(ROBOT_X, Value::Real(entry.vals.x));
            self.interp.set_fluent(ROBOT_Y, Value::Real(entry.vals.y));
            self.done(thread, PrimitiveOutcome::Success);
            return self.step(Event::Wakeup);
        }
        self.tell_position(probe)
    }

    fn finish_job(&mut self, job: Job) -> Result<(), ProjectError> {
        match job.step {
            JobStep::Record(e, class) => {
                self.occur(e, class)?;
                self.step(Event::Wakeup)
            }
            JobStep::Finish(Finish::Plain) => {
                self.done(job.thread, PrimitiveOutcome::Success);
                self.step(Event::Wakeup)
            }
            JobStep::Finish(Finish::PickUp(o)) => {
                let act = job.action;
                self.occur(Term::app("end", vec![act.clone()]), EventClass::Physical)?;
                let mut b = Bindings::new();
                b.insert("a".into(), act.clone());
                let failed = self.tl.matching(&term("failed(?a, ?why)"), &b);
                let here = self.position();
                let place = self
                    .tl
                    .matching(
                        &Term::app("at", vec![Term::sym(&o), Term::Var("loc".into())]),
                        &Bindings::new(),
                    )
                    .into_iter()
                    .filter_map(|s| s.get("loc").cloned())
                    .find(|l| {
                        l.as_sym()
                            .and_then(|l| self.world.location(l))
                            .is_some_and(|l| distance(l.at, here) <= self.cfg.reach)
                    });
                let why = if let Some(f) = failed.first() {
                    Some(f["why"].clone())
                } else if place.is_none() {
                    Some(Term::sym("out-of-reach"))
                } else {
                    None
                };
                match why {
                    Some(w) => {
                        let reason = w.to_string();
                        self.occur(Term::app("fail", vec![act, w]), EventClass::Computational)?;
                        self.done(job.thread, PrimitiveOutcome::Failure(reason));
                    }
                    None => {
                        let loc = place.expect("checked");
                        self.tl.clip(&Term::app("at", vec![Term::sym(&o), loc]));
                        self.tl
                            .assert_prop(Term::app("carrying", vec![Term::sym(&o)]));
                        self.done(job.thread, PrimitiveOutcome::Success);
                    }
                }
                self.step(Event::Wakeup)
            }
            JobStep::Finish(Finish::PutDown(o)) => {
                let act = job.action;
                self.occur(Term::app("end", vec![act.clone()]), EventClass::Physical)?;
                let carried = Term::app("carrying", vec![Term::sym(&o)]);
                if self.tl.holds(&carried) {
                    let here = self.position();
                    let loc = self
                        .world
                        .location_near(here, self.cfg.reach)
                        .map_or_else(|| Term::sym("floor"), |l| Term::sym(&l.id));
                    self.tl.clip(&carried);
                    self.tl
                        .assert_prop(Term::app("at", vec![Term::sym(&o), loc]));
                    self.done(job.thread, PrimitiveOutcome::Success);
                } else {
                    self.occur(
                        Term::app("fail", vec![act, Term::sym("not-carrying")]),
                        EventClass::Computational,
                    )?;
                    self.done(job.thread, PrimitiveOutcome::Failure("not-carrying".into()));
                }
                self.step(Event::Wakeup)
            }
            JobStep::Finish(Finish::Sensing(r)) => {
                let act = job.action;
                for p in &r.asserts {
                    self.tl.assert_prop(p.clone());
                }
                if let Some(v) = &r.value {
                    if act.functor() == "look-for" {
                        self.occur(
                            Term::app("succeed", vec![act.clone(), v.clone()]),
                            EventClass::Computational,
                        )?;
                    }
                }
                for (f, v) in &r.fluents {
                    self.inbox.push_back(Event::FluentChange {
                        name: f.clone(),
                        value: v.clone(),
                    });
                }
                for p in &r.pulses {
                    self.inbox.push_back(Event::FluentPulse { name: p.clone() });
                }
                match &r.failure {
                    Some(w) => self.done(job.thread, PrimitiveOutcome::Failure(w.clone())),
                    None => self.done(job.thread, PrimitiveOutcome::Success),
                }
                self.step(Event::Wakeup)
            }
        }
    }

    fn initial_state(&mut self, beliefs: &Beliefs) -> Result<(), ProjectError> {
        self.sampled = sample_world(self.world, beliefs, self.rng);
        self.record(Term::sym("start"), EventClass::Physical)?;
        let mut doors: Vec<_> = self.world.doors.iter().collect();
        doors.sort_by(|a, b| a.id.cmp(&b.id));
        for d in doors {
            let open = self.sampled.open[&d.id];
            let f = if open { "door-open" } else { "door-closed" };
            self.tl.assert_prop(Term::app(f, vec![Term::sym(&d.id)]));
            if !open {
                self.closed.insert(d.id.clone());
            }
        }
        let mut objects: Vec<_> = self.world.objects.iter().collect();
        objects.sort_by(|a, b| a.id.cmp(&b.id));
        for o in objects {
            self.tl.assert_prop(Term::app(
                "at",
                vec![Term::sym(&o.id), Term::sym(&o.location)],
            ));
            if let Some(c) = self.sampled.color.get(&o.id) {
                self.tl
                    .assert_prop(Term::app("color", vec![Term::sym(&o.id), Term::sym(c)]));
            }
        }
        self.tl
            .assert_prop(Term::app("travel-mode", vec![Term::sym(self.mode.name())]));
        if self.mode != TravelMode::Doorway {
            self.tl.assert_prop(term("obstacle-avoidance-with(sonar)"));
        }
        apply_effect_rules(
            &mut self.tl,
            &Term::sym("start"),
            &self.rules.effect_rules,
            self.rng,
        )?;
        let p = self.pos;
        self.tell_position(p)
    }

    fn exogenous(&mut self, c: ExoCandidate, lapse: bool) -> Result<(), ProjectError> {
        self.fired.insert((c.rule, c.bindings.clone()));
        let ends_leg = c.event.functor() == "end"
            && c.event
                .args()
                .first()
                .is_some_and(|a| a.functor() == "follow-path");
        let class = if ends_leg {
            EventClass::Computational
        } else {
            EventClass::Physical
        };
        self.record(c.event.clone(), class)?;
        if lapse {
            expire_persists(&mut self.tl);
        }
        self.apply(c.event.clone())?;
        let ours = ends_leg
            && self
                .nav
                .as_ref()
                .is_some_and(|n| c.event.args()[0].args().get(3) == Some(&Term::sym(&n.id)));
        if ours {
            self.reach_entry()
        } else {
            self.step(Event::Wakeup)
        }
    }

    fn partial(&self) -> Projection {
        Projection {
            timeline: self.tl.clone(),
            reschedules: self.reschedules,
            finished: self.finished,
            end_time: self.now,
            position: self.position(),
            sampled: self.sampled.values.clone(),
        }
    }

    fn run(&mut self) -> Result<(), ProjectError> {
        while !self.finished {
            // prune immediate firings whose condition no longer holds
            let enabled: BTreeSet<(usize, Bindings)> =
                enabled_exogenous(&self.tl, &self.rules.exo_rules)
                    .into_iter()
                    .map(|c| (c.rule, c.bindings))
                    .collect();
            self.fired.retain(|k| enabled.contains(k));

            let expiry = self.tl.next_expiry().map(|(t, _)| t);
            let job = self
                .jobs
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.t.total_cmp(&b.1.t).then(a.1.order.cmp(&b.1.order)))
                .map(|(i, j)| (j.t, i));
            let t_next = [expiry, job.map(|j| j.0)]
                .into_iter()
                .flatten()
                .fold(f64::INFINITY, f64::min);
            let window_end = t_next.min(self.cfg.horizon);
            let exo = predict_next_exogenous(
                &self.tl,
                &self.rules.exo_rules,
                self.now,
                window_end.max(self.now),
                &self.fired,
                self.rng,
            );
            // candidates: (date, class rank, kind)
            let mut best: Option<(f64, EventClass, u8)> = None;
            let mut offer = |t: f64, c: EventClass, k: u8| {
                if best.is_none_or(|(bt, bc, bk)| (t, c, k) < (bt, bc, bk)) {
                    best = Some((t, c, k));
                }
            };
            if let Some((t, _)) = &exo {
                offer(*t, EventClass::Physical, 0);
            }
            if let Some(t) = expiry {
                offer(t, EventClass::Computational, 1);
            }
            if let Some((t, _)) = job {
                offer(t, EventClass::Physical, 2);
            }
            let Some((t, _, kind)) = best else {
                return Err(ProjectError::HorizonExceeded(Box::new(self.partial())));
            };
            if t > self.cfg.horizon {
                self.now = self.now.max(self.cfg.horizon);
                return Err(ProjectError::HorizonExceeded(Box::new(self.partial())));
            }
            debug_assert!(t + 1e-9 >= self.now, "earliest event precedes now");
            self.now = t.max(self.now);
            match kind {
                0 => {
                    let (_, c) = exo.expect("offered");
                    self.exogenous(c, false)?;
                }
                1 => {
                    // a lapse that enables an immediate rule belongs to
                    // that rule's occurrence
                    let lapsing = self.tl.expiring_by(self.now);
                    let view = Lapsed {
                        tl: &self.tl,
                        hidden: &lapsing,
                    };
                    let absorb = enabled_exogenous(&view, &self.rules.exo_rules)
                        .into_iter()
                        .find(|c| {
                            c.spacing < IMMEDIATE_SPACING
                                && !self.fired.contains(&(c.rule, c.bindings.clone()))
                        });
                    match absorb {
                        Some(c) => self.exogenous(c, true)?,
                        None => {
                            let (_, p) = self.tl.next_expiry().expect("offered");
                            self.record(Term::app("lapse", vec![p]), EventClass::Computational)?;
                            expire_persists(&mut self.tl);
                        }
                    }
                }
                _ => {
                    let (_, i) = job.expect("offered");
                    let j = self.jobs.remove(i);
                    self.finish_job(j)?;
                }
            }
        }
        Ok(())
    }
}

/// Project `plan` from the world's start position. Beliefs are sampled
/// once at start; the timeline ends when the plan finishes.
pub fn project_plan<R: Rng + ?Sized>(
    plan: &Plan,
    world: &World,
    beliefs: &Beliefs,
    rules: &RuleSet,
    cfg: &ProjectorConfig,
    rng: &mut R,
) -> Result<Projection, ProjectError> {
    let mut all = builtin_rules();
    all.extend(rules.clone());
    let modes = world.mode_regions();
    let mode = mode_at(&modes, world.start);
    let mut p = Projector {
        world,
        rules: all,
        cfg,
        rng,
        tl: Timeline::new(),
        interp: InterpreterState::new(plan.clone()),
        now: 0.0,
        pos: world.start,
        mode,
        modes,
        nav: None,
        jobs: Vec::new(),
        job_order: 0,
        inbox: VecDeque::new(),
        fired: BTreeSet::new(),
        nav_count: 0,
        reschedules: 0,
        finished: false,
        sampled: Sampled {
            open: BTreeMap::new(),
            color: BTreeMap::new(),
            values: BTreeMap::new(),
        },
        closed: BTreeSet::new(),
    };
    p.initial_state(beliefs)?;
    p.run()?;
    Ok(p.partial())
}

/// Door fluent the estimate-door-angle model sets for `door`.
pub fn door_open_fluent(door: &str) -> String {
    door_fluent(door)
}
