//! Probabilistic hybrid automaton with linear flows. Modes fix a motion
//! target, a heading perturbation and a travel mode; edges carry a jump
//! condition and dyadic successor ranges.
//!
//! `unfold` builds the automaton of a plan by exploring every combination
//! of blocked conditions and primitive completions from the start state.

use crate::fluents::{compile_to_region, Value, ROBOT_X, ROBOT_Y};
use crate::geom::{path_region_profile, point_in_region, Point, Polyline, Region};
use crate::lang::{
    print_condition, Event, InterpError, InterpreterState, PendingKind, Plan, PrimitiveAction,
    PrimitiveOutcome, ThreadId, TravelMode,
};
use crate::rules::random_number;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Nominal speeds per travel mode, cm/s.
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

    pub fn validate(&self) -> bool {
        [self.office, self.doorway, self.hallway]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FlowSpec {
    /// Straight motion toward `target`, heading rotated by `rotation`
    /// degrees counter-clockwise.
    Toward {
        target: Point,
        rotation: f64,
    },
    Rest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlMode {
    pub id: String,
    pub flow: FlowSpec,
    pub travel_mode: TravelMode,
    /// Interpreter summary used to replay mode sequences.
    pub signature: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum JumpCondition {
    Region {
        region: Region,
    },
    /// The robot has reached or passed the line through `target`
    /// perpendicular to the current segment.
    Arrival {
        target: Point,
    },
    /// Not expressible over positions; evaluated by the interpreter.
    Network {
        text: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Trigger {
    Wait { thread: ThreadId },
    Primitive { thread: ThreadId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Successor {
    pub mode: usize,
    pub lo: u32,
    pub hi: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpEdge {
    pub id: String,
    pub from: usize,
    pub label: String,
    pub condition: JumpCondition,
    pub trigger: Trigger,
    /// Ranges are over [1, 2^bits].
    pub bits: u32,
    pub successors: Vec<Successor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridAutomaton {
    pub start: Point,
    pub speeds: Speeds,
    pub modes: Vec<ControlMode>,
    pub edges: Vec<JumpEdge>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AutomatonError {
    #[error("time {t} precedes the anchor {t0}")]
    TimeBeforeAnchor { t: f64, t0: f64 },
    #[error("cannot unfold: {0}")]
    Unsupported(String),
    #[error("unfold exceeds {0} modes")]
    TooLarge(usize),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error("bad probabilities: {0}")]
    Quantize(String),
}

/// Continuous state between jumps. `seg_start` is where the current motion
/// segment began; the heading is fixed per segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutomatonState {
    pub mode: usize,
    pub t0: f64,
    pub vals0: Point,
    pub seg_start: Point,
    pub velocity: Point,
}

pub fn state_var_vals(s: &AutomatonState, t: f64) -> Result<Point, AutomatonError> {
    if t < s.t0 {
        return Err(AutomatonError::TimeBeforeAnchor { t, t0: s.t0 });
    }
    Ok(s.vals0 + s.velocity * (t - s.t0))
}

/// Velocity of `flow` in a segment that started at `seg_start`.
pub fn flow_velocity(flow: &FlowSpec, seg_start: Point, speed: f64) -> Point {
    match flow {
        FlowSpec::Rest => Point::new(0.0, 0.0),
        FlowSpec::Toward { target, rotation } => {
            let d = *target - seg_start;
            let n = d.norm();
            if n < 1e-9 {
                return Point::new(0.0, 0.0);
            }
            (d * (speed / n)).rotate(rotation.to_radians())
        }
    }
}

impl HybridAutomaton {
    pub fn mode_id(i: usize) -> String {
        format!("cm{i}")
    }

    /// Outgoing edge indices per mode.
    pub fn outgoing(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.modes.len()];
        for (i, e) in self.edges.iter().enumerate() {
            if e.from < out.len() {
                out[e.from].push(i);
            }
        }
        out
    }

    pub fn is_leaf(&self, mode: usize) -> bool {
        !self.edges.iter().any(|e| e.from == mode)
    }

    pub fn initial_state(&self) -> AutomatonState {
        let v = flow_velocity(
            &self.modes[0].flow,
            self.start,
            self.speeds.of(self.modes[0].travel_mode),
        );
        AutomatonState {
            mode: 0,
            t0: 0.0,
            vals0: self.start,
            seg_start: self.start,
            velocity: v,
        }
    }

    /// State after jumping along `edge` into `to` at time `t`.
    pub fn jump(&self, s: &AutomatonState, edge: usize, to: usize, t: f64) -> AutomatonState {
        let e = &self.edges[edge];
        let mut pos = s.vals0 + s.velocity * (t - s.t0);
        let mut seg_start = s.seg_start;
        if let JumpCondition::Arrival { target } = e.condition {
            pos = target;
            seg_start = target;
        }
        let new_target = match (&self.modes[e.from].flow, &self.modes[to].flow) {
            (FlowSpec::Toward { target: a, .. }, FlowSpec::Toward { target: b, .. }) => a != b,
            (_, FlowSpec::Toward { .. }) => true,
            _ => false,
        };
        if new_target {
            seg_start = pos;
        }
        let m = &self.modes[to];
        AutomatonState {
            mode: to,
            t0: t,
            vals0: pos,
            seg_start,
            velocity: flow_velocity(&m.flow, seg_start, self.speeds.of(m.travel_mode)),
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut v = validate_edges(&self.edges, self.modes.len());
        if self.modes.is_empty() {
            v.push(Violation::NoModes);
        }
        v
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("automaton serializes")
    }
}

/// Does `cond` hold at `p` within a segment that started at `seg_start`?
pub fn condition_holds(cond: &JumpCondition, p: Point, seg_start: Point) -> bool {
    match cond {
        JumpCondition::Region { region } => point_in_region(p, region),
        JumpCondition::Arrival { target } => {
            let d = *target - seg_start;
            d.norm() < 1e-9 || (p - *target).dot(d) >= 0.0
        }
        JumpCondition::Network { .. } => false,
    }
}

/// Earliest time at or after `s.t0` at which `cond` holds along the flow,
/// looking no further than `until`.
pub fn first_satisfaction(cond: &JumpCondition, s: &AutomatonState, until: f64) -> Option<f64> {
    let speed = s.velocity.norm();
    match cond {
        JumpCondition::Network { .. } => None,
        JumpCondition::Arrival { target } => {
            let d = *target - s.seg_start;
            if d.norm() < 1e-9 {
                return Some(s.t0);
            }
            let g = (s.vals0 - *target).dot(d);
            if g >= 0.0 {
                return Some(s.t0);
            }
            let rate = s.velocity.dot(d);
            if rate <= 0.0 {
                return None;
            }
            let t = s.t0 - g / rate;
            (t <= until).then_some(t)
        }
        JumpCondition::Region { region } => {
            if speed < 1e-12 || until <= s.t0 {
                return point_in_region(s.vals0, region).then_some(s.t0);
            }
            let end = s.vals0 + s.velocity * (until - s.t0);
            let Ok(path) = Polyline::new(vec![s.vals0, end]) else {
                return point_in_region(s.vals0, region).then_some(s.t0);
            };
            let (inside, crossings) = path_region_profile(&path, region);
            if inside {
                return Some(s.t0);
            }
            crossings
                .iter()
                .find(|c| c.kind == crate::geom::CrossingKind::Enter)
                .map(|c| s.t0 + c.arclength / speed)
        }
    }
}

/// Uniform draw on [1, 2^bits] mapped through the successor ranges.
pub fn sample_successor<R: Rng + ?Sized>(edge: &JumpEdge, rng: &mut R) -> usize {
    let n = random_number(1u64 << edge.bits, rng).expect("power of two") as u32;
    edge.successors
        .iter()
        .find(|s| s.lo <= n && n <= s.hi)
        .or(edge.successors.last())
        .expect("edge has successors")
        .mode
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    NoModes,
    NoSuccessors { edge: String },
    TooManyBits { edge: String, bits: u32 },
    EmptyRange { edge: String, lo: u32, hi: u32 },
    Overlap { edge: String, at: u32 },
    Gap { edge: String, from: u32, to: u32 },
    UnknownMode { edge: String, mode: usize },
}

pub const MAX_BITS: u32 = 16;

/// Check that every edge's ranges partition [1, 2^bits] and refer to
/// existing modes.
pub fn validate_edges(edges: &[JumpEdge], n_modes: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    for e in edges {
        let id = || e.id.clone();
        if e.from >= n_modes {
            out.push(Violation::UnknownMode {
                edge: id(),
                mode: e.from,
            });
        }
        if e.successors.is_empty() {
            out.push(Violation::NoSuccessors { edge: id() });
            continue;
        }
        if e.bits > MAX_BITS {
            out.push(Violation::TooManyBits {
                edge: id(),
                bits: e.bits,
            });
            continue;
        }
        let top = 1u32 << e.bits;
        let mut rs: Vec<&Successor> = e.successors.iter().collect();
        rs.sort_by_key(|s| (s.lo, s.hi));
        let mut next = 1;
        for s in rs {
            if s.mode >= n_modes {
                out.push(Violation::UnknownMode {
                    edge: id(),
                    mode: s.mode,
                });
            }
            if s.lo > s.hi || s.lo == 0 || s.hi > top {
                out.push(Violation::EmptyRange {
                    edge: id(),
                    lo: s.lo,
                    hi: s.hi,
                });
                continue;
            }
            if s.lo < next {
                out.push(Violation::Overlap {
                    edge: id(),
                    at: s.lo,
                });
            } else if s.lo > next {
                out.push(Violation::Gap {
                    edge: id(),
                    from: next,
                    to: s.lo - 1,
                });
            }
            next = next.max(s.hi + 1);
        }
        if next <= top {
            out.push(Violation::Gap {
                edge: id(),
                from: next,
                to: top,
            });
        }
    }
    out
}

/// Round probabilities to a common dyadic denominator 2^bits (bits <= 16)
/// and return `(bits, counts)`. Counts sum to 2^bits; zero counts mark
/// outcomes that rounded away.
pub fn quantize(probs: &[f64]) -> Result<(u32, Vec<u32>), AutomatonError> {
    let total: f64 = probs.iter().sum();
    if probs.is_empty() || probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || total <= 0.0 {
        return Err(AutomatonError::Quantize(format!("{probs:?}")));
    }
    let full = 1u64 << MAX_BITS;
    let exact: Vec<f64> = probs.iter().map(|p| p / total * full as f64).collect();
    let mut counts: Vec<u64> = exact.iter().map(|x| x.round() as u64).collect();
    if exact
        .iter()
        .zip(&counts)
        .any(|(x, c)| (x - *c as f64).abs() > 1e-6)
    {
        log::warn!("probabilities {probs:?} are not dyadic; rounded to multiples of 2^-16");
    }
    let sum: u64 = counts.iter().sum();
    let big = (0..counts.len()).max_by_key(|&i| counts[i]).unwrap_or(0);
    if sum > full {
        counts[big] -= sum - full;
    } else {
        counts[big] += full - sum;
    }
    let mut bits = MAX_BITS;
    while bits > 0 && counts.iter().all(|c| c % 2 == 0) {
        counts.iter_mut().for_each(|c| *c /= 2);
        bits -= 1;
    }
    Ok((bits, counts.into_iter().map(|c| c as u32).collect()))
}

/// Contiguous ranges for quantized counts; zero counts get no range.
pub fn ranges(counts: &[u32]) -> Vec<Option<(u32, u32)>> {
    let mut lo = 1;
    counts
        .iter()
        .map(|&c| {
            if c == 0 {
                return None;
            }
            let r = (lo, lo + c - 1);
            lo += c;
            Some(r)
        })
        .collect()
}

/// Discrete heading perturbation applied whenever a new motion segment
/// starts: (rotation in degrees, probability).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionNoise {
    pub outcomes: Vec<(f64, f64)>,
}

impl Default for MotionNoise {
    fn default() -> Self {
        MotionNoise {
            outcomes: vec![(0.0, 0.75), (8.0, 0.25)],
        }
    }
}

impl MotionNoise {
    pub fn none() -> Self {
        MotionNoise {
            outcomes: vec![(0.0, 1.0)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldConfig {
    pub speeds: Speeds,
    pub noise: MotionNoise,
    pub max_modes: usize,
    /// Stop expanding below this depth; the frontier modes become leaves.
    pub max_depth: usize,
}

impl Default for UnfoldConfig {
    fn default() -> Self {
        UnfoldConfig {
            speeds: Speeds::default(),
            noise: MotionNoise::default(),
            max_modes: 10_000,
            max_depth: usize::MAX,
        }
    }
}

/// Run instantaneous primitives to completion, tracking the travel mode.
fn settle(interp: &mut InterpreterState, travel: &mut TravelMode) -> Result<(), AutomatonError> {
    loop {
        let instant = interp
            .running_primitives()
            .into_iter()
            .find(|(_, a)| !a.is_motion());
        let Some((thread, action)) = instant else {
            return Ok(());
        };
        match action {
            PrimitiveAction::SetNavigationMode(m) => *travel = m,
            PrimitiveAction::PickUp(_) | PrimitiveAction::PutDown(_) => {}
            other => {
                return Err(AutomatonError::Unsupported(format!(
                    "{} has no jump model",
                    other.term()
                )))
            }
        }
        interp.step(Event::PrimitiveDone {
            thread,
            outcome: PrimitiveOutcome::Success,
        })?;
    }
}

fn motion(interp: &InterpreterState) -> Result<Option<(ThreadId, Point)>, AutomatonError> {
    match interp
        .running_primitives()
        .into_iter()
        .find(|(_, a)| a.is_motion())
    {
        None => Ok(None),
        Some((t, PrimitiveAction::MoveTo(p))) => Ok(Some((t, p))),
        Some((_, a)) => Err(AutomatonError::Unsupported(format!(
            "{} needs a world map",
            a.term()
        ))),
    }
}

fn signature(interp: &InterpreterState, travel: TravelMode) -> String {
    if interp.is_finished() {
        return format!("{travel}|finished");
    }
    let prims: Vec<String> = interp
        .running_primitives()
        .iter()
        .map(|(t, a)| format!("{t}:{}", a.term()))
        .collect();
    let waits: Vec<String> = interp
        .pending_conditions()
        .iter()
        .map(|c| format!("{}:{}", c.thread, c.network.output))
        .collect();
    format!("{travel}|{}|{}", prims.join(","), waits.join(","))
}

/// Interpreter with unknown position: positional comparisons are false
/// until a jump forces them.
fn fresh(plan: &Plan) -> Result<(InterpreterState, TravelMode), AutomatonError> {
    let mut interp = InterpreterState::new(plan.clone());
    interp.set_fluent(ROBOT_X, Value::Real(f64::NAN));
    interp.set_fluent(ROBOT_Y, Value::Real(f64::NAN));
    interp.step(Event::Wakeup)?;
    let mut travel = TravelMode::Office;
    settle(&mut interp, &mut travel)?;
    Ok((interp, travel))
}

/// Apply the interpreter side of a jump.
fn fire(
    interp: &mut InterpreterState,
    travel: &mut TravelMode,
    trig: Trigger,
) -> Result<(), AutomatonError> {
    match trig {
        Trigger::Wait { thread } => {
            interp.force_wait(thread)?;
            interp.step(Event::Wakeup)?;
        }
        Trigger::Primitive { thread } => {
            interp.step(Event::PrimitiveDone {
                thread,
                outcome: PrimitiveOutcome::Success,
            })?;
        }
    }
    settle(interp, travel)
}

struct Node {
    mode: usize,
    interp: InterpreterState,
    travel: TravelMode,
    depth: usize,
}

/// Unfold `plan` started at `start` into a tree-shaped automaton. Every
/// combination of condition satisfactions and primitive completions is a
/// branch, whether or not the geometry can realize it. Modes and edges are
/// numbered breadth-first.
pub fn unfold(
    plan: &Plan,
    start: Point,
    cfg: &UnfoldConfig,
) -> Result<HybridAutomaton, AutomatonError> {
    let (bits, counts) = {
        let probs: Vec<f64> = cfg.noise.outcomes.iter().map(|o| o.1).collect();
        quantize(&probs)?
    };
    let noise_ranges = ranges(&counts);
    let (interp, travel) = fresh(plan)?;
    let flow0 = match motion(&interp)? {
        Some((_, target)) => FlowSpec::Toward {
            target,
            rotation: 0.0,
        },
        None => FlowSpec::Rest,
    };
    let mut aut = HybridAutomaton {
        start,
        speeds: cfg.speeds,
        modes: vec![ControlMode {
            id: HybridAutomaton::mode_id(0),
            flow: flow0,
            travel_mode: travel,
            signature: signature(&interp, travel),
        }],
        edges: Vec::new(),
    };
    let mut queue = VecDeque::from([Node {
        mode: 0,
        interp,
        travel,
        depth: 0,
    }]);
    while let Some(node) = queue.pop_front() {
        if node.depth >= cfg.max_depth || node.interp.is_finished() {
            continue;
        }
        let mut conds = Vec::new();
        for c in node.interp.pending_conditions() {
            if c.kind == PendingKind::Whenever {
                return Err(AutomatonError::Unsupported(
                    "whenever inside an unfolded plan".into(),
                ));
            }
            let condition = match compile_to_region(&c.network) {
                Ok(region) => JumpCondition::Region { region },
                Err(_) => JumpCondition::Network {
                    text: print_condition(&c.network),
                },
            };
            conds.push((
                c.network.output.clone(),
                condition,
                Trigger::Wait { thread: c.thread },
            ));
        }
        if let Some((thread, target)) = motion(&node.interp)? {
            let label = PrimitiveAction::MoveTo(target).term().to_string();
            conds.push((
                label,
                JumpCondition::Arrival { target },
                Trigger::Primitive { thread },
            ));
        }
        let parent_flow = aut.modes[node.mode].flow.clone();
        for (label, condition, trigger) in conds {
            let mut interp = node.interp.clone();
            let mut travel = node.travel;
            fire(&mut interp, &mut travel, trigger)?;
            let next_target = motion(&interp)?.map(|m| m.1);
            let continuing = matches!((&parent_flow, next_target),
                (FlowSpec::Toward { target, .. }, Some(t)) if *target == t
                    && !matches!(condition, JumpCondition::Arrival { .. }));
            let options: Vec<(FlowSpec, u32, u32)> = match next_target {
                None => vec![(FlowSpec::Rest, 1, 1)],
                Some(target) if continuing => {
                    let FlowSpec::Toward { rotation, .. } = parent_flow else {
                        unreachable!()
                    };
                    vec![(FlowSpec::Toward { target, rotation }, 1, 1)]
                }
                Some(target) => cfg
                    .noise
                    .outcomes
                    .iter()
                    .zip(&noise_ranges)
                    .filter_map(|(o, r)| {
                        r.map(|(lo, hi)| {
                            (
                                FlowSpec::Toward {
                                    target,
                                    rotation: o.0,
                                },
                                lo,
                                hi,
                            )
                        })
                    })
                    .collect(),
            };
            let edge_bits = if options.len() == 1 { 0 } else { bits };
            let mut successors = Vec::new();
            for (flow, lo, hi) in options {
                let id = aut.modes.len();
                if id >= cfg.max_modes {
                    return Err(AutomatonError::TooLarge(cfg.max_modes));
                }
                aut.modes.push(ControlMode {
                    id: HybridAutomaton::mode_id(id),
                    flow,
                    travel_mode: travel,
                    signature: signature(&interp, travel),
                });
                let (lo, hi) = if edge_bits == 0 { (1, 1) } else { (lo, hi) };
                successors.push(Successor { mode: id, lo, hi });
                queue.push_back(Node {
                    mode: id,
                    interp: interp.clone(),
                    travel,
                    depth: node.depth + 1,
                });
            }
            aut.edges.push(JumpEdge {
                id: format!("e{}", aut.edges.len() + 1),
                from: node.mode,
                label,
                condition,
                trigger,
                bits: edge_bits,
                successors,
            });
        }
    }
    Ok(aut)
}

/// The automaton seen from the interpreter's current state: the root mode
/// and one edge per blocked condition and running motion primitive.
pub fn build_automaton_from_state(
    plan: &Plan,
    start: Point,
    cfg: &UnfoldConfig,
) -> Result<HybridAutomaton, AutomatonError> {
    unfold(
        plan,
        start,
        &UnfoldConfig {
            max_depth: 1,
            ..cfg.clone()
        },
    )
}

/// One jump of a projected run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub t: f64,
    pub edge: usize,
    pub from: usize,
    pub to: usize,
    pub pos: Point,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AutomatonRun {
    pub jumps: Vec<JumpRecord>,
    pub end_mode: usize,
    pub end_time: f64,
    pub horizon_exceeded: bool,
}

impl AutomatonRun {
    pub fn mode_sequence(&self) -> Vec<usize> {
        std::iter::once(0)
            .chain(self.jumps.iter().map(|j| j.to))
            .collect()
    }

    pub fn mode_sequence_key(&self, aut: &HybridAutomaton) -> String {
        self.mode_sequence()
            .iter()
            .map(|&m| aut.modes[m].id.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplayError {
    #[error("jump {index}: edge {edge} does not leave mode {mode}")]
    NotOutgoing {
        index: usize,
        edge: String,
        mode: String,
    },
    #[error("jump {index}: mode {to} is not a successor of {edge}")]
    NotSuccessor {
        index: usize,
        edge: String,
        to: String,
    },
    #[error("jump {index}: interpreter state {got} differs from mode {mode} ({want})")]
    Diverged {
        index: usize,
        mode: String,
        got: String,
        want: String,
    },
    #[error("jump {index}: condition of {edge} does not hold at ({x}, {y})")]
    ConditionFalse {
        index: usize,
        edge: String,
        x: f64,
        y: f64,
    },
    #[error("run ends in {0}, which is not a leaf")]
    NotLeaf(String),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
}

/// Check that a run follows a root-to-leaf path of `aut`, replaying a
/// fresh interpreter alongside and comparing its state at every mode.
pub fn replay(plan: &Plan, aut: &HybridAutomaton, run: &AutomatonRun) -> Result<(), ReplayError> {
    let (mut interp, mut travel) = fresh(plan)?;
    let check = |i: usize, m: usize, interp: &InterpreterState, travel: TravelMode| {
        let got = signature(interp, travel);
        if got != aut.modes[m].signature {
            return Err(ReplayError::Diverged {
                index: i,
                mode: aut.modes[m].id.clone(),
                got,
                want: aut.modes[m].signature.clone(),
            });
        }
        Ok(())
    };
    check(0, 0, &interp, travel)?;
    let mut cur = 0;
    let mut state = aut.initial_state();
    for (i, j) in run.jumps.iter().enumerate() {
        let e = &aut.edges[j.edge];
        if e.from != cur {
            return Err(ReplayError::NotOutgoing {
                index: i,
                edge: e.id.clone(),
                mode: aut.modes[cur].id.clone(),
            });
        }
        if !e.successors.iter().any(|s| s.mode == j.to) {
            return Err(ReplayError::NotSuccessor {
                index: i,
                edge: e.id.clone(),
                to: aut.modes[j.to].id.clone(),
            });
        }
        // the jump date may lag behind satisfaction for region edges; the
        // condition must still hold when the jump is taken
        if !condition_holds(&e.condition, j.pos, state.seg_start)
            && !near_boundary(&e.condition, j.pos)
        {
            return Err(ReplayError::ConditionFalse {
                index: i,
                edge: e.id.clone(),
                x: j.pos.x,
                y: j.pos.y,
            });
        }
        fire(&mut interp, &mut travel, e.trigger)?;
        check(i + 1, j.to, &interp, travel)?;
        state = aut.jump(&state, j.edge, j.to, j.t);
        cur = j.to;
    }
    if !aut.is_leaf(cur) {
        return Err(ReplayError::NotLeaf(aut.modes[cur].id.clone()));
    }
    Ok(())
}

/// Region jumps are taken at the crossing point, which may sit on the
/// boundary within rounding.
fn near_boundary(cond: &JumpCondition, p: Point) -> bool {
    let JumpCondition::Region { region } = cond else {
        return false;
    };
    [(1e-6, 0.0), (-1e-6, 0.0), (0.0, 1e-6), (0.0, -1e-6)]
        .iter()
        .any(|(dx, dy)| point_in_region(Point::new(p.x + dx, p.y + dy), region))
}
