//! Thread-tree interpreter. Each plan node instance is a task; primitive
//! tasks are the threads that the projector (or a robot) executes.

use super::valve::{Acquisition, ValveTable};
use super::{Plan, PrimitiveAction};
use crate::fluents::{
    eval_network, Bindings, FluentError, FluentNetwork, Gate, Value, ROBOT_X, ROBOT_Y,
};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

pub type ThreadId = u64;

const LOOP_CAP: u64 = 10_000;
const PASS_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub enum PrimitiveOutcome {
    Success,
    Failure(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Wakeup,
    FluentChange {
        name: String,
        value: Value,
    },
    /// Set a fluent true, let the plan react, then reset it to false.
    FluentPulse {
        name: String,
    },
    PrimitiveDone {
        thread: ThreadId,
        outcome: PrimitiveOutcome,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveRequest {
    pub thread: ThreadId,
    pub action: PrimitiveAction,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutput {
    pub started: Vec<PrimitiveRequest>,
    /// Running primitives that were aborted (killed or preempted).
    pub aborted: Vec<ThreadId>,
    pub pulses: Vec<String>,
    pub finished: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PendingKind {
    WaitFor,
    Whenever,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PendingCondition {
    pub thread: ThreadId,
    pub network: FluentNetwork,
    pub kind: PendingKind,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InterpError {
    #[error("deadlock: every live thread waits on a valve")]
    DeadlockDetected,
    #[error("no live thread {0}")]
    UnknownThread(ThreadId),
    #[error("thread {0} is not running a primitive")]
    NotRunning(ThreadId),
    #[error("plan does not reach quiescence")]
    Livelock,
    #[error(transparent)]
    Fluent(#[from] FluentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PrimState {
    Ready,
    Running,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Hold {
    Owned,
    Waiting,
    Suspended,
}

#[derive(Debug, Clone)]
struct ValveInfo {
    hold: Hold,
    interrupt: String,
}

#[derive(Debug, Clone)]
enum Kind {
    Seq {
        items: Vec<Plan>,
        idx: usize,
        child: Option<ThreadId>,
    },
    Par(Vec<ThreadId>),
    Try(Vec<ThreadId>),
    Loop {
        body: Plan,
        until: Option<FluentNetwork>,
        child: Option<ThreadId>,
    },
    WaitFor {
        net: FluentNetwork,
        forced: bool,
    },
    Whenever {
        net: FluentNetwork,
        body: Plan,
        child: Option<ThreadId>,
        last: bool,
    },
    Policy {
        policy: Option<ThreadId>,
        body: ThreadId,
    },
    Valve {
        valve: String,
        priority: i64,
        interrupt: String,
        body_plan: Plan,
        body: Option<ThreadId>,
    },
    Wrap(ThreadId),
    If {
        guard: FluentNetwork,
        then: Plan,
        child: Option<ThreadId>,
        decided: bool,
    },
    Prim {
        action: PrimitiveAction,
        state: PrimState,
    },
    Set {
        var: String,
        value: Value,
    },
    Taken,
}

impl Kind {
    fn children(&self) -> Vec<ThreadId> {
        match self {
            Kind::Seq { child, .. }
            | Kind::Loop { child, .. }
            | Kind::Whenever { child, .. }
            | Kind::If { child, .. }
            | Kind::Valve { body: child, .. } => child.iter().copied().collect(),
            Kind::Par(c) | Kind::Try(c) => c.clone(),
            Kind::Policy { policy, body } => policy.iter().copied().chain([*body]).collect(),
            Kind::Wrap(c) => vec![*c],
            Kind::WaitFor { .. } | Kind::Prim { .. } | Kind::Set { .. } | Kind::Taken => vec![],
        }
    }
}

#[derive(Debug, Clone)]
struct Task {
    parent: Option<ThreadId>,
    scope: Arc<Vec<(String, Gate)>>,
    name: Option<String>,
    kind: Kind,
}

#[derive(Debug, Clone)]
pub struct InterpreterState {
    plan: Plan,
    tasks: BTreeMap<ThreadId, Task>,
    root: Option<ThreadId>,
    next_id: ThreadId,
    fluents: BTreeMap<String, Value>,
    valves: ValveTable,
    holds: BTreeMap<ThreadId, ValveInfo>,
    started: bool,
    finished: bool,
    changed: bool,
    pulses: VecDeque<String>,
    out: StepOutput,
    outcomes: BTreeMap<ThreadId, PrimitiveOutcome>,
    /// Fluent being pulsed and the first task id spawned during the pulse;
    /// such tasks see the pulsed fluent as false.
    pulsing: Option<(String, ThreadId)>,
}

struct Masked<'a> {
    base: &'a BTreeMap<String, Value>,
    hidden: &'a str,
}

const FALSE: Value = Value::Bool(false);

impl Bindings for Masked<'_> {
    fn lookup(&self, id: &str) -> Option<&Value> {
        if id == self.hidden {
            Some(&FALSE)
        } else {
            self.base.get(id)
        }
    }
}

fn collect_inputs(p: &Plan, out: &mut BTreeSet<String>) {
    let mut net = |n: &FluentNetwork| n.root.inputs(out);
    match p {
        Plan::Loop { until: Some(u), .. } => net(u),
        Plan::WaitFor(n) => net(n),
        Plan::Whenever { cond, .. } => net(cond),
        Plan::If { guard, .. } => net(guard),
        Plan::WithLocalFluents { defs, .. } => defs.iter().for_each(|(_, g)| g.inputs(out)),
        Plan::WithValve { interrupt, .. } => {
            out.insert(interrupt.clone());
        }
        _ => {}
    }
    for c in p.children() {
        collect_inputs(c, out);
    }
}

impl InterpreterState {
    /// Fresh state. Every non-positional fluent the plan mentions starts false.
    pub fn new(plan: Plan) -> Self {
        let mut names = BTreeSet::new();
        collect_inputs(&plan, &mut names);
        let fluents = names
            .into_iter()
            .filter(|n| n != ROBOT_X && n != ROBOT_Y)
            .map(|n| (n, Value::Bool(false)))
            .collect();
        InterpreterState {
            plan,
            tasks: BTreeMap::new(),
            root: None,
            next_id: 1,
            fluents,
            valves: ValveTable::new(),
            holds: BTreeMap::new(),
            started: false,
            finished: false,
            changed: false,
            pulses: VecDeque::new(),
            out: StepOutput::default(),
            outcomes: BTreeMap::new(),
            pulsing: None,
        }
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn fluent(&self, name: &str) -> Option<&Value> {
        self.fluents.get(name)
    }

    pub fn fluents(&self) -> &BTreeMap<String, Value> {
        &self.fluents
    }

    /// Update a fluent without advancing any thread.
    pub fn set_fluent(&mut self, name: &str, value: Value) {
        self.fluents.insert(name.to_string(), value);
    }

    pub fn valve_owner(&self, valve: &str) -> Option<ThreadId> {
        self.valves.owner(valve)
    }

    pub fn outcome(&self, thread: ThreadId) -> Option<&PrimitiveOutcome> {
        self.outcomes.get(&thread)
    }

    pub fn live_tasks(&self) -> usize {
        self.tasks.len()
    }

    /// Names of the named subplans enclosing `thread`, innermost first.
    pub fn enclosing_names(&self, thread: ThreadId) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = Some(thread);
        while let Some(id) = cur {
            let Some(t) = self.tasks.get(&id) else { break };
            if let Some(n) = &t.name {
                out.push(n.clone());
            }
            cur = t.parent;
        }
        out
    }

    fn spawn(
        &mut self,
        plan: &Plan,
        parent: Option<ThreadId>,
        scope: Arc<Vec<(String, Gate)>>,
    ) -> ThreadId {
        let id = self.next_id;
        self.next_id += 1;
        self.changed = true;
        let resolve = |n: &FluentNetwork| {
            if scope.is_empty() {
                n.clone()
            } else {
                FluentNetwork {
                    output: n.output.clone(),
                    root: n.root.inline(&scope),
                }
            }
        };
        let mut name = None;
        let kind = match plan {
            Plan::Seq(items) => Kind::Seq {
                items: items.clone(),
                idx: 0,
                child: None,
            },
            Plan::Par(items) | Plan::TryInParallel(items) => {
                self.tasks.insert(
                    id,
                    Task {
                        parent,
                        scope: scope.clone(),
                        name: None,
                        kind: Kind::Taken,
                    },
                );
                let kids = items
                    .iter()
                    .map(|p| self.spawn(p, Some(id), scope.clone()))
                    .collect();
                if matches!(plan, Plan::Par(_)) {
                    Kind::Par(kids)
                } else {
                    Kind::Try(kids)
                }
            }
            Plan::Loop { body, until } => Kind::Loop {
                body: (**body).clone(),
                until: until.as_ref().map(resolve),
                child: None,
            },
            Plan::WaitFor(n) => Kind::WaitFor {
                net: resolve(n),
                forced: false,
            },
            Plan::Whenever { cond, body } => Kind::Whenever {
                net: resolve(cond),
                body: (**body).clone(),
                child: None,
                last: false,
            },
            Plan::WithPolicy { policy, body } => {
                self.tasks.insert(
                    id,
                    Task {
                        parent,
                        scope: scope.clone(),
                        name: None,
                        kind: Kind::Taken,
                    },
                );
                let p = self.spawn(policy, Some(id), scope.clone());
                let b = self.spawn(body, Some(id), scope.clone());
                Kind::Policy {
                    policy: Some(p),
                    body: b,
                }
            }
            Plan::WithValve {
                valve,
                priority,
                interrupt,
                body,
            } => Kind::Valve {
                valve: valve.clone(),
                priority: *priority,
                interrupt: interrupt.clone(),
                body_plan: (**body).clone(),
                body: None,
            },
            Plan::WithLocalFluents { defs, body } => {
                let mut inner = (*scope).clone();
                for (n, g) in defs {
                    let g = g.inline(&inner);
                    inner.push((n.clone(), g));
                }
                self.tasks.insert(
                    id,
                    Task {
                        parent,
                        scope: scope.clone(),
                        name: None,
                        kind: Kind::Taken,
                    },
                );
                Kind::Wrap(self.spawn(body, Some(id), Arc::new(inner)))
            }
            Plan::Named { name: n, body } => {
                name = Some(n.clone());
                self.tasks.insert(
                    id,
                    Task {
                        parent,
                        scope: scope.clone(),
                        name: name.clone(),
                        kind: Kind::Taken,
                    },
                );
                Kind::Wrap(self.spawn(body, Some(id), scope.clone()))
            }
            Plan::If { guard, then } => Kind::If {
                guard: resolve(guard),
                then: (**then).clone(),
                child: None,
                decided: false,
            },
            Plan::Primitive(a) => Kind::Prim {
                action: a.clone(),
                state: PrimState::Ready,
            },
            Plan::SetVar { var, value } => Kind::Set {
                var: var.clone(),
                value: value.clone(),
            },
        };
        self.tasks.insert(
            id,
            Task {
                parent,
                scope,
                name,
                kind,
            },
        );
        id
    }

    fn eval(&self, id: ThreadId, n: &FluentNetwork) -> Result<bool, InterpError> {
        match &self.pulsing {
            Some((name, mark)) if id >= *mark => Ok(eval_network(
                n,
                &Masked {
                    base: &self.fluents,
                    hidden: name,
                },
            )?),
            _ => Ok(eval_network(n, &self.fluents)?),
        }
    }

    fn kill(&mut self, id: ThreadId) {
        let Some(task) = self.tasks.remove(&id) else {
            return;
        };
        for c in task.kind.children() {
            self.kill(c);
        }
        match task.kind {
            Kind::Prim {
                state: PrimState::Running,
                ..
            } => self.out.aborted.push(id),
            Kind::Valve { valve, .. } => self.release(id, &valve),
            _ => {}
        }
        self.changed = true;
    }

    fn release(&mut self, id: ThreadId, valve: &str) {
        self.holds.remove(&id);
        if let Some(next) = self.valves.release(id, valve) {
            if let Some(info) = self.holds.get_mut(&next) {
                info.hold = Hold::Owned;
            }
        }
        self.changed = true;
    }

    /// Preempted owner: its running primitives revert to ready and will be
    /// reissued on regrant; its interrupt fluent is pulsed.
    fn suspend(&mut self, owner: ThreadId) {
        let Some(info) = self.holds.get_mut(&owner) else {
            return;
        };
        info.hold = Hold::Suspended;
        let interrupt = info.interrupt.clone();
        let mut stack = vec![owner];
        while let Some(t) = stack.pop() {
            let Some(task) = self.tasks.get_mut(&t) else {
                continue;
            };
            if let Kind::Prim { state, .. } = &mut task.kind {
                if *state == PrimState::Running {
                    *state = PrimState::Ready;
                    self.out.aborted.push(t);
                }
            }
            stack.extend(task.kind.children());
        }
        self.pulses.push_back(interrupt);
        self.changed = true;
    }

    fn valve_blocked(&self, id: ThreadId) -> bool {
        let mut cur = self.tasks.get(&id).and_then(|t| t.parent);
        while let Some(a) = cur {
            if let Some(info) = self.holds.get(&a) {
                if info.hold != Hold::Owned {
                    return true;
                }
            }
            cur = self.tasks.get(&a).and_then(|t| t.parent);
        }
        false
    }

    fn advance(&mut self, id: ThreadId) -> Result<bool, InterpError> {
        let (mut kind, scope) = match self.tasks.get_mut(&id) {
            Some(t) => (std::mem::replace(&mut t.kind, Kind::Taken), t.scope.clone()),
            None => return Ok(false),
        };
        let r = self.advance_kind(id, &mut kind, &scope);
        if let Some(t) = self.tasks.get_mut(&id) {
            t.kind = kind;
        }
        r
    }

    fn advance_kind(
        &mut self,
        id: ThreadId,
        kind: &mut Kind,
        scope: &Arc<Vec<(String, Gate)>>,
    ) -> Result<bool, InterpError> {
        match kind {
            Kind::Seq { items, idx, child } => loop {
                if let Some(c) = *child {
                    if !self.advance(c)? {
                        return Ok(false);
                    }
                    self.kill(c);
                    *child = None;
                    *idx += 1;
                }
                if *idx >= items.len() {
                    return Ok(true);
                }
                *child = Some(self.spawn(&items[*idx], Some(id), scope.clone()));
            },
            Kind::Par(children) => {
                let mut i = 0;
                while i < children.len() {
                    if self.advance(children[i])? {
                        self.kill(children[i]);
                        children.remove(i);
                    } else {
                        i += 1;
                    }
                }
                Ok(children.is_empty())
            }
            Kind::Try(children) => {
                for i in 0..children.len() {
                    if self.advance(children[i])? {
                        for c in children.drain(..) {
                            self.kill(c);
                        }
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Kind::Loop { body, until, child } => {
                let mut iterations = 0;
                loop {
                    let c = match *child {
                        Some(c) => c,
                        None => {
                            let c = self.spawn(body, Some(id), scope.clone());
                            *child = Some(c);
                            c
                        }
                    };
                    if !self.advance(c)? {
                        return Ok(false);
                    }
                    self.kill(c);
                    *child = None;
                    if let Some(u) = until {
                        if self.eval(id, u)? {
                            return Ok(true);
                        }
                    }
                    iterations += 1;
                    if iterations > LOOP_CAP {
                        return Err(InterpError::Livelock);
                    }
                }
            }
            Kind::WaitFor { net, forced } => Ok(*forced || self.eval(id, net)?),
            Kind::Whenever {
                net,
                body,
                child,
                last,
            } => {
                if let Some(c) = *child {
                    if self.advance(c)? {
                        self.kill(c);
                        *child = None;
                    }
                }
                let v = self.eval(id, net)?;
                if v && !*last && child.is_none() {
                    let c = self.spawn(body, Some(id), scope.clone());
                    *child = Some(c);
                    if self.advance(c)? {
                        self.kill(c);
                        *child = None;
                    }
                }
                *last = v;
                Ok(false)
            }
            Kind::Policy { policy, body } => {
                if let Some(p) = *policy {
                    if self.advance(p)? {
                        self.kill(p);
                        *policy = None;
                    }
                }
                if self.advance(*body)? {
                    if let Some(p) = policy.take() {
                        self.kill(p);
                    }
                    return Ok(true);
                }
                Ok(false)
            }
            Kind::Valve {
                valve,
                priority,
                interrupt,
                body_plan,
                body,
            } => {
                if !self.holds.contains_key(&id) {
                    let hold = match self.valves.acquire(id, valve, *priority) {
                        Acquisition::Granted => Hold::Owned,
                        Acquisition::Preempted { previous } => {
                            self.suspend(previous);
                            Hold::Owned
                        }
                        Acquisition::Queued => Hold::Waiting,
                    };
                    self.holds.insert(
                        id,
                        ValveInfo {
                            hold,
                            interrupt: interrupt.clone(),
                        },
                    );
                    self.changed = true;
                }
                if body.is_none() && self.holds[&id].hold == Hold::Owned {
                    *body = Some(self.spawn(body_plan, Some(id), scope.clone()));
                }
                if let Some(b) = *body {
                    if self.advance(b)? {
                        self.kill(b);
                        *body = None;
                        self.release(id, &valve.clone());
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Kind::Wrap(c) => self.advance(*c),
            Kind::If {
                guard,
                then,
                child,
                decided,
            } => {
                if !*decided {
                    *decided = true;
                    self.changed = true;
                    if !self.eval(id, guard)? {
                        return Ok(true);
                    }
                    *child = Some(self.spawn(then, Some(id), scope.clone()));
                }
                match *child {
                    Some(c) => self.advance(c),
                    None => Ok(true),
                }
            }
            Kind::Prim { action, state } => match state {
                PrimState::Ready => {
                    if !self.valve_blocked(id) {
                        *state = PrimState::Running;
                        self.changed = true;
                        self.out.started.push(PrimitiveRequest {
                            thread: id,
                            action: action.clone(),
                        });
                    }
                    Ok(false)
                }
                PrimState::Running => Ok(false),
                PrimState::Done => Ok(true),
            },
            Kind::Set { var, value } => {
                self.fluents.insert(var.clone(), value.clone());
                self.changed = true;
                Ok(true)
            }
            Kind::Taken => Ok(false),
        }
    }

    fn quiesce(&mut self) -> Result<(), InterpError> {
        for _ in 0..PASS_CAP {
            self.changed = false;
            if let Some(r) = self.root {
                if self.advance(r)? {
                    self.kill(r);
                    self.root = None;
                    self.finished = true;
                }
            }
            if !self.changed {
                return Ok(());
            }
        }
        Err(InterpError::Livelock)
    }

    fn deadlocked(&self) -> bool {
        if self.finished || self.holds.values().all(|h| h.hold == Hold::Owned) {
            return false;
        }
        !self.tasks.values().any(|t| match &t.kind {
            Kind::WaitFor { .. } | Kind::Whenever { .. } => true,
            Kind::Prim { state, .. } => *state == PrimState::Running,
            _ => false,
        })
    }

    pub fn step(&mut self, event: Event) -> Result<StepOutput, InterpError> {
        self.out = StepOutput::default();
        if !self.started {
            self.started = true;
            let plan = self.plan.clone();
            self.root = Some(self.spawn(&plan, None, Arc::new(Vec::new())));
        }
        match event {
            Event::Wakeup => {}
            Event::FluentChange { name, value } => {
                self.fluents.insert(name, value);
            }
            Event::FluentPulse { name } => self.pulses.push_back(name),
            Event::PrimitiveDone { thread, outcome } => {
                let task = self
                    .tasks
                    .get_mut(&thread)
                    .ok_or(InterpError::UnknownThread(thread))?;
                match &mut task.kind {
                    Kind::Prim { state, .. } if *state == PrimState::Running => {
                        *state = PrimState::Done;
                        self.outcomes.insert(thread, outcome);
                    }
                    _ => return Err(InterpError::NotRunning(thread)),
                }
            }
        }
        self.quiesce()?;
        while let Some(p) = self.pulses.pop_front() {
            self.out.pulses.push(p.clone());
            self.fluents.insert(p.clone(), Value::Bool(true));
            self.pulsing = Some((p.clone(), self.next_id));
            let r = self.quiesce();
            self.pulsing = None;
            r?;
            self.fluents.insert(p, Value::Bool(false));
            self.quiesce()?;
        }
        if self.deadlocked() {
            return Err(InterpError::DeadlockDetected);
        }
        self.out.finished = self.finished;
        Ok(std::mem::take(&mut self.out))
    }

    fn document_order(&self) -> Vec<ThreadId> {
        let mut out = Vec::new();
        let mut stack: Vec<ThreadId> = self.root.into_iter().collect();
        while let Some(id) = stack.pop() {
            out.push(id);
            if let Some(t) = self.tasks.get(&id) {
                let mut kids = t.kind.children();
                kids.reverse();
                stack.extend(kids);
            }
        }
        out
    }

    /// Blocked wait-for and whenever conditions, in document order.
    pub fn pending_conditions(&self) -> Vec<PendingCondition> {
        self.document_order()
            .into_iter()
            .filter_map(|id| match &self.tasks.get(&id)?.kind {
                Kind::WaitFor { net, forced: false } => Some(PendingCondition {
                    thread: id,
                    network: net.clone(),
                    kind: PendingKind::WaitFor,
                }),
                Kind::Whenever { net, .. } => Some(PendingCondition {
                    thread: id,
                    network: net.clone(),
                    kind: PendingKind::Whenever,
                }),
                _ => None,
            })
            .collect()
    }

    pub fn running_primitives(&self) -> Vec<(ThreadId, PrimitiveAction)> {
        self.document_order()
            .into_iter()
            .filter_map(|id| match &self.tasks.get(&id)?.kind {
                Kind::Prim {
                    action,
                    state: PrimState::Running,
                } => Some((id, action.clone())),
                _ => None,
            })
            .collect()
    }

    /// Mark a blocked wait-for as satisfied regardless of its condition.
    /// Used when unfolding jumps over conditions the interpreter cannot
    /// evaluate from positions alone.
    pub fn force_wait(&mut self, thread: ThreadId) -> Result<(), InterpError> {
        match self.tasks.get_mut(&thread).map(|t| &mut t.kind) {
            Some(Kind::WaitFor { forced, .. }) => {
                *forced = true;
                Ok(())
            }
            Some(_) => Err(InterpError::NotRunning(thread)),
            None => Err(InterpError::UnknownThread(thread)),
        }
    }
}
