//! The concurrent reactive plan language: AST, parser, printer and the
//! thread-tree interpreter.

mod interp;
mod parse;
mod print;
pub mod sexpr;
mod valve;

pub use interp::{
    Event, InterpError, InterpreterState, PendingCondition, PendingKind, PrimitiveOutcome,
    PrimitiveRequest, StepOutput, ThreadId,
};
pub use parse::{parse_condition, parse_plan};
pub use print::{print_condition, print_plan};
pub use valve::{Acquisition, ValveTable};

use crate::fluents::{FluentNetwork, Gate, Value};
use crate::geom::Point;
use crate::term::Term;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Default tolerance of `(reached X Y)`, in centimeters.
pub const REACHED_TOLERANCE: f64 = 10.0;
pub const DEFAULT_INTERRUPT: &str = "navigation-interrupted?";
pub const EXECUTION_STATES: [&str; 3] = ["to-be-acquired", "loaded", "delivered"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("syntax error at line {line}, column {col}: expected {expected}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub expected: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TravelMode {
    Office,
    Hallway,
    Doorway,
}

impl TravelMode {
    pub const ALL: [TravelMode; 3] = [TravelMode::Office, TravelMode::Hallway, TravelMode::Doorway];

    pub fn name(self) -> &'static str {
        match self {
            TravelMode::Office => "office",
            TravelMode::Hallway => "hallway",
            TravelMode::Doorway => "doorway",
        }
    }

    pub fn from_name(s: &str) -> Option<TravelMode> {
        TravelMode::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl fmt::Display for TravelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PrimitiveAction {
    MoveTo(Point),
    SetNavigationMode(TravelMode),
    GoTo(String),
    LowLevelNavPlan { dest: String, id: String },
    PickUp(String),
    PutDown(String),
    EstimateDoorAngle,
    LookFor { description: String, camera: String },
}

impl PrimitiveAction {
    /// Motion primitives hold the robot's wheels while running.
    pub fn is_motion(&self) -> bool {
        matches!(
            self,
            PrimitiveAction::MoveTo(_)
                | PrimitiveAction::GoTo(_)
                | PrimitiveAction::LowLevelNavPlan { .. }
        )
    }

    pub fn term(&self) -> Term {
        let s = Term::sym;
        match self {
            PrimitiveAction::MoveTo(p) => {
                Term::app("move-to", vec![Term::num(p.x), Term::num(p.y)])
            }
            PrimitiveAction::SetNavigationMode(m) => {
                Term::app("set-navigation-mode", vec![s(m.name())])
            }
            PrimitiveAction::GoTo(l) => Term::app("go-to", vec![s(l)]),
            PrimitiveAction::LowLevelNavPlan { dest, id } => {
                Term::app("low-level-nav-plan", vec![s(dest), s(id)])
            }
            PrimitiveAction::PickUp(o) => Term::app("pick-up", vec![s(o)]),
            PrimitiveAction::PutDown(o) => Term::app("put-down", vec![s(o)]),
            PrimitiveAction::EstimateDoorAngle => Term::app("estimate-door-angle", vec![]),
            PrimitiveAction::LookFor {
                description,
                camera,
            } => Term::app("look-for", vec![s(description), s(camera)]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Seq(Vec<Plan>),
    Par(Vec<Plan>),
    TryInParallel(Vec<Plan>),
    Loop {
        body: Box<Plan>,
        until: Option<FluentNetwork>,
    },
    WaitFor(FluentNetwork),
    Whenever {
        cond: FluentNetwork,
        body: Box<Plan>,
    },
    WithPolicy {
        policy: Box<Plan>,
        body: Box<Plan>,
    },
    WithValve {
        valve: String,
        priority: i64,
        interrupt: String,
        body: Box<Plan>,
    },
    WithLocalFluents {
        defs: Vec<(String, Gate)>,
        body: Box<Plan>,
    },
    Named {
        name: String,
        body: Box<Plan>,
    },
    If {
        guard: FluentNetwork,
        then: Box<Plan>,
    },
    Primitive(PrimitiveAction),
    SetVar {
        var: String,
        value: Value,
    },
}

impl Plan {
    pub fn children(&self) -> Vec<&Plan> {
        match self {
            Plan::Seq(v) | Plan::Par(v) | Plan::TryInParallel(v) => v.iter().collect(),
            Plan::Loop { body, .. }
            | Plan::Whenever { body, .. }
            | Plan::WithValve { body, .. }
            | Plan::WithLocalFluents { body, .. }
            | Plan::Named { body, .. } => vec![body],
            Plan::If { then, .. } => vec![then],
            Plan::WithPolicy { policy, body } => vec![policy, body],
            Plan::WaitFor(_) | Plan::Primitive(_) | Plan::SetVar { .. } => vec![],
        }
    }

    /// Names of all named subplans, in document order.
    pub fn subplan_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        fn walk(p: &Plan, out: &mut Vec<String>) {
            if let Plan::Named { name, .. } = p {
                out.push(name.clone());
            }
            p.children().into_iter().for_each(|c| walk(c, out));
        }
        walk(self, &mut out);
        out
    }

    pub fn find_named(&self, name: &str) -> Option<&Plan> {
        if let Plan::Named { name: n, .. } = self {
            if n == name {
                return Some(self);
            }
        }
        self.children().into_iter().find_map(|c| c.find_named(name))
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .children()
            .into_iter()
            .map(Plan::node_count)
            .sum::<usize>()
    }
}

/// Wrap a gate as a network, naming the output after the fluent for plain
/// inputs and after the canonical condition text otherwise.
pub fn network(root: Gate) -> FluentNetwork {
    let output = match &root {
        Gate::Input(name) => name.clone(),
        g => print::gate_text(g),
    };
    FluentNetwork { output, root }
}
