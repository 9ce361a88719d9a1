//! Fluents and fluent networks: boolean circuits over asynchronously updated
//! values, and their compilation into spatial trigger regions.

use crate::geom::{distance, Axis, Boundary, Point, Region, Side};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

pub const ROBOT_X: &str = "robot-x";
pub const ROBOT_Y: &str = "robot-y";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Real(f64),
    Symbol(String),
}

impl Value {
    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            Value::Real(v) => Some(*v),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Real(v) => write!(f, "{v}"),
            Value::Symbol(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FluentStatus {
    Active,
    Pending,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fluent {
    pub id: String,
    pub value: Value,
    pub status: FluentStatus,
    pub measures: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<CmpOp> {
        Some(match s {
            "<" => CmpOp::Lt,
            "<=" => CmpOp::Le,
            ">" => CmpOp::Gt,
            ">=" => CmpOp::Ge,
            "=" => CmpOp::Eq,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Const(Value),
    Input(String),
    Dist {
        x: Box<Gate>,
        y: Box<Gate>,
        target: Point,
    },
    Cmp {
        op: CmpOp,
        lhs: Box<Gate>,
        rhs: Value,
    },
    And(Vec<Gate>),
    Or(Vec<Gate>),
    Not(Box<Gate>),
}

impl Gate {
    pub fn inputs(&self, out: &mut BTreeSet<String>) {
        match self {
            Gate::Const(_) => {}
            Gate::Input(id) => {
                out.insert(id.clone());
            }
            Gate::Dist { x, y, .. } => {
                x.inputs(out);
                y.inputs(out);
            }
            Gate::Cmp { lhs, .. } => lhs.inputs(out),
            Gate::And(gs) | Gate::Or(gs) => gs.iter().for_each(|g| g.inputs(out)),
            Gate::Not(g) => g.inputs(out),
        }
    }

    /// Replace inputs named in `defs` by their definitions.
    pub fn inline(&self, defs: &[(String, Gate)]) -> Gate {
        match self {
            Gate::Input(id) => match defs.iter().rev().find(|(n, _)| n == id) {
                Some((_, g)) => g.clone(),
                None => self.clone(),
            },
            Gate::Const(_) => self.clone(),
            Gate::Dist { x, y, target } => Gate::Dist {
                x: Box::new(x.inline(defs)),
                y: Box::new(y.inline(defs)),
                target: *target,
            },
            Gate::Cmp { op, lhs, rhs } => Gate::Cmp {
                op: *op,
                lhs: Box::new(lhs.inline(defs)),
                rhs: rhs.clone(),
            },
            Gate::And(gs) => Gate::And(gs.iter().map(|g| g.inline(defs)).collect()),
            Gate::Or(gs) => Gate::Or(gs.iter().map(|g| g.inline(defs)).collect()),
            Gate::Not(g) => Gate::Not(Box::new(g.inline(defs))),
        }
    }
}

/// A boolean circuit whose value is published under `output`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluentNetwork {
    pub output: String,
    pub root: Gate,
}

impl FluentNetwork {
    pub fn inputs(&self) -> BTreeSet<String> {
        let mut s = BTreeSet::new();
        self.root.inputs(&mut s);
        s
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FluentError {
    #[error("unbound fluent input {0}")]
    UnboundInput(String),
    #[error("type mismatch in {0}")]
    TypeMismatch(String),
    #[error("network is not compilable to a region: {0}")]
    NotCompilable(String),
}

pub trait Bindings {
    fn lookup(&self, id: &str) -> Option<&Value>;
}

impl Bindings for BTreeMap<String, Value> {
    fn lookup(&self, id: &str) -> Option<&Value> {
        self.get(id)
    }
}

impl Bindings for HashMap<String, Value> {
    fn lookup(&self, id: &str) -> Option<&Value> {
        self.get(id)
    }
}

fn eval_gate(g: &Gate, b: &dyn Bindings) -> Result<Value, FluentError> {
    Ok(match g {
        Gate::Const(v) => v.clone(),
        Gate::Input(id) => b
            .lookup(id)
            .cloned()
            .ok_or_else(|| FluentError::UnboundInput(id.clone()))?,
        Gate::Dist { x, y, target } => {
            let px = real(eval_gate(x, b)?, "dist")?;
            let py = real(eval_gate(y, b)?, "dist")?;
            Value::Real(distance(Point::new(px, py), *target))
        }
        Gate::Cmp { op, lhs, rhs } => {
            let l = eval_gate(lhs, b)?;
            Value::Bool(match (op, &l, rhs) {
                (CmpOp::Eq, l, r) => match (l, r) {
                    (Value::Real(a), Value::Real(c)) => a == c,
                    (a, c) => a == c,
                },
                (op, Value::Real(a), Value::Real(c)) => match op {
                    CmpOp::Lt => a < c,
                    CmpOp::Le => a <= c,
                    CmpOp::Gt => a > c,
                    CmpOp::Ge => a >= c,
                    CmpOp::Eq => unreachable!(),
                },
                _ => return Err(FluentError::TypeMismatch(op.symbol().into())),
            })
        }
        Gate::And(gs) => {
            let mut acc = true;
            for g in gs {
                acc &= boolean(eval_gate(g, b)?, "and")?;
            }
            Value::Bool(acc)
        }
        Gate::Or(gs) => {
            let mut acc = false;
            for g in gs {
                acc |= boolean(eval_gate(g, b)?, "or")?;
            }
            Value::Bool(acc)
        }
        Gate::Not(g) => Value::Bool(!boolean(eval_gate(g, b)?, "not")?),
    })
}

fn real(v: Value, ctx: &str) -> Result<f64, FluentError> {
    v.as_real()
        .ok_or_else(|| FluentError::TypeMismatch(ctx.into()))
}

fn boolean(v: Value, ctx: &str) -> Result<bool, FluentError> {
    v.as_bool()
        .ok_or_else(|| FluentError::TypeMismatch(ctx.into()))
}

pub fn eval_network(net: &FluentNetwork, b: &dyn Bindings) -> Result<bool, FluentError> {
    boolean(eval_gate(&net.root, b)?, &net.output)
}

/// Which processes change which state variables, and which fluents measure them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangesModel {
    pub changes: Vec<(String, String)>,
    pub measures: Vec<(String, String)>,
}

impl ChangesModel {
    pub fn navigation() -> Self {
        ChangesModel {
            changes: vec![
                ("low-level-navigation-plan".into(), "x".into()),
                ("low-level-navigation-plan".into(), "y".into()),
            ],
            measures: vec![(ROBOT_X.into(), "x".into()), (ROBOT_Y.into(), "y".into())],
        }
    }

    /// Fluents measuring a variable changed by `process`.
    pub fn affected_fluents(&self, process: &str) -> BTreeSet<String> {
        let vars: BTreeSet<&str> = self
            .changes
            .iter()
            .filter(|(p, _)| p == process)
            .map(|(_, v)| v.as_str())
            .collect();
        self.measures
            .iter()
            .filter(|(_, v)| vars.contains(v.as_str()))
            .map(|(f, _)| f.clone())
            .collect()
    }
}

/// Networks among `blocked` whose inputs include a fluent measuring a
/// variable changed by `process`, in the given order.
pub fn filter_dependent(
    blocked: impl IntoIterator<Item = FluentNetwork>,
    changes: &ChangesModel,
    process: &str,
) -> Vec<FluentNetwork> {
    let affected = changes.affected_fluents(process);
    blocked
        .into_iter()
        .filter(|n| n.inputs().iter().any(|i| affected.contains(i)))
        .collect()
}

pub fn pending_networks(
    state: &crate::lang::InterpreterState,
    changes: &ChangesModel,
    process: &str,
) -> Vec<FluentNetwork> {
    let mut seen = BTreeSet::new();
    let nets = state
        .pending_conditions()
        .into_iter()
        .map(|c| c.network)
        .filter(|n| seen.insert(n.output.clone()));
    filter_dependent(nets, changes, process)
}

fn describe(g: &Gate) -> String {
    format!("{g:?}")
}

fn coord_axis(g: &Gate) -> Option<Axis> {
    match g {
        Gate::Input(id) if id == ROBOT_X => Some(Axis::X),
        Gate::Input(id) if id == ROBOT_Y => Some(Axis::Y),
        _ => None,
    }
}

fn const_region(b: bool) -> Region {
    if b {
        Region::universe()
    } else {
        Region::empty()
    }
}

fn compile_gate(g: &Gate) -> Result<Region, FluentError> {
    let nc = || FluentError::NotCompilable(describe(g));
    match g {
        Gate::Const(Value::Bool(b)) => Ok(const_region(*b)),
        Gate::And(gs) => Ok(Region::Intersection {
            regions: gs.iter().map(compile_gate).collect::<Result<_, _>>()?,
        }),
        Gate::Or(gs) => Ok(Region::Union {
            regions: gs.iter().map(compile_gate).collect::<Result<_, _>>()?,
        }),
        Gate::Not(g) => Ok(Region::complement(compile_gate(g)?)),
        Gate::Cmp { op, lhs, rhs } => {
            let c = rhs.as_real().ok_or_else(nc)?;
            if *op == CmpOp::Eq {
                return Err(nc());
            }
            if let Some(axis) = coord_axis(lhs) {
                let (side, boundary) = match op {
                    CmpOp::Lt => (Side::Below, Boundary::Open),
                    CmpOp::Le => (Side::Below, Boundary::Closed),
                    CmpOp::Gt => (Side::Above, Boundary::Open),
                    CmpOp::Ge => (Side::Above, Boundary::Closed),
                    CmpOp::Eq => unreachable!(),
                };
                return Ok(Region::HalfPlane {
                    axis,
                    bound: c,
                    side,
                    boundary,
                });
            }
            if let Gate::Dist { x, y, target } = lhs.as_ref() {
                if coord_axis(x) != Some(Axis::X) || coord_axis(y) != Some(Axis::Y) {
                    return Err(nc());
                }
                let disk = |boundary| Region::Disk {
                    center: *target,
                    radius: c,
                    boundary,
                };
                return match op {
                    CmpOp::Lt if c > 0.0 => Ok(disk(Boundary::Open)),
                    CmpOp::Lt => Ok(Region::empty()),
                    CmpOp::Le if c > 0.0 => Ok(disk(Boundary::Closed)),
                    CmpOp::Le if c < 0.0 => Ok(Region::empty()),
                    CmpOp::Gt if c > 0.0 => Ok(Region::complement(disk(Boundary::Closed))),
                    CmpOp::Gt if c < 0.0 => Ok(Region::universe()),
                    CmpOp::Ge if c > 0.0 => Ok(Region::complement(disk(Boundary::Open))),
                    CmpOp::Ge => Ok(Region::universe()),
                    _ => Err(nc()),
                };
            }
            if let Gate::Const(Value::Real(v)) = lhs.as_ref() {
                let truth = match op {
                    CmpOp::Lt => *v < c,
                    CmpOp::Le => *v <= c,
                    CmpOp::Gt => *v > c,
                    CmpOp::Ge => *v >= c,
                    CmpOp::Eq => unreachable!(),
                };
                return Ok(const_region(truth));
            }
            Err(nc())
        }
        _ => Err(nc()),
    }
}

/// Region whose membership at (x, y) equals the network's value with
/// `robot-x = x`, `robot-y = y`.
pub fn compile_to_region(net: &FluentNetwork) -> Result<Region, FluentError> {
    compile_gate(&net.root)
}

/// Position bindings for evaluating networks at a point.
pub fn position_bindings(p: Point) -> BTreeMap<String, Value> {
    let mut b = BTreeMap::new();
    b.insert(ROBOT_X.to_string(), Value::Real(p.x));
    b.insert(ROBOT_Y.to_string(), Value::Real(p.y));
    b
}

pub fn dist_gate(target: Point) -> Gate {
    Gate::Dist {
        x: Box::new(Gate::Input(ROBOT_X.into())),
        y: Box::new(Gate::Input(ROBOT_Y.into())),
        target,
    }
}

pub fn cmp(op: CmpOp, lhs: Gate, c: f64) -> Gate {
    Gate::Cmp {
        op,
        lhs: Box::new(lhs),
        rhs: Value::Real(c),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::point_in_region;

    fn dropoff_region() -> FluentNetwork {
        FluentNetwork {
            output: "in-A-120?".into(),
            root: Gate::And(vec![
                cmp(CmpOp::Ge, Gate::Input(ROBOT_X.into()), 860.0),
                cmp(CmpOp::Le, Gate::Input(ROBOT_X.into()), 1265.0),
                cmp(CmpOp::Lt, Gate::Input(ROBOT_Y.into()), 817.0),
            ]),
        }
    }

    #[test]
    fn dropoff_eval() {
        let n = dropoff_region();
        assert!(eval_network(&n, &position_bindings(Point::new(1000.0, 500.0))).unwrap());
        assert!(!eval_network(&n, &position_bindings(Point::new(859.0, 500.0))).unwrap());
        let empty = FluentNetwork {
            output: "t".into(),
            root: Gate::And(vec![]),
        };
        assert!(eval_network(&empty, &BTreeMap::new()).unwrap());
        assert_eq!(
            eval_network(&n, &BTreeMap::new()),
            Err(FluentError::UnboundInput(ROBOT_X.into()))
        );
    }

    #[test]
    fn dropoff_compiles_to_half_planes() {
        let r = compile_to_region(&dropoff_region()).unwrap();
        assert_eq!(
            r,
            Region::Intersection {
                regions: vec![
                    Region::HalfPlane {
                        axis: Axis::X,
                        bound: 860.0,
                        side: Side::Above,
                        boundary: Boundary::Closed
                    },
                    Region::HalfPlane {
                        axis: Axis::X,
                        bound: 1265.0,
                        side: Side::Below,
                        boundary: Boundary::Closed
                    },
                    Region::half_plane(Axis::Y, 817.0, Side::Below),
                ]
            }
        );
    }

    #[test]
    fn doorway_disk_and_complement_grid() {
        let c = Point::new(2300.0, 795.0);
        let near = FluentNetwork {
            output: "entering-dw?".into(),
            root: cmp(CmpOp::Lt, dist_gate(c), 100.0),
        };
        assert_eq!(
            compile_to_region(&near).unwrap(),
            Region::Disk {
                center: c,
                radius: 100.0,
                boundary: Boundary::Open
            }
        );
        let far = FluentNetwork {
            output: "f".into(),
            root: Gate::Not(Box::new(near.root.clone())),
        };
        let r = compile_to_region(&far).unwrap();
        for i in 0..100 {
            for j in 0..100 {
                let p = Point::new(2150.0 + 3.0 * i as f64, 645.0 + 3.0 * j as f64);
                assert_eq!(
                    point_in_region(p, &r),
                    eval_network(&far, &position_bindings(p)).unwrap()
                );
            }
        }
    }

    #[test]
    fn non_positional_inputs_rejected() {
        let n = FluentNetwork {
            output: "open?".into(),
            root: Gate::Input("door-open?".into()),
        };
        assert!(matches!(
            compile_to_region(&n),
            Err(FluentError::NotCompilable(_))
        ));
    }

    #[test]
    fn dependence_filter() {
        let timer = FluentNetwork {
            output: "timer?".into(),
            root: Gate::Input("timer?".into()),
        };
        let got = filter_dependent(
            vec![timer.clone(), dropoff_region()],
            &ChangesModel::navigation(),
            "low-level-navigation-plan",
        );
        assert_eq!(got, vec![dropoff_region()]);
        assert!(filter_dependent(
            vec![timer],
            &ChangesModel::navigation(),
            "low-level-navigation-plan"
        )
        .is_empty());
    }
}
