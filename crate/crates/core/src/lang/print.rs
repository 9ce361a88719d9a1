use super::{Plan, PrimitiveAction, DEFAULT_INTERRUPT};
use crate::fluents::{FluentNetwork, Gate, Value};
use crate::term::parse_number;
use std::fmt::Write;

const WIDTH: usize = 88;

enum Doc {
    Atom(String),
    List(Vec<Doc>),
}

fn atom(s: impl Into<String>) -> Doc {
    Doc::Atom(s.into())
}

pub(crate) fn num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn value(v: &Value) -> String {
    match v {
        Value::Bool(b) => b.to_string(),
        Value::Real(r) => num(*r),
        Value::Symbol(s) => s.clone(),
    }
}

fn input(name: &str) -> String {
    if name == "true" || name == "false" || parse_number(name).is_some() {
        format!("(fluent {name})")
    } else {
        name.to_string()
    }
}

pub(crate) fn gate_text(g: &Gate) -> String {
    let mut s = String::new();
    write_gate(g, &mut s);
    s
}

fn write_gate(g: &Gate, s: &mut String) {
    match g {
        Gate::Const(Value::Symbol(sym)) => write!(s, "(const {sym})").unwrap(),
        Gate::Const(v) => s.push_str(&value(v)),
        Gate::Input(n) => s.push_str(&input(n)),
        Gate::Dist { x, y, target } => {
            s.push_str("(dist ");
            write_gate(x, s);
            s.push(' ');
            write_gate(y, s);
            write!(s, " {} {})", num(target.x), num(target.y)).unwrap();
        }
        Gate::Cmp { op, lhs, rhs } => {
            write!(s, "({} ", op.symbol()).unwrap();
            write_gate(lhs, s);
            write!(s, " {})", value(rhs)).unwrap();
        }
        Gate::And(gs) | Gate::Or(gs) => {
            s.push_str(if matches!(g, Gate::And(_)) {
                "(and"
            } else {
                "(or"
            });
            for g in gs {
                s.push(' ');
                write_gate(g, s);
            }
            s.push(')');
        }
        Gate::Not(g) => {
            s.push_str("(not ");
            write_gate(g, s);
            s.push(')');
        }
    }
}

pub fn print_condition(net: &FluentNetwork) -> String {
    gate_text(&net.root)
}

fn cond(net: &FluentNetwork) -> Doc {
    atom(gate_text(&net.root))
}

fn prim(a: &PrimitiveAction) -> Doc {
    let l = |v: Vec<String>| Doc::List(v.into_iter().map(Doc::Atom).collect());
    match a {
        PrimitiveAction::MoveTo(p) => l(vec!["move-to".into(), num(p.x), num(p.y)]),
        PrimitiveAction::SetNavigationMode(m) => {
            l(vec!["set-navigation-mode".into(), m.name().into()])
        }
        PrimitiveAction::GoTo(loc) => l(vec!["go-to".into(), loc.clone()]),
        PrimitiveAction::LowLevelNavPlan { dest, id } => {
            l(vec!["low-level-nav-plan".into(), dest.clone(), id.clone()])
        }
        PrimitiveAction::PickUp(o) => l(vec!["pick-up".into(), o.clone()]),
        PrimitiveAction::PutDown(o) => l(vec!["put-down".into(), o.clone()]),
        PrimitiveAction::EstimateDoorAngle => l(vec!["estimate-door-angle".into()]),
        PrimitiveAction::LookFor {
            description,
            camera,
        } => l(vec!["look-for".into(), description.clone(), camera.clone()]),
    }
}

fn doc(p: &Plan) -> Doc {
    let list = |h: &str, rest: Vec<Doc>| {
        let mut v = vec![atom(h)];
        v.extend(rest);
        Doc::List(v)
    };
    match p {
        Plan::Seq(v) => list("seq", v.iter().map(doc).collect()),
        Plan::Par(v) => list("par", v.iter().map(doc).collect()),
        Plan::TryInParallel(v) => list("try-in-parallel", v.iter().map(doc).collect()),
        Plan::Loop { body, until } => {
            let mut v = vec![doc(body)];
            if let Some(u) = until {
                v.push(atom(":until"));
                v.push(cond(u));
            }
            list("loop", v)
        }
        Plan::WaitFor(c) => list("wait-for", vec![cond(c)]),
        Plan::Whenever { cond: c, body } => list("whenever", vec![cond(c), doc(body)]),
        Plan::WithPolicy { policy, body } => list("with-policy", vec![doc(policy), doc(body)]),
        Plan::WithValve {
            valve,
            priority,
            interrupt,
            body,
        } => {
            let mut v = vec![atom(valve.clone())];
            if *priority != 0 {
                v.push(atom(":priority"));
                v.push(atom(priority.to_string()));
            }
            if interrupt != DEFAULT_INTERRUPT {
                v.push(atom(":interrupt"));
                v.push(atom(interrupt.clone()));
            }
            v.push(doc(body));
            list("with-valve", v)
        }
        Plan::WithLocalFluents { defs, body } => {
            let defs = defs
                .iter()
                .map(|(n, g)| Doc::List(vec![atom(n.clone()), atom(gate_text(g))]))
                .collect();
            list("with-local-fluents", vec![Doc::List(defs), doc(body)])
        }
        Plan::Named { name, body } => list("named", vec![atom(name.clone()), doc(body)]),
        Plan::If { guard, then } => list("if", vec![cond(guard), doc(then)]),
        Plan::Primitive(a) => prim(a),
        Plan::SetVar { var, value: v } => list("set", vec![atom(var.clone()), atom(value(v))]),
    }
}

fn flat(d: &Doc, out: &mut String) {
    match d {
        Doc::Atom(a) => out.push_str(a),
        Doc::List(items) => {
            out.push('(');
            for (i, it) in items.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                flat(it, out);
            }
            out.push(')');
        }
    }
}

fn render(d: &Doc, indent: usize, out: &mut String) {
    let mut one = String::new();
    flat(d, &mut one);
    let items = match d {
        Doc::List(items) if indent + one.len() > WIDTH => items,
        _ => {
            out.push_str(&one);
            return;
        }
    };
    out.push('(');
    // Leading atoms (head, names, keyword pairs) stay on the first line.
    let lead = items
        .iter()
        .position(|i| matches!(i, Doc::List(_)) || matches!(i, Doc::Atom(a) if a.starts_with('(')))
        .unwrap_or(items.len())
        .max(1);
    for (i, it) in items[..lead].iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        flat(it, out);
    }
    for it in &items[lead..] {
        out.push('\n');
        out.push_str(&" ".repeat(indent + 2));
        render(it, indent + 2, out);
    }
    out.push(')');
}

pub fn print_plan(p: &Plan) -> String {
    let mut out = String::new();
    render(&doc(p), 0, &mut out);
    out.push('\n');
    out
}
