use super::sexpr::{read_one, Node};
use super::{
    network, Plan, PrimitiveAction, SyntaxError, TravelMode, DEFAULT_INTERRUPT, EXECUTION_STATES,
    REACHED_TOLERANCE,
};
use crate::fluents::{cmp, dist_gate, CmpOp, FluentNetwork, Gate, Value};
use crate::geom::Point;
use crate::term::parse_number;
use std::collections::BTreeSet;

type Res<T> = Result<T, SyntaxError>;

pub fn parse_plan(src: &str) -> Res<Plan> {
    let node = read_one(src)?;
    let mut names = BTreeSet::new();
    plan(&node, &mut names)
}

pub fn parse_condition(src: &str) -> Res<FluentNetwork> {
    Ok(network(gate(&read_one(src)?)?))
}

fn head(node: &Node) -> Res<(&str, &[Node])> {
    let items = node.list().ok_or_else(|| node.error("'('"))?;
    let first = items.first().ok_or_else(|| node.error("form head"))?;
    let h = first
        .atom()
        .ok_or_else(|| first.error("form head symbol"))?;
    Ok((h, &items[1..]))
}

fn symbol(node: &Node) -> Res<String> {
    match node.atom() {
        Some(a) if parse_number(a).is_none() && !a.starts_with(':') => Ok(a.to_string()),
        _ => Err(node.error("symbol")),
    }
}

fn number(node: &Node) -> Res<f64> {
    node.atom()
        .and_then(parse_number)
        .ok_or_else(|| node.error("number"))
}

fn arity<'a>(node: &Node, args: &'a [Node], n: usize, what: &str) -> Res<&'a [Node]> {
    if args.len() == n {
        Ok(args)
    } else if args.len() > n {
        Err(args[n].error(format!("')' after {what}")))
    } else {
        Err(node.error(format!("{n} argument(s) for {what}")))
    }
}

fn plans(node: &Node, args: &[Node], names: &mut BTreeSet<String>, what: &str) -> Res<Vec<Plan>> {
    if args.is_empty() {
        return Err(node.error(format!("at least one step in {what}")));
    }
    args.iter().map(|a| plan(a, names)).collect()
}

fn value(node: &Node) -> Res<Value> {
    let a = node.atom().ok_or_else(|| node.error("value"))?;
    Ok(match a {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => match parse_number(a) {
            Some(v) => Value::Real(v),
            None => Value::Symbol(symbol(node)?),
        },
    })
}

fn plan(node: &Node, names: &mut BTreeSet<String>) -> Res<Plan> {
    let (h, args) = head(node)?;
    Ok(match h {
        "seq" => Plan::Seq(plans(node, args, names, "seq")?),
        "par" => Plan::Par(plans(node, args, names, "par")?),
        "try-in-parallel" => Plan::TryInParallel(plans(node, args, names, "try-in-parallel")?),
        "loop" => {
            let split = args.iter().position(|a| a.atom() == Some(":until"));
            let (body_nodes, until) = match split {
                Some(i) => {
                    let rest = &args[i + 1..];
                    let c = rest
                        .first()
                        .ok_or_else(|| args[i].error("condition after :until"))?;
                    if rest.len() > 1 {
                        return Err(rest[1].error("')' after :until condition"));
                    }
                    (&args[..i], Some(network(gate(c)?)))
                }
                None => (args, None),
            };
            let mut body = plans(node, body_nodes, names, "loop")?;
            let body = if body.len() == 1 {
                body.pop().unwrap()
            } else {
                Plan::Seq(body)
            };
            Plan::Loop {
                body: Box::new(body),
                until,
            }
        }
        "wait-for" => {
            let a = arity(node, args, 1, "wait-for")?;
            Plan::WaitFor(network(gate(&a[0])?))
        }
        "whenever" => {
            let a = arity(node, args, 2, "whenever")?;
            Plan::Whenever {
                cond: network(gate(&a[0])?),
                body: Box::new(plan(&a[1], names)?),
            }
        }
        "with-policy" => {
            let a = arity(node, args, 2, "with-policy")?;
            Plan::WithPolicy {
                policy: Box::new(plan(&a[0], names)?),
                body: Box::new(plan(&a[1], names)?),
            }
        }
        "with-valve" => {
            let valve = symbol(args.first().ok_or_else(|| node.error("valve name"))?)?;
            let mut priority = 0;
            let mut interrupt = DEFAULT_INTERRUPT.to_string();
            let mut i = 1;
            while let Some(k) = args
                .get(i)
                .and_then(Node::atom)
                .filter(|a| a.starts_with(':'))
            {
                let v = args
                    .get(i + 1)
                    .ok_or_else(|| args[i].error("keyword value"))?;
                match k {
                    ":priority" => {
                        let p = number(v)?;
                        if p.fract() != 0.0 || p.abs() > 1e15 {
                            return Err(v.error("integer priority"));
                        }
                        priority = p as i64;
                    }
                    ":interrupt" => interrupt = symbol(v)?,
                    _ => return Err(args[i].error(":priority or :interrupt")),
                }
                i += 2;
            }
            let rest = &args[i..];
            let body = rest.first().ok_or_else(|| node.error("valve body"))?;
            if rest.len() > 1 {
                return Err(rest[1].error("')' after valve body"));
            }
            Plan::WithValve {
                valve,
                priority,
                interrupt,
                body: Box::new(plan(body, names)?),
            }
        }
        "with-local-fluents" => {
            let a = arity(node, args, 2, "with-local-fluents")?;
            let defs_node = a[0]
                .list()
                .ok_or_else(|| a[0].error("fluent definition list"))?;
            let mut defs = Vec::new();
            for d in defs_node {
                let pair = d
                    .list()
                    .filter(|l| l.len() == 2)
                    .ok_or_else(|| d.error("(NAME CONDITION)"))?;
                defs.push((symbol(&pair[0])?, gate(&pair[1])?));
            }
            Plan::WithLocalFluents {
                defs,
                body: Box::new(plan(&a[1], names)?),
            }
        }
        "named" => {
            let a = arity(node, args, 2, "named")?;
            let name = symbol(&a[0])?;
            if !names.insert(name.clone()) {
                return Err(a[0].error("unique subplan name"));
            }
            Plan::Named {
                name,
                body: Box::new(plan(&a[1], names)?),
            }
        }
        "if" => {
            let a = arity(node, args, 2, "if")?;
            Plan::If {
                guard: network(gate(&a[0])?),
                then: Box::new(plan(&a[1], names)?),
            }
        }
        "set" => {
            let a = arity(node, args, 2, "set")?;
            let var = symbol(&a[0])?;
            let value = value(&a[1])?;
            if var.starts_with("execution-state") {
                let ok =
                    matches!(&value, Value::Symbol(s) if EXECUTION_STATES.contains(&s.as_str()));
                if !ok {
                    return Err(a[1].error("to-be-acquired, loaded or delivered"));
                }
            }
            Plan::SetVar { var, value }
        }
        _ => Plan::Primitive(primitive(node, h, args)?),
    })
}

fn primitive(node: &Node, h: &str, args: &[Node]) -> Res<PrimitiveAction> {
    Ok(match h {
        "move-to" => {
            let a = arity(node, args, 2, "move-to")?;
            PrimitiveAction::MoveTo(Point::new(number(&a[0])?, number(&a[1])?))
        }
        "set-navigation-mode" => {
            let a = arity(node, args, 1, "set-navigation-mode")?;
            let m = a[0]
                .atom()
                .and_then(TravelMode::from_name)
                .ok_or_else(|| a[0].error("office, hallway or doorway"))?;
            PrimitiveAction::SetNavigationMode(m)
        }
        "go-to" => PrimitiveAction::GoTo(symbol(&arity(node, args, 1, "go-to")?[0])?),
        "low-level-nav-plan" => {
            let a = arity(node, args, 2, "low-level-nav-plan")?;
            PrimitiveAction::LowLevelNavPlan {
                dest: symbol(&a[0])?,
                id: symbol(&a[1])?,
            }
        }
        "pick-up" => PrimitiveAction::PickUp(symbol(&arity(node, args, 1, "pick-up")?[0])?),
        "put-down" => PrimitiveAction::PutDown(symbol(&arity(node, args, 1, "put-down")?[0])?),
        "estimate-door-angle" => {
            arity(node, args, 0, "estimate-door-angle")?;
            PrimitiveAction::EstimateDoorAngle
        }
        "look-for" => {
            let a = arity(node, args, 2, "look-for")?;
            PrimitiveAction::LookFor {
                description: symbol(&a[0])?,
                camera: symbol(&a[1])?,
            }
        }
        _ => {
            let first = &node.list().unwrap()[0];
            return Err(first.error("plan form"));
        }
    })
}

pub(super) fn gate(node: &Node) -> Res<Gate> {
    if let Some(a) = node.atom() {
        return Ok(match a {
            "true" => Gate::Const(Value::Bool(true)),
            "false" => Gate::Const(Value::Bool(false)),
            _ => match parse_number(a) {
                Some(v) => Gate::Const(Value::Real(v)),
                None => Gate::Input(symbol(node)?),
            },
        });
    }
    let (h, args) = head(node)?;
    Ok(match h {
        "fluent" => Gate::Input(symbol(&arity(node, args, 1, "fluent")?[0])?),
        "const" => Gate::Const(value(&arity(node, args, 1, "const")?[0])?),
        "dist" => {
            let a = arity(node, args, 4, "dist")?;
            Gate::Dist {
                x: Box::new(gate(&a[0])?),
                y: Box::new(gate(&a[1])?),
                target: Point::new(number(&a[2])?, number(&a[3])?),
            }
        }
        "reached" => {
            let a = arity(node, args, 2, "reached")?;
            cmp(
                CmpOp::Le,
                dist_gate(Point::new(number(&a[0])?, number(&a[1])?)),
                REACHED_TOLERANCE,
            )
        }
        "and" => Gate::And(args.iter().map(gate).collect::<Res<_>>()?),
        "or" => Gate::Or(args.iter().map(gate).collect::<Res<_>>()?),
        "not" => Gate::Not(Box::new(gate(&arity(node, args, 1, "not")?[0])?)),
        op => match CmpOp::from_symbol(op) {
            Some(op) => {
                let a = arity(node, args, 2, op.symbol())?;
                Gate::Cmp {
                    op,
                    lhs: Box::new(gate(&a[0])?),
                    rhs: value(&a[1])?,
                }
            }
            None => return Err(node.list().unwrap()[0].error("condition form")),
        },
    })
}
