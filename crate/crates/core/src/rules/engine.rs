use super::{Condition, Effect, EffectRule, EventClass, ExoRule, Literal, Timeline};
use crate::term::{match_term, substitute, Bindings, Term};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use std::collections::BTreeSet;

/// Exogenous rules with an average spacing below this fire at condition
/// onset instead of being sampled.
pub const IMMEDIATE_SPACING: f64 = 1e-3;

/// Anything conditions can be evaluated against.
pub trait PropositionView {
    /// Bindings extending `base` under which `pattern` matches an open proposition.
    fn matching(&self, pattern: &Term, base: &Bindings) -> Vec<Bindings>;
}

impl PropositionView for Timeline {
    fn matching(&self, pattern: &Term, base: &Bindings) -> Vec<Bindings> {
        Timeline::matching(self, pattern, base)
    }
}

/// The timeline as it will be once `hidden` has lapsed.
pub struct Lapsed<'a> {
    pub tl: &'a Timeline,
    pub hidden: &'a [Term],
}

impl PropositionView for Lapsed<'_> {
    fn matching(&self, pattern: &Term, base: &Bindings) -> Vec<Bindings> {
        self.tl
            .matching(pattern, base)
            .into_iter()
            .filter(|b| !self.hidden.contains(&substitute(pattern, b)))
            .collect()
    }
}

/// All bindings extending `base` under which `cond` holds now.
pub fn condition_solutions<V: PropositionView + ?Sized>(
    tl: &V,
    cond: &Condition,
    base: &Bindings,
) -> Vec<Bindings> {
    let mut sols = vec![base.clone()];
    for lit in cond {
        let mut next = Vec::new();
        for b in sols {
            match lit {
                Literal::Holds(p) => next.extend(tl.matching(p, &b)),
                Literal::NotHolds(p) => {
                    if tl.matching(p, &b).is_empty() {
                        next.push(b);
                    }
                }
                Literal::Eq(l, r) => {
                    if substitute(l, &b) == substitute(r, &b) {
                        next.push(b);
                    }
                }
                Literal::Neq(l, r) => {
                    if substitute(l, &b) != substitute(r, &b) {
                        next.push(b);
                    }
                }
            }
        }
        sols = next;
        if sols.is_empty() {
            break;
        }
    }
    let set: BTreeSet<Bindings> = sols.into_iter().collect();
    set.into_iter().collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Delta {
    pub opened: Vec<Term>,
    pub closed: Vec<Term>,
    pub fired: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("rule {rule}: persist duration {duration} is not a number")]
pub struct DurationError {
    pub rule: String,
    pub duration: Term,
}

fn ground_effect(e: &Effect, b: &Bindings) -> Effect {
    match e {
        Effect::Assert(p) => Effect::Assert(substitute(p, b)),
        Effect::Clip(p) => Effect::Clip(substitute(p, b)),
        Effect::Persist { duration, prop } => Effect::Persist {
            duration: substitute(duration, b),
            prop: substitute(prop, b),
        },
        Effect::PersistUntil { until, prop } => Effect::PersistUntil {
            until: substitute(until, b),
            prop: substitute(prop, b),
        },
    }
}

fn already_holds(tl: &Timeline, e: &Effect) -> bool {
    match e {
        Effect::Clip(p) => !tl.holds(p),
        e => tl.holds(e.proposition()),
    }
}

/// Apply every effect rule triggered by `event`, which must be the most
/// recent occurrence on `tl`. Conditions are evaluated on the state before
/// any effect of this event; clips are applied before asserts.
pub fn apply_effect_rules<R: Rng + ?Sized>(
    tl: &mut Timeline,
    event: &Term,
    rules: &[EffectRule],
    rng: &mut R,
) -> Result<Delta, DurationError> {
    let now = tl.last_date();
    let mut chosen: Vec<(String, Vec<Effect>)> = Vec::new();
    for r in rules {
        let mut b = Bindings::new();
        if !match_term(&r.event, event, &mut b) {
            continue;
        }
        for sol in condition_solutions(tl, &r.condition, &b) {
            let effects: Vec<Effect> = r.effects.iter().map(|e| ground_effect(e, &sol)).collect();
            if effects.iter().all(|e| already_holds(tl, e)) {
                continue;
            }
            if r.probability < 1.0 && rng.random::<f64>() >= r.probability {
                continue;
            }
            chosen.push((r.name.clone(), effects));
        }
    }
    let mut delta = Delta::default();
    for (_, effects) in &chosen {
        for e in effects {
            if let Effect::Clip(p) = e {
                if tl.clip(p) {
                    delta.closed.push(p.clone());
                }
            }
        }
    }
    for (name, effects) in chosen {
        for e in effects {
            let num = |t: &Term| {
                t.as_num().ok_or_else(|| DurationError {
                    rule: name.clone(),
                    duration: t.clone(),
                })
            };
            match e {
                Effect::Assert(p) => {
                    if tl.assert_prop(p.clone()) {
                        delta.opened.push(p);
                    }
                }
                Effect::Persist { duration, prop } => {
                    let d = num(&duration)?;
                    if !tl.holds(&prop) {
                        delta.opened.push(prop.clone());
                    }
                    tl.persist(prop, now + d.max(0.0));
                }
                Effect::PersistUntil { until, prop } => {
                    let u = num(&until)?;
                    if !tl.holds(&prop) {
                        delta.opened.push(prop.clone());
                    }
                    tl.persist(prop, u.max(now));
                }
                Effect::Clip(_) => {}
            }
        }
        delta.fired.push(name);
    }
    Ok(delta)
}

/// Clip every persisted proposition whose expiry is at or before the
/// current date. The caller records the occurrence the lapse belongs to.
pub fn expire_persists(tl: &mut Timeline) -> Vec<Term> {
    let now = tl.last_date();
    let mut out = Vec::new();
    while let Some((t, p)) = tl.next_expiry() {
        if t > now + 1e-12 {
            break;
        }
        tl.clip(&p);
        out.push(p);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExoCandidate {
    pub rule: usize,
    pub bindings: Bindings,
    pub event: Term,
    pub spacing: f64,
}

pub fn enabled_exogenous<V: PropositionView + ?Sized>(
    tl: &V,
    rules: &[ExoRule],
) -> Vec<ExoCandidate> {
    let mut out = Vec::new();
    for (i, r) in rules.iter().enumerate() {
        for b in condition_solutions(tl, &r.condition, &Bindings::new()) {
            out.push(ExoCandidate {
                rule: i,
                event: substitute(&r.event, &b),
                bindings: b,
                spacing: r.spacing,
            });
        }
    }
    out
}

/// Poisson-many occurrences per enabled rule, uniformly dated over the
/// window, merged in date order.
pub fn sample_exogenous_occurrences<R: Rng + ?Sized>(
    tl: &Timeline,
    rules: &[ExoRule],
    t1: f64,
    t2: f64,
    rng: &mut R,
) -> Vec<(f64, Term)> {
    let mut out: Vec<(f64, usize, Term)> = Vec::new();
    if t2 <= t1 {
        return Vec::new();
    }
    for (k, c) in enabled_exogenous(tl, rules).into_iter().enumerate() {
        let mean = (t2 - t1) / c.spacing;
        let n = Poisson::new(mean)
            .map(|p| p.sample(rng) as u64)
            .unwrap_or(0);
        for _ in 0..n {
            out.push((t1 + rng.random::<f64>() * (t2 - t1), k, c.event.clone()));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    out.into_iter().map(|(t, _, e)| (t, e)).collect()
}

/// The earliest exogenous occurrence predicted in (t_last, t_next], if any.
/// Each enabled rule first decides whether it fires at all in the window
/// (probability 1 - e^(-w/spacing)); a firing rule gets a uniform date in
/// the window. Rules below
/// `IMMEDIATE_SPACING` fire at `t_last` unless listed in `fired`.
pub fn predict_next_exogenous<R: Rng + ?Sized>(
    tl: &Timeline,
    rules: &[ExoRule],
    t_last: f64,
    t_next: f64,
    fired: &BTreeSet<(usize, Bindings)>,
    rng: &mut R,
) -> Option<(f64, ExoCandidate)> {
    let mut best: Option<(f64, ExoCandidate)> = None;
    for c in enabled_exogenous(tl, rules) {
        let t = if c.spacing < IMMEDIATE_SPACING {
            if fired.contains(&(c.rule, c.bindings.clone())) {
                continue;
            }
            t_last
        } else {
            let w = t_next - t_last;
            let p = -(-w / c.spacing).exp_m1();
            let u: f64 = rng.random();
            if u >= p {
                continue;
            }
            t_last + rng.random::<f64>() * w
        };
        if best.as_ref().is_none_or(|(bt, _)| t < *bt) {
            best = Some((t, c));
        }
    }
    best
}

/// Uniform integer in [1, max] for dyadic `max`, from log2(max) fair bits:
/// 1 + sum of bit_i * 2^i.
pub fn random_number<R: Rng + ?Sized>(max: u64, rng: &mut R) -> Option<u64> {
    if !max.is_power_of_two() {
        return None;
    }
    let n = max.trailing_zeros();
    let mut v = 1;
    for i in 0..n {
        if rng.random::<bool>() {
            v += 1 << i;
        }
    }
    Some(v)
}

/// One RANDOMIZE rule per bit: `randomize(i)` causes `random-bit(i)` with
/// probability one half.
pub fn randomize_rules(bits: u32) -> Vec<EffectRule> {
    (0..bits)
        .map(|i| EffectRule {
            name: format!("RANDOMIZE-{i}"),
            event: Term::app("randomize", vec![Term::Num(i as f64)]),
            condition: vec![],
            probability: 0.5,
            effects: vec![Effect::Assert(Term::app(
                "random-bit",
                vec![Term::Num(i as f64)],
            ))],
        })
        .collect()
}

/// The same draw as `random_number`, produced by recording `randomize(i)`
/// events on the timeline and reading back the asserted bits.
pub fn random_number_via_rules<R: Rng + ?Sized>(
    tl: &mut Timeline,
    max: u64,
    rng: &mut R,
) -> Option<u64> {
    if !max.is_power_of_two() {
        return None;
    }
    let n = max.trailing_zeros();
    let now = tl.last_date();
    let rules = randomize_rules(n);
    let bit = |i: u32| Term::app("random-bit", vec![Term::Num(i as f64)]);
    tl.record(now, Term::sym("randomize"), EventClass::Computational)
        .ok()?;
    for i in 0..n {
        tl.clip(&bit(i));
    }
    for i in 0..n {
        let ev = Term::app("randomize", vec![Term::Num(i as f64)]);
        tl.record(now, ev.clone(), EventClass::Computational).ok()?;
        apply_effect_rules(tl, &ev, &rules, rng).ok()?;
    }
    Some(
        1 + (0..n)
            .filter(|&i| tl.holds(&bit(i)))
            .map(|i| 1u64 << i)
            .sum::<u64>(),
    )
}
