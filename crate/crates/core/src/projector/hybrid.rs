//! Event-driven projection of an automaton: each jump happens exactly when
//! the earliest jump condition becomes true along the current flow.

use crate::automaton::{
    first_satisfaction, sample_successor, AutomatonRun, HybridAutomaton, JumpRecord,
};
use crate::rules::{EventClass, Timeline};
use crate::term::Term;
use rand::Rng;

const MAX_JUMPS: usize = 100_000;

pub fn project_automaton<R: Rng + ?Sized>(
    aut: &HybridAutomaton,
    horizon: f64,
    rng: &mut R,
) -> AutomatonRun {
    let out = aut.outgoing();
    let mut s = aut.initial_state();
    let mut run = AutomatonRun::default();
    loop {
        let edges = &out[s.mode];
        if edges.is_empty() {
            break;
        }
        let mut best: Option<(f64, usize)> = None;
        for &e in edges {
            if let Some(t) = first_satisfaction(&aut.edges[e].condition, &s, horizon) {
                if best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, e));
                }
            }
        }
        let Some((t, e)) = best else {
            run.horizon_exceeded = true;
            break;
        };
        if run.jumps.len() >= MAX_JUMPS {
            run.horizon_exceeded = true;
            break;
        }
        let to = sample_successor(&aut.edges[e], rng);
        run.jumps.push(JumpRecord {
            t,
            edge: e,
            from: s.mode,
            to,
            pos: s.vals0 + s.velocity * (t - s.t0),
        });
        s = aut.jump(&s, e, to, t);
    }
    run.end_mode = s.mode;
    run.end_time = s.t0;
    run
}

/// Timeline of a run: a start occurrence, then one `jump(e)` per jump,
/// with `mode(cm)` occasions.
pub fn run_timeline(aut: &HybridAutomaton, run: &AutomatonRun) -> Timeline {
    let mut tl = Timeline::new();
    let mode = |m: usize| Term::app("mode", vec![Term::sym(&aut.modes[m].id)]);
    tl.record(0.0, Term::sym("start"), EventClass::Physical)
        .expect("fresh timeline");
    tl.assert_prop(mode(0));
    let o = tl.last_mut().expect("just recorded");
    o.x = Some(aut.start.x);
    o.y = Some(aut.start.y);
    o.mode = Some(aut.modes[0].id.clone());
    for j in &run.jumps {
        let ev = Term::app("jump", vec![Term::sym(&aut.edges[j.edge].id)]);
        tl.record(j.t, ev, EventClass::Physical)
            .expect("jumps are dated in order");
        tl.clip(&mode(j.from));
        tl.assert_prop(mode(j.to));
        let o = tl.last_mut().expect("just recorded");
        o.x = Some(j.pos.x);
        o.y = Some(j.pos.y);
        o.mode = Some(aut.modes[j.to].id.clone());
    }
    tl
}
