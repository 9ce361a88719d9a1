//! Clock-tick reference projector. Time advances in ticks of `dt`; in each
//! tick window every enabled jump edge fires after an exponential delay
//! with mean `tau`, if that delay falls inside the window, and the earliest
//! such jump wins. Slow, but a direct reading of the rule semantics, which
//! makes it the oracle for the efficient projector.

use crate::automaton::{
    condition_holds, first_satisfaction, sample_successor, AutomatonRun, ControlMode, FlowSpec,
    HybridAutomaton, JumpCondition, JumpEdge, JumpRecord, Speeds, Successor, Trigger,
};
use crate::geom::{Axis, Point, Region, Side};
use crate::lang::TravelMode;
use crate::projector::project_automaton;
use crate::rng::stream;
use crate::rules::{apply_effect_rules, enabled_exogenous, EventClass, RuleSet, Timeline};
use crate::term::Term;
use rand::Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefConfig {
    pub dt: f64,
    pub tau: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RefError {
    #[error("epsilon must lie in (0, 1), got {0}")]
    Domain(f64),
    #[error("delta must be positive, got {0}")]
    Delta(f64),
    #[error("dt, tau and horizon must be positive")]
    Config,
}

impl RefConfig {
    pub fn validate(&self) -> Result<(), RefError> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if ok(self.dt) && ok(self.tau) && ok(self.horizon) {
            Ok(())
        } else {
            Err(RefError::Config)
        }
    }
}

/// Jump delay and tick length that guarantee a jump within `delta` of the
/// condition becoming true with probability at least 1 - `eps`:
/// tau = delta / (2 ln(1/eps)), dt = delta / 2.
pub fn choose_ref_parameters(eps: f64, delta: f64) -> Result<(f64, f64), RefError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(RefError::Domain(eps));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(RefError::Delta(delta));
    }
    if eps > 0.99 {
        log::warn!("epsilon {eps} close to 1 gives a very long jump delay");
    }
    Ok((delta / (2.0 * (1.0 / eps).ln()), delta / 2.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefRun {
    pub run: AutomatonRun,
    /// Only when recording was requested.
    pub timeline: Option<Timeline>,
}

/// Exponential delay conditioned on falling inside [0, dt), drawn after a
/// Bernoulli(1 - e^(-dt/tau)) decision.
fn window_delay<R: Rng + ?Sized>(p_fire: f64, tau: f64, rng: &mut R) -> Option<f64> {
    if rng.random::<f64>() >= p_fire {
        return None;
    }
    let v: f64 = rng.random::<f64>() * p_fire;
    Some(-tau * (-v).ln_1p())
}

pub fn project_clock_tick<R: Rng + ?Sized>(
    aut: &HybridAutomaton,
    rules: Option<&RuleSet>,
    cfg: &RefConfig,
    record: bool,
    rng: &mut R,
) -> RefRun {
    let out = aut.outgoing();
    let p_fire = -(-cfg.dt / cfg.tau).exp_m1();
    let mut s = aut.initial_state();
    let mut run = AutomatonRun::default();
    let mut tl = record.then(Timeline::new);
    let mode_prop = |m: usize| Term::app("mode", vec![Term::sym(&aut.modes[m].id)]);
    if let Some(tl) = tl.as_mut() {
        tl.record(0.0, Term::sym("start"), EventClass::Physical)
            .expect("fresh");
        tl.assert_prop(mode_prop(0));
        if let Some(rs) = rules {
            let _ = apply_effect_rules(tl, &Term::sym("start"), &rs.effect_rules, rng);
        }
    }
    let mut k: u64 = 0;
    loop {
        let t = k as f64 * cfg.dt;
        let leaf = out[s.mode].is_empty();
        if t > cfg.horizon + 1e-12 {
            run.horizon_exceeded = !leaf;
            break;
        }
        if leaf && !record {
            break;
        }
        let pos = s.vals0 + s.velocity * (t - s.t0);
        if let Some(tl) = tl.as_mut() {
            let ev = Term::app("clock-tick", vec![Term::num(t)]);
            tl.record(t, ev, EventClass::Computational)
                .expect("ticks increase");
            if k > 0 {
                tl.clip(&Term::app("now", vec![Term::num((k - 1) as f64 * cfg.dt)]));
            }
            tl.assert_prop(Term::app("now", vec![Term::num(t)]));
            let o = tl.last_mut().expect("just recorded");
            o.x = Some(pos.x);
            o.y = Some(pos.y);
            o.mode = Some(aut.modes[s.mode].id.clone());
        }
        let mut best: Option<(f64, usize)> = None;
        for &e in &out[s.mode] {
            if condition_holds(&aut.edges[e].condition, pos, s.seg_start) {
                if let Some(d) = window_delay(p_fire, cfg.tau, rng) {
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, e));
                    }
                }
            }
        }
        // exogenous events sampled per tick, interleaved with the jump by date
        let mut exo: Vec<(f64, Term)> = Vec::new();
        if let (Some(rs), Some(tl)) = (rules, tl.as_ref()) {
            for c in enabled_exogenous(tl, &rs.exo_rules) {
                let p = -(-cfg.dt / c.spacing).exp_m1();
                if let Some(d) = window_delay(p, c.spacing, rng) {
                    exo.push((t + d, c.event));
                }
            }
            exo.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        let jump_at = best.map(|(d, _)| t + d);
        if let (Some(rs), Some(tl)) = (rules, tl.as_mut()) {
            for (te, ev) in exo
                .iter()
                .filter(|(te, _)| jump_at.is_none_or(|tj| *te <= tj))
            {
                tl.record(*te, ev.clone(), EventClass::Physical)
                    .expect("ordered");
                let _ = apply_effect_rules(tl, ev, &rs.effect_rules, rng);
            }
        }
        if let Some((d, e)) = best {
            let tj = t + d;
            let to = sample_successor(&aut.edges[e], rng);
            let jpos = s.vals0 + s.velocity * (tj - s.t0);
            run.jumps.push(JumpRecord {
                t: tj,
                edge: e,
                from: s.mode,
                to,
                pos: jpos,
            });
            if let Some(tl) = tl.as_mut() {
                let ev = Term::app("jump", vec![Term::sym(&aut.edges[e].id)]);
                tl.record(tj, ev, EventClass::Physical).expect("ordered");
                tl.clip(&mode_prop(s.mode));
                tl.assert_prop(mode_prop(to));
                let o = tl.last_mut().expect("just recorded");
                o.x = Some(jpos.x);
                o.y = Some(jpos.y);
                o.mode = Some(aut.modes[to].id.clone());
            }
            s = aut.jump(&s, e, to, tj);
        }
        if let (Some(rs), Some(tl)) = (rules, tl.as_mut()) {
            for (te, ev) in exo
                .iter()
                .filter(|(te, _)| jump_at.is_some_and(|tj| *te > tj))
            {
                tl.record(*te, ev.clone(), EventClass::Physical)
                    .expect("ordered");
                let _ = apply_effect_rules(tl, ev, &rs.effect_rules, rng);
            }
        }
        k += 1;
    }
    run.end_mode = s.mode;
    run.end_time = s.t0;
    RefRun { run, timeline: tl }
}

/// Did some edge whose condition became true strictly earlier lose to a
/// later-enabled one?
pub fn has_order_anomaly(aut: &HybridAutomaton, run: &AutomatonRun, horizon: f64) -> bool {
    let out = aut.outgoing();
    let mut s = aut.initial_state();
    for j in &run.jumps {
        let sat = |e: usize| first_satisfaction(&aut.edges[e].condition, &s, horizon);
        if let Some(tf) = sat(j.edge) {
            if out[s.mode]
                .iter()
                .any(|&e| e != j.edge && sat(e).is_some_and(|t| t < tf - 1e-9))
            {
                return true;
            }
        }
        s = aut.jump(&s, j.edge, j.to, j.t);
    }
    false
}

/// Empirical distribution of mode sequences.
pub type SequenceDistribution = BTreeMap<String, usize>;

pub fn total_variation(a: &SequenceDistribution, b: &SequenceDistribution) -> f64 {
    let na: usize = a.values().sum();
    let nb: usize = b.values().sum();
    let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    0.5 * keys
        .iter()
        .map(|k| {
            let p = *a.get(*k).unwrap_or(&0) as f64 / na.max(1) as f64;
            let q = *b.get(*k).unwrap_or(&0) as f64 / nb.max(1) as f64;
            (p - q).abs()
        })
        .sum::<f64>()
}

pub fn efficient_distribution(
    aut: &HybridAutomaton,
    samples: usize,
    horizon: f64,
    seed: u64,
) -> SequenceDistribution {
    let keys: Vec<String> = (0..samples)
        .into_par_iter()
        .map(|i| {
            project_automaton(aut, horizon, &mut stream(seed, i as u64)).mode_sequence_key(aut)
        })
        .collect();
    count(keys)
}

fn count(keys: Vec<String>) -> SequenceDistribution {
    let mut d = SequenceDistribution::new();
    for k in keys {
        *d.entry(k).or_default() += 1;
    }
    d
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceLevel {
    pub delta: f64,
    pub dt: f64,
    pub tau: f64,
    pub tv: f64,
    pub anomaly_rate: f64,
}

/// Compare the reference projector at each `delta` (fixed `eps`) with the
/// efficient projector, `samples` runs per side.
pub fn convergence(
    aut: &HybridAutomaton,
    eps: f64,
    deltas: &[f64],
    samples: usize,
    horizon: f64,
    seed: u64,
) -> Result<Vec<ConvergenceLevel>, RefError> {
    let eff = efficient_distribution(aut, samples, horizon, seed);
    let mut levels = Vec::new();
    for (li, &delta) in deltas.iter().enumerate() {
        let (tau, dt) = choose_ref_parameters(eps, delta)?;
        let cfg = RefConfig { dt, tau, horizon };
        let runs: Vec<(String, bool)> = (0..samples)
            .into_par_iter()
            .map(|i| {
                let mut r = stream(seed ^ 0x5eed_0000 ^ li as u64, i as u64);
                let run = project_clock_tick(aut, None, &cfg, false, &mut r).run;
                (
                    run.mode_sequence_key(aut),
                    has_order_anomaly(aut, &run, horizon),
                )
            })
            .collect();
        let anomalies = runs.iter().filter(|r| r.1).count();
        let dist = count(runs.into_iter().map(|r| r.0).collect());
        levels.push(ConvergenceLevel {
            delta,
            dt,
            tau,
            tv: total_variation(&eff, &dist),
            anomaly_rate: anomalies as f64 / samples as f64,
        });
    }
    Ok(levels)
}

pub fn convergence_csv(levels: &[ConvergenceLevel]) -> String {
    let mut s = String::from("level,delta,dt,tau,tv,anomaly_rate\n");
    for (i, l) in levels.iter().enumerate() {
        s.push_str(&format!(
            "{i},{},{},{:.6},{:.4},{:.4}\n",
            l.delta, l.dt, l.tau, l.tv, l.anomaly_rate
        ));
    }
    s
}

/// One edge: moving right along y = 0 from `start_x` at office speed until
/// x >= 200.
pub fn one_edge_fixture(start_x: f64) -> HybridAutomaton {
    let mode = |i: usize, flow: FlowSpec| ControlMode {
        id: HybridAutomaton::mode_id(i),
        flow,
        travel_mode: TravelMode::Office,
        signature: String::new(),
    };
    HybridAutomaton {
        start: Point::new(start_x, 0.0),
        speeds: Speeds::default(),
        modes: vec![
            mode(
                0,
                FlowSpec::Toward {
                    target: Point::new(10_000.0, 0.0),
                    rotation: 0.0,
                },
            ),
            mode(1, FlowSpec::Rest),
        ],
        edges: vec![JumpEdge {
            id: "e1".into(),
            from: 0,
            label: "cross".into(),
            condition: JumpCondition::Region {
                region: Region::half_plane(Axis::X, 200.0, Side::Above),
            },
            trigger: Trigger::Wait { thread: 0 },
            bits: 0,
            successors: vec![Successor {
                mode: 1,
                lo: 1,
                hi: 1,
            }],
        }],
    }
}

/// Fraction of runs in which the reference projector jumps within `delta`
/// of the condition becoming true; the start offset is random so the tick
/// phase is too.
pub fn jump_delay_rate(
    eps: f64,
    delta: f64,
    runs: usize,
    seed: u64,
) -> Result<(usize, usize), RefError> {
    let (tau, dt) = choose_ref_parameters(eps, delta)?;
    let hits = (0..runs)
        .into_par_iter()
        .filter(|&i| {
            let mut r = stream(seed, i as u64);
            let x0 = r.random::<f64>() * 100.0;
            let aut = one_edge_fixture(x0);
            let t_c = (200.0 - x0) / aut.speeds.office;
            let cfg = RefConfig {
                dt,
                tau,
                horizon: t_c + 10.0 * delta + 1.0,
            };
            let run = project_clock_tick(&aut, None, &cfg, false, &mut r).run;
            run.jumps.first().is_some_and(|j| j.t - t_c <= delta)
        })
        .count();
    Ok((hits, runs))
}
