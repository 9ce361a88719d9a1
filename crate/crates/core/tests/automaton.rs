use crpsim::automaton::*;
use crpsim::geom::Point;
use crpsim::lang::{parse_plan, TravelMode};
use crpsim::projector::{project_automaton, run_timeline};
use crpsim::reference::*;
use crpsim::rng::stream;

const LEAVE_OFFICE: &str = include_str!("../data/plans/leave-office.plan");

fn leave_office() -> (crpsim::lang::Plan, HybridAutomaton) {
    let plan = parse_plan(LEAVE_OFFICE).unwrap();
    let aut = unfold(&plan, Point::new(2400.0, 600.0), &UnfoldConfig::default()).unwrap();
    (plan, aut)
}

fn two_way(lo: u32, hi: u32, bits: u32) -> JumpEdge {
    JumpEdge {
        id: "e1".into(),
        from: 0,
        label: "x".into(),
        condition: JumpCondition::Network { text: "x".into() },
        trigger: Trigger::Wait { thread: 0 },
        bits,
        successors: vec![
            Successor {
                mode: 1,
                lo: 1,
                hi: lo,
            },
            Successor {
                mode: 2,
                lo: lo + 1,
                hi,
            },
        ],
    }
}

#[test]
fn interpolation() {
    let s = AutomatonState {
        mode: 0,
        t0: 2.0,
        vals0: Point::new(0.0, 0.0),
        seg_start: Point::new(0.0, 0.0),
        velocity: Point::new(1.0, 2.0),
    };
    assert_eq!(state_var_vals(&s, 5.0).unwrap(), Point::new(3.0, 6.0));
    assert!(state_var_vals(&s, 1.0).is_err());

    let start = Point::new(2400.0, 600.0);
    let v = flow_velocity(
        &FlowSpec::Toward {
            target: Point::new(2300.0, 800.0),
            rotation: 0.0,
        },
        start,
        50.0,
    );
    let s = AutomatonState {
        mode: 0,
        t0: 0.0,
        vals0: start,
        seg_start: start,
        velocity: v,
    };
    let p = state_var_vals(&s, 1.0).unwrap();
    assert!(
        (p.x - 2377.64).abs() < 1e-2 && (p.y - 644.72).abs() < 1e-2,
        "{p:?}"
    );
}

#[test]
fn successor_calibration() {
    let e = two_way(12, 16, 4);
    assert!(validate_edges(&[e.clone()], 3).is_empty());
    let mut r = stream(1, 0);
    let n = 100_000;
    let hits = (0..n).filter(|_| sample_successor(&e, &mut r) == 1).count();
    assert!((hits as f64 / n as f64 - 0.75).abs() < 0.01);
    let half = two_way(8, 16, 4);
    let hits = (0..n)
        .filter(|_| sample_successor(&half, &mut r) == 1)
        .count();
    assert!((hits as f64 / n as f64 - 0.5).abs() < 0.01);
    let single = JumpEdge {
        bits: 0,
        successors: vec![Successor {
            mode: 1,
            lo: 1,
            hi: 1,
        }],
        ..e
    };
    assert!((0..100).all(|_| sample_successor(&single, &mut r) == 1));
}

#[test]
fn range_validation() {
    let overlap = JumpEdge {
        successors: vec![
            Successor {
                mode: 1,
                lo: 1,
                hi: 9,
            },
            Successor {
                mode: 2,
                lo: 9,
                hi: 16,
            },
        ],
        ..two_way(12, 16, 4)
    };
    assert!(matches!(
        validate_edges(&[overlap], 3)[..],
        [Violation::Overlap { .. }]
    ));
    let gap = JumpEdge {
        successors: vec![
            Successor {
                mode: 1,
                lo: 1,
                hi: 7,
            },
            Successor {
                mode: 2,
                lo: 9,
                hi: 16,
            },
        ],
        ..two_way(12, 16, 4)
    };
    assert!(matches!(
        validate_edges(&[gap], 3)[..],
        [Violation::Gap { from: 8, to: 8, .. }]
    ));
    let unknown = two_way(12, 16, 4);
    assert!(!validate_edges(&[unknown], 2).is_empty());
}

#[test]
fn quantization() {
    assert_eq!(quantize(&[0.75, 0.25]).unwrap(), (2, vec![3, 1]));
    assert_eq!(quantize(&[1.0]).unwrap(), (0, vec![1]));
    let (bits, counts) = quantize(&[0.1, 0.9]).unwrap();
    assert!(bits <= 16);
    assert_eq!(counts.iter().sum::<u32>(), 1 << bits);
    assert!(quantize(&[-0.5, 1.5]).is_err());
    assert_eq!(ranges(&[3, 0, 1]), vec![Some((1, 3)), None, Some((4, 4))]);
}

#[test]
fn leave_office_initial_edges() {
    let plan = parse_plan(LEAVE_OFFICE).unwrap();
    let aut =
        build_automaton_from_state(&plan, Point::new(2400.0, 600.0), &UnfoldConfig::default())
            .unwrap();
    let root: Vec<&JumpEdge> = aut.edges.iter().filter(|e| e.from == 0).collect();
    assert_eq!(root.len(), 2);
    assert!(matches!(root[0].condition, JumpCondition::Region { .. }));
    assert_eq!(root[0].label, "entering-dw?");
    assert_eq!(
        root[1].condition,
        JumpCondition::Arrival {
            target: Point::new(2300.0, 800.0)
        }
    );
    assert_eq!(aut.modes[0].travel_mode, TravelMode::Office);
}

#[test]
fn leave_office_unfold_shape() {
    let (_, aut) = leave_office();
    assert!(aut.validate().is_empty());
    // every mode except the root has exactly one incoming edge: a tree
    let mut incoming = vec![0; aut.modes.len()];
    for e in &aut.edges {
        for s in &e.successors {
            incoming[s.mode] += 1;
        }
    }
    assert_eq!(incoming[0], 0);
    assert!(incoming[1..].iter().all(|&c| c == 1));
    let json = aut.to_json();
    let back: HybridAutomaton = serde_json::from_str(&json).unwrap();
    assert_eq!(back, aut);
}

#[test]
fn efficient_runs_follow_branches() {
    let (plan, aut) = leave_office();
    let mut seqs = std::collections::BTreeSet::new();
    for i in 0..2000 {
        let run = project_automaton(&aut, 600.0, &mut stream(3, i));
        replay(&plan, &aut, &run).unwrap();
        assert!(!run.horizon_exceeded);
        seqs.insert(run.mode_sequence_key(&aut));
    }
    // nominal or rotated heading after the first waypoint
    assert_eq!(seqs.len(), 2, "{seqs:?}");
    let run = project_automaton(&aut, 600.0, &mut stream(3, 0));
    let tl = run_timeline(&aut, &run);
    assert_eq!(tl.len(), run.jumps.len() + 1);
}

#[test]
fn reference_runs_follow_branches() {
    let (plan, aut) = leave_office();
    let (tau, dt) = choose_ref_parameters(0.05, 0.5).unwrap();
    let cfg = RefConfig {
        dt,
        tau,
        horizon: 600.0,
    };
    for i in 0..300 {
        let run = project_clock_tick(&aut, None, &cfg, false, &mut stream(4, i)).run;
        replay(&plan, &aut, &run).unwrap();
    }
}

#[test]
fn replay_rejects_foreign_paths() {
    let (plan, aut) = leave_office();
    let mut run = project_automaton(&aut, 600.0, &mut stream(3, 1));
    run.jumps.pop();
    assert!(matches!(
        replay(&plan, &aut, &run),
        Err(ReplayError::NotLeaf(_))
    ));
    let mut run = project_automaton(&aut, 600.0, &mut stream(3, 1));
    run.jumps.swap(0, 1);
    assert!(replay(&plan, &aut, &run).is_err());
}

#[test]
fn parameters() {
    let (tau, dt) = choose_ref_parameters((-1.0f64).exp(), 2.0).unwrap();
    assert!((tau - 1.0).abs() < 1e-12 && dt == 1.0);
    let (tau, dt) = choose_ref_parameters(0.05, 0.5).unwrap();
    assert!((tau - 0.08345).abs() < 1e-4 && dt == 0.25);
    assert!(choose_ref_parameters(1.0, 0.5).is_err());
    assert!(choose_ref_parameters(0.0, 0.5).is_err());
}

#[test]
fn rest_mode_only_ticks() {
    let mut aut = one_edge_fixture(0.0);
    aut.edges.clear();
    let cfg = RefConfig {
        dt: 0.5,
        tau: 0.1,
        horizon: 10.0,
    };
    let r = project_clock_tick(&aut, None, &cfg, true, &mut stream(0, 0));
    let tl = r.timeline.unwrap();
    assert!(tl.occurrences()[1..]
        .iter()
        .all(|o| o.event.functor() == "clock-tick"));
    let last = tl.occurrences().last().unwrap();
    assert!((last.date - 10.0).abs() < 1e-9);
    assert!((last.x.unwrap() - 300.0).abs() < 1e-9);
}

#[test]
fn jump_delay_small() {
    let (hits, n) = jump_delay_rate(0.05, 0.5, 2000, 9).unwrap();
    assert!(hits as f64 / n as f64 >= 0.94, "{hits}/{n}");
}

#[test]
fn convergence_trend() {
    let (_, aut) = leave_office();
    let levels = convergence(&aut, 0.05, &[2.0, 0.5], 2000, 600.0, 5).unwrap();
    println!("{}", convergence_csv(&levels));
    assert!(levels[1].tv < levels[0].tv);
}
