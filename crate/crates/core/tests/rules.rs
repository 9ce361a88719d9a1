use crpsim::rules::*;
use crpsim::term::Bindings;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn persist_expires_after_duration() {
    let rules = vec![EffectRule {
        name: "P".into(),
        event: term("go"),
        condition: vec![],
        probability: 1.0,
        effects: vec![Effect::Persist {
            duration: term("5"),
            prop: term("p"),
        }],
    }];
    let mut tl = Timeline::new();
    tl.record(2.0, term("go"), EventClass::Physical).unwrap();
    apply_effect_rules(&mut tl, &term("go"), &rules, &mut rng(0)).unwrap();
    let (t, p) = tl.next_expiry().unwrap();
    assert!((t - 7.0).abs() < 1e-9);
    tl.record(t, term("lapse(p)"), EventClass::Computational)
        .unwrap();
    assert_eq!(expire_persists(&mut tl), vec![p.clone()]);
    assert!(tl.holds_at(&p, 6.9, Side::Before));
    assert!(!tl.holds_at(&p, 7.1, Side::Before));
}

#[test]
fn clip_before_expiry_wins() {
    let mut tl = Timeline::new();
    tl.record(0.0, term("a"), EventClass::Physical).unwrap();
    tl.persist(term("p"), 5.0);
    tl.record(1.0, term("b"), EventClass::Physical).unwrap();
    tl.clip(&term("p"));
    assert!(tl.next_expiry().is_none());
    assert_eq!(tl.intervals(&term("p")), vec![(0.0, Some(1.0))]);
}

#[test]
fn visual_tracking_probability() {
    let rs = RuleSet::from_json(
        r#"{"effect_rules":[{"name":"VISUAL-TRACKING","event":"end(look-for(?l))",
            "if":["visually-tracked(?o)"],"probability":0.9,
            "effects":[{"clip":"visually-tracked(?o)"}]}]}"#,
    )
    .unwrap();
    let mut r = rng(7);
    let n = 10_000;
    let mut hits = 0;
    for _ in 0..n {
        let mut tl = Timeline::new();
        tl.record(0.0, term("start"), EventClass::Physical).unwrap();
        tl.assert_prop(term("visually-tracked(box)"));
        let ev = term("end(look-for(l1))");
        tl.record(1.0, ev.clone(), EventClass::SensorUpdate)
            .unwrap();
        let d = apply_effect_rules(&mut tl, &ev, &rs.effect_rules, &mut r).unwrap();
        if !d.closed.is_empty() {
            hits += 1;
        }
    }
    let f = hits as f64 / n as f64;
    assert!((f - 0.9).abs() < 0.01, "{f}");
}

#[test]
fn conditions_bind_and_compare() {
    let rs = RuleSet::from_json(
        r#"{"effect_rules":[{"name":"SAME-COLOR","event":"end(pick-up(?o))",
            "if":["carrying(?o2)","color(?o2, ?c)","color(?o, ?c)","neq(?o, ?o2)"],
            "effects":[{"assert":"failed(pick-up(?o))"}]}]}"#,
    )
    .unwrap();
    let mut tl = Timeline::new();
    tl.record(0.0, term("start"), EventClass::Physical).unwrap();
    for p in [
        "carrying(a)",
        "color(a, red)",
        "color(b, red)",
        "color(c, blue)",
    ] {
        tl.assert_prop(term(p));
    }
    for (o, expect) in [("b", true), ("c", false)] {
        let ev = term(&format!("end(pick-up({o}))"));
        tl.record(1.0, ev.clone(), EventClass::Physical).unwrap();
        apply_effect_rules(&mut tl, &ev, &rs.effect_rules, &mut rng(0)).unwrap();
        assert_eq!(tl.holds(&term(&format!("failed(pick-up({o}))"))), expect);
    }
}

#[test]
fn contradictory_rule_rejected() {
    let e = RuleSet::from_json(
        r#"{"effect_rules":[{"name":"X","event":"e","effects":[{"assert":"p"},{"clip":"p"}]}]}"#,
    );
    assert!(matches!(e, Err(RuleError::ContradictoryEffects(..))));
    assert!(RuleSet::from_json(r#"{"exo_rules":[{"name":"X","spacing":0,"event":"e"}]}"#).is_err());
}

#[test]
fn poisson_window_mean() {
    let rules = vec![ExoRule {
        name: "E".into(),
        condition: vec![],
        spacing: 10.0,
        event: term("tick"),
    }];
    let mut tl = Timeline::new();
    tl.record(0.0, term("start"), EventClass::Physical).unwrap();
    let mut r = rng(3);
    let n = 100_000;
    let mut total = 0usize;
    for _ in 0..n {
        let occ = sample_exogenous_occurrences(&tl, &rules, 5.0, 15.0, &mut r);
        assert!(occ.windows(2).all(|w| w[0].0 <= w[1].0));
        assert!(occ.iter().all(|o| (5.0..15.0).contains(&o.0)));
        total += occ.len();
    }
    let m = total as f64 / n as f64;
    assert!((m - 1.0).abs() < 0.02, "{m}");
}

#[test]
fn back_from_lunch_opens_door_promptly() {
    let rs = RuleSet::from_json(
        r#"{"effect_rules":[{"name":"BACK-FROM-LUNCH","event":"start","if":[],
              "effects":[{"persist-until":{"until":44700,"prop":"before-the-door-opens"}},
                         {"assert":"dieter-out"}]},
            {"name":"OPENED","event":"dieters-door-is-opened","if":["dieter-out"],
              "effects":[{"clip":"dieter-out"},{"assert":"door-open(dieter)"}]}],
            "exo_rules":[{"name":"DOOR-OPENS","if":["dieter-out","not(before-the-door-opens)"],
              "spacing":0.0001,"event":"dieters-door-is-opened"}]}"#,
    )
    .unwrap();
    let noon = 43_200.0;
    let mut r = rng(11);
    for _ in 0..10_000 {
        let mut tl = Timeline::new();
        tl.record(noon, term("start"), EventClass::Physical)
            .unwrap();
        apply_effect_rules(&mut tl, &term("start"), &rs.effect_rules, &mut r).unwrap();
        let fired = BTreeSet::<(usize, Bindings)>::new();
        assert!(
            predict_next_exogenous(&tl, &rs.exo_rules, noon, noon + 600.0, &fired, &mut r)
                .is_none()
        );
        let (t, p) = tl.next_expiry().unwrap();
        tl.record(
            t,
            term("lapse(before-the-door-opens)"),
            EventClass::Computational,
        )
        .unwrap();
        expire_persists(&mut tl);
        let (te, c) =
            predict_next_exogenous(&tl, &rs.exo_rules, t, t + 600.0, &fired, &mut r).unwrap();
        assert!(te - 44_700.0 >= 0.0 && te - 44_700.0 < 1e-3);
        tl.record(te, c.event.clone(), EventClass::Physical)
            .unwrap();
        apply_effect_rules(&mut tl, &c.event, &rs.effect_rules, &mut r).unwrap();
        assert!(tl.holds(&term("door-open(dieter)")));
        assert!(!tl.holds(&p));
    }
}

#[test]
fn window_prediction_rate() {
    // P(fires in window) = 1 - e^(-w/tau)
    let rules = vec![ExoRule {
        name: "E".into(),
        condition: vec![],
        spacing: 4.0,
        event: term("e"),
    }];
    let mut tl = Timeline::new();
    tl.record(0.0, term("start"), EventClass::Physical).unwrap();
    let fired = BTreeSet::new();
    let mut r = rng(5);
    let n = 20_000;
    let k = (0..n)
        .filter(|_| predict_next_exogenous(&tl, &rules, 0.0, 2.0, &fired, &mut r).is_some())
        .count();
    let p = 1.0 - (-0.5f64).exp();
    assert!((k as f64 / n as f64 - p).abs() < 0.015);
}

#[test]
fn randomize_matches_direct_draw() {
    let max = 8u64;
    let n = 16_000;
    let mut direct = [0usize; 8];
    let mut via = [0usize; 8];
    let mut r = rng(9);
    let mut tl = Timeline::new();
    tl.record(0.0, term("start"), EventClass::Physical).unwrap();
    for _ in 0..n {
        direct[random_number(max, &mut r).unwrap() as usize - 1] += 1;
        via[random_number_via_rules(&mut tl, max, &mut r).unwrap() as usize - 1] += 1;
    }
    let e = n as f64 / max as f64;
    for counts in [direct, via] {
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 7 dof, p = 0.001
        assert!(chi2 < 24.32, "{chi2} {counts:?}");
    }
    assert!(random_number(6, &mut r).is_none());
}
