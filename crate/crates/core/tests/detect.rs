use netmas::detect::{
    evaluate_sla, parse_sla_rules, Comparator, DetectError, Detector, SlaRule, TemplateRegistry,
};
use netmas::pipeline::prepare;
use netmas::telemetry::{CounterSample, FaultSpec, ScenarioKind, SimConfig, Simulator};
use netmas::time::Window;
use proptest::prelude::*;

fn series(node: &str, values: &[f64]) -> Vec<CounterSample> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| CounterSample {
            node_id: node.into(),
            object_path: format!("namespace=core-5g,pod={node}"),
            counter: "pdu_session".into(),
            timestamp: 1000 + 60 * i as i64,
            value: *v,
        })
        .collect()
}

/// Breaches of one series found by sliding a `sustain`-long window and
/// marking every sample covered by an all-violating window:
/// `(start index, end index, detected index)`.
fn sliding_oracle(values: &[f64], threshold: f64, sustain: usize) -> Vec<(usize, usize, usize)> {
    let mut covered = vec![false; values.len()];
    if values.len() >= sustain {
        for start in 0..=values.len() - sustain {
            if values[start..start + sustain].iter().all(|&v| v < threshold) {
                covered[start..start + sustain].iter_mut().for_each(|c| *c = true);
            }
        }
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < values.len() {
        if covered[i] {
            let mut j = i;
            while j + 1 < values.len() && covered[j + 1] {
                j += 1;
            }
            out.push((i, j, i + sustain - 1));
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

fn rule(sustain: usize) -> SlaRule {
    SlaRule {
        sustain,
        ..SlaRule::pdu_session_floor()
    }
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![9_000.0f64..9_999.0, 10_000.0f64..11_000.0],
        0..60,
    )
}

proptest! {
    #[test]
    fn single_series_matches_sliding_windows(v in values(), sustain in 1usize..6) {
        let got = evaluate_sla(&rule(sustain), &series("smf-1", &v));
        let want = sliding_oracle(&v, 10_000.0, sustain);
        prop_assert_eq!(got.len(), want.len());
        for (b, (s, e, d)) in got.iter().zip(want) {
            prop_assert_eq!(b.window, Window::new(1000 + 60 * s as i64, 1000 + 60 * e as i64));
            prop_assert_eq!(b.samples, e - s + 1);
            prop_assert_eq!(b.detected_at, 1000 + 60 * d as i64);
            prop_assert_eq!(&b.nodes, &vec!["smf-1".to_string()]);
        }
    }

    #[test]
    fn two_nodes_merge_into_disjoint_windows(a in values(), b in values(), sustain in 1usize..4) {
        let mut samples = series("smf-1", &a);
        samples.extend(series("smf-2", &b));
        let got = evaluate_sla(&rule(sustain), &samples);

        let mut windows: Vec<(Window, &str)> = Vec::new();
        for (node, v) in [("smf-1", &a), ("smf-2", &b)] {
            for (s, e, _) in sliding_oracle(v, 10_000.0, sustain) {
                windows.push((Window::new(1000 + 60 * s as i64, 1000 + 60 * e as i64), node));
            }
        }
        windows.sort();
        let mut merged: Vec<(Window, Vec<&str>)> = Vec::new();
        for (w, node) in windows {
            if let Some((last, nodes)) = merged.last_mut() {
                if w.start <= last.end {
                    last.end = last.end.max(w.end);
                    if !nodes.contains(&node) {
                        nodes.push(node);
                        nodes.sort();
                    }
                    continue;
                }
            }
            merged.push((w, vec![node]));
        }
        let got: Vec<(Window, Vec<&str>)> = got
            .iter()
            .map(|b| (b.window, b.nodes.iter().map(String::as_str).collect()))
            .collect();
        prop_assert_eq!(got, merged);
    }
}

#[test]
fn comparator_and_scope() {
    let above = SlaRule {
        kpi: "pdu_session".into(),
        comparator: Comparator::Above,
        threshold: 100.0,
        sustain: 2,
        scope: vec!["smf-2".into()],
    };
    let mut samples = series("smf-1", &[500.0, 500.0, 500.0]);
    samples.extend(series("smf-2", &[50.0, 500.0, 500.0]));
    let got = evaluate_sla(&above, &samples);
    assert_eq!(got.len(), 1);
    assert_eq!(got[0].nodes, ["smf-2"]);
    assert_eq!(got[0].window, Window::new(1060, 1120));
}

#[test]
fn rule_documents() {
    let rules = parse_sla_rules(
        r#"[{"kpi":"pdu_session","comparator":"below","threshold":10000,"sustain":3},
            {"kpi":"registration_failure","comparator":"above","threshold":5,"sustain":1,"scope":["amf-1"]}]"#,
    )
    .unwrap();
    assert_eq!(rules[0], SlaRule::pdu_session_floor());
    assert_eq!(rules[1].scope, ["amf-1"]);
    assert_eq!(
        parse_sla_rules(r#"[{"kpi":"x","comparator":"below","threshold":1,"sustain":0}]"#),
        Err(DetectError::ZeroSustain { kpi: "x".into() })
    );
    assert!(matches!(
        parse_sla_rules(r#"[{"kpi":"x","comparator":"sideways","threshold":1,"sustain":1}]"#),
        Err(DetectError::MalformedRules(_))
    ));
    assert!(matches!(parse_sla_rules("{"), Err(DetectError::MalformedRules(_))));
}

#[test]
fn ran_alarms_fold_into_one_prompt() {
    let p = prepare(FaultSpec::reference(ScenarioKind::RanInputPowerFailure, 42)).unwrap();
    assert_eq!(p.prompt.context.scenario, ScenarioKind::RanInputPowerFailure);
    assert_eq!(p.prompt.context.nodes, ["rru-6", "rru-7"]);
    assert_eq!(p.prompt.context.trigger_refs.len(), 2);
    assert_eq!(p.prompt.context.alarms, ["Input Power Failure"]);
    assert_eq!(p.prompt.context.trigger_kind, "alarm");
    assert_eq!(
        p.prompt.text,
        "Can you help me find Input Power Failure issues and top offenders in the last 15 minutes for triage?"
    );
    assert!(p.start_at > p.prompt.context.window.end);
}

#[test]
fn core_breach_raises_the_pdu_prompt() {
    let p = prepare(FaultSpec::reference(ScenarioKind::CorePduDegradation, 42)).unwrap();
    let ctx = &p.prompt.context;
    assert_eq!(ctx.scenario, ScenarioKind::CorePduDegradation);
    assert_eq!(ctx.trigger_kind, "breach");
    assert_eq!(ctx.kpis, ["pdu_session"]);
    assert!(ctx.nodes.contains(&"smf-1".to_string()));
    assert!(ctx.window.overlaps(&p.spec.window));
    assert_eq!(
        p.prompt.text,
        "Can you help me check any abnormality causing PDU session degradation?"
    );
}

#[test]
fn clean_data_raises_nothing() {
    for scenario in [ScenarioKind::RanInputPowerFailure, ScenarioKind::CorePduDegradation] {
        for seed in [1, 2, 3] {
            let spec = FaultSpec {
                magnitude: 0.0,
                ..FaultSpec::reference(scenario, seed)
            };
            let mut sim = Simulator::new(SimConfig::default());
            let summary = sim.generate_scenario(&spec).unwrap();
            let prompts = Detector::default()
                .scan(sim.store(), sim.topology(), summary.horizon)
                .unwrap();
            assert!(prompts.is_empty(), "{scenario:?} seed {seed}: {prompts:?}");
        }
    }
}

#[test]
fn breach_without_a_template_fails_the_scan() {
    let spec = FaultSpec::reference(ScenarioKind::CorePduDegradation, 42);
    let mut sim = Simulator::new(SimConfig::default());
    let summary = sim.generate_scenario(&spec).unwrap();
    let mut detector = Detector::default();
    detector.registry.entries.retain(|e| e.scenario == ScenarioKind::RanInputPowerFailure);
    assert_eq!(
        detector.scan(sim.store(), sim.topology(), summary.horizon),
        Err(DetectError::UnknownTriggerKind("kpi:pdu_session".into()))
    );
    let empty = TemplateRegistry::from_json(r#"{"entries":[]}"#).unwrap();
    assert!(empty.entries.is_empty());
    assert!(TemplateRegistry::from_json("[").is_err());
}
