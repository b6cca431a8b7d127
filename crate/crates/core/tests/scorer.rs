use netmas::knowledge::{Chunk, EntityDictionary, KnowledgeStore};
use netmas::planner::{parse_plan_text, render_plan_text, PlanStep, StepAction, TroubleshootingPlan};
use netmas::scorer::{score_format, score_grounding, score_plan, total_reward, RewardConfig, ScoreError};
use proptest::prelude::*;

fn fixture(name: &str) -> TroubleshootingPlan {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn chunks_of(store: &KnowledgeStore, plan: &TroubleshootingPlan) -> Vec<Chunk> {
    plan.source_chunks
        .iter()
        .map(|id| store.chunk(id).unwrap().clone())
        .collect()
}

fn strip_think(raw: &str) -> String {
    let start = raw.find("<think>").unwrap();
    let end = raw.find("</think>").unwrap() + "</think>".len();
    format!("{}{}", &raw[..start], &raw[end..])
}

#[test]
fn original_model_row() {
    let cfg = RewardConfig::default();
    // RAGAS 3.44 split over the three grounding components.
    let row = total_reward(2.52, 1.20, 1.20, 1.04, &cfg).unwrap();
    assert_eq!(row.total, 5.96);
    assert_eq!(format!("{:.2}", row.ragas_sum()), "3.44");
    assert_eq!(row.total, row.format_reward + row.completeness + row.relevancy + row.groundedness);
}

#[test]
fn fine_tuned_row() {
    let cfg = RewardConfig::default();
    let row = total_reward(5.31, 1.73, 1.73, 1.73, &cfg).unwrap();
    assert_eq!(format!("{:.2}", row.ragas_sum()), "5.19");
    assert_eq!(format!("{:.2}", row.total), "10.50");
    // The published total is 10.51: one unit in the last rounded place.
    assert!((row.total - 10.51).abs() <= 0.01 + 1e-12);
}

#[test]
fn total_reward_errors() {
    let cfg = RewardConfig::default();
    assert_eq!(total_reward(0.0, 0.0, 0.0, 0.0, &cfg).unwrap().total, 0.0);
    assert_eq!(
        total_reward(1.0, -0.5, 0.0, 0.0, &cfg).unwrap_err(),
        ScoreError::NegativeComponent {
            component: "completeness".into(),
            value: -0.5
        }
    );
    assert!(matches!(
        total_reward(f64::NAN, 0.0, 0.0, 0.0, &cfg),
        Err(ScoreError::NegativeComponent { .. })
    ));
    assert_eq!(
        total_reward(6.5, 0.0, 0.0, 0.0, &cfg).unwrap_err(),
        ScoreError::ComponentAboveMax {
            component: "format_reward".into(),
            value: 6.5,
            max: 6.0
        }
    );
    assert!(matches!(
        total_reward(0.0, 0.0, 0.0, 2.1, &cfg),
        Err(ScoreError::ComponentAboveMax { .. })
    ));
}

#[test]
fn exemplar_format_rewards() {
    let cfg = RewardConfig::default();
    for name in ["exemplar_power_plan.json", "exemplar_core_plan.json"] {
        let plan = fixture(name);
        let full = score_format(&plan.raw_text, cfg.format_max);
        assert_eq!(full.reward, cfg.format_max, "{name}");
        assert_eq!(full.checks.passed(), 6);
        let stripped = score_format(&strip_think(&plan.raw_text), cfg.format_max);
        assert_eq!(stripped.reward, cfg.format_max * 5.0 / 6.0, "{name}");
        assert!(!stripped.checks.think_tags);
        assert!(stripped.checks.no_stray_text);
    }
}

#[test]
fn format_check_table() {
    let good = "<think>r</think><answer><step n=\"1\">a</step><step n=\"2\">b</step></answer>";
    assert_eq!(score_format(good, 6.0).reward, 6.0);
    let cases: [(String, usize); 7] = [
        (String::new(), 0),
        (good.replace("n=\"2\"", "n=\"3\""), 5),
        (good.replace(">b<", "> <"), 5),
        (format!("Sure. {good}"), 5),
        (good.replace("</answer>", "</answer></answer>"), 4),
        ("<think>r</think><answer></answer>".into(), 3),
        ("<step n=\"1\">x</step>".into(), 3),
    ];
    for (text, passed) in cases {
        let s = score_format(&text, 6.0);
        assert_eq!(s.checks.passed(), passed, "{text:?} {:?}", s.checks);
        assert_eq!(s.reward, passed as f64);
    }
}

#[test]
fn exemplars_score_high_against_their_passages() {
    let store = KnowledgeStore::embedded();
    let cfg = RewardConfig::default();
    for name in ["exemplar_power_plan.json", "exemplar_core_plan.json"] {
        let plan = fixture(name);
        let chunks = chunks_of(&store, &plan);
        let s = score_plan(&plan, &plan.intent_ref, &chunks, store.dictionary(), &cfg).unwrap();
        let b = s.breakdown;
        for (component, value) in [
            ("completeness", b.completeness),
            ("relevancy", b.relevancy),
            ("groundedness", b.groundedness),
        ] {
            assert!(value > 0.8 * cfg.component_max, "{name} {component} = {value}");
        }
        assert_eq!(b.groundedness, cfg.component_max);
        assert!(s.grounding.unsupported.is_empty());
        assert!(s.passes_gate);
        assert_eq!(s, score_plan(&plan, &plan.intent_ref, &chunks, store.dictionary(), &cfg).unwrap());
    }
}

#[test]
fn completeness_and_unsupported_entities() {
    let chunk = Chunk {
        chunk_id: "c#0000".into(),
        doc_id: "c".into(),
        ordinal: 0,
        text: "Check pmVoltage and pmCurrent1 on every unit.".into(),
        token_count: 8,
        token_offset: 0,
    };
    let step = |targets: &[&str]| PlanStep {
        ordinal: 1,
        action: StepAction::MonitorCounters,
        targets: targets.iter().map(|t| t.to_string()).collect(),
        narrative: "watch every unit".into(),
    };
    let plan = |targets: &[&str]| {
        let steps = vec![step(targets)];
        TroubleshootingPlan {
            plan_id: "p".into(),
            intent_ref: String::new(),
            reasoning: String::new(),
            raw_text: render_plan_text("", &steps),
            steps,
            source_chunks: vec![],
        }
    };
    let dict = EntityDictionary::new();
    let all = score_grounding(&plan(&["pmVoltage", "pmCurrent1"]), "unit", &[chunk.clone()], &dict, 2.0).unwrap();
    assert_eq!(all.completeness, 2.0);
    assert_eq!(all.groundedness, 2.0);
    assert_eq!(all.relevancy, 2.0);
    let half = score_grounding(&plan(&["pmVoltage"]), "unit", &[chunk.clone()], &dict, 2.0).unwrap();
    assert_eq!(half.completeness, 1.0);
    let bogus = score_grounding(&plan(&["pmVoltage", "pmGhost"]), "unit", &[chunk], &dict, 2.0).unwrap();
    assert_eq!(bogus.unsupported, ["pmGhost"]);
    assert_eq!(bogus.groundedness, 1.0);
}

#[test]
fn planner_output_meets_the_groundedness_gate() {
    let store = KnowledgeStore::embedded();
    let cfg = RewardConfig::default();
    let queries = [
        ("power", "Input Power Failure alarms on several radios"),
        ("power", "voltage drops during busy hours"),
        ("core", "PDU session degradation on smf-1"),
        ("core", "NRF heartbeat lost and SingleHttpConnectionLost"),
    ];
    for (collection, q) in queries {
        let chunks: Vec<Chunk> = store
            .retrieve_in(q, 3, Some(collection))
            .unwrap()
            .hits
            .into_iter()
            .map(|h| h.chunk)
            .collect();
        let plan = netmas::planner::generate_plan(q, &chunks).unwrap();
        let s = score_plan(&plan, q, &chunks, store.dictionary(), &cfg).unwrap();
        assert_eq!(s.breakdown.groundedness, cfg.component_max, "{q}: {:?}", s.grounding.unsupported);
        assert_eq!(s.breakdown.format_reward, cfg.format_max);
    }
}

fn plan_text() -> impl Strategy<Value = String> {
    let piece = prop::sample::select(vec![
        "<think>", "</think>", "<answer>", "</answer>", "<step n=\"1\">", "<step n=\"2\">",
        "<step n=\"3\">", "</step>", "text", " ", "Targets: pmVoltage",
    ]);
    prop::collection::vec(piece, 0..16).prop_map(|p| p.concat())
}

proptest! {
    #[test]
    fn format_reward_is_a_count_of_checks(text in plan_text(), max in 0.5f64..12.0) {
        let s = score_format(&text, max);
        prop_assert_eq!(s.reward, max * s.checks.passed() as f64 / 6.0);
        prop_assert!(s.reward >= 0.0 && s.reward <= max);
        prop_assert_eq!(score_format(&text, max), s);
    }

    #[test]
    fn removing_an_unsupported_entity_never_lowers_groundedness(
        real in prop::collection::vec(prop::sample::select(vec!["pmVoltage", "pmCurrent1", "pmCurrent2"]), 1..4),
        fake in prop::collection::vec("pmZz[0-9]{1,3}", 1..4),
    ) {
        let store = KnowledgeStore::embedded();
        let chunk = store
            .chunks()
            .iter()
            .find(|c| c.doc_id == "power/energy_meter_counters.txt")
            .unwrap()
            .clone();
        let mut targets: Vec<String> = real.iter().map(|s| s.to_string()).collect();
        targets.extend(fake.iter().cloned());
        let mut plan = fixture("exemplar_power_plan.json");
        plan.steps[0].targets = targets;
        let before = score_grounding(&plan, "x", &[chunk.clone()], store.dictionary(), 2.0).unwrap();
        prop_assert!(!before.unsupported.is_empty());
        let drop = before.unsupported[0].clone();
        plan.steps[0].targets.retain(|t| *t != drop);
        let after = score_grounding(&plan, "x", &[chunk], store.dictionary(), 2.0).unwrap();
        prop_assert!(after.groundedness >= before.groundedness);
        for v in [after.completeness, after.relevancy, after.groundedness] {
            prop_assert!((0.0..=2.0).contains(&v));
        }
    }

    #[test]
    fn breakdown_total_is_the_sum(
        f in 0.0f64..=6.0, c in 0.0f64..=2.0, r in 0.0f64..=2.0, g in 0.0f64..=2.0,
    ) {
        let cfg = RewardConfig::default();
        let b = total_reward(f, c, r, g, &cfg).unwrap();
        prop_assert_eq!(b.total, f + c + r + g);
        prop_assert!(b.total <= cfg.total_max());
        prop_assert_eq!(b.passes_gate(&cfg), b.total + 1e-12 >= 0.6 * 12.0);
    }
}

#[test]
fn parsed_exemplar_scores_like_the_original() {
    let store = KnowledgeStore::embedded();
    let cfg = RewardConfig::default();
    let plan = fixture("exemplar_core_plan.json");
    let chunks = chunks_of(&store, &plan);
    let parsed = parse_plan_text(&plan.raw_text).unwrap();
    let a = score_plan(&plan, &plan.intent_ref, &chunks, store.dictionary(), &cfg).unwrap();
    let b = score_plan(&parsed, &plan.intent_ref, &chunks, store.dictionary(), &cfg).unwrap();
    assert_eq!(a.breakdown, b.breakdown);
}
