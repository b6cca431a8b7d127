mod common;

use std::collections::BTreeSet;

use netmas::knowledge::{
    chunk_document, extract_triples, personalized_pagerank, Chunk, Document, KnowledgeConfig,
    KnowledgeError, KnowledgeStore, NodeKind, PprParams,
};
use proptest::prelude::*;

fn graph_and_reset() -> impl Strategy<Value = (Vec<Vec<usize>>, Vec<usize>)> {
    (1usize..24).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::collection::vec(0..n, 0..5), n),
            prop::collection::vec(0..n, 1..4),
        )
    })
}

proptest! {
    #[test]
    fn ppr_matches_the_dense_solve((adj, reset) in graph_and_reset()) {
        let params = PprParams::default();
        let got = personalized_pagerank(&adj, &reset, params).unwrap();
        let want = common::dense_ppr(&adj, &reset, params.damping);
        prop_assert!(common::max_abs_diff(&got.scores, &want) < 1e-6);
        let sum: f64 = got.scores.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-8, "sum {}", sum);
        prop_assert!(got.scores.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn chunks_cover_every_token(
        tokens in 1usize..1500,
        size in 2usize..600,
        overlap_frac in 0.0f64..1.0,
        seps in prop::collection::vec(prop::sample::select(vec![" ", "\n", " \t "]), 1..4),
    ) {
        let overlap = ((size as f64) * overlap_frac) as usize % size;
        let words: Vec<String> = (0..tokens).map(|i| format!("w{i}")).collect();
        let mut text = String::new();
        for (i, w) in words.iter().enumerate() {
            if i > 0 {
                text.push_str(seps[i % seps.len()]);
            }
            text.push_str(w);
        }
        let chunks = chunk_document(&Document::new("doc", text), size, overlap).unwrap();

        let step = size - overlap;
        let expected_count = if tokens <= size { 1 } else { 1 + (tokens - size).div_ceil(step) };
        prop_assert_eq!(chunks.len(), expected_count);
        let mut covered = vec![false; tokens];
        for (i, c) in chunks.iter().enumerate() {
            prop_assert_eq!(c.ordinal, i);
            prop_assert_eq!(c.token_offset, i * step);
            let got: Vec<&str> = c.text.split_whitespace().collect();
            let end = c.token_offset + c.token_count;
            let want: Vec<&str> = words[c.token_offset..end].iter().map(String::as_str).collect();
            prop_assert_eq!(got, want);
            prop_assert!(c.token_count <= size);
            covered[c.token_offset..end].iter_mut().for_each(|x| *x = true);
        }
        prop_assert!(covered.into_iter().all(|x| x));
        prop_assert_eq!(chunks.last().unwrap().token_offset + chunks.last().unwrap().token_count, tokens);
    }
}

#[test]
fn ppr_rejects_bad_input() {
    let adj = vec![vec![1], vec![0]];
    assert_eq!(
        personalized_pagerank(&adj, &[], PprParams::default()).unwrap_err(),
        KnowledgeError::EmptyResetSet
    );
    assert!(matches!(
        personalized_pagerank(&adj, &[2], PprParams::default()),
        Err(KnowledgeError::ResetNodeUnknown(_))
    ));
    let bad = PprParams {
        damping: 1.0,
        ..PprParams::default()
    };
    assert!(matches!(
        personalized_pagerank(&adj, &[0], bad),
        Err(KnowledgeError::InvalidDamping(_))
    ));
}

#[test]
fn ppr_on_a_two_cycle() {
    // p0 = 0.15 + 0.85 p1, p1 = 0.85 p0  =>  p0 = 0.15 / (1 - 0.7225).
    let got = personalized_pagerank(&[vec![1], vec![0]], &[0], PprParams::default()).unwrap();
    let p0 = 0.15 / (1.0 - 0.85 * 0.85);
    assert!((got.scores[0] - p0).abs() < 1e-7);
    assert!((got.scores[1] - 0.85 * p0).abs() < 1e-7);
    // The error shrinks by 0.85 per sweep, so 100 sweeps stop short of 1e-8.
    assert!(!got.converged);
    assert_eq!(got.iterations, 100);
    let longer = PprParams {
        max_iter: 500,
        ..PprParams::default()
    };
    let got = personalized_pagerank(&[vec![1], vec![0]], &[0], longer).unwrap();
    assert!(got.converged);
    assert!((got.scores[0] - p0).abs() < 1e-7);
}

fn spo(text: &str) -> BTreeSet<(String, String, String)> {
    let chunk = Chunk {
        chunk_id: "oracle#0000".into(),
        doc_id: "oracle".into(),
        ordinal: 0,
        text: text.into(),
        token_count: text.split_whitespace().count(),
        token_offset: 0,
    };
    extract_triples(&chunk)
        .into_iter()
        .map(|t| {
            assert_eq!(t.source_chunk, "oracle#0000");
            (t.subject, t.relation, t.object)
        })
        .collect()
}

#[test]
fn twenty_sentence_triple_table() {
    let table: [(&str, &[(&str, &str, &str)]); 20] = [
        (
            "Input Power Failure raises pmPowerFailure.",
            &[("input power failure", "raises", "pmpowerfailure")],
        ),
        (
            "The alarm indicates a degraded rectifier.",
            &[("alarm", "indicates", "degraded rectifier")],
        ),
        (
            "pmVoltage tracks the input voltage of the unit.",
            &[("pmvoltage", "tracks", "input voltage of the unit")],
        ),
        (
            "During busy hours, load affects the supply.",
            &[("load", "affects", "supply")],
        ),
        (
            "A restart requires approval from the operator.",
            &[("restart", "requires", "approval")],
        ),
        (
            "Site power distribution affects RRU-6 and RRU-7.",
            &[
                ("site power distribution", "affects", "rru-6"),
                ("site power distribution", "affects", "rru-7"),
            ],
        ),
        (
            "The counter tracks voltage, current and power.",
            &[
                ("counter", "tracks", "voltage"),
                ("counter", "tracks", "current"),
                ("counter", "tracks", "power"),
            ],
        ),
        ("Nothing here matches.", &[]),
        (
            "NRF suspension indicates service loss; SMF failure raises alarms.",
            &[
                ("nrf suspension", "indicates", "service loss"),
                ("smf failure", "raises", "alarms"),
            ],
        ),
        (
            "- Battery depletion affects every site.",
            &[("battery depletion", "affects", "site")],
        ),
        ("Raises nothing.", &[]),
        (
            "The SMF requires the NRF when sessions are created.",
            &[("smf", "requires", "nrf")],
        ),
        (
            "High temperature INDICATES fan failure.",
            &[("high temperature", "indicates", "fan failure")],
        ),
        ("Congestion affects congestion.", &[]),
        ("Cable faults affect power.", &[]),
        (
            "After a reboot, the gateway raises link alarms.",
            &[("gateway", "raises", "link alarms")],
        ),
        (
            "Rectifier failure raises pmMinVoltage1 in the cabinet.",
            &[("rectifier failure", "raises", "pmminvoltage1")],
        ),
        (
            "Operator note: this procedure requires a site visit.",
            &[("procedure", "requires", "site visit")],
        ),
        (
            "The RRU indicates that the link is down.",
            &[("rru", "indicates", "link is down")],
        ),
        (
            "Power loss affects the RRU and then the baseband.",
            &[("power loss", "affects", "rru")],
        ),
    ];
    let mut all = BTreeSet::new();
    for (sentence, expected) in table {
        let want: BTreeSet<_> = expected
            .iter()
            .map(|(s, r, o)| (s.to_string(), r.to_string(), o.to_string()))
            .collect();
        assert_eq!(spo(sentence), want, "{sentence}");
        all.extend(want);
    }
    let joined: Vec<&str> = table.iter().map(|(s, _)| *s).collect();
    assert_eq!(spo(&joined.join("\n")), all);
}

#[test]
fn embedded_index_has_both_collections() {
    let store = KnowledgeStore::embedded();
    let collections: Vec<&str> = store.collections().into_iter().collect();
    assert_eq!(collections, ["core", "power"]);
    assert_eq!(
        store.graph().count(NodeKind::Passage),
        store.chunks().len()
    );
    assert!(store.patterns().len() >= 4);
    for t in store.triples() {
        assert!(store.chunk(&t.source_chunk).is_some());
    }
}

#[test]
fn retrieval_is_scoped_and_deterministic() {
    let store = KnowledgeStore::embedded();
    let q = "Input power failure alarm on rru-7; check pmPowerFailure and voltage counters";
    let a = store.retrieve_in(q, 3, Some("power")).unwrap();
    let b = store.retrieve_in(q, 3, Some("power")).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.hits.len(), 3);
    assert!(a.hits.iter().all(|c| c.chunk.doc_id.starts_with("power/")));
    let scores: Vec<f64> = a.hits.iter().map(|c| c.score).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(
        a.hits[0].chunk.doc_id,
        "power/input_power_failure_procedure.txt"
    );
    assert_eq!(store.retrieve(q, 0).unwrap_err(), KnowledgeError::InvalidK);
    assert_eq!(
        store.retrieve_in(q, 2, Some("nowhere")).unwrap_err(),
        KnowledgeError::EmptyIndex
    );
}

#[test]
fn index_file_round_trips_and_rejects_tampering() {
    let store = KnowledgeStore::embedded();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("index.json");
    store.save(&path).unwrap();
    let loaded = KnowledgeStore::load(&path).unwrap();
    assert_eq!(loaded.chunks(), store.chunks());
    assert_eq!(loaded.triples(), store.triples());
    assert_eq!(loaded.graph(), store.graph());
    let q = "PDU session drop on smf-1 with NRF suspended";
    assert_eq!(loaded.retrieve(q, 3).unwrap(), store.retrieve(q, 3).unwrap());

    let text = store.to_index_json();
    let bumped = text.replacen("\"format_version\": 1", "\"format_version\": 99", 1);
    assert_eq!(
        KnowledgeStore::from_index_json(&bumped).unwrap_err(),
        KnowledgeError::UnsupportedVersion(99)
    );
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["chunks"].as_array_mut().unwrap().pop();
    assert!(KnowledgeStore::from_index_json(&v.to_string()).is_err());
    assert!(KnowledgeStore::from_index_json("{}").is_err());
}

#[test]
fn directory_corpus_matches_build() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("ops")).unwrap();
    std::fs::write(
        dir.path().join("ops/a.txt"),
        "Grid loss raises pmPowerFailure. The counter tracks voltage.",
    )
    .unwrap();
    std::fs::write(dir.path().join("top.txt"), "Fan failure indicates overheating.").unwrap();
    std::fs::write(dir.path().join("notes.md"), "ignored").unwrap();
    let store = KnowledgeStore::from_dir(dir.path(), KnowledgeConfig::default()).unwrap();
    let ids: Vec<&str> = store.chunks().iter().map(|c| c.chunk_id.as_str()).collect();
    assert_eq!(ids, ["ops/a.txt#0000", "top.txt#0000"]);
    let collections: Vec<&str> = store.collections().into_iter().collect();
    assert_eq!(collections, ["default", "ops"]);
    assert_eq!(store.triples().len(), 3);

    let empty = tempfile::tempdir().unwrap();
    assert_eq!(
        KnowledgeStore::from_dir(empty.path(), KnowledgeConfig::default()).unwrap_err(),
        KnowledgeError::EmptyIndex
    );
}
