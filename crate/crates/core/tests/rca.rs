mod common;

use netmas::knowledge::KnowledgeStore;
use netmas::rca::{
    collect_evidence, correlate, detect_deviations, Direction, EvidenceWeights, RcaError, Series, SeriesRef,
};
use netmas::telemetry::catalog::Topology;
use netmas::telemetry::{Alarm, LogEntry, LogLevel, ScenarioKind, Severity};
use netmas::time::Window;
use proptest::prelude::*;

const PERIOD: i64 = 60;
const THRESHOLD: f64 = 3.0;

/// A series with `baseline.len()` baseline points followed by `eval`.
fn series(name: &str, baseline: &[f64], eval: &[f64]) -> Series {
    Series {
        key: SeriesRef {
            node: name.into(),
            object: "obj".into(),
            counter: "c".into(),
        },
        points: baseline
            .iter()
            .chain(eval)
            .enumerate()
            .map(|(i, v)| (i as i64 * PERIOD, *v))
            .collect(),
    }
}

fn baseline_window(n: usize) -> Window {
    Window::new(0, (n as i64 - 1) * PERIOD)
}

#[derive(Debug, PartialEq)]
struct Expected {
    window: Window,
    score: f64,
    direction: Direction,
}

/// Direct formulation: z-score every evaluated point against the baseline,
/// report the span from the first to the last point at or over the
/// threshold, the first maximal point as peak, and a level shift when all
/// of at least three evaluated points exceed on one side.
fn oracle(baseline: &[f64], eval: &[f64], threshold: f64) -> Option<Expected> {
    let m = common::sorted_median(baseline);
    let z: Vec<f64> = eval.iter().map(|&x| common::robust_z(x, baseline)).collect();
    let over: Vec<usize> = (0..eval.len()).filter(|&i| z[i] >= threshold).collect();
    let (&first, &last) = (over.first()?, over.last()?);
    let mut peak = first;
    for &i in &over {
        if z[i] > z[peak] {
            peak = i;
        }
    }
    let up = eval[peak] - m > 0.0;
    let one_side = over.iter().all(|&i| (eval[i] - m > 0.0) == up);
    let direction = if over.len() == eval.len() && over.len() >= 3 && one_side {
        Direction::LevelShift
    } else if up {
        Direction::Spike
    } else {
        Direction::Drop
    };
    let t = |i: usize| (baseline.len() + i) as i64 * PERIOD;
    Some(Expected {
        window: Window::new(t(first), t(last)),
        score: z[peak],
        direction,
    })
}

#[derive(Debug, Clone)]
enum Shape {
    Quiet,
    Spike { at: usize, size: f64 },
    Step { at: usize, size: f64 },
}

fn case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    let shape = prop_oneof![
        Just(Shape::Quiet),
        (0usize..20, -40.0f64..40.0).prop_map(|(at, size)| Shape::Spike { at, size }),
        (0usize..20, -40.0f64..40.0).prop_map(|(at, size)| Shape::Step { at, size }),
    ];
    (
        50.0f64..150.0,
        prop::collection::vec(-2.0f64..2.0, 3..24),
        prop::collection::vec(-2.0f64..2.0, 1..20),
        shape,
    )
        .prop_map(|(level, base_noise, eval_noise, shape)| {
            let baseline: Vec<f64> = base_noise.iter().map(|n| level + n).collect();
            let mut eval: Vec<f64> = eval_noise.iter().map(|n| level + n).collect();
            let len = eval.len();
            match shape {
                Shape::Quiet => {}
                Shape::Spike { at, size } => eval[at % len] += size,
                Shape::Step { at, size } => eval[at % len..].iter_mut().for_each(|v| *v += size),
            }
            (baseline, eval)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn findings_equal_the_direct_oracle(cases in prop::collection::vec(case(), 1..4)) {
        // One baseline length for the whole call.
        let nb = cases.iter().map(|(b, _)| b.len()).min().unwrap();
        let all: Vec<Series> = cases
            .iter()
            .enumerate()
            .map(|(i, (b, e))| series(&format!("n{i}"), &b[..nb], e))
            .collect();
        let got = detect_deviations(&all, baseline_window(nb), THRESHOLD).unwrap();
        let want: Vec<(String, Expected)> = cases
            .iter()
            .enumerate()
            .filter_map(|(i, (b, e))| oracle(&b[..nb], e, THRESHOLD).map(|x| (format!("n{i}"), x)))
            .collect();
        prop_assert_eq!(got.len(), want.len());
        for (f, (node, x)) in got.iter().zip(&want) {
            prop_assert_eq!(&f.series_ref.node, node);
            prop_assert_eq!(f.window, x.window);
            prop_assert_eq!(f.score, x.score);
            prop_assert_eq!(f.direction, x.direction);
            prop_assert_eq!(f.baseline_median, common::sorted_median(&cases[f.series_ref.node[1..].parse::<usize>().unwrap()].0[..nb]));
        }
    }

    #[test]
    fn findings_are_scale_equivariant(
        (baseline, eval) in case(),
        scalars in prop::collection::vec(0.01f64..100.0, 10),
    ) {
        let dev: Vec<f64> = {
            let m = common::sorted_median(&baseline);
            baseline.iter().map(|b| (b - m).abs()).collect()
        };
        prop_assume!(common::sorted_median(&dev) > 0.01);
        let z: Vec<f64> = eval.iter().map(|&x| common::robust_z(x, &baseline)).collect();
        prop_assume!(z.iter().all(|z| (z - THRESHOLD).abs() > 1e-6));

        let nb = baseline.len();
        let reference = detect_deviations(&[series("n", &baseline, &eval)], baseline_window(nb), THRESHOLD).unwrap();
        for c in scalars {
            let b: Vec<f64> = baseline.iter().map(|v| v * c).collect();
            let e: Vec<f64> = eval.iter().map(|v| v * c).collect();
            let scaled = detect_deviations(&[series("n", &b, &e)], baseline_window(nb), THRESHOLD).unwrap();
            prop_assert_eq!(scaled.len(), reference.len());
            for (s, r) in scaled.iter().zip(&reference) {
                prop_assert_eq!(s.window, r.window);
                prop_assert_eq!(s.direction, r.direction);
                prop_assert!((s.score - r.score).abs() <= 1e-6 * r.score.max(1.0));
                prop_assert!((s.peak_delta - c * r.peak_delta).abs() <= 1e-9 * c * r.peak_delta.abs().max(1.0));
            }
        }
    }

    #[test]
    fn constant_series_yield_nothing(level in -1e6f64..1e6, nb in 3usize..20, ne in 1usize..20) {
        let s = series("n", &vec![level; nb], &vec![level; ne]);
        prop_assert!(detect_deviations(&[s], baseline_window(nb), THRESHOLD).unwrap().is_empty());
    }
}

#[test]
fn short_baselines_are_rejected() {
    let s = series("rru-3", &[1.0, 2.0], &[3.0, 4.0]);
    assert_eq!(
        detect_deviations(&[s], baseline_window(2), THRESHOLD).unwrap_err(),
        RcaError::InsufficientBaseline {
            series: "rru-3/obj/c".into(),
            samples: 2
        }
    );
}

#[test]
fn level_shift_needs_three_points() {
    let base = [10.0, 11.0, 9.0, 10.0, 10.5, 9.5];
    let two = detect_deviations(&[series("n", &base, &[30.0, 30.0])], baseline_window(6), THRESHOLD).unwrap();
    assert_eq!(two[0].direction, Direction::Spike);
    let three =
        detect_deviations(&[series("n", &base, &[30.0, 30.0, 30.0])], baseline_window(6), THRESHOLD).unwrap();
    assert_eq!(three[0].direction, Direction::LevelShift);
    let mixed =
        detect_deviations(&[series("n", &base, &[30.0, -10.0, 31.0])], baseline_window(6), THRESHOLD).unwrap();
    assert_eq!(mixed[0].direction, Direction::Spike);
    assert_eq!(mixed[0].peak_delta, 21.0);
}

fn power_alarm(node: &str, at: i64) -> Alarm {
    Alarm {
        alarm_id: format!("a-{node}-{at}"),
        alarm_type: "Input Power Failure".into(),
        severity: Severity::Major,
        managed_element: node.into(),
        fru: Some("FRU-1".into()),
        raised_at: at,
        cleared_at: Some(at + 600),
        description: "input voltage below range".into(),
    }
}

fn log(node: &str, at: i64, level: LogLevel, message: &str) -> LogEntry {
    LogEntry {
        node_id: node.into(),
        namespace: None,
        timestamp: at,
        level,
        message: message.into(),
    }
}

#[test]
fn partial_and_full_site_power_loss() {
    let store = KnowledgeStore::embedded();
    let topology = Topology::default();
    let horizon = Window::new(0, 10_000);
    let w = EvidenceWeights::default();

    let partial = [power_alarm("rru-6", 1000), power_alarm("rru-7", 1100), power_alarm("rru-7", 1100)];
    let evidence = collect_evidence(&[], &partial, &[], horizon, &w);
    assert_eq!(evidence.len(), 2);
    let ranked = correlate(&evidence, store.patterns(), Some(ScenarioKind::RanInputPowerFailure), &topology);
    assert_eq!(ranked.len(), 1);
    assert_eq!(ranked[0].label, "site-level power distribution issue, not site-wide outage");
    assert_eq!(ranked[0].confidence, 1.0);
    assert_eq!(ranked[0].nodes().into_iter().collect::<Vec<_>>(), ["rru-6", "rru-7"]);

    let full: Vec<Alarm> = (5..=8).map(|i| power_alarm(&format!("rru-{i}"), 1000)).collect();
    let evidence = collect_evidence(&[], &full, &[], horizon, &w);
    let ranked = correlate(&evidence, store.patterns(), Some(ScenarioKind::RanInputPowerFailure), &topology);
    assert_eq!(ranked[0].label, "site-wide power outage");

    // Alarms far apart in time do not corroborate each other.
    let apart = [power_alarm("rru-6", 1000), power_alarm("rru-1", 9000)];
    let evidence = collect_evidence(&[], &apart, &[], horizon, &w);
    let ranked = correlate(&evidence, store.patterns(), Some(ScenarioKind::RanInputPowerFailure), &topology);
    assert_eq!(ranked[0].evidence.len(), 1);
    assert_eq!(ranked[0].confidence, 0.5);
}

#[test]
fn suspended_nrf_outranks_connectivity_loss() {
    let store = KnowledgeStore::embedded();
    let topology = Topology::default();
    let logs = [
        log("nrf-1", 100, LogLevel::Info, "NRF service status: REGISTERED (nnrf-nfm)"),
        log("nrf-1", 2000, LogLevel::Warn, "NRF service status: SUSPENDED (nnrf-nfm)"),
        log("nrf-1", 5000, LogLevel::Info, "NRF service status: REGISTERED (nnrf-nfm)"),
        log("smf-1", 2100, LogLevel::Error, "SingleHttpConnectionLost towards nrf-1"),
        log("smf-1", 2160, LogLevel::Error, "SingleHttpConnectionLost towards nrf-1"),
        log("smf-1", 2200, LogLevel::Debug, "heartbeat"),
    ];
    let evidence = collect_evidence(&[], &[], &logs, Window::new(0, 9000), &EvidenceWeights::default());
    let status: Vec<_> = evidence.iter().filter(|e| e.evidence_id.starts_with("status:")).collect();
    assert_eq!(status.len(), 1);
    assert_eq!(status[0].window, Window::new(2000, 5000));
    let lost: Vec<_> = evidence.iter().filter(|e| e.evidence_id.starts_with("log:")).collect();
    assert_eq!(lost.len(), 1);
    assert_eq!(lost[0].window, Window::new(2100, 2160));

    let ranked = correlate(&evidence, store.patterns(), Some(ScenarioKind::CorePduDegradation), &topology);
    let labels: Vec<&str> = ranked.iter().map(|c| c.label.as_str()).collect();
    assert_eq!(labels, ["NRF service suspension", "SMF-NRF HTTP connectivity loss"]);
    assert_eq!(ranked[0].confidence, 1.0);
    assert!((ranked[1].confidence - 0.25).abs() < 1e-12);
    assert!(ranked[0].recommended[0].contains("restoration of the NRF"));
    // Patterns of the other scenario are never considered.
    assert!(correlate(&evidence, store.patterns(), Some(ScenarioKind::RanInputPowerFailure), &topology).is_empty());
}
