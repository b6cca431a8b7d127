//! Root-cause analysis: robust deviation detection over retrieved counters,
//! correlation with alarms, logs and root-cause patterns, and the report.

mod correlate;
mod deviation;
mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::IntentPrompt;
use crate::executor::{Binding, ExecutablePlan, ExecutionResults};
use crate::knowledge::RcaPattern;
use crate::telemetry::catalog::Topology;
use crate::telemetry::CounterSample;
use crate::time::{Timestamp, Window};

pub use correlate::{collect_evidence, correlate, Evidence, EvidenceWeights, RootCauseCandidate};
pub use deviation::{
    detect_deviations, mad, median, robust_scores, series_from_samples, DeviationFinding,
    Direction, Series, SeriesRef, DEFAULT_THRESHOLD, EPSILON, LEVEL_SHIFT_RUN, MAD_SCALE,
    MIN_BASELINE,
};
pub use report::{
    compose_report, describe_finding, escalation_report, render_html, RcaReport, ReportInput,
    ReportVariant, CONFIDENCE_NOTE,
};

/// Reporting periods of history fetched before a query window as baseline.
pub const BASELINE_PERIODS: i64 = 16;

#[derive(Debug, Clone, Error, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum RcaError {
    #[error("series {series} has {samples} baseline samples, at least 3 are needed")]
    InsufficientBaseline { series: String, samples: usize },
}

/// Baseline window for a query window starting at `start`.
pub fn baseline_window(start: Timestamp, period_secs: i64) -> Window {
    Window::new(start - BASELINE_PERIODS * period_secs, start - 1)
}

/// Counter samples of one query together with the baseline fetched for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselinedQuery {
    pub baseline: Window,
    pub baseline_samples: Vec<CounterSample>,
    pub samples: Vec<CounterSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcaConfig {
    pub threshold: f64,
    pub weights: EvidenceWeights,
}

impl Default for RcaConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            weights: EvidenceWeights::default(),
        }
    }
}

pub struct RcaAnalyzer {
    pub patterns: Vec<RcaPattern>,
    pub topology: Topology,
    pub config: RcaConfig,
}

pub struct AnalysisInput<'a> {
    pub run_id: &'a str,
    pub generated_at: Timestamp,
    pub intent: &'a IntentPrompt,
    pub plan: &'a ExecutablePlan,
    pub results: &'a ExecutionResults,
    pub counters: &'a [BaselinedQuery],
}

impl RcaAnalyzer {
    pub fn new(patterns: Vec<RcaPattern>, topology: Topology) -> Self {
        Self {
            patterns,
            topology,
            config: RcaConfig::default(),
        }
    }

    /// Pairs every counter query of `results` with its baseline window.
    /// The caller fetches the baseline samples.
    pub fn baseline_requests(&self, results: &ExecutionResults) -> Vec<(Window, Binding)> {
        let mut out = Vec::new();
        for step in &results.steps {
            for q in &step.queries {
                if let Binding::Counter(cq) = &q.binding {
                    let period = crate::telemetry::catalog::counter_def(&cq.counter)
                        .map_or(60, |d| d.domain.period_secs());
                    let baseline = baseline_window(cq.window.start, period);
                    let mut fetch = cq.clone();
                    fetch.window = baseline;
                    out.push((baseline, Binding::Counter(fetch)));
                }
            }
        }
        out
    }

    pub fn analyze(&self, input: AnalysisInput<'_>) -> RcaReport {
        let mut findings = Vec::new();
        let mut skipped = 0usize;
        for q in input.counters {
            let series = series_from_samples(q.baseline_samples.iter().chain(&q.samples));
            for s in series {
                match detect_deviations(std::slice::from_ref(&s), q.baseline, self.config.threshold) {
                    Ok(found) => findings.extend(found),
                    Err(RcaError::InsufficientBaseline { .. }) => skipped += 1,
                }
            }
        }
        findings.sort_by(|a, b| a.series_ref.cmp(&b.series_ref));
        findings.dedup_by(|a, b| a.series_ref == b.series_ref);

        let horizon = input
            .plan
            .bindings
            .iter()
            .map(|b| b.window)
            .fold(input.intent.context.window, |acc, w| acc.union(&w));
        let evidence = collect_evidence(
            &findings,
            input.results.alarms(),
            input.results.logs(),
            horizon,
            &self.config.weights,
        );
        let candidates = correlate(
            &evidence,
            &self.patterns,
            Some(input.intent.context.scenario),
            &self.topology,
        );
        let mut notes = Vec::new();
        if skipped > 0 {
            notes.push(format!(
                "{skipped} series were skipped for lack of baseline samples."
            ));
        }
        let failed: Vec<String> = input
            .results
            .steps
            .iter()
            .filter(|s| !s.succeeded)
            .map(|s| s.ordinal.to_string())
            .collect();
        if !failed.is_empty() {
            notes.push(format!(
                "Steps {} returned errors; the analysis uses the data that was retrieved.",
                failed.join(", ")
            ));
        }
        compose_report(ReportInput {
            run_id: input.run_id,
            generated_at: input.generated_at,
            intent: input.intent,
            plan: Some(input.plan),
            results: Some(input.results),
            findings: &findings,
            candidates: &candidates,
            notes,
        })
    }
}
