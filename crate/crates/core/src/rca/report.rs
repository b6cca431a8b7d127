use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::correlate::RootCauseCandidate;
use super::deviation::{DeviationFinding, Direction};
use crate::detect::IntentPrompt;
use crate::executor::{ExecutablePlan, ExecutionResults};
use crate::telemetry::ScenarioKind;
use crate::time::Timestamp;

pub const CONFIDENCE_NOTE: &str = "Confidence is the share of the total evidence weight carried by a \
candidate (status change 3, alarm 2, counter deviation 1, log group 1). It ranks candidates and is not a probability.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportVariant {
    Diagnosed,
    Inconclusive,
    Escalated,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcaReport {
    pub run_id: String,
    pub generated_at: Timestamp,
    pub variant: ReportVariant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioKind>,
    pub intent: String,
    pub executive_summary: String,
    pub analysis_results: Vec<String>,
    pub actions_taken: Vec<String>,
    pub recommended_next_steps: Vec<String>,
    pub findings: Vec<DeviationFinding>,
    pub candidates: Vec<RootCauseCandidate>,
    pub confidence_note: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_ref: Option<String>,
}

impl RcaReport {
    pub fn top_candidate(&self) -> Option<&RootCauseCandidate> {
        self.candidates.first()
    }
}

pub struct ReportInput<'a> {
    pub run_id: &'a str,
    pub generated_at: Timestamp,
    pub intent: &'a IntentPrompt,
    pub plan: Option<&'a ExecutablePlan>,
    pub results: Option<&'a ExecutionResults>,
    pub findings: &'a [DeviationFinding],
    pub candidates: &'a [RootCauseCandidate],
    /// Extra lines appended to the analysis section.
    pub notes: Vec<String>,
}

fn direction_word(d: Direction) -> &'static str {
    match d {
        Direction::Spike => "spike",
        Direction::Drop => "drop",
        Direction::LevelShift => "level shift",
    }
}

pub fn describe_finding(f: &DeviationFinding) -> String {
    format!(
        "{} on {}: {} of {:+.2} against a baseline median of {:.2} (robust z {:.1}) between {} and {}",
        f.series_ref.counter,
        f.series_ref.node,
        direction_word(f.direction),
        f.peak_delta,
        f.baseline_median,
        f.score.min(1e6),
        f.window.start,
        f.window.end
    )
}

fn actions_from(plan: Option<&ExecutablePlan>, results: Option<&ExecutionResults>) -> Vec<String> {
    let Some(plan) = plan else {
        return vec!["No executable plan was produced.".to_string()];
    };
    let mut out = vec![format!(
        "Executed plan {} (revision {}) with {} steps.",
        plan.plan_id,
        plan.revision,
        plan.base.steps.len()
    )];
    for step in &plan.base.steps {
        let status = results
            .and_then(|r| r.steps.iter().find(|s| s.ordinal == step.ordinal))
            .map(|s| {
                let errors = s.errors().count();
                if s.succeeded {
                    format!("{} queries succeeded", s.queries.len())
                } else {
                    format!("{errors} of {} queries failed", s.queries.len())
                }
            })
            .unwrap_or_else(|| "not executed".to_string());
        out.push(format!("Step {}: {} ({status}).", step.ordinal, step.action.title()));
    }
    out
}

/// Composes the report for any input. Without candidates the result is the
/// inconclusive variant, which recommends escalation.
pub fn compose_report(input: ReportInput<'_>) -> RcaReport {
    let mut findings = input.findings.to_vec();
    findings.sort_by(|a, b| a.series_ref.cmp(&b.series_ref));
    let mut analysis: Vec<String> = findings.iter().map(describe_finding).collect();
    if analysis.is_empty() {
        analysis.push("No counter deviated from its baseline.".to_string());
    }
    for c in input.candidates {
        let nodes: Vec<&str> = c.nodes().into_iter().collect();
        analysis.push(format!(
            "Candidate \"{}\": confidence {:.2} from {} evidence items on {}.",
            c.label,
            c.confidence,
            c.evidence.len(),
            nodes.join(", ")
        ));
    }
    analysis.extend(input.notes);

    let context = &input.intent.context;
    let (variant, summary, next) = match input.candidates.first() {
        Some(top) => {
            let nodes: Vec<&str> = top.nodes().into_iter().collect();
            let mut summary = format!(
                "Investigated: {} The most likely root cause is {} on {} (confidence {:.2}).",
                input.intent.text,
                top.label,
                nodes.join(", "),
                top.confidence
            );
            if let Some(e) = &top.explanation {
                summary.push(' ');
                summary.push_str(e);
            }
            let mut next = top.recommended.clone();
            if let Some(second) = input.candidates.get(1) {
                next.push(format!(
                    "If the issue persists, investigate the next candidate: {}.",
                    second.label
                ));
            }
            (ReportVariant::Diagnosed, summary, next)
        }
        None => (
            ReportVariant::Inconclusive,
            format!(
                "Investigated: {} The evidence matched no known root cause pattern; the case is inconclusive and needs escalation.",
                input.intent.text
            ),
            vec![
                format!(
                    "Escalate to the {} operations team with the collected evidence.",
                    context.scenario.domain_label()
                ),
                "Extend the observation window and repeat the analysis if symptoms continue.".to_string(),
            ],
        ),
    };
    RcaReport {
        run_id: input.run_id.to_string(),
        generated_at: input.generated_at,
        variant,
        scenario: Some(context.scenario),
        intent: input.intent.text.clone(),
        executive_summary: summary,
        analysis_results: analysis,
        actions_taken: actions_from(input.plan, input.results),
        recommended_next_steps: next,
        findings,
        candidates: input.candidates.to_vec(),
        confidence_note: CONFIDENCE_NOTE.to_string(),
        ground_truth_ref: None,
    }
}

/// Report for runs that stop before analysis: repeated rejection, a failed
/// score gate, or an exhausted iteration budget.
pub fn escalation_report(
    run_id: &str,
    generated_at: Timestamp,
    intent: &IntentPrompt,
    variant: ReportVariant,
    reason: &str,
    actions_taken: Vec<String>,
) -> RcaReport {
    let actions_taken = if actions_taken.is_empty() {
        vec!["No retrieval was executed.".to_string()]
    } else {
        actions_taken
    };
    RcaReport {
        run_id: run_id.to_string(),
        generated_at,
        variant,
        scenario: Some(intent.context.scenario),
        intent: intent.text.clone(),
        executive_summary: format!(
            "Investigated: {} The run stopped before a diagnosis: {reason}",
            intent.text
        ),
        analysis_results: vec![format!("No analysis was performed: {reason}")],
        actions_taken,
        recommended_next_steps: vec![
            format!(
                "Escalate to the {} operations team for manual troubleshooting.",
                intent.context.scenario.domain_label()
            ),
            format!(
                "Review the affected nodes: {}.",
                intent.context.nodes.join(", ")
            ),
        ],
        findings: Vec::new(),
        candidates: Vec::new(),
        confidence_note: CONFIDENCE_NOTE.to_string(),
        ground_truth_ref: None,
    }
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

fn list(out: &mut String, title: &str, items: &[String]) {
    let _ = write!(out, "<section><h2>{}</h2><ul>", esc(title));
    for item in items {
        let _ = write!(out, "<li>{}</li>", esc(item));
    }
    out.push_str("</ul></section>\n");
}

/// Self-contained static page with the four narrative sections in order.
pub fn render_html(report: &RcaReport) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "<!DOCTYPE html>\n<html lang=\"en\"><head><meta charset=\"utf-8\"><title>Report {id}</title>\
<style>body{{font-family:sans-serif;max-width:60em;margin:2em auto}}table{{border-collapse:collapse}}\
td,th{{border:1px solid #ccc;padding:.3em .6em}}</style></head><body>\n<h1>Network analysis report {id}</h1>\n\
<p>Variant: {variant:?}. Generated at {ts}.</p>\n",
        id = esc(&report.run_id),
        variant = report.variant,
        ts = report.generated_at
    );
    let _ = write!(
        out,
        "<section><h2>Executive summary</h2><p>{}</p></section>\n",
        esc(&report.executive_summary)
    );
    list(&mut out, "Analysis results", &report.analysis_results);
    list(&mut out, "Actions taken", &report.actions_taken);
    list(&mut out, "Recommended next steps", &report.recommended_next_steps);
    out.push_str("<section><h2>Candidates</h2><table><tr><th>Label</th><th>Confidence</th><th>Evidence</th></tr>");
    for c in &report.candidates {
        let _ = write!(
            out,
            "<tr><td>{}</td><td>{:.2}</td><td>{}</td></tr>",
            esc(&c.label),
            c.confidence,
            c.evidence.len()
        );
    }
    let _ = write!(
        out,
        "</table><p>{}</p></section>\n</body></html>\n",
        esc(&report.confidence_note)
    );
    out
}
