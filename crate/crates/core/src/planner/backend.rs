use std::sync::LazyLock;

use regex::Regex;

use crate::knowledge::Chunk;
use crate::text::{extract_entities, EntityKind};

use super::grammar::render_plan_text;
use super::{plan_hash, tidy, PlanError, PlanStep, StepAction, TroubleshootingPlan};

pub const DEFAULT_ESCALATION: &str =
    "If the issue persists, perform an on-site inspection or escalate to the next support tier.";

/// A paragraph of a passage that reads as one procedure step:
/// `Title: body` on its first line, optionally followed by bullet lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcedureItem {
    pub chunk_id: String,
    pub action: StepAction,
    pub title: String,
    pub body: String,
}

impl ProcedureItem {
    pub fn text(&self) -> String {
        format!("{}: {}", self.title, self.body)
    }
}

static HEADING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([A-Z][^:\n]{2,80}):(?:\s+(.*))?$").unwrap());

pub fn procedure_items(chunk: &Chunk) -> Vec<ProcedureItem> {
    let mut items = Vec::new();
    let mut paragraph: Vec<&str> = Vec::new();
    let mut flush = |paragraph: &mut Vec<&str>| {
        if let Some(first) = paragraph.first() {
            if let Some(cap) = HEADING.captures(first) {
                let title = cap[1].trim().to_string();
                if title.split_whitespace().count() <= 10 {
                    if let Some(action) = StepAction::classify(&title) {
                        let mut body = cap.get(2).map_or("", |m| m.as_str()).trim().to_string();
                        let bullets: Vec<&str> = paragraph[1..]
                            .iter()
                            .map(|l| l.trim_start_matches(['-', '*']).trim())
                            .filter(|l| !l.is_empty())
                            .collect();
                        if !bullets.is_empty() {
                            if !body.is_empty() {
                                body.push(' ');
                            }
                            body.push_str(&bullets.join("; "));
                        }
                        items.push(ProcedureItem {
                            chunk_id: chunk.chunk_id.clone(),
                            action,
                            title,
                            body: tidy(&body),
                        });
                    }
                }
            }
        }
        paragraph.clear();
    };
    for line in chunk.text.lines() {
        let line = line.trim();
        if line.is_empty() {
            flush(&mut paragraph);
        } else {
            paragraph.push(line);
        }
    }
    flush(&mut paragraph);
    items
}

fn target_kinds(action: StepAction) -> &'static [EntityKind] {
    match action {
        StepAction::MonitorCounters => &[EntityKind::Counter],
        StepAction::CheckCorrelatedAlarms | StepAction::MonitorLogsAlarms => &[EntityKind::Alarm],
        StepAction::AnalyzeAffectedUnits => &[EntityKind::Component],
        StepAction::ConfigHealthCheck => &[EntityKind::Command],
        StepAction::AnalyzeCallFlow | StepAction::Escalate => &[],
    }
}

/// Grounded-template backend: procedure items of the passages are bucketed
/// by action, buckets are emitted in [`StepAction::ALL`] order, and an
/// escalation step always closes the plan. Narratives are the item texts
/// and targets the entities found in them, so every identifier in the plan
/// occurs in the passages.
pub fn generate_plan(intent: &str, chunks: &[Chunk]) -> Result<TroubleshootingPlan, PlanError> {
    if chunks.is_empty() {
        return Err(PlanError::NoChunks);
    }
    let items: Vec<ProcedureItem> = chunks.iter().flat_map(procedure_items).collect();
    if !items.iter().any(|i| i.action != StepAction::Escalate) {
        return Err(PlanError::NoGroundedSteps);
    }

    let mut steps = Vec::new();
    for action in StepAction::ALL {
        let mut texts: Vec<String> = Vec::new();
        for item in items.iter().filter(|i| i.action == action) {
            let t = item.text();
            if !texts.contains(&t) {
                texts.push(t);
            }
        }
        if texts.is_empty() && action != StepAction::Escalate {
            continue;
        }
        let narrative = if texts.is_empty() {
            DEFAULT_ESCALATION.to_string()
        } else {
            texts.join(" ")
        };
        let kinds = target_kinds(action);
        let targets: Vec<String> = extract_entities(&narrative)
            .into_iter()
            .filter(|e| kinds.contains(&e.kind))
            .map(|e| e.name)
            .collect();
        if action == StepAction::MonitorCounters && targets.is_empty() {
            continue;
        }
        steps.push(PlanStep {
            ordinal: steps.len() as u32 + 1,
            action,
            targets,
            narrative: tidy(&narrative),
        });
    }
    if steps.len() == 1 {
        return Err(PlanError::NoGroundedSteps);
    }

    let source_chunks: Vec<String> = chunks.iter().map(|c| c.chunk_id.clone()).collect();
    let reasoning = format!(
        "Grounded in {}. {} procedure items merged into {} steps.",
        source_chunks.join(", "),
        items.len(),
        steps.len()
    );
    let raw_text = render_plan_text(&reasoning, &steps);
    Ok(TroubleshootingPlan {
        plan_id: format!("plan-{}", plan_hash(&[intent, &raw_text])),
        intent_ref: intent.to_string(),
        reasoning,
        steps,
        source_chunks,
        raw_text,
    })
}
