//! Plan rewards: six binary format checks plus lexical completeness,
//! relevancy and groundedness against the retrieved passages.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::{Chunk, EntityDictionary};
use crate::planner::TroubleshootingPlan;
use crate::text::{content_term_set, extract_entities};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub format_max: f64,
    pub component_max: f64,
    /// Fraction of the maximum total a plan needs to pass the gate.
    pub gate_fraction: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            format_max: 6.0,
            component_max: 2.0,
            gate_fraction: 0.6,
        }
    }
}

impl RewardConfig {
    pub fn total_max(&self) -> f64 {
        self.format_max + 3.0 * self.component_max
    }

    pub fn gate_threshold(&self) -> f64 {
        self.gate_fraction * self.total_max()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatChecks {
    pub answer_tags: bool,
    pub think_tags: bool,
    pub has_step: bool,
    pub ordinals_contiguous: bool,
    pub no_stray_text: bool,
    pub steps_non_empty: bool,
}

impl FormatChecks {
    pub fn passed(&self) -> usize {
        [
            self.answer_tags,
            self.think_tags,
            self.has_step,
            self.ordinals_contiguous,
            self.no_stray_text,
            self.steps_non_empty,
        ]
        .iter()
        .filter(|b| **b)
        .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatScore {
    pub reward: f64,
    pub checks: FormatChecks,
}

static STEP: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?s)<step n="(\d+)">(.*?)</step>"#).unwrap());
static THINK_BLOCK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<think>.*?</think>").unwrap());
static ANSWER_BLOCK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<answer>(.*?)</answer>").unwrap());

fn balanced(text: &str, open: &str, close: &str) -> bool {
    match (text.find(open), text.find(close)) {
        (Some(o), Some(c)) => {
            text.matches(open).count() == 1 && text.matches(close).count() == 1 && o < c
        }
        _ => false,
    }
}

/// Independent checks, each worth `max / 6`.
pub fn score_format(raw: &str, max: f64) -> FormatScore {
    let answer_tags = balanced(raw, "<answer>", "</answer>");
    let think_tags = balanced(raw, "<think>", "</think>");
    let steps: Vec<(Option<u32>, &str)> = STEP
        .captures_iter(raw)
        .map(|c| (c[1].parse().ok(), c.get(2).unwrap().as_str()))
        .collect();
    let has_step = !steps.is_empty();
    let ordinals_contiguous =
        has_step && steps.iter().enumerate().all(|(i, (n, _))| *n == Some(i as u32 + 1));
    let steps_non_empty = has_step && steps.iter().all(|(_, body)| !body.trim().is_empty());
    let no_stray_text = answer_tags && {
        let outside = THINK_BLOCK.replace(raw, "");
        let outside = ANSWER_BLOCK.replace(&outside, "");
        let inside = ANSWER_BLOCK
            .captures(raw)
            .map(|c| STEP.replace_all(c.get(1).unwrap().as_str(), "").into_owned())
            .unwrap_or_default();
        outside.trim().is_empty() && inside.trim().is_empty()
    };
    let checks = FormatChecks {
        answer_tags,
        think_tags,
        has_step,
        ordinals_contiguous,
        no_stray_text,
        steps_non_empty,
    };
    FormatScore {
        reward: max * checks.passed() as f64 / 6.0,
        checks,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingScore {
    pub completeness: f64,
    pub relevancy: f64,
    pub groundedness: f64,
    pub plan_entities: Vec<String>,
    pub chunk_entities: Vec<String>,
    /// Plan entities that occur in no passage.
    pub unsupported: Vec<String>,
    /// Intent terms that the passages also use; relevancy is their coverage.
    pub intent_terms: Vec<String>,
}

#[derive(Debug, Clone, Error, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ScoreError {
    #[error("no passages to score against")]
    EmptyChunks,
    #[error("component {component} is negative ({value})")]
    NegativeComponent { component: String, value: f64 },
    #[error("component {component} = {value} exceeds its maximum {max}")]
    ComponentAboveMax { component: String, value: f64, max: f64 },
}

fn bounded(text: &str, needle: &str) -> bool {
    let ok = |c: Option<char>| c.is_none_or(|c| !c.is_alphanumeric() && c != '_');
    text.match_indices(needle)
        .any(|(i, _)| ok(text[..i].chars().next_back()) && ok(text[i + needle.len()..].chars().next()))
}

/// Entities named in `text`: pattern-extracted ones plus every dictionary
/// entry that occurs in it.
pub fn entities_in(text: &str, dictionary: &EntityDictionary) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = extract_entities(text).into_iter().map(|e| e.name).collect();
    out.extend(
        dictionary
            .keys()
            .filter(|name| bounded(text, name))
            .cloned(),
    );
    out
}

fn plan_text(plan: &TroubleshootingPlan) -> String {
    let mut parts = Vec::new();
    for s in &plan.steps {
        parts.push(s.action.title().to_string());
        parts.push(s.narrative.clone());
        parts.extend(s.targets.iter().cloned());
    }
    parts.join("\n")
}

pub fn score_grounding(
    plan: &TroubleshootingPlan,
    intent: &str,
    chunks: &[Chunk],
    dictionary: &EntityDictionary,
    max: f64,
) -> Result<GroundingScore, ScoreError> {
    if chunks.is_empty() {
        return Err(ScoreError::EmptyChunks);
    }
    let context = chunks.iter().map(|c| c.text.as_str()).collect::<Vec<_>>().join("\n");
    let body = plan_text(plan);

    let mut plan_entities = entities_in(&body, dictionary);
    plan_entities.extend(plan.targets().map(str::to_string));
    let chunk_entities = entities_in(&context, dictionary);

    let completeness = if chunk_entities.is_empty() {
        0.0
    } else {
        max * chunk_entities.intersection(&plan_entities).count() as f64
            / chunk_entities.len() as f64
    };

    let unsupported: Vec<String> = plan_entities
        .iter()
        .filter(|e| !bounded(&context, e))
        .cloned()
        .collect();
    let groundedness = if plan_entities.is_empty() {
        0.0
    } else {
        max * (plan_entities.len() - unsupported.len()) as f64 / plan_entities.len() as f64
    };

    let context_terms = content_term_set(&context);
    let intent_terms: BTreeSet<String> = content_term_set(intent)
        .intersection(&context_terms)
        .cloned()
        .collect();
    let plan_terms = content_term_set(&body);
    let relevancy = if intent_terms.is_empty() {
        0.0
    } else {
        max * intent_terms.intersection(&plan_terms).count() as f64 / intent_terms.len() as f64
    };

    Ok(GroundingScore {
        completeness,
        relevancy,
        groundedness,
        plan_entities: plan_entities.into_iter().collect(),
        chunk_entities: chunk_entities.into_iter().collect(),
        unsupported,
        intent_terms: intent_terms.into_iter().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub format_reward: f64,
    pub completeness: f64,
    pub relevancy: f64,
    pub groundedness: f64,
    pub total: f64,
}

impl RewardBreakdown {
    /// Sum of the three grounding components.
    pub fn ragas_sum(&self) -> f64 {
        self.completeness + self.relevancy + self.groundedness
    }

    pub fn passes_gate(&self, config: &RewardConfig) -> bool {
        self.total + 1e-12 >= config.gate_threshold()
    }
}

pub fn total_reward(
    format_reward: f64,
    completeness: f64,
    relevancy: f64,
    groundedness: f64,
    config: &RewardConfig,
) -> Result<RewardBreakdown, ScoreError> {
    for (name, value, max) in [
        ("format_reward", format_reward, config.format_max),
        ("completeness", completeness, config.component_max),
        ("relevancy", relevancy, config.component_max),
        ("groundedness", groundedness, config.component_max),
    ] {
        if value < 0.0 || value.is_nan() {
            return Err(ScoreError::NegativeComponent {
                component: name.into(),
                value,
            });
        }
        if value > max + 1e-9 {
            return Err(ScoreError::ComponentAboveMax {
                component: name.into(),
                value,
                max,
            });
        }
    }
    Ok(RewardBreakdown {
        format_reward,
        completeness,
        relevancy,
        groundedness,
        total: format_reward + completeness + relevancy + groundedness,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanScore {
    pub breakdown: RewardBreakdown,
    pub format: FormatChecks,
    pub grounding: GroundingScore,
    pub passes_gate: bool,
}

pub fn score_plan(
    plan: &TroubleshootingPlan,
    intent: &str,
    chunks: &[Chunk],
    dictionary: &EntityDictionary,
    config: &RewardConfig,
) -> Result<PlanScore, ScoreError> {
    let format = score_format(&plan.raw_text, config.format_max);
    let grounding = score_grounding(plan, intent, chunks, dictionary, config.component_max)?;
    let breakdown = total_reward(
        format.reward,
        grounding.completeness,
        grounding.relevancy,
        grounding.groundedness,
        config,
    )?;
    Ok(PlanScore {
        passes_gate: breakdown.passes_gate(config),
        breakdown,
        format: format.checks,
        grounding,
    })
}
