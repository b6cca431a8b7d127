//! Stepwise troubleshooting plans: the plan types, the tagged text grammar,
//! a deterministic backend grounded in retrieved passages, and an adapter
//! for text-completion models.

mod backend;
mod grammar;
mod model;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{generate_plan, procedure_items, ProcedureItem, DEFAULT_ESCALATION};
pub use grammar::{parse_plan_text, render_plan_text, render_step_text};
pub use model::{ModelPlanBackend, TextCompletion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepAction {
    CheckCorrelatedAlarms,
    AnalyzeAffectedUnits,
    MonitorCounters,
    AnalyzeCallFlow,
    MonitorLogsAlarms,
    ConfigHealthCheck,
    Escalate,
}

impl StepAction {
    /// Declaration order is the order steps appear in a plan.
    pub const ALL: [StepAction; 7] = [
        StepAction::CheckCorrelatedAlarms,
        StepAction::AnalyzeAffectedUnits,
        StepAction::MonitorCounters,
        StepAction::AnalyzeCallFlow,
        StepAction::MonitorLogsAlarms,
        StepAction::ConfigHealthCheck,
        StepAction::Escalate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StepAction::CheckCorrelatedAlarms => "check_correlated_alarms",
            StepAction::AnalyzeAffectedUnits => "analyze_affected_units",
            StepAction::MonitorCounters => "monitor_counters",
            StepAction::AnalyzeCallFlow => "analyze_call_flow",
            StepAction::MonitorLogsAlarms => "monitor_logs_alarms",
            StepAction::ConfigHealthCheck => "config_health_check",
            StepAction::Escalate => "escalate",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            StepAction::CheckCorrelatedAlarms => "Check Correlated Alarms",
            StepAction::AnalyzeAffectedUnits => "Analyze Affected Units",
            StepAction::MonitorCounters => "Monitor Counters",
            StepAction::AnalyzeCallFlow => "Analyze Call Flow",
            StepAction::MonitorLogsAlarms => "Monitor Logs and Alarms",
            StepAction::ConfigHealthCheck => "Configuration and Health Checks",
            StepAction::Escalate => "Escalate",
        }
    }

    pub fn from_title(title: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.title() == title)
    }

    /// Keyword map over free text, first match wins.
    pub fn classify(text: &str) -> Option<Self> {
        const MAP: [(&[&str], StepAction); 7] = [
            (&["correlated alarm"], StepAction::CheckCorrelatedAlarms),
            (&["affected"], StepAction::AnalyzeAffectedUnits),
            (&["call flow"], StepAction::AnalyzeCallFlow),
            (&["log"], StepAction::MonitorLogsAlarms),
            (&["configuration", "health check"], StepAction::ConfigHealthCheck),
            (&["escalat", "onsite", "on-site"], StepAction::Escalate),
            (&["counter", "monitor", "examine"], StepAction::MonitorCounters),
        ];
        let lower = text.to_lowercase();
        MAP.iter()
            .find(|(keys, _)| keys.iter().any(|k| lower.contains(k)))
            .map(|(_, a)| *a)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub ordinal: u32,
    pub action: StepAction,
    pub targets: Vec<String>,
    pub narrative: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TroubleshootingPlan {
    pub plan_id: String,
    pub intent_ref: String,
    #[serde(default)]
    pub reasoning: String,
    pub steps: Vec<PlanStep>,
    #[serde(default)]
    pub source_chunks: Vec<String>,
    pub raw_text: String,
}

impl TroubleshootingPlan {
    /// Counter, alarm and other identifiers named as step targets.
    pub fn targets(&self) -> impl Iterator<Item = &str> {
        self.steps.iter().flat_map(|s| s.targets.iter().map(String::as_str))
    }

    pub fn step(&self, action: StepAction) -> Option<&PlanStep> {
        self.steps.iter().find(|s| s.action == action)
    }

    /// Equality of everything the tagged text carries.
    pub fn same_content(&self, other: &TroubleshootingPlan) -> bool {
        self.reasoning == other.reasoning && self.steps == other.steps
    }
}

#[derive(Debug, Clone, Error, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum PlanError {
    #[error("retrieved passages contain no recognizable procedure steps")]
    NoGroundedSteps,
    #[error("no passages supplied")]
    NoChunks,
    #[error("malformed plan text at byte {offset}: expected {expected}")]
    MalformedTags { offset: usize, expected: String },
    #[error("plan text has no steps")]
    EmptyPlanBody,
    #[error("model backend unavailable: {reason}")]
    ModelUnavailable { reason: String },
}

/// Collapses whitespace runs and trims.
pub(crate) fn tidy(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub(crate) fn plan_hash(parts: &[&str]) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0]);
    }
    hex::encode(&h.finalize()[..6])
}
