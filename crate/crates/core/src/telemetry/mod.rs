//! Deterministic synthetic telemetry: PM counter series, alarms and logs for
//! a RAN power scenario and a Core PDU-session scenario, with fault injection
//! and a separately kept ground-truth record.

pub mod catalog;
mod generator;
pub mod scenario;
mod store;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{Timestamp, Window};

pub use generator::{DatasetSummary, GroundTruth, SignatureCounts, SimConfig, Simulator};
pub use store::TelemetryStore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterSample {
    pub node_id: String,
    pub object_path: String,
    pub counter: String,
    pub timestamp: Timestamp,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Critical,
    Major,
    Minor,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alarm {
    pub alarm_id: String,
    pub alarm_type: String,
    pub severity: Severity,
    pub managed_element: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fru: Option<String>,
    pub raised_at: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cleared_at: Option<Timestamp>,
    pub description: String,
}

impl Alarm {
    /// Interval during which the alarm was active.
    pub fn active_window(&self) -> Window {
        Window::new(self.raised_at, self.cleared_at.unwrap_or(self.raised_at))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    Debug,
    Info,
    Warn,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub node_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub namespace: Option<String>,
    pub timestamp: Timestamp,
    pub level: LogLevel,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    RanInputPowerFailure,
    CorePduDegradation,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::RanInputPowerFailure => "ran_input_power_failure",
            ScenarioKind::CorePduDegradation => "core_pdu_degradation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ran_input_power_failure" => Some(ScenarioKind::RanInputPowerFailure),
            "core_pdu_degradation" => Some(ScenarioKind::CorePduDegradation),
            _ => None,
        }
    }

    pub fn domain_label(self) -> &'static str {
        match self {
            ScenarioKind::RanInputPowerFailure => "RAN",
            ScenarioKind::CorePduDegradation => "Core",
        }
    }

    pub fn domain(self) -> catalog::Domain {
        match self {
            ScenarioKind::RanInputPowerFailure => catalog::Domain::Ran,
            ScenarioKind::CorePduDegradation => catalog::Domain::Core,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub scenario: ScenarioKind,
    pub target_nodes: Vec<String>,
    pub window: Window,
    pub magnitude: f64,
    pub seed: u64,
}

impl FaultSpec {
    /// Reference scenario used by the CLI `run` command: two RRUs of
    /// site-2, or smf-1 plus nrf-1, faulted for fifteen minutes.
    pub fn reference(scenario: ScenarioKind, seed: u64) -> Self {
        let start = 1_700_001_000;
        let target_nodes = match scenario {
            ScenarioKind::RanInputPowerFailure => vec!["rru-6".to_string(), "rru-7".to_string()],
            ScenarioKind::CorePduDegradation => vec!["smf-1".to_string(), "nrf-1".to_string()],
        };
        Self {
            scenario,
            target_nodes,
            window: Window::new(start, start + 900),
            magnitude: 1.0,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterQuery {
    pub node_id: String,
    #[serde(default)]
    pub object_path_prefix: String,
    pub counter: String,
    pub window: Window,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlarmFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alarm_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<Severity>,
    pub window: Option<Window>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LogFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub namespace: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    pub window: Option<Window>,
}

#[derive(Debug, Error, PartialEq)]
pub enum TelemetryError {
    #[error("fault window must satisfy start < end (got {start}..{end})")]
    InvalidWindow { start: Timestamp, end: Timestamp },
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("fault spec needs at least one target node")]
    EmptyTargets,
    #[error("node {node} is not part of the {scenario} topology")]
    UnknownNode { node: String, scenario: String },
    #[error("magnitude must be finite and non-negative, got {0}")]
    InvalidMagnitude(f64),
    #[error("{node} already carries a fault overlapping {start}..{end}")]
    OverlappingInjection {
        node: String,
        start: Timestamp,
        end: Timestamp,
    },
    #[error("malformed scenario file: {0}")]
    MalformedScenario(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for TelemetryError {
    fn from(e: std::io::Error) -> Self {
        TelemetryError::Io(e.to_string())
    }
}
