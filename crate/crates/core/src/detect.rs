//! Threshold detection over KPI series and alarm-triggered intent prompts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::telemetry::catalog::Topology;
use crate::telemetry::{Alarm, CounterSample, ScenarioKind, TelemetryStore};
use crate::time::{Timestamp, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    Above,
    Below,
}

impl Comparator {
    pub fn violates(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparator::Above => value > threshold,
            Comparator::Below => value < threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaRule {
    pub kpi: String,
    pub comparator: Comparator,
    pub threshold: f64,
    pub sustain: usize,
    /// Node ids the rule applies to; empty means every node.
    #[serde(default)]
    pub scope: Vec<String>,
}

impl SlaRule {
    pub fn applies_to(&self, node: &str) -> bool {
        self.scope.is_empty() || self.scope.iter().any(|n| n == node)
    }

    /// `pdu_session` below 10 000 for three consecutive scrapes.
    pub fn pdu_session_floor() -> Self {
        Self {
            kpi: "pdu_session".into(),
            comparator: Comparator::Below,
            threshold: 10_000.0,
            sustain: 3,
            scope: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breach {
    pub window: Window,
    pub nodes: Vec<String>,
    pub rule: SlaRule,
    /// Violating samples inside the window.
    pub samples: usize,
    /// Timestamp of the sample that completed the first `sustain` run.
    pub detected_at: Timestamp,
}

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error("no intent template registered for trigger {0}")]
    UnknownTriggerKind(String),
    #[error("malformed rules document: {0}")]
    MalformedRules(String),
    #[error("rule for {kpi} has sustain 0; must be at least 1")]
    ZeroSustain { kpi: String },
}

/// One breach per maximal run of at least `sustain` consecutive violating
/// samples, evaluated independently per (node, object) series. Breaches of
/// different nodes whose windows overlap are merged, so the returned windows
/// are disjoint and ascending.
pub fn evaluate_sla(rule: &SlaRule, series: &[CounterSample]) -> Vec<Breach> {
    let sustain = rule.sustain.max(1);
    let mut grouped: BTreeMap<(&str, &str), Vec<&CounterSample>> = BTreeMap::new();
    for s in series
        .iter()
        .filter(|s| s.counter == rule.kpi && rule.applies_to(&s.node_id))
    {
        grouped
            .entry((s.node_id.as_str(), s.object_path.as_str()))
            .or_default()
            .push(s);
    }

    let mut runs: Vec<Breach> = Vec::new();
    for ((node, _), samples) in grouped {
        let mut run: Vec<&CounterSample> = Vec::new();
        let mut flush = |run: &mut Vec<&CounterSample>| {
            if run.len() >= sustain {
                runs.push(Breach {
                    window: Window::new(run[0].timestamp, run[run.len() - 1].timestamp),
                    nodes: vec![node.to_string()],
                    rule: rule.clone(),
                    samples: run.len(),
                    detected_at: run[sustain - 1].timestamp,
                });
            }
            run.clear();
        };
        for s in samples {
            if rule.comparator.violates(s.value, rule.threshold) {
                run.push(s);
            } else {
                flush(&mut run);
            }
        }
        flush(&mut run);
    }

    runs.sort_by_key(|b| (b.window.start, b.window.end));
    let mut merged: Vec<Breach> = Vec::new();
    for b in runs {
        match merged.last_mut() {
            Some(last) if last.window.overlaps(&b.window) => {
                last.window = last.window.union(&b.window);
                last.samples += b.samples;
                last.detected_at = last.detected_at.min(b.detected_at);
                for n in b.nodes {
                    if !last.nodes.contains(&n) {
                        last.nodes.push(n);
                    }
                }
                last.nodes.sort();
            }
            _ => merged.push(b),
        }
    }
    merged
}

pub fn parse_sla_rules(text: &str) -> Result<Vec<SlaRule>, DetectError> {
    let rules: Vec<SlaRule> =
        serde_json::from_str(text).map_err(|e| DetectError::MalformedRules(e.to_string()))?;
    for r in &rules {
        if r.sustain == 0 {
            return Err(DetectError::ZeroSustain { kpi: r.kpi.clone() });
        }
        if !r.threshold.is_finite() {
            return Err(DetectError::MalformedRules(format!(
                "threshold for {} must be finite",
                r.kpi
            )));
        }
    }
    Ok(rules)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TriggerKey {
    Alarm { alarm_type: String },
    Kpi { kpi: String },
}

impl std::fmt::Display for TriggerKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TriggerKey::Alarm { alarm_type } => write!(f, "alarm:{alarm_type}"),
            TriggerKey::Kpi { kpi } => write!(f, "kpi:{kpi}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateEntry {
    pub key: TriggerKey,
    pub scenario: ScenarioKind,
    /// `{minutes}` is replaced by the trigger window length in minutes.
    pub template: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateRegistry {
    pub entries: Vec<TemplateEntry>,
}

impl Default for TemplateRegistry {
    fn default() -> Self {
        Self {
            entries: vec![
                TemplateEntry {
                    key: TriggerKey::Alarm {
                        alarm_type: "Input Power Failure".into(),
                    },
                    scenario: ScenarioKind::RanInputPowerFailure,
                    template: "Can you help me find Input Power Failure issues and top offenders in the last {minutes} minutes for triage?".into(),
                },
                TemplateEntry {
                    key: TriggerKey::Kpi {
                        kpi: "pdu_session".into(),
                    },
                    scenario: ScenarioKind::CorePduDegradation,
                    template: "Can you help me check any abnormality causing PDU session degradation?".into(),
                },
            ],
        }
    }
}

impl TemplateRegistry {
    pub fn from_json(text: &str) -> Result<Self, DetectError> {
        serde_json::from_str(text).map_err(|e| DetectError::MalformedRules(e.to_string()))
    }

    pub fn lookup(&self, key: &TriggerKey) -> Option<&TemplateEntry> {
        self.entries.iter().find(|e| &e.key == key)
    }

    pub fn render(entry: &TemplateEntry, window: Window) -> String {
        let minutes = (window.duration() as f64 / 60.0).round() as i64;
        entry.template.replace("{minutes}", &minutes.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Trigger {
    Breach(Breach),
    Alarm(Alarm),
}

impl Trigger {
    pub fn key(&self) -> TriggerKey {
        match self {
            Trigger::Breach(b) => TriggerKey::Kpi {
                kpi: b.rule.kpi.clone(),
            },
            Trigger::Alarm(a) => TriggerKey::Alarm {
                alarm_type: a.alarm_type.clone(),
            },
        }
    }

    /// An alarm without a clear time is treated as a fifteen-minute event.
    pub fn window(&self) -> Window {
        match self {
            Trigger::Breach(b) => b.window,
            Trigger::Alarm(a) => Window::new(a.raised_at, a.cleared_at.unwrap_or(a.raised_at + 900)),
        }
    }

    pub fn nodes(&self) -> Vec<String> {
        match self {
            Trigger::Breach(b) => b.nodes.clone(),
            Trigger::Alarm(a) => vec![a.managed_element.clone()],
        }
    }

    fn reference(&self) -> String {
        match self {
            Trigger::Breach(b) => format!(
                "breach:{}@{}-{}",
                b.rule.kpi, b.window.start, b.window.end
            ),
            Trigger::Alarm(a) => a.alarm_id.clone(),
        }
    }

    fn description(&self) -> String {
        match self {
            Trigger::Breach(b) => format!(
                "{} {} {} for {} samples",
                b.rule.kpi,
                match b.rule.comparator {
                    Comparator::Above => "above",
                    Comparator::Below => "below",
                },
                b.rule.threshold,
                b.samples
            ),
            Trigger::Alarm(a) => a.description.clone(),
        }
    }
}

/// Machine-readable trigger data carried with the prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentContext {
    pub scenario: ScenarioKind,
    pub trigger_kind: String,
    pub trigger_refs: Vec<String>,
    pub nodes: Vec<String>,
    pub window: Window,
    #[serde(default)]
    pub kpis: Vec<String>,
    #[serde(default)]
    pub alarms: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub namespace: Option<String>,
    #[serde(default)]
    pub descriptions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentPrompt {
    pub text: String,
    pub context: IntentContext,
}

pub fn build_intent_prompt(
    registry: &TemplateRegistry,
    topology: &Topology,
    trigger: &Trigger,
) -> Result<IntentPrompt, DetectError> {
    let key = trigger.key();
    let entry = registry
        .lookup(&key)
        .ok_or_else(|| DetectError::UnknownTriggerKind(key.to_string()))?;
    let window = trigger.window();
    let nodes = trigger.nodes();
    let first = nodes.first().cloned().unwrap_or_default();
    let first = first.as_str();
    let (kpis, alarms, kind) = match &key {
        TriggerKey::Kpi { kpi } => (vec![kpi.clone()], vec![], "breach"),
        TriggerKey::Alarm { alarm_type } => (vec![], vec![alarm_type.clone()], "alarm"),
    };
    Ok(IntentPrompt {
        text: TemplateRegistry::render(entry, window),
        context: IntentContext {
            scenario: entry.scenario,
            trigger_kind: kind.to_string(),
            trigger_refs: vec![trigger.reference()],
            nodes,
            window,
            kpis,
            alarms,
            node_type: topology
                .core_node(first)
                .map(|c| c.nf_type.as_str().to_string())
                .or_else(|| topology.site_of(first).map(|_| "RRU".to_string())),
            namespace: topology.namespace_of(first).map(str::to_string),
            descriptions: vec![trigger.description()],
        },
    })
}

/// Polls the stores on a fixed simulated cadence and turns registered alarms
/// and SLA breaches into intent prompts. Triggers are handled first-in
/// first-out by detection time; triggers of the same scenario whose windows
/// overlap are folded into one prompt.
#[derive(Debug, Clone)]
pub struct Detector {
    pub rules: Vec<SlaRule>,
    pub registry: TemplateRegistry,
    pub poll_secs: i64,
}

impl Default for Detector {
    fn default() -> Self {
        Self {
            rules: vec![SlaRule::pdu_session_floor()],
            registry: TemplateRegistry::default(),
            poll_secs: 60,
        }
    }
}

impl Detector {
    fn poll_tick(&self, ts: Timestamp, origin: Timestamp) -> Timestamp {
        let step = self.poll_secs.max(1);
        let offset = (ts - origin).max(0);
        origin + ((offset + step - 1) / step) * step
    }

    pub fn triggers(&self, store: &TelemetryStore, horizon: Window) -> Vec<(Timestamp, Trigger)> {
        let mut found = Vec::new();
        for alarm in store.alarms() {
            let key = TriggerKey::Alarm {
                alarm_type: alarm.alarm_type.clone(),
            };
            if self.registry.lookup(&key).is_some() && horizon.contains(alarm.raised_at) {
                found.push((self.poll_tick(alarm.raised_at, horizon.start), Trigger::Alarm(alarm.clone())));
            }
        }
        for rule in &self.rules {
            let mut samples = Vec::new();
            for (node, path, counter) in store.series_keys() {
                if counter == &rule.kpi && rule.applies_to(node) {
                    samples.extend(store.query_counters(node, path, counter, horizon));
                }
            }
            for breach in evaluate_sla(rule, &samples) {
                found.push((self.poll_tick(breach.detected_at, horizon.start), Trigger::Breach(breach)));
            }
        }
        found.sort_by(|a, b| {
            (a.0, a.1.key(), a.1.window().start).cmp(&(b.0, b.1.key(), b.1.window().start))
        });
        found
    }

    pub fn scan(
        &self,
        store: &TelemetryStore,
        topology: &Topology,
        horizon: Window,
    ) -> Result<Vec<IntentPrompt>, DetectError> {
        let mut prompts: Vec<IntentPrompt> = Vec::new();
        for (_, trigger) in self.triggers(store, horizon) {
            let prompt = build_intent_prompt(&self.registry, topology, &trigger)?;
            let folded = prompts.iter_mut().find(|p| {
                p.context.scenario == prompt.context.scenario
                    && p.context.window.overlaps(&prompt.context.window)
            });
            match folded {
                Some(existing) => {
                    let ctx = &mut existing.context;
                    for n in prompt.context.nodes {
                        if !ctx.nodes.contains(&n) {
                            ctx.nodes.push(n);
                        }
                    }
                    ctx.nodes.sort();
                    ctx.trigger_refs.extend(prompt.context.trigger_refs);
                    for d in prompt.context.descriptions {
                        if !ctx.descriptions.contains(&d) {
                            ctx.descriptions.push(d);
                        }
                    }
                }
                None => prompts.push(prompt),
            }
        }
        Ok(prompts)
    }
}
