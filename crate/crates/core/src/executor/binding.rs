use serde::{Deserialize, Serialize};

use crate::detect::IntentContext;
use crate::planner::{PlanStep, StepAction, TroubleshootingPlan};
use crate::telemetry::catalog::{counter_def, Domain, Topology, NRF_STATUS_PREFIX};
use crate::telemetry::{AlarmFilter, CounterQuery, LogFilter};
use crate::time::Window;

use super::ExecutorError;

pub const PM_QUERY: &str = "data.pm.query";
pub const ALARM_QUERY: &str = "data.alarm.query";
pub const LOG_QUERY: &str = "data.log.query";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Binding {
    Counter(CounterQuery),
    Alarm(AlarmFilter),
    Log(LogFilter),
}

impl Binding {
    pub fn capability(&self) -> &'static str {
        match self {
            Binding::Counter(_) => PM_QUERY,
            Binding::Alarm(_) => ALARM_QUERY,
            Binding::Log(_) => LOG_QUERY,
        }
    }

    pub fn params(&self) -> serde_json::Value {
        match self {
            Binding::Counter(q) => serde_json::to_value(q),
            Binding::Alarm(f) => serde_json::to_value(f),
            Binding::Log(f) => serde_json::to_value(f),
        }
        .expect("bindings serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepBinding {
    pub ordinal: u32,
    pub action: StepAction,
    pub node_ids: Vec<String>,
    pub window: Window,
    pub queries: Vec<Binding>,
}

/// Trigger window extended backwards by one reporting period of `domain`.
pub fn query_window(trigger: Window, domain: Domain) -> Window {
    Window::new(trigger.start - domain.period_secs(), trigger.end)
}

fn counter_nodes(topology: &Topology, ctx: &IntentContext, domain: Domain) -> Vec<String> {
    let mut nodes: Vec<String> = match domain {
        Domain::Ran => {
            let sites: Vec<_> = ctx
                .nodes
                .iter()
                .filter_map(|n| topology.site_of(n))
                .collect();
            sites.iter().flat_map(|s| s.rrus.iter().cloned()).collect()
        }
        Domain::Core => {
            let eligible = topology.counter_nodes(Domain::Core);
            let hit: Vec<String> = ctx
                .nodes
                .iter()
                .filter(|n| eligible.contains(&n.as_str()))
                .cloned()
                .collect();
            if hit.is_empty() {
                eligible.into_iter().map(str::to_string).collect()
            } else {
                hit
            }
        }
    };
    nodes.sort();
    nodes.dedup();
    nodes
}

fn bind_step(
    step: &PlanStep,
    ctx: &IntentContext,
    topology: &Topology,
) -> Result<StepBinding, ExecutorError> {
    let domain = ctx.scenario.domain();
    let window = query_window(ctx.window, domain);
    let namespace = ctx.namespace.clone();
    let mut node_ids = ctx.nodes.clone();
    let mut queries = Vec::new();
    match step.action {
        StepAction::MonitorCounters => {
            node_ids.clear();
            for target in &step.targets {
                let def = counter_def(target).ok_or_else(|| ExecutorError::UnboundableStep {
                    ordinal: step.ordinal,
                    identifier: target.clone(),
                })?;
                let w = query_window(ctx.window, def.domain);
                for node in counter_nodes(topology, ctx, def.domain) {
                    queries.push(Binding::Counter(CounterQuery {
                        object_path_prefix: topology.object_root(&node),
                        node_id: node.clone(),
                        counter: def.name.to_string(),
                        window: w,
                    }));
                    if !node_ids.contains(&node) {
                        node_ids.push(node);
                    }
                }
            }
        }
        StepAction::CheckCorrelatedAlarms => {
            for node in &ctx.nodes {
                queries.push(Binding::Alarm(AlarmFilter {
                    node: Some(node.clone()),
                    window: Some(window),
                    ..Default::default()
                }));
            }
        }
        StepAction::AnalyzeAffectedUnits => {
            node_ids.clear();
            if ctx.alarms.is_empty() {
                queries.push(Binding::Alarm(AlarmFilter {
                    window: Some(window),
                    ..Default::default()
                }));
            }
            for alarm_type in &ctx.alarms {
                queries.push(Binding::Alarm(AlarmFilter {
                    alarm_type: Some(alarm_type.clone()),
                    window: Some(window),
                    ..Default::default()
                }));
            }
        }
        StepAction::MonitorLogsAlarms => {
            for target in &step.targets {
                queries.push(Binding::Log(LogFilter {
                    namespace: namespace.clone(),
                    contains: Some(target.clone()),
                    window: Some(window),
                    ..Default::default()
                }));
                queries.push(Binding::Alarm(AlarmFilter {
                    alarm_type: Some(target.clone()),
                    window: Some(window),
                    ..Default::default()
                }));
            }
            if step.targets.is_empty() {
                for node in &ctx.nodes {
                    queries.push(Binding::Log(LogFilter {
                        node: Some(node.clone()),
                        window: Some(window),
                        ..Default::default()
                    }));
                }
            }
        }
        StepAction::ConfigHealthCheck => {
            node_ids.clear();
            queries.push(Binding::Log(LogFilter {
                namespace,
                contains: Some(NRF_STATUS_PREFIX.to_string()),
                window: Some(window),
                ..Default::default()
            }));
        }
        StepAction::AnalyzeCallFlow => {
            for node in &ctx.nodes {
                queries.push(Binding::Log(LogFilter {
                    node: Some(node.clone()),
                    window: Some(window),
                    ..Default::default()
                }));
            }
        }
        StepAction::Escalate => node_ids.clear(),
    }
    Ok(StepBinding {
        ordinal: step.ordinal,
        action: step.action,
        node_ids,
        window,
        queries,
    })
}

/// Binds every step of `plan` to concrete store queries. Deterministic for a
/// given plan, context and topology.
pub fn bind_plan(
    plan: &TroubleshootingPlan,
    ctx: &IntentContext,
    topology: &Topology,
) -> Result<Vec<StepBinding>, ExecutorError> {
    plan.steps.iter().map(|s| bind_step(s, ctx, topology)).collect()
}
