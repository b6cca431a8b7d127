//! Bus handlers for the planner, executor, retriever, RCA and display
//! agents. The orchestrator's handler lives with the orchestrator.

use std::sync::Arc;

use async_trait::async_trait;
use futures::future::join_all;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bus::{AgentHandler, AgentBus, HandlerFailure, RpcEnvelope};
use crate::detect::{IntentContext, IntentPrompt};
use crate::executor::{
    ApprovalTicket, Binding, Decision, DispatchMode, ExecutablePlan, ExecutionResults, Executor,
    QueryOutcome, AUTO_DECIDER,
};
use crate::knowledge::{Chunk, KnowledgeStore};
use crate::planner::{
    generate_plan, render_plan_text, ModelPlanBackend, PlanError, TroubleshootingPlan,
};
use crate::rca::{render_html, AnalysisInput, BaselinedQuery, RcaAnalyzer, RcaReport};
use crate::scorer::{score_plan, PlanScore, RewardConfig};
use crate::telemetry::{AlarmFilter, CounterQuery, LogFilter, TelemetryStore};

pub const PLANNER_CAPS: [&str; 3] = ["knowledge.retrieve", "plan.generate", "plan.score"];
pub const EXECUTOR_CAPS: [&str; 6] = [
    "executor.augment",
    "executor.execute",
    "executor.get_plan",
    "hitl.list_pending",
    "hitl.decide",
    "hitl.get_ticket",
];
pub const RETRIEVER_CAPS: [&str; 3] = ["data.pm.query", "data.alarm.query", "data.log.query"];
pub const RCA_CAPS: [&str; 1] = ["rca.analyze"];
pub const DISPLAY_CAPS: [&str; 1] = ["display.render"];

pub(crate) fn params<T: DeserializeOwned>(call: &RpcEnvelope) -> Result<T, HandlerFailure> {
    serde_json::from_value(call.params.clone()).map_err(HandlerFailure::bad_params)
}

pub(crate) fn reply<T: Serialize>(value: &T) -> Result<Value, HandlerFailure> {
    serde_json::to_value(value).map_err(|e| HandlerFailure::new("Internal", e.to_string()))
}

/// Failure whose kind is the `kind` tag of the serialized error.
pub(crate) fn tagged_failure<E: Serialize + std::fmt::Display>(err: &E) -> HandlerFailure {
    let kind = serde_json::to_value(err)
        .ok()
        .and_then(|v| v.get("kind").and_then(Value::as_str).map(str::to_string))
        .unwrap_or_else(|| "Error".to_string());
    HandlerFailure::new(kind, err.to_string())
}

fn unknown_method(call: &RpcEnvelope) -> HandlerFailure {
    HandlerFailure::new("UnknownMethod", format!("no handler for {}", call.method))
}

pub struct RetrieverAgent {
    pub store: Arc<TelemetryStore>,
}

#[async_trait]
impl AgentHandler for RetrieverAgent {
    async fn handle(&self, call: &RpcEnvelope) -> Result<Value, HandlerFailure> {
        match call.method.as_str() {
            "data.pm.query" => reply(&self.store.run_counter_query(&params::<CounterQuery>(call)?)),
            "data.alarm.query" => reply(&self.store.query_alarms(&params::<AlarmFilter>(call)?)),
            "data.log.query" => reply(&self.store.query_logs(&params::<LogFilter>(call)?)),
            _ => Err(unknown_method(call)),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerBackend {
    #[default]
    Deterministic,
    Model,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrieveParams {
    pub query: String,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub collection: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateParams {
    pub intent: String,
    pub chunks: Vec<Chunk>,
    #[serde(default)]
    pub backend: PlannerBackend,
    /// Reviewer comment on a rejected earlier plan.
    #[serde(default)]
    pub feedback: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedPlan {
    pub plan: TroubleshootingPlan,
    pub score: PlanScore,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreParams {
    pub plan: TroubleshootingPlan,
    pub intent: String,
    pub chunks: Vec<Chunk>,
}

pub struct PlannerAgent {
    pub knowledge: Arc<KnowledgeStore>,
    pub model: Option<ModelPlanBackend>,
    pub rewards: RewardConfig,
}

impl PlannerAgent {
    pub fn new(knowledge: Arc<KnowledgeStore>) -> Self {
        Self {
            knowledge,
            model: None,
            rewards: RewardConfig::default(),
        }
    }

    fn score(&self, plan: &TroubleshootingPlan, intent: &str, chunks: &[Chunk]) -> Result<PlanScore, HandlerFailure> {
        score_plan(plan, intent, chunks, self.knowledge.dictionary(), &self.rewards)
            .map_err(|e| tagged_failure(&e))
    }

    async fn generate(&self, p: GenerateParams) -> Result<GeneratedPlan, HandlerFailure> {
        let mut plan = match p.backend {
            PlannerBackend::Deterministic => generate_plan(&p.intent, &p.chunks),
            PlannerBackend::Model => match &self.model {
                Some(m) => m.generate(&p.intent, &p.chunks).await,
                None => Err(PlanError::ModelUnavailable {
                    reason: "no model backend configured".to_string(),
                }),
            },
        }
        .map_err(|e| tagged_failure(&e))?;
        if let Some(comment) = p.feedback.filter(|c| !c.trim().is_empty()) {
            plan.reasoning = format!("{} Revised after review comment: {}", plan.reasoning, comment.trim());
            plan.raw_text = render_plan_text(&plan.reasoning, &plan.steps);
            plan.plan_id = format!("{}-rev", plan.plan_id);
        }
        let score = self.score(&plan, &p.intent, &p.chunks)?;
        Ok(GeneratedPlan { plan, score })
    }
}

#[async_trait]
impl AgentHandler for PlannerAgent {
    async fn handle(&self, call: &RpcEnvelope) -> Result<Value, HandlerFailure> {
        match call.method.as_str() {
            "knowledge.retrieve" => {
                let p: RetrieveParams = params(call)?;
                let k = p.k.unwrap_or(self.knowledge.config().top_k);
                // An index without the requested collection is searched whole.
                let collection = p
                    .collection
                    .as_deref()
                    .filter(|c| self.knowledge.collections().contains(c));
                let found = self
                    .knowledge
                    .retrieve_in(&p.query, k, collection)
                    .map_err(|e| HandlerFailure::new("RetrievalFailed", e.to_string()))?;
                reply(&found)
            }
            "plan.generate" => reply(&self.generate(params(call)?).await?),
            "plan.score" => {
                let p: ScoreParams = params(call)?;
                reply(&self.score(&p.plan, &p.intent, &p.chunks)?)
            }
            _ => Err(unknown_method(call)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AugmentParams {
    pub plan: TroubleshootingPlan,
    pub context: IntentContext,
    pub event_topic: String,
    #[serde(default)]
    pub auto_approve: bool,
    /// Executable plan to revise instead of creating a new one.
    #[serde(default)]
    pub revise_of: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentReply {
    pub plan: ExecutablePlan,
    pub ticket: ApprovalTicket,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExecuteParams {
    pub plan_id: String,
    #[serde(default)]
    pub mode: DispatchMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecideParams {
    pub ticket_id: String,
    pub decision: Decision,
    #[serde(default)]
    pub decider: Option<String>,
    #[serde(default)]
    pub comment: Option<String>,
}

pub struct ExecutorAgent {
    pub executor: Arc<Executor>,
}

impl ExecutorAgent {
    fn augment(&self, p: AugmentParams) -> Result<AugmentReply, HandlerFailure> {
        let fail = |e: crate::executor::ExecutorError| tagged_failure(&e);
        let plan = match &p.revise_of {
            Some(id) => self.executor.revise(id, p.plan).map_err(fail)?,
            None => self
                .executor
                .augment(p.plan, p.context, &p.event_topic)
                .map_err(fail)?,
        };
        let mut ticket = self.executor.submit(&plan.plan_id).map_err(fail)?;
        if p.auto_approve {
            self.executor
                .decide(&ticket.ticket_id, Decision::Approve, AUTO_DECIDER, None)
                .map_err(fail)?;
            ticket = self.executor.ticket(&ticket.ticket_id).unwrap_or(ticket);
        }
        let plan = self.executor.plan(&plan.plan_id).unwrap_or(plan);
        Ok(AugmentReply { plan, ticket })
    }
}

#[async_trait]
impl AgentHandler for ExecutorAgent {
    async fn handle(&self, call: &RpcEnvelope) -> Result<Value, HandlerFailure> {
        let fail = |e: crate::executor::ExecutorError| tagged_failure(&e);
        match call.method.as_str() {
            "executor.augment" => reply(&self.augment(params(call)?)?),
            "executor.execute" => {
                let p: ExecuteParams = params(call)?;
                reply(&self.executor.execute(&p.plan_id, p.mode).await.map_err(fail)?)
            }
            "executor.get_plan" => {
                #[derive(Deserialize)]
                struct P {
                    plan_id: String,
                }
                let p: P = params(call)?;
                let plan = self.executor.plan(&p.plan_id).ok_or_else(|| {
                    fail(crate::executor::ExecutorError::UnknownPlan { plan_id: p.plan_id.clone() })
                })?;
                reply(&json!({ "plan": plan, "tickets": self.executor.tickets_for(&p.plan_id) }))
            }
            "hitl.list_pending" => reply(&self.executor.list_pending()),
            "hitl.get_ticket" => {
                #[derive(Deserialize)]
                struct P {
                    ticket_id: String,
                }
                let p: P = params(call)?;
                let ticket = self.executor.ticket(&p.ticket_id).ok_or_else(|| {
                    fail(crate::executor::ExecutorError::UnknownTicket { ticket_id: p.ticket_id.clone() })
                })?;
                reply(&ticket)
            }
            "hitl.decide" => {
                let p: DecideParams = params(call)?;
                let decider = p
                    .decider
                    .unwrap_or_else(|| format!("human:{}", call.source));
                let state = self
                    .executor
                    .decide(&p.ticket_id, p.decision, &decider, p.comment)
                    .map_err(fail)?;
                reply(&json!({ "ticket_id": p.ticket_id, "state": state }))
            }
            _ => Err(unknown_method(call)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyzeParams {
    pub run_id: String,
    pub intent: IntentPrompt,
    pub plan: ExecutablePlan,
    pub results: ExecutionResults,
}

/// Fetches a baseline for every counter query over the bus, then analyzes.
pub struct RcaAgent {
    pub agent_id: String,
    pub bus: AgentBus,
    pub analyzer: RcaAnalyzer,
}

impl RcaAgent {
    pub async fn analyze(&self, p: AnalyzeParams) -> RcaReport {
        let requests = self.analyzer.baseline_requests(&p.results);
        let fetched = join_all(requests.iter().map(|(_, b)| {
            self.bus.request(&self.agent_id, b.capability(), b.params())
        }))
        .await;
        let mut counters = Vec::new();
        let queries = p
            .results
            .steps
            .iter()
            .flat_map(|s| &s.queries)
            .filter(|q| matches!(q.binding, Binding::Counter(_)));
        for ((baseline, _), (query, base)) in requests.iter().zip(queries.zip(fetched)) {
            let QueryOutcome::Counters { samples } = &query.outcome else {
                continue;
            };
            let baseline_samples = base
                .ok()
                .and_then(|v| serde_json::from_value(v).ok())
                .unwrap_or_default();
            counters.push(BaselinedQuery {
                baseline: *baseline,
                baseline_samples,
                samples: samples.clone(),
            });
        }
        self.analyzer.analyze(AnalysisInput {
            run_id: &p.run_id,
            generated_at: self.bus.clock().now(),
            intent: &p.intent,
            plan: &p.plan,
            results: &p.results,
            counters: &counters,
        })
    }
}

#[async_trait]
impl AgentHandler for RcaAgent {
    async fn handle(&self, call: &RpcEnvelope) -> Result<Value, HandlerFailure> {
        match call.method.as_str() {
            "rca.analyze" => reply(&self.analyze(params(call)?).await),
            _ => Err(unknown_method(call)),
        }
    }
}

pub struct DisplayAgent;

#[async_trait]
impl AgentHandler for DisplayAgent {
    async fn handle(&self, call: &RpcEnvelope) -> Result<Value, HandlerFailure> {
        match call.method.as_str() {
            "display.render" => {
                #[derive(Deserialize)]
                struct P {
                    report: RcaReport,
                }
                let p: P = params(call)?;
                Ok(json!({ "html": render_html(&p.report) }))
            }
            _ => Err(unknown_method(call)),
        }
    }
}
