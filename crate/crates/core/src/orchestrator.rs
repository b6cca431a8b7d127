//! The session controller. Each intent becomes a session that walks the flow
//! retrieve, plan (scored by the planner), augment and approval, execute,
//! analyze. Every delegation goes over the bus and is appended to the
//! session transcript.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::agents::{params, reply, AugmentReply, GeneratedPlan, PlannerBackend};
use crate::bus::{AgentBus, AgentHandler, BusError, HandlerFailure, RpcEnvelope, DEFAULT_DEADLINE_MS};
use crate::detect::IntentPrompt;
use crate::executor::{
    ApprovalTicket, Decision, DispatchMode, ExecutablePlan, ExecutionResults, HITL_DECIDED_TOPIC,
};
use crate::knowledge::{Chunk, Retrieval};
use crate::rca::{escalation_report, RcaReport, ReportVariant};
use crate::telemetry::ScenarioKind;

pub const ORCHESTRATOR_CAPS: [&str; 4] = [
    "orchestrator.handle_intent",
    "orchestrator.get_session",
    "orchestrator.list_sessions",
    "orchestrator.resume_session",
];

/// Capabilities checked through discovery before a session starts.
pub const REQUIRED_CAPABILITIES: [&str; 8] = [
    "knowledge.retrieve",
    "plan.generate",
    "executor.augment",
    "executor.execute",
    "data.pm.query",
    "data.alarm.query",
    "data.log.query",
    "rca.analyze",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrchestratorConfig {
    pub max_iterations: u32,
    pub max_replans: u32,
    pub hitl_timeout_ms: u64,
    pub auto_approve: bool,
    pub backend: PlannerBackend,
    pub top_k: usize,
    pub dispatch: DispatchMode,
    pub call_deadline_ms: u64,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            max_iterations: 8,
            max_replans: 1,
            hitl_timeout_ms: 300_000,
            auto_approve: false,
            backend: PlannerBackend::Deterministic,
            top_k: 3,
            dispatch: DispatchMode::Parallel,
            call_deadline_ms: DEFAULT_DEADLINE_MS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Running,
    AwaitingHitl,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub target_capability: String,
    pub method: String,
    pub params: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Observation {
    Result { value: Value },
    Error { error: BusError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopRecord {
    pub iteration: u32,
    pub thought_summary: String,
    pub action: Action,
    pub observation: Observation,
    #[serde(default)]
    pub retry: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitlOutcome {
    pub ticket_id: String,
    pub decision: Decision,
    pub decider: String,
    #[serde(default)]
    pub comment: Option<String>,
}

/// What the session has learned so far, folded from its observations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionMemory {
    pub chunks: Vec<Chunk>,
    pub plan: Option<GeneratedPlan>,
    pub executable: Option<ExecutablePlan>,
    pub ticket: Option<ApprovalTicket>,
    /// Decision on the current ticket, once known.
    pub decision: Option<HitlOutcome>,
    pub results: Option<ExecutionResults>,
    pub replans: u32,
    pub rejections: u32,
    pub backend: PlannerBackend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub intent: IntentPrompt,
    pub transcript: Vec<LoopRecord>,
    pub status: SessionStatus,
    pub iteration_count: u32,
    pub max_iterations: u32,
    pub auto_approve: bool,
    pub memory: SessionMemory,
    #[serde(default)]
    pub report: Option<RcaReport>,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub status: SessionStatus,
    pub iteration_count: u32,
    pub intent: String,
    #[serde(default)]
    pub pending_ticket: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NextAction {
    Call {
        capability: String,
        params: Value,
        thought: String,
        retry: bool,
    },
    AwaitDecision {
        ticket_id: String,
    },
    Finish {
        status: SessionStatus,
        variant: Option<ReportVariant>,
        reason: String,
    },
}

fn call(capability: &str, params: Value, thought: &str) -> NextAction {
    NextAction::Call {
        capability: capability.to_string(),
        params,
        thought: thought.to_string(),
        retry: false,
    }
}

fn finish(status: SessionStatus, variant: ReportVariant, reason: impl Into<String>) -> NextAction {
    NextAction::Finish {
        status,
        variant: Some(variant),
        reason: reason.into(),
    }
}

/// Collection searched for each scenario's procedures.
pub fn collection_for(scenario: ScenarioKind) -> &'static str {
    match scenario {
        ScenarioKind::RanInputPowerFailure => "power",
        ScenarioKind::CorePduDegradation => "core",
    }
}

fn plan_call(session: &Session, backend: PlannerBackend, feedback: Option<&str>, thought: &str) -> NextAction {
    call(
        "plan.generate",
        json!({
            "intent": session.intent.text,
            "chunks": session.memory.chunks,
            "backend": backend,
            "feedback": feedback,
        }),
        thought,
    )
}

fn augment_call(session: &Session, plan: &GeneratedPlan) -> NextAction {
    let revise_of = if session.memory.rejections > 0 {
        session.memory.executable.as_ref().map(|p| p.plan_id.clone())
    } else {
        None
    };
    call(
        "executor.augment",
        json!({
            "plan": plan.plan,
            "context": session.intent.context,
            "event_topic": session_topic(&session.session_id),
            "auto_approve": session.auto_approve,
            "revise_of": revise_of,
        }),
        "plan passed the score gate; bind it and request approval",
    )
}

pub fn session_topic(session_id: &str) -> String {
    format!("session.{session_id}")
}

/// The flow table: the next move as a function of the session alone.
pub fn react_step(session: &Session, config: &OrchestratorConfig) -> NextAction {
    if session.status != SessionStatus::Running && session.status != SessionStatus::AwaitingHitl {
        return NextAction::Finish {
            status: session.status,
            variant: None,
            reason: "session already finished".to_string(),
        };
    }
    let mem = &session.memory;
    let Some(last) = session.transcript.last() else {
        return call(
            "knowledge.retrieve",
            json!({
                "query": session.intent.text,
                "k": config.top_k,
                "collection": collection_for(session.intent.context.scenario),
            }),
            "find procedures relevant to the intent",
        );
    };
    // A decision that arrived after the last delegation is the observation
    // that matters.
    let awaiting = last.action.method == "executor.augment"
        && matches!(last.observation, Observation::Result { .. })
        && mem.results.is_none();
    if awaiting {
        let Some(ticket) = &mem.ticket else {
            return finish(SessionStatus::Failed, ReportVariant::Escalated, "augment returned no ticket");
        };
        return match &mem.decision {
            None => NextAction::AwaitDecision {
                ticket_id: ticket.ticket_id.clone(),
            },
            Some(d) if d.decision == Decision::Approve => {
                within_budget(session, config, call(
                    "executor.execute",
                    json!({ "plan_id": ticket.plan_id, "mode": config.dispatch }),
                    "plan approved; run its retrieval steps",
                ))
            }
            Some(d) => {
                if mem.rejections <= config.max_replans && mem.replans < config.max_replans {
                    within_budget(session, config, plan_call(
                        session,
                        PlannerBackend::Deterministic,
                        d.comment.as_deref(),
                        "plan rejected by the reviewer; re-plan with the comment",
                    ))
                } else {
                    finish(
                        SessionStatus::Failed,
                        ReportVariant::Escalated,
                        format!(
                            "the plan was rejected {} times by review (last comment: {})",
                            mem.rejections,
                            d.comment.as_deref().unwrap_or("none")
                        ),
                    )
                }
            }
        };
    }

    let next = match &last.observation {
        Observation::Error { error } => {
            if !last.retry {
                NextAction::Call {
                    capability: last.action.target_capability.clone(),
                    params: last.action.params.clone(),
                    thought: format!("{} failed; retry once", last.action.method),
                    retry: true,
                }
            } else if last.action.method == "plan.generate"
                && mem.backend != PlannerBackend::Deterministic
                && mem.replans < config.max_replans
            {
                plan_call(session, PlannerBackend::Deterministic, None, "planner failed twice; re-plan with the deterministic backend")
            } else {
                finish(
                    SessionStatus::Failed,
                    ReportVariant::Escalated,
                    format!("{} failed after a retry: {error}", last.action.method),
                )
            }
        }
        Observation::Result { .. } => match last.action.method.as_str() {
            "knowledge.retrieve" => plan_call(session, mem.backend, None, "draft a plan from the retrieved procedures"),
            "plan.generate" => match &mem.plan {
                Some(p) if p.score.passes_gate => augment_call(session, p),
                Some(p) if mem.replans < config.max_replans => plan_call(
                    session,
                    PlannerBackend::Deterministic,
                    None,
                    &format!(
                        "plan scored {:.2}, below the gate; re-plan with the deterministic backend",
                        p.score.breakdown.total
                    ),
                ),
                Some(p) => finish(
                    SessionStatus::Failed,
                    ReportVariant::Escalated,
                    format!("no plan passed the score gate (last total {:.2})", p.score.breakdown.total),
                ),
                None => finish(SessionStatus::Failed, ReportVariant::Escalated, "planner returned no plan"),
            },
            "executor.execute" => match &mem.results {
                Some(results) => call(
                    "rca.analyze",
                    json!({
                        "run_id": session.session_id,
                        "intent": session.intent,
                        "plan": mem.executable,
                        "results": results,
                    }),
                    "correlate the retrieved data and compose the report",
                ),
                None => finish(SessionStatus::Failed, ReportVariant::Escalated, "execution returned no results"),
            },
            "rca.analyze" => NextAction::Finish {
                status: SessionStatus::Completed,
                variant: None,
                reason: "report composed".to_string(),
            },
            other => finish(
                SessionStatus::Failed,
                ReportVariant::Escalated,
                format!("no flow entry after {other}"),
            ),
        },
    };
    within_budget(session, config, next)
}

fn within_budget(session: &Session, config: &OrchestratorConfig, next: NextAction) -> NextAction {
    match next {
        NextAction::Call { .. } if session.iteration_count >= config.max_iterations => finish(
            SessionStatus::Failed,
            ReportVariant::BudgetExhausted,
            format!("iteration budget of {} exhausted", config.max_iterations),
        ),
        other => other,
    }
}

#[derive(Debug, Clone, Error, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum OrchestratorError {
    #[error("no agent provides {capability}")]
    MissingCapability { capability: String, session_id: String },
    #[error("no decision on ticket {ticket_id} within {timeout_ms} ms")]
    HitlTimeout { ticket_id: String, timeout_ms: u64, session_id: String },
    #[error("unknown session {session_id}")]
    UnknownSession { session_id: String },
    #[error("session {session_id} is not waiting for a decision")]
    NotAwaiting { session_id: String },
}

/// Per-call overrides of the orchestrator defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IntentOptions {
    #[serde(default)]
    pub auto_approve: Option<bool>,
    #[serde(default)]
    pub backend: Option<PlannerBackend>,
}

pub struct Orchestrator {
    agent_id: String,
    bus: AgentBus,
    config: OrchestratorConfig,
    sessions: Mutex<BTreeMap<String, Session>>,
    next_session: AtomicU64,
}

impl Orchestrator {
    pub fn new(bus: AgentBus, config: OrchestratorConfig) -> Arc<Self> {
        Arc::new(Self {
            agent_id: "orchestrator".to_string(),
            bus,
            config,
            sessions: Mutex::new(BTreeMap::new()),
            next_session: AtomicU64::new(1),
        })
    }

    pub fn config(&self) -> &OrchestratorConfig {
        &self.config
    }

    pub fn get_session(&self, session_id: &str) -> Option<Session> {
        self.sessions.lock().unwrap().get(session_id).cloned()
    }

    pub fn sessions(&self) -> Vec<SessionSummary> {
        self.sessions
            .lock()
            .unwrap()
            .values()
            .map(|s| SessionSummary {
                session_id: s.session_id.clone(),
                status: s.status,
                iteration_count: s.iteration_count,
                intent: s.intent.text.clone(),
                pending_ticket: (s.status == SessionStatus::AwaitingHitl)
                    .then(|| s.memory.ticket.as_ref().map(|t| t.ticket_id.clone()))
                    .flatten(),
            })
            .collect()
    }

    fn store(&self, session: &Session) {
        self.sessions
            .lock()
            .unwrap()
            .insert(session.session_id.clone(), session.clone());
    }

    fn publish(&self, session: &Session, payload: Value) {
        let _ = self.bus.publish_event(&session_topic(&session.session_id), payload);
    }

    /// Creates the session and checks required capabilities.
    pub fn open_session(
        &self,
        intent: IntentPrompt,
        options: &IntentOptions,
    ) -> Result<Session, OrchestratorError> {
        let n = self.next_session.fetch_add(1, Ordering::SeqCst);
        let mut session = Session {
            session_id: format!("session-{n:04}"),
            intent,
            transcript: Vec::new(),
            status: SessionStatus::Running,
            iteration_count: 0,
            max_iterations: self.config.max_iterations,
            auto_approve: options.auto_approve.unwrap_or(self.config.auto_approve),
            memory: SessionMemory {
                backend: options.backend.unwrap_or(self.config.backend),
                ..Default::default()
            },
            report: None,
            error: None,
        };
        if let Some(missing) = REQUIRED_CAPABILITIES
            .iter()
            .find(|c| self.bus.discover(c).is_empty())
        {
            let err = OrchestratorError::MissingCapability {
                capability: missing.to_string(),
                session_id: session.session_id.clone(),
            };
            session.status = SessionStatus::Failed;
            session.error = Some(err.to_string());
            self.store(&session);
            self.publish(&session, json!({ "event": "session_failed", "error": err }));
            return Err(err);
        }
        self.store(&session);
        self.publish(
            &session,
            json!({ "event": "session_started", "session_id": session.session_id, "intent": session.intent.text }),
        );
        Ok(session)
    }

    /// Runs an intent to a terminal state, or until a decision times out.
    pub async fn handle_intent(
        &self,
        intent: IntentPrompt,
        options: IntentOptions,
    ) -> Result<Session, OrchestratorError> {
        let session = self.open_session(intent, &options)?;
        self.drive(session).await
    }

    /// Opens the session and drives it on a background task.
    pub fn start_intent(
        self: &Arc<Self>,
        intent: IntentPrompt,
        options: IntentOptions,
    ) -> Result<Session, OrchestratorError> {
        let session = self.open_session(intent, &options)?;
        let me = self.clone();
        let s = session.clone();
        tokio::spawn(async move {
            let _ = me.drive(s).await;
        });
        Ok(session)
    }

    /// Continues a session parked on a decision.
    pub async fn resume(&self, session_id: &str) -> Result<Session, OrchestratorError> {
        let mut session = self
            .get_session(session_id)
            .ok_or_else(|| OrchestratorError::UnknownSession {
                session_id: session_id.to_string(),
            })?;
        if session.status != SessionStatus::AwaitingHitl {
            return Err(OrchestratorError::NotAwaiting {
                session_id: session_id.to_string(),
            });
        }
        session.status = SessionStatus::Running;
        self.drive(session).await
    }

    async fn delegate(&self, capability: &str, params: Value) -> Result<Value, BusError> {
        let target = self
            .bus
            .discover(capability)
            .into_iter()
            .next()
            .ok_or_else(|| BusError::UnknownTarget {
                target: format!("<provider of {capability}>"),
            })?;
        let call_id = self.bus.next_call_id(&self.agent_id);
        self.bus
            .call(
                RpcEnvelope::new(&call_id, &self.agent_id, &target.agent_id, capability, params)
                    .with_deadline(self.config.call_deadline_ms),
            )
            .await
    }

    fn absorb(session: &mut Session, method: &str, value: &Value) {
        let mem = &mut session.memory;
        match method {
            "knowledge.retrieve" => {
                if let Ok(r) = serde_json::from_value::<Retrieval>(value.clone()) {
                    mem.chunks = r.hits.into_iter().map(|h| h.chunk).collect();
                }
            }
            "plan.generate" => {
                if mem.plan.is_some() {
                    mem.replans += 1;
                }
                mem.plan = serde_json::from_value(value.clone()).ok();
            }
            "executor.augment" => {
                if let Ok(r) = serde_json::from_value::<AugmentReply>(value.clone()) {
                    mem.decision = r.ticket.decision.map(|decision| HitlOutcome {
                        ticket_id: r.ticket.ticket_id.clone(),
                        decision,
                        decider: r.ticket.decider.clone().unwrap_or_default(),
                        comment: r.ticket.comment.clone(),
                    });
                    mem.executable = Some(r.plan);
                    mem.ticket = Some(r.ticket);
                }
            }
            "executor.execute" => {
                mem.results = serde_json::from_value(value.clone()).ok();
            }
            "rca.analyze" => {
                session.report = serde_json::from_value(value.clone()).ok();
            }
            _ => {}
        }
    }

    async fn await_decision(&self, ticket_id: &str) -> Option<HitlOutcome> {
        let mut sub = self.bus.subscribe(HITL_DECIDED_TOPIC);
        // The decision may already have been made before subscribing.
        if let Ok(v) = self.delegate("hitl.get_ticket", json!({ "ticket_id": ticket_id })).await {
            if let Ok(t) = serde_json::from_value::<ApprovalTicket>(v) {
                if let Some(decision) = t.decision {
                    return Some(HitlOutcome {
                        ticket_id: t.ticket_id,
                        decision,
                        decider: t.decider.unwrap_or_default(),
                        comment: t.comment,
                    });
                }
            }
        }
        let wait = async {
            while let Some(frame) = sub.recv().await {
                let Ok(t) = serde_json::from_value::<ApprovalTicket>(frame.payload["ticket"].clone()) else {
                    continue;
                };
                if t.ticket_id == ticket_id {
                    if let Some(decision) = t.decision {
                        return Some(HitlOutcome {
                            ticket_id: t.ticket_id,
                            decision,
                            decider: t.decider.unwrap_or_default(),
                            comment: t.comment,
                        });
                    }
                }
            }
            None
        };
        tokio::time::timeout(Duration::from_millis(self.config.hitl_timeout_ms), wait)
            .await
            .ok()
            .flatten()
    }

    fn actions_so_far(session: &Session) -> Vec<String> {
        session
            .transcript
            .iter()
            .map(|r| {
                let outcome = match &r.observation {
                    Observation::Result { .. } => "ok".to_string(),
                    Observation::Error { error } => format!("error {}", error.kind()),
                };
                format!("{} ({outcome})", r.action.method)
            })
            .collect()
    }

    async fn drive(&self, mut session: Session) -> Result<Session, OrchestratorError> {
        loop {
            match react_step(&session, &self.config) {
                NextAction::Call {
                    capability,
                    params,
                    thought,
                    retry,
                } => {
                    session.iteration_count += 1;
                    let observation = match self.delegate(&capability, params.clone()).await {
                        Ok(value) => {
                            Self::absorb(&mut session, &capability, &value);
                            Observation::Result { value }
                        }
                        Err(error) => Observation::Error { error },
                    };
                    let ok = matches!(observation, Observation::Result { .. });
                    session.transcript.push(LoopRecord {
                        iteration: session.iteration_count,
                        thought_summary: thought,
                        action: Action {
                            target_capability: capability.clone(),
                            method: capability.clone(),
                            params,
                        },
                        observation,
                        retry,
                    });
                    self.store(&session);
                    self.publish(
                        &session,
                        json!({ "event": "step", "iteration": session.iteration_count, "method": capability, "ok": ok }),
                    );
                }
                NextAction::AwaitDecision { ticket_id } => {
                    session.status = SessionStatus::AwaitingHitl;
                    self.store(&session);
                    self.publish(&session, json!({ "event": "awaiting_hitl", "ticket_id": ticket_id }));
                    match self.await_decision(&ticket_id).await {
                        Some(outcome) => {
                            session.status = SessionStatus::Running;
                            if outcome.decision == Decision::Reject {
                                session.memory.rejections += 1;
                            }
                            self.publish(&session, json!({ "event": "decision", "decision": outcome }));
                            session.memory.decision = Some(outcome);
                            self.store(&session);
                        }
                        None => {
                            let err = OrchestratorError::HitlTimeout {
                                ticket_id,
                                timeout_ms: self.config.hitl_timeout_ms,
                                session_id: session.session_id.clone(),
                            };
                            session.error = Some(err.to_string());
                            self.store(&session);
                            return Err(err);
                        }
                    }
                }
                NextAction::Finish {
                    status,
                    variant,
                    reason,
                } => {
                    if let Some(variant) = variant {
                        let actions = Self::actions_so_far(&session);
                        session.report = Some(escalation_report(
                            &session.session_id,
                            self.bus.clock().now(),
                            &session.intent,
                            variant,
                            &reason,
                            actions,
                        ));
                        session.error = Some(reason);
                    }
                    if status == SessionStatus::Completed && session.report.is_none() {
                        session.status = SessionStatus::Failed;
                        session.error = Some("analysis returned no report".to_string());
                    } else {
                        session.status = status;
                    }
                    self.store(&session);
                    self.publish(
                        &session,
                        json!({ "event": "session_finished", "status": session.status, "report": session.report }),
                    );
                    return Ok(session);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
struct HandleIntentParams {
    intent: IntentPrompt,
    #[serde(default = "yes")]
    wait: bool,
    #[serde(flatten)]
    options: IntentOptions,
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
struct SessionParams {
    session_id: String,
}

/// Bus face of the orchestrator. With `wait: false`, `handle_intent`
/// returns the new session at once and the session runs in the background,
/// so `get_session` stays answerable while it runs.
pub struct OrchestratorAgent {
    pub orchestrator: Arc<Orchestrator>,
}

fn orchestrator_failure(e: &OrchestratorError) -> HandlerFailure {
    crate::agents::tagged_failure(e)
}

#[async_trait]
impl AgentHandler for OrchestratorAgent {
    async fn handle(&self, call: &RpcEnvelope) -> Result<Value, HandlerFailure> {
        let o = &self.orchestrator;
        match call.method.as_str() {
            "orchestrator.handle_intent" => {
                let p: HandleIntentParams = params(call)?;
                let session = if p.wait {
                    o.handle_intent(p.intent, p.options).await
                } else {
                    o.start_intent(p.intent, p.options)
                };
                match session {
                    Ok(s) => reply(&json!({ "session": s, "report": s.report })),
                    Err(e @ OrchestratorError::HitlTimeout { .. }) => {
                        let s = match &e {
                            OrchestratorError::HitlTimeout { session_id, .. } => o.get_session(session_id),
                            _ => None,
                        };
                        reply(&json!({ "session": s, "report": Value::Null, "error": e }))
                    }
                    Err(e) => Err(orchestrator_failure(&e)),
                }
            }
            "orchestrator.get_session" => {
                let p: SessionParams = params(call)?;
                let s = o.get_session(&p.session_id).ok_or_else(|| {
                    orchestrator_failure(&OrchestratorError::UnknownSession {
                        session_id: p.session_id.clone(),
                    })
                })?;
                reply(&s)
            }
            "orchestrator.list_sessions" => reply(&o.sessions()),
            "orchestrator.resume_session" => {
                let p: SessionParams = params(call)?;
                match o.resume(&p.session_id).await {
                    Ok(s) => reply(&json!({ "session": s, "report": s.report })),
                    Err(e @ OrchestratorError::HitlTimeout { .. }) => {
                        reply(&json!({ "session": o.get_session(&p.session_id), "report": Value::Null, "error": e }))
                    }
                    Err(e) => Err(orchestrator_failure(&e)),
                }
            }
            _ => Err(HandlerFailure::new("UnknownMethod", call.method.clone())),
        }
    }
}
