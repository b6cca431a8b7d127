//! Turns plans into executable form, holds them behind human approval, then
//! dispatches their retrieval queries over the bus.

mod binding;
mod state;

use std::collections::BTreeMap;
use std::sync::Mutex;

use futures::future::join_all;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::bus::{AgentBus, BusError};
use crate::detect::IntentContext;
use crate::planner::{StepAction, TroubleshootingPlan};
use crate::telemetry::catalog::Topology;
use crate::telemetry::{Alarm, CounterSample, LogEntry};
use crate::time::Timestamp;

pub use binding::{
    bind_plan, query_window, Binding, StepBinding, ALARM_QUERY, LOG_QUERY, PM_QUERY,
};
pub use state::PlanState;

pub const HITL_PENDING_TOPIC: &str = "hitl.pending";
pub const HITL_DECIDED_TOPIC: &str = "hitl.decided";
pub const AUTO_DECIDER: &str = "auto";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: PlanState,
    pub to: PlanState,
    pub at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutablePlan {
    pub plan_id: String,
    pub base: TroubleshootingPlan,
    pub context: IntentContext,
    pub bindings: Vec<StepBinding>,
    pub state: PlanState,
    pub revision: u32,
    /// Topic receiving per-step progress events.
    pub event_topic: String,
    pub history: Vec<Transition>,
}

impl ExecutablePlan {
    fn transition(&mut self, to: PlanState, at: Timestamp) -> Result<(), ExecutorError> {
        if !self.state.can_transition(to) {
            return Err(ExecutorError::WrongState {
                plan_id: self.plan_id.clone(),
                state: self.state,
            });
        }
        self.history.push(Transition {
            from: self.state,
            to,
            at,
        });
        self.state = to;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Approve,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApprovalTicket {
    pub ticket_id: String,
    pub plan_id: String,
    pub revision: u32,
    pub created_at: Timestamp,
    #[serde(default)]
    pub decided_at: Option<Timestamp>,
    #[serde(default)]
    pub decision: Option<Decision>,
    #[serde(default)]
    pub decider: Option<String>,
    #[serde(default)]
    pub comment: Option<String>,
}

impl ApprovalTicket {
    pub fn is_open(&self) -> bool {
        self.decision.is_none()
    }
}

/// One open ticket with the plan it gates, as listed for reviewers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingApproval {
    pub ticket: ApprovalTicket,
    pub plan: ExecutablePlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum QueryOutcome {
    Counters { samples: Vec<CounterSample> },
    Alarms { alarms: Vec<Alarm> },
    Logs { logs: Vec<LogEntry> },
    Error { error: BusError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub binding: Binding,
    pub outcome: QueryOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub ordinal: u32,
    pub action: StepAction,
    pub succeeded: bool,
    pub queries: Vec<QueryResult>,
}

impl StepResult {
    pub fn errors(&self) -> impl Iterator<Item = &BusError> {
        self.queries.iter().filter_map(|q| match &q.outcome {
            QueryOutcome::Error { error } => Some(error),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResults {
    pub plan_id: String,
    pub state: PlanState,
    /// Ordered by step ordinal.
    pub steps: Vec<StepResult>,
}

impl ExecutionResults {
    pub fn samples(&self) -> impl Iterator<Item = &CounterSample> {
        self.outcomes().flat_map(|o| match o {
            QueryOutcome::Counters { samples } => samples.as_slice(),
            _ => &[],
        })
    }

    pub fn alarms(&self) -> impl Iterator<Item = &Alarm> {
        self.outcomes().flat_map(|o| match o {
            QueryOutcome::Alarms { alarms } => alarms.as_slice(),
            _ => &[],
        })
    }

    pub fn logs(&self) -> impl Iterator<Item = &LogEntry> {
        self.outcomes().flat_map(|o| match o {
            QueryOutcome::Logs { logs } => logs.as_slice(),
            _ => &[],
        })
    }

    fn outcomes(&self) -> impl Iterator<Item = &QueryOutcome> {
        self.steps.iter().flat_map(|s| s.queries.iter().map(|q| &q.outcome))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispatchMode {
    #[default]
    Parallel,
    Sequential,
}

#[derive(Debug, Clone, Error, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ExecutorError {
    #[error("step {ordinal} references {identifier:?}, which the catalog does not know")]
    UnboundableStep { ordinal: u32, identifier: String },
    #[error("plan {plan_id} is {state:?}")]
    WrongState { plan_id: String, state: PlanState },
    #[error("unknown plan {plan_id}")]
    UnknownPlan { plan_id: String },
    #[error("unknown ticket {ticket_id}")]
    UnknownTicket { ticket_id: String },
    #[error("ticket {ticket_id} was already decided")]
    TicketAlreadyDecided { ticket_id: String },
    #[error("a rejection needs a comment")]
    RejectWithoutComment,
    #[error("plan {plan_id} has no approved ticket for its current revision")]
    MissingApproval { plan_id: String },
}

impl ExecutorError {
    pub fn kind(&self) -> &'static str {
        match self {
            ExecutorError::UnboundableStep { .. } => "UnboundableStep",
            ExecutorError::WrongState { .. } => "WrongState",
            ExecutorError::UnknownPlan { .. } => "UnknownPlan",
            ExecutorError::UnknownTicket { .. } => "UnknownTicket",
            ExecutorError::TicketAlreadyDecided { .. } => "TicketAlreadyDecided",
            ExecutorError::RejectWithoutComment => "RejectWithoutComment",
            ExecutorError::MissingApproval { .. } => "MissingApproval",
        }
    }
}

#[derive(Default)]
struct Book {
    plans: BTreeMap<String, ExecutablePlan>,
    tickets: BTreeMap<String, ApprovalTicket>,
    next_plan: u64,
    next_ticket: u64,
}

/// Plan and ticket registry plus dispatcher. State changes take the book
/// lock, so transitions of one plan are serialized.
pub struct Executor {
    bus: AgentBus,
    topology: Topology,
    source: String,
    book: Mutex<Book>,
}

impl Executor {
    pub fn new(bus: AgentBus, topology: Topology) -> Self {
        Self {
            bus,
            topology,
            source: "executor".to_string(),
            book: Mutex::new(Book::default()),
        }
    }

    /// Agent id used as the source of dispatched queries.
    pub fn with_source(mut self, source: &str) -> Self {
        self.source = source.to_string();
        self
    }

    fn now(&self) -> Timestamp {
        self.bus.clock().now()
    }

    /// Binds every step and moves the new plan to pending approval.
    pub fn augment(
        &self,
        base: TroubleshootingPlan,
        context: IntentContext,
        event_topic: &str,
    ) -> Result<ExecutablePlan, ExecutorError> {
        let bindings = bind_plan(&base, &context, &self.topology)?;
        let mut book = self.book.lock().unwrap();
        book.next_plan += 1;
        let mut plan = ExecutablePlan {
            plan_id: format!("xp-{:04}", book.next_plan),
            base,
            context,
            bindings,
            state: PlanState::Draft,
            revision: 0,
            event_topic: event_topic.to_string(),
            history: Vec::new(),
        };
        plan.transition(PlanState::PendingApproval, self.now())?;
        book.plans.insert(plan.plan_id.clone(), plan.clone());
        Ok(plan)
    }

    /// Replaces the base plan of a rejected plan and returns it to pending
    /// approval under a new revision.
    pub fn revise(
        &self,
        plan_id: &str,
        base: TroubleshootingPlan,
    ) -> Result<ExecutablePlan, ExecutorError> {
        let now = self.now();
        let mut book = self.book.lock().unwrap();
        let plan = book
            .plans
            .get_mut(plan_id)
            .ok_or_else(|| ExecutorError::UnknownPlan { plan_id: plan_id.to_string() })?;
        if plan.state != PlanState::Rejected {
            return Err(ExecutorError::WrongState {
                plan_id: plan_id.to_string(),
                state: plan.state,
            });
        }
        let bindings = bind_plan(&base, &plan.context, &self.topology)?;
        plan.transition(PlanState::Draft, now)?;
        plan.base = base;
        plan.bindings = bindings;
        plan.revision += 1;
        plan.transition(PlanState::PendingApproval, now)?;
        Ok(plan.clone())
    }

    /// Opens an approval ticket, or returns the one already open for the
    /// plan's current revision.
    pub fn submit(&self, plan_id: &str) -> Result<ApprovalTicket, ExecutorError> {
        let now = self.now();
        let (ticket, plan) = {
            let mut book = self.book.lock().unwrap();
            let plan = book
                .plans
                .get(plan_id)
                .ok_or_else(|| ExecutorError::UnknownPlan { plan_id: plan_id.to_string() })?
                .clone();
            if plan.state != PlanState::PendingApproval {
                return Err(ExecutorError::WrongState {
                    plan_id: plan_id.to_string(),
                    state: plan.state,
                });
            }
            if let Some(open) = book
                .tickets
                .values()
                .find(|t| t.plan_id == plan_id && t.revision == plan.revision && t.is_open())
            {
                return Ok(open.clone());
            }
            book.next_ticket += 1;
            let ticket = ApprovalTicket {
                ticket_id: format!("ticket-{:04}", book.next_ticket),
                plan_id: plan_id.to_string(),
                revision: plan.revision,
                created_at: now,
                decided_at: None,
                decision: None,
                decider: None,
                comment: None,
            };
            book.tickets.insert(ticket.ticket_id.clone(), ticket.clone());
            (ticket, plan)
        };
        let _ = self
            .bus
            .publish_event(HITL_PENDING_TOPIC, json!({ "ticket": ticket, "plan": plan }));
        Ok(ticket)
    }

    pub fn decide(
        &self,
        ticket_id: &str,
        decision: Decision,
        decider: &str,
        comment: Option<String>,
    ) -> Result<PlanState, ExecutorError> {
        let comment = comment.filter(|c| !c.trim().is_empty());
        if decision == Decision::Reject && comment.is_none() {
            return Err(ExecutorError::RejectWithoutComment);
        }
        let now = self.now();
        let (ticket, state) = {
            let mut guard = self.book.lock().unwrap();
            let book = &mut *guard;
            let ticket = book
                .tickets
                .get_mut(ticket_id)
                .ok_or_else(|| ExecutorError::UnknownTicket { ticket_id: ticket_id.to_string() })?;
            if !ticket.is_open() {
                return Err(ExecutorError::TicketAlreadyDecided { ticket_id: ticket_id.to_string() });
            }
            let plan = book
                .plans
                .get_mut(&ticket.plan_id)
                .ok_or_else(|| ExecutorError::UnknownPlan { plan_id: ticket.plan_id.clone() })?;
            if plan.revision != ticket.revision {
                return Err(ExecutorError::WrongState {
                    plan_id: plan.plan_id.clone(),
                    state: plan.state,
                });
            }
            let to = match decision {
                Decision::Approve => PlanState::Approved,
                Decision::Reject => PlanState::Rejected,
            };
            plan.transition(to, now)?;
            ticket.decision = Some(decision);
            ticket.decided_at = Some(now);
            ticket.decider = Some(decider.to_string());
            ticket.comment = comment;
            (ticket.clone(), plan.state)
        };
        let _ = self
            .bus
            .publish_event(HITL_DECIDED_TOPIC, json!({ "ticket": ticket, "state": state }));
        Ok(state)
    }

    pub fn list_pending(&self) -> Vec<PendingApproval> {
        let book = self.book.lock().unwrap();
        book.tickets
            .values()
            .filter(|t| t.is_open())
            .filter_map(|t| {
                book.plans.get(&t.plan_id).map(|p| PendingApproval {
                    ticket: t.clone(),
                    plan: p.clone(),
                })
            })
            .collect()
    }

    pub fn plan(&self, plan_id: &str) -> Option<ExecutablePlan> {
        self.book.lock().unwrap().plans.get(plan_id).cloned()
    }

    pub fn ticket(&self, ticket_id: &str) -> Option<ApprovalTicket> {
        self.book.lock().unwrap().tickets.get(ticket_id).cloned()
    }

    pub fn tickets_for(&self, plan_id: &str) -> Vec<ApprovalTicket> {
        let book = self.book.lock().unwrap();
        book.tickets
            .values()
            .filter(|t| t.plan_id == plan_id)
            .cloned()
            .collect()
    }

    /// Runs every bound query of an approved plan. Step failures are
    /// recorded in the results; only state errors are returned as `Err`.
    pub async fn execute(
        &self,
        plan_id: &str,
        mode: DispatchMode,
    ) -> Result<ExecutionResults, ExecutorError> {
        let plan = {
            let mut guard = self.book.lock().unwrap();
            let book = &mut *guard;
            let plan = book
                .plans
                .get_mut(plan_id)
                .ok_or_else(|| ExecutorError::UnknownPlan { plan_id: plan_id.to_string() })?;
            if plan.state != PlanState::Approved {
                return Err(ExecutorError::WrongState {
                    plan_id: plan_id.to_string(),
                    state: plan.state,
                });
            }
            let approved = book.tickets.values().any(|t| {
                t.plan_id == plan_id
                    && t.revision == plan.revision
                    && t.decision == Some(Decision::Approve)
            });
            if !approved {
                return Err(ExecutorError::MissingApproval { plan_id: plan_id.to_string() });
            }
            plan.transition(PlanState::Executing, self.bus.clock().now())?;
            plan.clone()
        };

        let steps = match mode {
            DispatchMode::Parallel => {
                join_all(plan.bindings.iter().map(|b| self.run_step(&plan, b, mode))).await
            }
            DispatchMode::Sequential => {
                let mut out = Vec::with_capacity(plan.bindings.len());
                for b in &plan.bindings {
                    out.push(self.run_step(&plan, b, mode).await);
                }
                out
            }
        };
        let to = if steps.iter().all(|s| s.succeeded) {
            PlanState::Completed
        } else {
            PlanState::Failed
        };
        {
            let mut book = self.book.lock().unwrap();
            if let Some(stored) = book.plans.get_mut(plan_id) {
                stored.transition(to, self.now())?;
            }
        }
        let _ = self.bus.publish_event(
            &plan.event_topic,
            json!({ "event": "execution_finished", "plan_id": plan_id, "state": to }),
        );
        Ok(ExecutionResults {
            plan_id: plan_id.to_string(),
            state: to,
            steps,
        })
    }

    async fn run_step(
        &self,
        plan: &ExecutablePlan,
        binding: &StepBinding,
        mode: DispatchMode,
    ) -> StepResult {
        let queries = match mode {
            DispatchMode::Parallel => {
                join_all(binding.queries.iter().map(|q| self.run_query(q))).await
            }
            DispatchMode::Sequential => {
                let mut out = Vec::with_capacity(binding.queries.len());
                for q in &binding.queries {
                    out.push(self.run_query(q).await);
                }
                out
            }
        };
        let succeeded = !queries
            .iter()
            .any(|q| matches!(q.outcome, QueryOutcome::Error { .. }));
        let _ = self.bus.publish_event(
            &plan.event_topic,
            json!({
                "event": "step_finished",
                "plan_id": plan.plan_id,
                "ordinal": binding.ordinal,
                "action": binding.action,
                "succeeded": succeeded,
                "queries": queries.len(),
            }),
        );
        StepResult {
            ordinal: binding.ordinal,
            action: binding.action,
            succeeded,
            queries,
        }
    }

    async fn run_query(&self, binding: &Binding) -> QueryResult {
        let outcome = match self
            .bus
            .request(&self.source, binding.capability(), binding.params())
            .await
        {
            Ok(value) => decode_outcome(binding, value),
            Err(error) => QueryOutcome::Error { error },
        };
        QueryResult {
            binding: binding.clone(),
            outcome,
        }
    }
}

fn decode_outcome(binding: &Binding, value: Value) -> QueryOutcome {
    let decoded = match binding {
        Binding::Counter(_) => {
            serde_json::from_value(value).map(|samples| QueryOutcome::Counters { samples })
        }
        Binding::Alarm(_) => serde_json::from_value(value).map(|alarms| QueryOutcome::Alarms { alarms }),
        Binding::Log(_) => serde_json::from_value(value).map(|logs| QueryOutcome::Logs { logs }),
    };
    decoded.unwrap_or_else(|e| QueryOutcome::Error {
        error: BusError::HandlerError {
            target: binding.capability().to_string(),
            method: binding.capability().to_string(),
            failure_kind: "BadResponse".to_string(),
            message: e.to_string(),
        },
    })
}
