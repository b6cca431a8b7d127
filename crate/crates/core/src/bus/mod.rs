//! Agent bus: registration, capability discovery, request/response RPC with
//! deadlines, and per-topic ordered events.
//!
//! Dispatch is in-process. [`ws`] exposes the same bus over WebSocket for the
//! console and for out-of-process agents, using the frames in [`wire`].

pub mod wire;
pub mod ws;

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tokio::sync::mpsc;

use crate::time::{SimClock, Timestamp};

/// Applied when an envelope carries no deadline.
pub const DEFAULT_DEADLINE_MS: u64 = 30_000;
/// Frames retained per topic for resuming subscribers.
pub const TOPIC_HISTORY: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentDescriptor {
    pub agent_id: String,
    pub capabilities: BTreeSet<String>,
    pub endpoint: String,
}

impl AgentDescriptor {
    pub fn in_process<I, S>(agent_id: &str, capabilities: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            agent_id: agent_id.to_string(),
            capabilities: capabilities.into_iter().map(Into::into).collect(),
            endpoint: format!("inproc://{agent_id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpcEnvelope {
    pub call_id: String,
    pub source: String,
    pub target: String,
    pub method: String,
    pub params: Value,
    pub deadline_ms: u64,
}

impl RpcEnvelope {
    pub fn new(call_id: &str, source: &str, target: &str, method: &str, params: Value) -> Self {
        Self {
            call_id: call_id.to_string(),
            source: source.to_string(),
            target: target.to_string(),
            method: method.to_string(),
            params,
            deadline_ms: DEFAULT_DEADLINE_MS,
        }
    }

    pub fn with_deadline(mut self, deadline_ms: u64) -> Self {
        self.deadline_ms = deadline_ms;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventFrame {
    pub topic: String,
    pub sequence: u64,
    pub payload: Value,
    pub emitted_at: Timestamp,
}

/// Failure reported by an agent handler. Surfaced to callers unchanged inside
/// [`BusError::HandlerError`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandlerFailure {
    pub kind: String,
    pub message: String,
}

impl HandlerFailure {
    pub fn new(kind: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            message: message.into(),
        }
    }

    pub fn bad_params(err: impl std::fmt::Display) -> Self {
        Self::new("BadParams", err.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "PascalCase")]
pub enum BusError {
    #[error("agent id {agent_id} already registered")]
    DuplicateAgentId { agent_id: String },
    #[error("agent {agent_id} advertises no capabilities")]
    EmptyCapabilities { agent_id: String },
    #[error("unknown target {target}")]
    UnknownTarget { target: String },
    #[error("{target} does not advertise {method}")]
    MethodNotFound { target: String, method: String },
    #[error("call {call_id} exceeded its {deadline_ms} ms deadline")]
    DeadlineExceeded { call_id: String, deadline_ms: u64 },
    #[error("{target}.{method} failed ({failure_kind}): {message}")]
    HandlerError {
        target: String,
        method: String,
        failure_kind: String,
        message: String,
    },
    #[error("call id {call_id} already used on this bus")]
    DuplicateCallId { call_id: String },
    #[error("deadline_ms must be positive")]
    InvalidDeadline,
    #[error("event topic must be non-empty")]
    EmptyTopic,
    #[error("transport closed: {reason}")]
    TransportClosed { reason: String },
}

impl BusError {
    pub fn kind(&self) -> &'static str {
        match self {
            BusError::DuplicateAgentId { .. } => "DuplicateAgentId",
            BusError::EmptyCapabilities { .. } => "EmptyCapabilities",
            BusError::UnknownTarget { .. } => "UnknownTarget",
            BusError::MethodNotFound { .. } => "MethodNotFound",
            BusError::DeadlineExceeded { .. } => "DeadlineExceeded",
            BusError::HandlerError { .. } => "HandlerError",
            BusError::DuplicateCallId { .. } => "DuplicateCallId",
            BusError::InvalidDeadline => "InvalidDeadline",
            BusError::EmptyTopic => "EmptyTopic",
            BusError::TransportClosed { .. } => "TransportClosed",
        }
    }
}

#[async_trait]
pub trait AgentHandler: Send + Sync {
    async fn handle(&self, call: &RpcEnvelope) -> Result<Value, HandlerFailure>;
}

/// Returned by [`AgentBus::register_agent`]; pass it back to deregister.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RegistrationToken {
    agent_id: String,
    serial: u64,
}

impl RegistrationToken {
    pub fn agent_id(&self) -> &str {
        &self.agent_id
    }
}

struct Registered {
    descriptor: AgentDescriptor,
    handler: Arc<dyn AgentHandler>,
    // One in-flight request per agent.
    gate: Arc<tokio::sync::Mutex<()>>,
    serial: u64,
}

#[derive(Default)]
struct Topic {
    next_sequence: u64,
    subscribers: Vec<mpsc::UnboundedSender<EventFrame>>,
    history: VecDeque<EventFrame>,
}

#[derive(Default)]
struct EventState {
    topics: HashMap<String, Topic>,
    prefix_subscribers: Vec<(String, mpsc::UnboundedSender<EventFrame>)>,
}

struct Inner {
    registry: RwLock<Vec<Registered>>,
    next_serial: AtomicU64,
    next_call: AtomicU64,
    used_call_ids: Mutex<HashSet<String>>,
    events: Mutex<EventState>,
    clock: SimClock,
}

/// Cloneable handle to one bus.
#[derive(Clone)]
pub struct AgentBus {
    inner: Arc<Inner>,
}

impl Default for AgentBus {
    fn default() -> Self {
        Self::new(SimClock::default())
    }
}

impl AgentBus {
    pub fn new(clock: SimClock) -> Self {
        Self {
            inner: Arc::new(Inner {
                registry: RwLock::new(Vec::new()),
                next_serial: AtomicU64::new(1),
                next_call: AtomicU64::new(1),
                used_call_ids: Mutex::new(HashSet::new()),
                events: Mutex::new(EventState::default()),
                clock,
            }),
        }
    }

    pub fn clock(&self) -> &SimClock {
        &self.inner.clock
    }

    pub fn register_agent(
        &self,
        descriptor: AgentDescriptor,
        handler: Arc<dyn AgentHandler>,
    ) -> Result<RegistrationToken, BusError> {
        if descriptor.capabilities.is_empty() {
            return Err(BusError::EmptyCapabilities {
                agent_id: descriptor.agent_id,
            });
        }
        let mut registry = self.inner.registry.write().unwrap();
        if registry
            .iter()
            .any(|r| r.descriptor.agent_id == descriptor.agent_id)
        {
            return Err(BusError::DuplicateAgentId {
                agent_id: descriptor.agent_id,
            });
        }
        let serial = self.inner.next_serial.fetch_add(1, Ordering::SeqCst);
        let token = RegistrationToken {
            agent_id: descriptor.agent_id.clone(),
            serial,
        };
        tracing::debug!(agent = %descriptor.agent_id, "agent registered");
        registry.push(Registered {
            descriptor,
            handler,
            gate: Arc::new(tokio::sync::Mutex::new(())),
            serial,
        });
        Ok(token)
    }

    /// Returns false when the token was already revoked.
    pub fn deregister(&self, token: &RegistrationToken) -> bool {
        let mut registry = self.inner.registry.write().unwrap();
        let before = registry.len();
        registry.retain(|r| !(r.descriptor.agent_id == token.agent_id && r.serial == token.serial));
        before != registry.len()
    }

    /// Live agents advertising `capability`, in registration order (ties by
    /// agent id).
    pub fn discover(&self, capability: &str) -> Vec<AgentDescriptor> {
        let registry = self.inner.registry.read().unwrap();
        let mut hits: Vec<(u64, &AgentDescriptor)> = registry
            .iter()
            .filter(|r| r.descriptor.capabilities.contains(capability))
            .map(|r| (r.serial, &r.descriptor))
            .collect();
        hits.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.agent_id.cmp(&b.1.agent_id)));
        hits.into_iter().map(|(_, d)| d.clone()).collect()
    }

    pub fn agents(&self) -> Vec<AgentDescriptor> {
        let registry = self.inner.registry.read().unwrap();
        let mut all: Vec<_> = registry.iter().map(|r| (r.serial, r.descriptor.clone())).collect();
        all.sort_by_key(|(s, _)| *s);
        all.into_iter().map(|(_, d)| d).collect()
    }

    pub fn next_call_id(&self, source: &str) -> String {
        let n = self.inner.next_call.fetch_add(1, Ordering::SeqCst);
        format!("{source}#{n}")
    }

    /// Delivers `envelope` to its target's handler exactly once and waits for
    /// the outcome, bounded by `deadline_ms`.
    pub async fn call(&self, envelope: RpcEnvelope) -> Result<Value, BusError> {
        if envelope.deadline_ms == 0 {
            return Err(BusError::InvalidDeadline);
        }
        let (handler, gate) = {
            let registry = self.inner.registry.read().unwrap();
            let target = registry
                .iter()
                .find(|r| r.descriptor.agent_id == envelope.target)
                .ok_or_else(|| BusError::UnknownTarget {
                    target: envelope.target.clone(),
                })?;
            if !target.descriptor.capabilities.contains(&envelope.method) {
                return Err(BusError::MethodNotFound {
                    target: envelope.target.clone(),
                    method: envelope.method.clone(),
                });
            }
            (target.handler.clone(), target.gate.clone())
        };
        if !self
            .inner
            .used_call_ids
            .lock()
            .unwrap()
            .insert(envelope.call_id.clone())
        {
            return Err(BusError::DuplicateCallId {
                call_id: envelope.call_id,
            });
        }

        let deadline = Duration::from_millis(envelope.deadline_ms);
        let invoke = async {
            let _serial = gate.lock().await;
            handler.handle(&envelope).await
        };
        match tokio::time::timeout(deadline, invoke).await {
            Ok(Ok(value)) => Ok(value),
            Ok(Err(failure)) => Err(BusError::HandlerError {
                target: envelope.target.clone(),
                method: envelope.method.clone(),
                failure_kind: failure.kind,
                message: failure.message,
            }),
            Err(_) => Err(BusError::DeadlineExceeded {
                call_id: envelope.call_id.clone(),
                deadline_ms: envelope.deadline_ms,
            }),
        }
    }

    /// Calls the first agent (by discovery order) advertising `capability`.
    pub async fn request(
        &self,
        source: &str,
        capability: &str,
        params: Value,
    ) -> Result<Value, BusError> {
        let target = self
            .discover(capability)
            .into_iter()
            .next()
            .ok_or_else(|| BusError::UnknownTarget {
                target: format!("<provider of {capability}>"),
            })?;
        let call_id = self.next_call_id(source);
        self.call(RpcEnvelope::new(&call_id, source, &target.agent_id, capability, params))
            .await
    }

    /// Assigns the next sequence number for `topic` and delivers the frame to
    /// every current subscriber. The returned frame is the acknowledgement.
    pub fn publish_event(&self, topic: &str, payload: Value) -> Result<EventFrame, BusError> {
        if topic.is_empty() {
            return Err(BusError::EmptyTopic);
        }
        let mut events = self.inner.events.lock().unwrap();
        let state = events.topics.entry(topic.to_string()).or_default();
        state.next_sequence += 1;
        let frame = EventFrame {
            topic: topic.to_string(),
            sequence: state.next_sequence,
            payload,
            emitted_at: self.inner.clock.now(),
        };
        state.subscribers.retain(|tx| tx.send(frame.clone()).is_ok());
        state.history.push_back(frame.clone());
        if state.history.len() > TOPIC_HISTORY {
            state.history.pop_front();
        }
        events
            .prefix_subscribers
            .retain(|(prefix, tx)| !topic.starts_with(prefix.as_str()) || tx.send(frame.clone()).is_ok());
        Ok(frame)
    }

    pub fn subscribe(&self, topic: &str) -> Subscription {
        self.subscribe_after(topic, u64::MAX)
    }

    /// Subscribes and first replays retained frames with sequence greater than
    /// `after_sequence` (pass 0 for the full retained history).
    pub fn subscribe_after(&self, topic: &str, after_sequence: u64) -> Subscription {
        let (tx, rx) = mpsc::unbounded_channel();
        let mut events = self.inner.events.lock().unwrap();
        let state = events.topics.entry(topic.to_string()).or_default();
        for frame in state.history.iter().filter(|f| f.sequence > after_sequence) {
            let _ = tx.send(frame.clone());
        }
        state.subscribers.push(tx);
        Subscription { rx }
    }

    /// Receives frames of every topic starting with `prefix`, from now on.
    pub fn subscribe_prefix(&self, prefix: &str) -> Subscription {
        let (tx, rx) = mpsc::unbounded_channel();
        self.inner
            .events
            .lock()
            .unwrap()
            .prefix_subscribers
            .push((prefix.to_string(), tx));
        Subscription { rx }
    }
}

pub struct Subscription {
    rx: mpsc::UnboundedReceiver<EventFrame>,
}

impl Subscription {
    pub async fn recv(&mut self) -> Option<EventFrame> {
        self.rx.recv().await
    }

    pub fn try_recv(&mut self) -> Option<EventFrame> {
        self.rx.try_recv().ok()
    }

    /// Everything currently buffered.
    pub fn drain(&mut self) -> Vec<EventFrame> {
        std::iter::from_fn(|| self.try_recv()).collect()
    }
}

/// Adapts an async closure into an [`AgentHandler`].
pub struct FnHandler<F>(pub F);

#[async_trait]
impl<F, Fut> AgentHandler for FnHandler<F>
where
    F: Fn(RpcEnvelope) -> Fut + Send + Sync,
    Fut: std::future::Future<Output = Result<Value, HandlerFailure>> + Send,
{
    async fn handle(&self, call: &RpcEnvelope) -> Result<Value, HandlerFailure> {
        (self.0)(call.clone()).await
    }
}
