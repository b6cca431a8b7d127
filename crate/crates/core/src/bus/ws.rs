//! WebSocket transport for the bus.
//!
//! A connection may send calls to any registered agent, subscribe to topics,
//! and register itself as an agent. Calls addressed to the reserved target
//! `bus` are control requests:
//!
//! - `bus.subscribe` `{topic | prefix, after_sequence?}`
//! - `bus.register` `AgentDescriptor` (the connection then receives calls and
//!   must answer them with response frames)
//! - `bus.discover` `{capability}`
//! - `bus.publish` `{topic, payload}`

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;

use super::wire::{decode_frame, encode_frame, ErrorDoc, RpcResponse, WireFrame};
use super::{
    AgentBus, AgentDescriptor, AgentHandler, BusError, HandlerFailure, RegistrationToken,
    RpcEnvelope,
};

pub const CONTROL_TARGET: &str = "bus";

type Pending = Arc<Mutex<HashMap<String, oneshot::Sender<Result<Value, HandlerFailure>>>>>;

pub fn router(bus: AgentBus) -> Router {
    Router::new().route("/bus", get(upgrade)).with_state(bus)
}

/// Binds and serves until the listener fails. Returns the bound address via
/// `on_bound` before accepting (useful with port 0).
pub async fn serve(
    bus: AgentBus,
    addr: SocketAddr,
    on_bound: impl FnOnce(SocketAddr),
) -> std::io::Result<()> {
    serve_router(router(bus), addr, on_bound).await
}

pub async fn serve_router(
    app: Router,
    addr: SocketAddr,
    on_bound: impl FnOnce(SocketAddr),
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    on_bound(listener.local_addr()?);
    axum::serve(listener, app).await
}

/// Serves the bus on an already bound listener.
pub async fn serve_on(listener: tokio::net::TcpListener, bus: AgentBus) -> std::io::Result<()> {
    axum::serve(listener, router(bus)).await
}

async fn upgrade(ws: WebSocketUpgrade, State(bus): State<AgentBus>) -> Response {
    ws.on_upgrade(move |socket| connection(bus, socket))
}

struct RemoteAgent {
    outbound: mpsc::UnboundedSender<String>,
    pending: Pending,
}

#[async_trait]
impl AgentHandler for RemoteAgent {
    async fn handle(&self, call: &RpcEnvelope) -> Result<Value, HandlerFailure> {
        let (tx, rx) = oneshot::channel();
        self.pending.lock().unwrap().insert(call.call_id.clone(), tx);
        let frame = encode_frame(&WireFrame::Call(call.clone()));
        if self.outbound.send(frame).is_err() {
            self.pending.lock().unwrap().remove(&call.call_id);
            return Err(HandlerFailure::new("TransportClosed", "remote agent disconnected"));
        }
        rx.await
            .unwrap_or_else(|_| Err(HandlerFailure::new("TransportClosed", "remote agent disconnected")))
    }
}

#[derive(Deserialize)]
struct SubscribeParams {
    topic: Option<String>,
    prefix: Option<String>,
    after_sequence: Option<u64>,
}

#[derive(Deserialize)]
struct PublishParams {
    topic: String,
    #[serde(default)]
    payload: Value,
}

#[derive(Deserialize)]
struct DiscoverParams {
    capability: String,
}

struct Connection {
    bus: AgentBus,
    outbound: mpsc::UnboundedSender<String>,
    pending: Pending,
    tokens: Vec<RegistrationToken>,
    tasks: Vec<JoinHandle<()>>,
}

impl Connection {
    fn reply(&self, call_id: &str, outcome: Result<Value, BusError>) {
        let resp = RpcResponse::from_outcome(call_id, &outcome);
        let _ = self.outbound.send(encode_frame(&WireFrame::Response(resp)));
    }

    fn reply_error(&self, call_id: &str, kind: &str, message: String) {
        let resp = RpcResponse {
            call_id: call_id.to_string(),
            result: None,
            error: Some(ErrorDoc {
                kind: kind.to_string(),
                message,
            }),
        };
        let _ = self.outbound.send(encode_frame(&WireFrame::Response(resp)));
    }

    fn on_text(&mut self, text: &str) {
        match decode_frame(text) {
            Err(e) => self.reply_error("", "BadFrame", e.to_string()),
            Ok(WireFrame::Response(resp)) => {
                let waiter = self.pending.lock().unwrap().remove(&resp.call_id);
                if let Some(tx) = waiter {
                    let outcome = match (resp.result, resp.error) {
                        (Some(v), _) => Ok(v),
                        (None, Some(e)) => Err(HandlerFailure::new(e.kind, e.message)),
                        (None, None) => Err(HandlerFailure::new("BadFrame", "empty response")),
                    };
                    let _ = tx.send(outcome);
                }
            }
            Ok(WireFrame::Event(ev)) => {
                let outcome = self.bus.publish_event(&ev.topic, ev.payload).map(|f| json!(f));
                tracing::debug!(ok = outcome.is_ok(), "event frame from client published");
            }
            Ok(WireFrame::Call(env)) if env.target == CONTROL_TARGET => self.control(env),
            Ok(WireFrame::Call(env)) => {
                let bus = self.bus.clone();
                let outbound = self.outbound.clone();
                self.tasks.push(tokio::spawn(async move {
                    let call_id = env.call_id.clone();
                    let outcome = bus.call(env).await;
                    let resp = RpcResponse::from_outcome(&call_id, &outcome);
                    let _ = outbound.send(encode_frame(&WireFrame::Response(resp)));
                }));
            }
        }
    }

    fn control(&mut self, env: RpcEnvelope) {
        match env.method.as_str() {
            "bus.subscribe" => {
                let params: SubscribeParams = match serde_json::from_value(env.params) {
                    Ok(p) => p,
                    Err(e) => return self.reply_error(&env.call_id, "BadParams", e.to_string()),
                };
                let mut sub = match (params.topic, params.prefix) {
                    (Some(topic), _) => self
                        .bus
                        .subscribe_after(&topic, params.after_sequence.unwrap_or(u64::MAX)),
                    (None, Some(prefix)) => self.bus.subscribe_prefix(&prefix),
                    (None, None) => {
                        return self.reply_error(
                            &env.call_id,
                            "BadParams",
                            "topic or prefix required".into(),
                        )
                    }
                };
                let outbound = self.outbound.clone();
                self.tasks.push(tokio::spawn(async move {
                    while let Some(frame) = sub.recv().await {
                        if outbound.send(encode_frame(&WireFrame::Event(frame))).is_err() {
                            break;
                        }
                    }
                }));
                self.reply(&env.call_id, Ok(json!({ "subscribed": true })));
            }
            "bus.register" => {
                let mut descriptor: AgentDescriptor = match serde_json::from_value(env.params) {
                    Ok(d) => d,
                    Err(e) => return self.reply_error(&env.call_id, "BadParams", e.to_string()),
                };
                descriptor.endpoint = format!("ws://remote/{}", descriptor.agent_id);
                let handler = Arc::new(RemoteAgent {
                    outbound: self.outbound.clone(),
                    pending: self.pending.clone(),
                });
                let agent_id = descriptor.agent_id.clone();
                let outcome = self.bus.register_agent(descriptor, handler).map(|token| {
                    self.tokens.push(token);
                    json!({ "registered": agent_id })
                });
                self.reply(&env.call_id, outcome);
            }
            "bus.discover" => match serde_json::from_value::<DiscoverParams>(env.params) {
                Ok(p) => self.reply(&env.call_id, Ok(json!(self.bus.discover(&p.capability)))),
                Err(e) => self.reply_error(&env.call_id, "BadParams", e.to_string()),
            },
            "bus.publish" => match serde_json::from_value::<PublishParams>(env.params) {
                Ok(p) => {
                    let outcome = self.bus.publish_event(&p.topic, p.payload).map(|f| json!(f));
                    self.reply(&env.call_id, outcome)
                }
                Err(e) => self.reply_error(&env.call_id, "BadParams", e.to_string()),
            },
            other => self.reply(
                &env.call_id,
                Err(BusError::MethodNotFound {
                    target: CONTROL_TARGET.into(),
                    method: other.into(),
                }),
            ),
        }
    }
}

async fn connection(bus: AgentBus, socket: WebSocket) {
    let (mut sink, mut stream) = socket.split();
    let (outbound, mut rx) = mpsc::unbounded_channel::<String>();
    let writer = tokio::spawn(async move {
        while let Some(text) = rx.recv().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    });

    let mut conn = Connection {
        bus,
        outbound,
        pending: Arc::new(Mutex::new(HashMap::new())),
        tokens: Vec::new(),
        tasks: Vec::new(),
    };
    while let Some(Ok(msg)) = stream.next().await {
        match msg {
            Message::Text(text) => conn.on_text(text.as_str()),
            Message::Close(_) => break,
            _ => {}
        }
    }

    for token in &conn.tokens {
        conn.bus.deregister(token);
    }
    for task in &conn.tasks {
        task.abort();
    }
    conn.pending.lock().unwrap().clear();
    drop(conn);
    writer.abort();
}
