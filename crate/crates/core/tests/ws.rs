//! The bus WebSocket surface, driven the way the operations console drives it.

use std::collections::VecDeque;
use std::sync::Arc;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use netmas::bus::wire::{decode_frame, encode_frame, RpcResponse, WireFrame};
use netmas::bus::{ws, AgentBus, EventFrame, RpcEnvelope};
use netmas::knowledge::KnowledgeStore;
use netmas::pipeline::{prepare, World, WorldConfig};
use netmas::telemetry::{FaultSpec, ScenarioKind};
use netmas::time::SimClock;
use serde_json::{json, Value};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

struct Client {
    socket: WebSocketStream<MaybeTlsStream<TcpStream>>,
    events: VecDeque<EventFrame>,
    calls: VecDeque<RpcEnvelope>,
    next: u64,
}

impl Client {
    async fn connect(bus: AgentBus) -> Self {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(ws::serve_on(listener, bus));
        let (socket, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/bus"))
            .await
            .unwrap();
        Self {
            socket,
            events: VecDeque::new(),
            calls: VecDeque::new(),
            next: 0,
        }
    }

    async fn send_text(&mut self, text: String) {
        self.socket.send(Message::text(text)).await.unwrap();
    }

    async fn next_frame(&mut self) -> WireFrame {
        loop {
            let msg = tokio::time::timeout(Duration::from_secs(20), self.socket.next())
                .await
                .expect("frame within 20 s")
                .expect("socket open")
                .unwrap();
            if let Message::Text(text) = msg {
                return decode_frame(text.as_str()).expect("server frames decode");
            }
        }
    }

    async fn response(&mut self, call_id: &str) -> RpcResponse {
        loop {
            match self.next_frame().await {
                WireFrame::Response(r) if r.call_id == call_id => return r,
                WireFrame::Response(r) => panic!("unexpected response {r:?}"),
                WireFrame::Event(e) => self.events.push_back(e),
                WireFrame::Call(c) => self.calls.push_back(c),
            }
        }
    }

    async fn call(&mut self, target: &str, method: &str, params: Value) -> RpcResponse {
        self.next += 1;
        let id = format!("console#{}", self.next);
        let env = RpcEnvelope::new(&id, "console", target, method, params);
        self.send_text(encode_frame(&WireFrame::Call(env))).await;
        self.response(&id).await
    }

    async fn ok(&mut self, target: &str, method: &str, params: Value) -> Value {
        let r = self.call(target, method, params).await;
        assert!(r.error.is_none(), "{method} failed: {:?}", r.error);
        r.result.unwrap()
    }

    async fn event(&mut self, topic: &str) -> EventFrame {
        if let Some(i) = self.events.iter().position(|e| e.topic == topic) {
            return self.events.remove(i).unwrap();
        }
        loop {
            match self.next_frame().await {
                WireFrame::Event(e) if e.topic == topic => return e,
                WireFrame::Event(e) => self.events.push_back(e),
                other => panic!("unexpected frame {other:?}"),
            }
        }
    }
}

fn world(scenario: ScenarioKind) -> (World, netmas::detect::IntentPrompt) {
    let prepared = prepare(FaultSpec::reference(scenario, 42)).unwrap();
    let world = World::new(
        Arc::new(prepared.store),
        prepared.topology,
        Arc::new(KnowledgeStore::embedded()),
        SimClock::starting_at(prepared.start_at),
        WorldConfig::default(),
    );
    (world, prepared.prompt)
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn console_approves_a_pending_plan() {
    let (world, prompt) = world(ScenarioKind::RanInputPowerFailure);
    let mut console = Client::connect(world.bus.clone()).await;

    let sub = console
        .ok("bus", "bus.subscribe", json!({ "topic": "hitl.pending" }))
        .await;
    assert_eq!(sub, json!({ "subscribed": true }));

    let started = console
        .ok(
            "orchestrator",
            "orchestrator.handle_intent",
            json!({ "intent": prompt, "wait": false, "auto_approve": false }),
        )
        .await;
    let session_id = started["session"]["session_id"].as_str().unwrap().to_string();
    assert_eq!(started["session"]["status"], "running");

    let pending_event = console.event("hitl.pending").await;
    let ticket_id = pending_event.payload["ticket"]["ticket_id"]
        .as_str()
        .unwrap()
        .to_string();

    let pending = console.ok("executor", "hitl.list_pending", json!({})).await;
    let pending = pending.as_array().unwrap();
    assert_eq!(pending.len(), 1);
    assert_eq!(pending[0]["ticket"]["ticket_id"], ticket_id.as_str());
    assert_eq!(pending[0]["plan"]["state"], "pending_approval");
    assert!(pending[0]["plan"]["bindings"].as_array().unwrap().len() >= 3);

    let session = console
        .ok(
            "orchestrator",
            "orchestrator.get_session",
            json!({ "session_id": session_id }),
        )
        .await;
    assert_eq!(session["status"], "awaiting_hitl");

    let missing_comment = console
        .call(
            "executor",
            "hitl.decide",
            json!({ "ticket_id": ticket_id, "decision": "reject" }),
        )
        .await;
    let err = missing_comment.error.unwrap();
    assert_eq!(err.kind, "HandlerError");
    assert!(err.message.contains("RejectWithoutComment"), "{}", err.message);

    let decided = console
        .ok(
            "executor",
            "hitl.decide",
            json!({ "ticket_id": ticket_id, "decision": "approve" }),
        )
        .await;
    assert_eq!(decided["state"], "approved");
    let ticket = console
        .ok("executor", "hitl.get_ticket", json!({ "ticket_id": ticket_id }))
        .await;
    assert_eq!(ticket["decider"], "human:console");

    let mut session = Value::Null;
    for _ in 0..200 {
        session = console
            .ok(
                "orchestrator",
                "orchestrator.get_session",
                json!({ "session_id": session_id }),
            )
            .await;
        if session["status"] != "running" && session["status"] != "awaiting_hitl" {
            break;
        }
        tokio::time::sleep(Duration::from_millis(25)).await;
    }
    assert_eq!(session["status"], "completed");
    assert_eq!(session["report"]["variant"], "diagnosed");
    let empty = console.ok("executor", "hitl.list_pending", json!({})).await;
    assert_eq!(empty, json!([]));

    // A late subscriber replays the session topic from a sequence number.
    let topic = format!("session.{session_id}");
    console
        .ok("bus", "bus.subscribe", json!({ "topic": topic, "after_sequence": 1 }))
        .await;
    let first = console.event(&topic).await;
    assert_eq!(first.sequence, 2);
    let second = console.event(&topic).await;
    assert_eq!(second.sequence, 3);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn blocking_handle_intent_returns_the_report() {
    let (world, prompt) = world(ScenarioKind::CorePduDegradation);
    let mut console = Client::connect(world.bus.clone()).await;
    let done = console
        .ok(
            "orchestrator",
            "orchestrator.handle_intent",
            json!({ "intent": prompt, "auto_approve": true }),
        )
        .await;
    assert_eq!(done["session"]["status"], "completed");
    assert_eq!(done["report"]["variant"], "diagnosed");
    assert_eq!(
        done["report"]["candidates"][0]["label"],
        "NRF service suspension"
    );
    let unknown = console
        .call(
            "orchestrator",
            "orchestrator.get_session",
            json!({ "session_id": "session-9999" }),
        )
        .await;
    assert!(unknown.error.unwrap().message.contains("UnknownSession"));
}

#[tokio::test]
async fn remote_agents_register_and_answer_calls() {
    let bus = AgentBus::default();
    let mut remote = Client::connect(bus.clone()).await;
    let reg = remote
        .ok(
            "bus",
            "bus.register",
            json!({ "agent_id": "remote-echo", "capabilities": ["echo.ping"], "endpoint": "" }),
        )
        .await;
    assert_eq!(reg, json!({ "registered": "remote-echo" }));
    let found = remote
        .ok("bus", "bus.discover", json!({ "capability": "echo.ping" }))
        .await;
    assert_eq!(found[0]["agent_id"], "remote-echo");

    let caller = bus.clone();
    let pending = tokio::spawn(async move { caller.request("local", "echo.ping", json!({ "n": 7 })).await });
    let call = loop {
        match remote.next_frame().await {
            WireFrame::Call(c) => break c,
            other => panic!("unexpected {other:?}"),
        }
    };
    assert_eq!(call.method, "echo.ping");
    assert_eq!(call.source, "local");
    let reply = RpcResponse::from_outcome(&call.call_id, &Ok(json!({ "pong": call.params["n"] })));
    remote.send_text(encode_frame(&WireFrame::Response(reply))).await;
    assert_eq!(pending.await.unwrap().unwrap(), json!({ "pong": 7 }));

    // Closing the socket deregisters the remote agent.
    remote.socket.close(None).await.unwrap();
    for _ in 0..100 {
        if bus.discover("echo.ping").is_empty() {
            break;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    assert!(bus.discover("echo.ping").is_empty());
}

#[tokio::test]
async fn bad_frames_and_client_events() {
    let bus = AgentBus::default();
    let mut watcher = bus.subscribe("console.note");
    let mut client = Client::connect(bus.clone()).await;

    client.send_text("{not json".to_string()).await;
    match client.next_frame().await {
        WireFrame::Response(r) => assert_eq!(r.error.unwrap().kind, "BadFrame"),
        other => panic!("unexpected {other:?}"),
    }

    let unknown = client.call("bus", "bus.teleport", json!({})).await;
    assert_eq!(unknown.error.unwrap().kind, "MethodNotFound");
    let no_topic = client.call("bus", "bus.subscribe", json!({})).await;
    assert_eq!(no_topic.error.unwrap().kind, "BadParams");

    let ack = client
        .ok("bus", "bus.publish", json!({ "topic": "console.note", "payload": { "x": 1 } }))
        .await;
    assert_eq!(ack["sequence"], 1);
    let frame = tokio::time::timeout(Duration::from_secs(5), watcher.recv())
        .await
        .unwrap()
        .unwrap();
    assert_eq!(frame.payload, json!({ "x": 1 }));
}
