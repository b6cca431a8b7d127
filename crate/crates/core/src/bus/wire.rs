//! WebSocket wire format: one JSON object per text frame. Calls and events
//! carry exactly the fields of [`RpcEnvelope`] and [`EventFrame`]; replies
//! carry `call_id` plus either `result` or `error`.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use super::{BusError, EventFrame, RpcEnvelope, DEFAULT_DEADLINE_MS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorDoc {
    pub kind: String,
    pub message: String,
}

impl From<&BusError> for ErrorDoc {
    fn from(err: &BusError) -> Self {
        ErrorDoc {
            kind: err.kind().to_string(),
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RpcResponse {
    pub call_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorDoc>,
}

impl RpcResponse {
    pub fn from_outcome(call_id: &str, outcome: &Result<Value, BusError>) -> Self {
        match outcome {
            Ok(v) => RpcResponse {
                call_id: call_id.to_string(),
                result: Some(v.clone()),
                error: None,
            },
            Err(e) => RpcResponse {
                call_id: call_id.to_string(),
                result: None,
                error: Some(e.into()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WireFrame {
    Call(RpcEnvelope),
    Event(EventFrame),
    Response(RpcResponse),
}

#[derive(Debug, Error, PartialEq)]
pub enum WireError {
    #[error("frame is not valid JSON: {0}")]
    NotJson(String),
    #[error("frame must be a JSON object")]
    NotObject,
    #[error("frame matches no known shape")]
    Unrecognized,
    #[error("invalid {shape} frame: {reason}")]
    Invalid { shape: &'static str, reason: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvelopeIn {
    call_id: String,
    source: String,
    target: String,
    method: String,
    #[serde(default)]
    params: Value,
    #[serde(default)]
    deadline_ms: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EventIn {
    topic: String,
    sequence: u64,
    #[serde(default)]
    payload: Value,
    emitted_at: i64,
}

fn invalid(shape: &'static str, reason: impl ToString) -> WireError {
    WireError::Invalid {
        shape,
        reason: reason.to_string(),
    }
}

pub fn decode_frame(text: &str) -> Result<WireFrame, WireError> {
    let value: Value = serde_json::from_str(text).map_err(|e| WireError::NotJson(e.to_string()))?;
    let obj: &Map<String, Value> = value.as_object().ok_or(WireError::NotObject)?;

    if obj.contains_key("method") {
        let env: EnvelopeIn =
            serde_json::from_value(value.clone()).map_err(|e| invalid("call", e))?;
        let deadline_ms = env.deadline_ms.unwrap_or(DEFAULT_DEADLINE_MS);
        if deadline_ms == 0 {
            return Err(invalid("call", "deadline_ms must be positive"));
        }
        if env.call_id.is_empty() {
            return Err(invalid("call", "call_id must be non-empty"));
        }
        return Ok(WireFrame::Call(RpcEnvelope {
            call_id: env.call_id,
            source: env.source,
            target: env.target,
            method: env.method,
            params: env.params,
            deadline_ms,
        }));
    }
    if obj.contains_key("topic") {
        let ev: EventIn = serde_json::from_value(value.clone()).map_err(|e| invalid("event", e))?;
        if ev.topic.is_empty() {
            return Err(invalid("event", "topic must be non-empty"));
        }
        return Ok(WireFrame::Event(EventFrame {
            topic: ev.topic,
            sequence: ev.sequence,
            payload: ev.payload,
            emitted_at: ev.emitted_at,
        }));
    }
    if obj.contains_key("call_id") {
        let mut resp: RpcResponse =
            serde_json::from_value(value.clone()).map_err(|e| invalid("response", e))?;
        if resp.result.is_none() && obj.contains_key("result") {
            resp.result = Some(Value::Null);
        }
        if resp.result.is_some() == resp.error.is_some() {
            return Err(invalid("response", "exactly one of result or error is required"));
        }
        return Ok(WireFrame::Response(resp));
    }
    Err(WireError::Unrecognized)
}

pub fn encode_frame(frame: &WireFrame) -> String {
    let encoded = match frame {
        WireFrame::Call(env) => serde_json::to_string(env),
        WireFrame::Event(ev) => serde_json::to_string(ev),
        WireFrame::Response(r) => serde_json::to_string(r),
    };
    encoded.expect("wire frames always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn envelope_field_names_are_snake_case() {
        let env = RpcEnvelope::new("c1", "console", "executor-1", "hitl.decide", json!({"a": 1}));
        let v: Value = serde_json::from_str(&encode_frame(&WireFrame::Call(env))).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["call_id", "deadline_ms", "method", "params", "source", "target"]);
    }

    #[test]
    fn missing_deadline_defaults() {
        let f = decode_frame(r#"{"call_id":"1","source":"a","target":"b","method":"m","params":{}}"#)
            .unwrap();
        match f {
            WireFrame::Call(env) => assert_eq!(env.deadline_ms, DEFAULT_DEADLINE_MS),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_frames() {
        assert!(matches!(decode_frame("nope"), Err(WireError::NotJson(_))));
        assert_eq!(decode_frame("[1]"), Err(WireError::NotObject));
        assert_eq!(decode_frame("{}"), Err(WireError::Unrecognized));
        assert!(decode_frame(
            r#"{"call_id":"1","source":"a","target":"b","method":"m","deadline_ms":0}"#
        )
        .is_err());
        assert!(decode_frame(r#"{"call_id":"1","result":1,"error":{"kind":"x","message":"y"}}"#)
            .is_err());
        assert!(decode_frame(r#"{"topic":"t","sequence":1,"payload":null,"emitted_at":0,"x":1}"#)
            .is_err());
    }

    #[test]
    fn event_frame_decodes() {
        let ev = EventFrame {
            topic: "run.progress".into(),
            sequence: 7,
            payload: json!({"step": 1}),
            emitted_at: 42,
        };
        let text = encode_frame(&WireFrame::Event(ev.clone()));
        assert_eq!(decode_frame(&text).unwrap(), WireFrame::Event(ev));
    }
}
