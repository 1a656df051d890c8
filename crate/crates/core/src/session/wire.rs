//! WebSocket envelope and per-type payloads.

use serde::{Deserialize, Serialize};

use crate::explain::{ExplanationCause, ExplanationSource, RatingValue};
use crate::literal::Literal;
use crate::log::EndReason;
use crate::scenario::DeliveryMode;
use crate::sim::{StateDelta, StateSnapshot, TaskStatus};

use super::SessionSummary;

/// `{type, sessionId, seq, payload}`. Client events carry the client's own
/// counter in `seq`; server events carry the log seq they correspond to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WireEvent {
    #[serde(rename = "type")]
    pub event_type: String,
    pub session_id: String,
    pub seq: u64,
    #[serde(default)]
    pub payload: serde_json::Value,
}

impl WireEvent {
    pub fn new(event_type: &str, session_id: &str, seq: u64, payload: impl Serialize) -> Self {
        WireEvent {
            event_type: event_type.to_string(),
            session_id: session_id.to_string(),
            seq,
            payload: serde_json::to_value(payload).expect("wire payloads always serialize"),
        }
    }
}

pub mod client {
    pub const DEVICE_INTERACTION: &str = "device_interaction";
    pub const EXPLANATION_REQUEST: &str = "explanation_request";
    pub const EXPLANATION_QUERY: &str = "explanation_query";
    pub const EXPLANATION_RATING: &str = "explanation_rating";
    pub const CLIENT_TELEMETRY: &str = "client_telemetry";
    pub const ABORT_TASK: &str = "abort_task";
}

pub mod server {
    pub const STATE_UPDATE: &str = "state_update";
    pub const INTERACTION_BLOCKED: &str = "interaction_blocked";
    pub const EXPLANATION: &str = "explanation";
    pub const EXPLANATION_AVAILABLE: &str = "explanation_available";
    pub const TASK_UPDATE: &str = "task_update";
    pub const SESSION_END: &str = "session_end";
    pub const ERROR: &str = "error";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DeviceInteraction {
    pub device_id: String,
    pub property: String,
    pub value: Literal,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExplanationRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExplanationQuery {
    /// Parent instance; defaults to the most recently delivered one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_id: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExplanationRating {
    pub instance_id: String,
    pub value: RatingValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AbortTask {
    pub task_id: String,
}

/// A decoded client event.
#[derive(Debug, Clone, PartialEq)]
pub enum ClientEvent {
    DeviceInteraction(DeviceInteraction),
    ExplanationRequest(ExplanationRequest),
    ExplanationQuery(ExplanationQuery),
    ExplanationRating(ExplanationRating),
    ClientTelemetry(serde_json::Map<String, serde_json::Value>),
    AbortTask(AbortTask),
}

impl ClientEvent {
    /// Decodes the payload according to the envelope type.
    pub fn decode(event: &WireEvent) -> Result<ClientEvent, String> {
        fn payload<T: serde::de::DeserializeOwned>(v: &serde_json::Value) -> Result<T, String> {
            let v = if v.is_null() { serde_json::Value::Object(Default::default()) } else { v.clone() };
            serde_json::from_value(v).map_err(|e| e.to_string())
        }
        let p = &event.payload;
        match event.event_type.as_str() {
            client::DEVICE_INTERACTION => payload(p).map(ClientEvent::DeviceInteraction),
            client::EXPLANATION_REQUEST => payload(p).map(ClientEvent::ExplanationRequest),
            client::EXPLANATION_QUERY => payload(p).map(ClientEvent::ExplanationQuery),
            client::EXPLANATION_RATING => payload(p).map(ClientEvent::ExplanationRating),
            client::CLIENT_TELEMETRY => payload(p).map(ClientEvent::ClientTelemetry),
            client::ABORT_TASK => payload(p).map(ClientEvent::AbortTask),
            other => Err(format!("unknown event type `{other}`")),
        }
    }

    pub fn event_type(&self) -> &'static str {
        match self {
            ClientEvent::DeviceInteraction(_) => client::DEVICE_INTERACTION,
            ClientEvent::ExplanationRequest(_) => client::EXPLANATION_REQUEST,
            ClientEvent::ExplanationQuery(_) => client::EXPLANATION_QUERY,
            ClientEvent::ExplanationRating(_) => client::EXPLANATION_RATING,
            ClientEvent::ClientTelemetry(_) => client::CLIENT_TELEMETRY,
            ClientEvent::AbortTask(_) => client::ABORT_TASK,
        }
    }

    pub fn payload(&self) -> serde_json::Value {
        let v = match self {
            ClientEvent::DeviceInteraction(p) => serde_json::to_value(p),
            ClientEvent::ExplanationRequest(p) => serde_json::to_value(p),
            ClientEvent::ExplanationQuery(p) => serde_json::to_value(p),
            ClientEvent::ExplanationRating(p) => serde_json::to_value(p),
            ClientEvent::ClientTelemetry(p) => serde_json::to_value(p),
            ClientEvent::AbortTask(p) => serde_json::to_value(p),
        };
        v.expect("client payloads always serialize")
    }

    pub fn into_wire(self, session_id: &str, client_seq: u64) -> WireEvent {
        WireEvent {
            event_type: self.event_type().to_string(),
            session_id: session_id.to_string(),
            seq: client_seq,
            payload: self.payload(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StateUpdate {
    pub clock_ms: u64,
    pub changes: Vec<StateDelta>,
    /// Full state; sent on connect and after a lagging subscriber catches up.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<StateSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InteractionBlocked {
    pub device_id: String,
    pub property: String,
    pub attempted_value: Literal,
    pub rule_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExplanationMessage {
    pub instance_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec_id: Option<String>,
    pub text: String,
    pub mode: DeliveryMode,
    pub source: ExplanationSource,
    pub cause: ExplanationCause,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_instance_id: Option<String>,
    /// Interactive mode: the client shows a query input under the card.
    pub chat_enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExplanationAvailable {
    pub instance_id: String,
    pub cause: ExplanationCause,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskUpdate {
    pub task_id: String,
    pub from: TaskStatus,
    pub to: TaskStatus,
    pub at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionEnd {
    pub reason: EndReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<SessionSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ErrorMessage {
    pub code: String,
    pub message: String,
    /// The client seq of the event that caused the error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_seq: Option<u64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_interaction() {
        let raw = r#"{"type":"device_interaction","sessionId":"s","seq":4,
                      "payload":{"deviceId":"heater","property":"power","value":false}}"#;
        let e: WireEvent = serde_json::from_str(raw).unwrap();
        assert_eq!(
            ClientEvent::decode(&e).unwrap(),
            ClientEvent::DeviceInteraction(DeviceInteraction {
                device_id: "heater".into(),
                property: "power".into(),
                value: Literal::Bool(false)
            })
        );
    }

    #[test]
    fn missing_payload_is_empty_object() {
        let e = WireEvent { event_type: "explanation_request".into(), session_id: "s".into(), seq: 1, payload: serde_json::Value::Null };
        assert_eq!(ClientEvent::decode(&e).unwrap(), ClientEvent::ExplanationRequest(ExplanationRequest::default()));
    }

    #[test]
    fn schema_violations_are_rejected() {
        let bad = |t: &str, p: serde_json::Value| {
            ClientEvent::decode(&WireEvent { event_type: t.into(), session_id: "s".into(), seq: 1, payload: p }).unwrap_err()
        };
        assert!(bad("teleport", serde_json::json!({})).contains("unknown event type"));
        assert!(bad("device_interaction", serde_json::json!({"deviceId": "h"})).contains("missing field"));
        assert!(bad("explanation_rating", serde_json::json!({"instanceId": "i", "value": "meh"})).contains("unknown variant"));
        assert!(bad("abort_task", serde_json::json!({"taskId": "t", "x": 1})).contains("unknown field"));
    }

    #[test]
    fn client_events_round_trip_through_wire() {
        let ev = ClientEvent::ExplanationQuery(ExplanationQuery { instance_id: None, text: "why?".into() });
        let wire = ev.clone().into_wire("s", 9);
        assert_eq!(wire.event_type, "explanation_query");
        assert_eq!(ClientEvent::decode(&wire).unwrap(), ev);
    }
}
