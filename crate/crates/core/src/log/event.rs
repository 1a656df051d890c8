use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::explain::{ExplanationInstance, ExternalResponse, RatingValue};
use crate::literal::Literal;
use crate::scenario::DeliveryMode;
use crate::sim::{StateDelta, TaskStatus};

/// One row of a session's append-only log.
///
/// JSON shape: `{sessionId, seq, tMs, wallTime, type, payload}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LogEvent {
    pub session_id: String,
    pub seq: u64,
    pub t_ms: u64,
    pub wall_time: DateTime<Utc>,
    #[serde(flatten)]
    pub body: LogPayload,
}

impl LogEvent {
    pub fn event_type(&self) -> EventType {
        self.body.event_type()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventType {
    SessionStart,
    SessionEnd,
    DeviceInteraction,
    InteractionBlocked,
    RuleFired,
    TriggerFired,
    TaskStarted,
    TaskCompleted,
    TaskTimeout,
    TaskAborted,
    ExplanationCreated,
    ExplanationDelivered,
    ExplanationRequested,
    ExplanationQuery,
    ExplanationRated,
    ExternalEngineFallback,
    CascadeTruncated,
    ClientTelemetry,
    Error,
}

impl EventType {
    pub fn as_str(self) -> &'static str {
        match self {
            EventType::SessionStart => "SESSION_START",
            EventType::SessionEnd => "SESSION_END",
            EventType::DeviceInteraction => "DEVICE_INTERACTION",
            EventType::InteractionBlocked => "INTERACTION_BLOCKED",
            EventType::RuleFired => "RULE_FIRED",
            EventType::TriggerFired => "TRIGGER_FIRED",
            EventType::TaskStarted => "TASK_STARTED",
            EventType::TaskCompleted => "TASK_COMPLETED",
            EventType::TaskTimeout => "TASK_TIMEOUT",
            EventType::TaskAborted => "TASK_ABORTED",
            EventType::ExplanationCreated => "EXPLANATION_CREATED",
            EventType::ExplanationDelivered => "EXPLANATION_DELIVERED",
            EventType::ExplanationRequested => "EXPLANATION_REQUESTED",
            EventType::ExplanationQuery => "EXPLANATION_QUERY",
            EventType::ExplanationRated => "EXPLANATION_RATED",
            EventType::ExternalEngineFallback => "EXTERNAL_ENGINE_FALLBACK",
            EventType::CascadeTruncated => "CASCADE_TRUNCATED",
            EventType::ClientTelemetry => "CLIENT_TELEMETRY",
            EventType::Error => "ERROR",
        }
    }
}

impl std::fmt::Display for EventType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Type tag plus type-specific payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LogPayload {
    SessionStart(SessionStartPayload),
    SessionEnd(SessionEndPayload),
    DeviceInteraction(DeviceInteractionPayload),
    InteractionBlocked(InteractionBlockedPayload),
    RuleFired(RuleFiredPayload),
    TriggerFired(TriggerFiredPayload),
    TaskStarted(TaskPayload),
    TaskCompleted(TaskPayload),
    TaskTimeout(TaskPayload),
    TaskAborted(TaskPayload),
    ExplanationCreated(ExplanationCreatedPayload),
    ExplanationDelivered(ExplanationDeliveredPayload),
    ExplanationRequested(ExplanationRequestedPayload),
    ExplanationQuery(ExplanationQueryPayload),
    ExplanationRated(ExplanationRatedPayload),
    ExternalEngineFallback(ExternalEngineFallbackPayload),
    CascadeTruncated(CascadeTruncatedPayload),
    ClientTelemetry(serde_json::Map<String, serde_json::Value>),
    Error(ErrorPayload),
}

impl LogPayload {
    pub fn event_type(&self) -> EventType {
        match self {
            LogPayload::SessionStart(_) => EventType::SessionStart,
            LogPayload::SessionEnd(_) => EventType::SessionEnd,
            LogPayload::DeviceInteraction(_) => EventType::DeviceInteraction,
            LogPayload::InteractionBlocked(_) => EventType::InteractionBlocked,
            LogPayload::RuleFired(_) => EventType::RuleFired,
            LogPayload::TriggerFired(_) => EventType::TriggerFired,
            LogPayload::TaskStarted(_) => EventType::TaskStarted,
            LogPayload::TaskCompleted(_) => EventType::TaskCompleted,
            LogPayload::TaskTimeout(_) => EventType::TaskTimeout,
            LogPayload::TaskAborted(_) => EventType::TaskAborted,
            LogPayload::ExplanationCreated(_) => EventType::ExplanationCreated,
            LogPayload::ExplanationDelivered(_) => EventType::ExplanationDelivered,
            LogPayload::ExplanationRequested(_) => EventType::ExplanationRequested,
            LogPayload::ExplanationQuery(_) => EventType::ExplanationQuery,
            LogPayload::ExplanationRated(_) => EventType::ExplanationRated,
            LogPayload::ExternalEngineFallback(_) => EventType::ExternalEngineFallback,
            LogPayload::CascadeTruncated(_) => EventType::CascadeTruncated,
            LogPayload::ClientTelemetry(_) => EventType::ClientTelemetry,
            LogPayload::Error(_) => EventType::Error,
        }
    }

    /// State changes recorded by this row.
    pub fn changes(&self) -> &[StateDelta] {
        match self {
            LogPayload::SessionStart(p) => &p.changes,
            LogPayload::DeviceInteraction(p) => &p.changes,
            LogPayload::RuleFired(p) => &p.changes,
            LogPayload::TriggerFired(p) => &p.changes,
            _ => &[],
        }
    }

    pub fn changes_mut(&mut self) -> Option<&mut Vec<StateDelta>> {
        match self {
            LogPayload::SessionStart(p) => Some(&mut p.changes),
            LogPayload::DeviceInteraction(p) => Some(&mut p.changes),
            LogPayload::RuleFired(p) => Some(&mut p.changes),
            LogPayload::TriggerFired(p) => Some(&mut p.changes),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TimeMode {
    /// Session clock follows wall time.
    Live,
    /// Session clock moves only when the caller advances it.
    Injected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionStartPayload {
    pub scenario_id: String,
    pub participant_id: String,
    pub delivery_mode: DeliveryMode,
    #[serde(default)]
    pub context_vars: BTreeMap<String, Literal>,
    #[serde(default)]
    pub user_context: BTreeMap<String, serde_json::Value>,
    pub time_mode: TimeMode,
    /// Context overrides applied on top of the defaults.
    #[serde(default)]
    pub changes: Vec<StateDelta>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EndReason {
    Completed,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionEndPayload {
    pub reason: EndReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum InteractionResult {
    Committed,
    Blocked,
    /// The value equalled the current one.
    Noop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeviceInteractionPayload {
    pub device_id: String,
    pub property: String,
    pub value: Literal,
    pub outcome: InteractionResult,
    #[serde(default)]
    pub changes: Vec<StateDelta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_seq: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InteractionBlockedPayload {
    pub device_id: String,
    pub property: String,
    pub attempted_value: Literal,
    pub rule_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RuleFiredPayload {
    pub rule_id: String,
    pub depth: u32,
    #[serde(default)]
    pub changes: Vec<StateDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TriggerFiredPayload {
    pub trigger_id: String,
    pub deadline_ms: u64,
    #[serde(default)]
    pub changes: Vec<StateDelta>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskPayload {
    pub task_id: String,
    pub from: TaskStatus,
    pub to: TaskStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExplanationCreatedPayload {
    #[serde(flatten)]
    pub instance: ExplanationInstance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExplanationDeliveredPayload {
    pub instance_id: String,
    pub mode: DeliveryMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExplanationRequestedPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device_id: Option<String>,
    /// The held or newly created instance answering the request.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExplanationQueryPayload {
    pub parent_instance_id: String,
    pub text: String,
    pub matched: bool,
    pub instance_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExplanationRatedPayload {
    pub instance_id: String,
    pub value: RatingValue,
    pub revision: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExternalEngineFallbackPayload {
    pub spec_id: String,
    pub failure: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<ExternalResponse>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeTruncatedPayload {
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: String,
    pub message: String,
}
