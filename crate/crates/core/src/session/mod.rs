//! Session lifecycle and the client event protocol.
//!
//! A [`SessionService`] owns the registry of live sessions. Each session
//! runs its handlers one at a time behind its own lock; every state change,
//! task transition and explanation is appended to the log before the
//! matching server event is emitted, and each server event carries the seq
//! of the log row it reflects.

mod params;
mod service;
pub mod wire;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::log::EndReason;
use crate::scenario::DeliveryMode;
use crate::sim::TaskState;

pub use params::{decode_context_param, encode_context_param, ParamError, SessionContextParams};
pub use service::{
    CreateSessionRequest, CreatedSession, EngineProvider, ExplanationView, NoEngines, ServiceConfig,
    ServiceError, SessionService, SessionView, Subscription, DEFAULT_IDLE_TIMEOUT_MS,
};
pub use wire::{ClientEvent, WireEvent};

/// Outcome figures written with SESSION_END and returned by completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionSummary {
    pub session_id: String,
    pub scenario_id: String,
    pub participant_id: String,
    pub delivery_mode: DeliveryMode,
    pub reason: EndReason,
    pub duration_ms: u64,
    pub tasks: BTreeMap<String, TaskState>,
    pub interactions: u64,
    pub blocked_interactions: u64,
    pub explanations_created: u64,
    pub explanations_delivered: u64,
    pub queries: u64,
    /// Rating submissions, revisions included.
    pub ratings: u64,
    pub rated_instances: u64,
}
