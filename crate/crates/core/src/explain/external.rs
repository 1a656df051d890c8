use std::collections::BTreeMap;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ExplanationCause, ExplanationSource};
use crate::literal::Literal;
use crate::scenario::ExplanationConfig;
use crate::sim::StateSnapshot;

/// World state as sent to an engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EngineState {
    pub devices: BTreeMap<String, BTreeMap<String, Literal>>,
    pub context: BTreeMap<String, Literal>,
    pub clock_ms: u64,
}

impl From<&StateSnapshot> for EngineState {
    fn from(s: &StateSnapshot) -> Self {
        EngineState { devices: s.devices.clone(), context: s.context.clone(), clock_ms: s.clock_ms }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExternalRequest {
    pub session_id: String,
    pub cause: ExplanationCause,
    pub state: EngineState,
    #[serde(default)]
    pub user_context: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExternalResponse {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub follow_up_hints: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

/// A pluggable explanation service.
#[async_trait]
pub trait ExplanationEngine: Send + Sync {
    async fn explain(&self, request: &ExternalRequest) -> Result<ExternalResponse, EngineError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExternalOutcome {
    pub text: String,
    pub source: ExplanationSource,
    /// Why the fallback was used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    /// The engine's answer, stored verbatim even when rejected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<ExternalResponse>,
}

/// Asks the engine, degrading to `fallback_text` on timeout, transport
/// error or empty text.
pub async fn fetch_external(
    engine: &dyn ExplanationEngine,
    request: &ExternalRequest,
    config: &ExplanationConfig,
    fallback_text: &str,
) -> ExternalOutcome {
    let limit = Duration::from_millis(config.engine_timeout_ms);
    let fallback = |failure: String, response: Option<ExternalResponse>| ExternalOutcome {
        text: fallback_text.to_string(),
        source: ExplanationSource::ExternalFallback,
        failure: Some(failure),
        response,
    };
    match tokio::time::timeout(limit, engine.explain(request)).await {
        Err(_) => fallback(format!("timeout after {} ms", config.engine_timeout_ms), None),
        Ok(Err(e)) => fallback(e.to_string(), None),
        Ok(Ok(resp)) if resp.text.trim().is_empty() => fallback("empty response text".into(), Some(resp)),
        Ok(Ok(resp)) => ExternalOutcome {
            text: resp.text.clone(),
            source: ExplanationSource::External,
            failure: None,
            response: Some(resp),
        },
    }
}
