use std::collections::BTreeMap;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::literal::Literal;
use crate::scenario::{CompiledScenario, DeliveryMode};

/// Per-session personalization, carried as base64url-encoded JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SessionContextParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delivery_mode: Option<DeliveryMode>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub context_vars: BTreeMap<String, Literal>,
    /// Participant attributes such as expertise or treatment group.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub user_context: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamError {
    #[error("context parameter is not valid base64url: {0}")]
    Base64(String),
    #[error("context parameter is not valid JSON: {0}")]
    Json(String),
    #[error("unknown context parameter key `{0}`")]
    UnknownKey(String),
    #[error("context variable `{0}` is not declared by the scenario")]
    UnknownVariable(String),
    #[error("context variable `{name}` expects a {expected} value")]
    Domain { name: String, expected: String },
    #[error("user context value `{0}` must be a string, number or boolean")]
    UserContext(String),
}

/// Decodes a base64url context parameter; the empty string means defaults.
///
/// Padding is optional.
pub fn decode_context_param(param: &str) -> Result<SessionContextParams, ParamError> {
    let trimmed = param.trim().trim_end_matches('=');
    if trimmed.is_empty() {
        return Ok(SessionContextParams::default());
    }
    let bytes = URL_SAFE_NO_PAD.decode(trimmed).map_err(|e| ParamError::Base64(e.to_string()))?;
    let params: SessionContextParams = serde_json::from_slice(&bytes).map_err(|e| {
        let msg = e.to_string();
        match msg.strip_prefix("unknown field `").and_then(|r| r.split_once('`')) {
            Some((key, _)) => ParamError::UnknownKey(key.to_string()),
            None => ParamError::Json(msg),
        }
    })?;
    for (k, v) in &params.user_context {
        if !(v.is_string() || v.is_number() || v.is_boolean()) {
            return Err(ParamError::UserContext(k.clone()));
        }
    }
    Ok(params)
}

pub fn encode_context_param(params: &SessionContextParams) -> String {
    URL_SAFE_NO_PAD.encode(serde_json::to_vec(params).expect("params always serialize"))
}

impl SessionContextParams {
    /// Checks context variables against the scenario's declarations.
    pub fn check(&self, scenario: &CompiledScenario) -> Result<(), ParamError> {
        for (name, value) in &self.context_vars {
            let slot = scenario
                .slots()
                .context_slot(name)
                .ok_or_else(|| ParamError::UnknownVariable(name.clone()))?;
            let slot = scenario.slots().slot(slot);
            if !slot.accepts(value) {
                return Err(ParamError::Domain { name: name.clone(), expected: slot.kind.to_string() });
            }
        }
        Ok(())
    }
}
