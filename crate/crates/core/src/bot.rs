//! Scripted participants for headless runs.

use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::explain::RatingValue;
use crate::literal::Literal;
use crate::scenario::DeliveryMode;
use crate::session::wire::{self, server};
use crate::session::{
    encode_context_param, ClientEvent, CreateSessionRequest, SessionContextParams, SessionService, SessionSummary,
    SessionView, WireEvent,
};
use crate::sim::TaskStatus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BotScript {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<SessionContextParams>,
    pub steps: Vec<BotStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub enum BotStep {
    /// Virtual milliseconds to let pass.
    WaitVirtual(u64),
    #[serde(rename_all = "camelCase")]
    Interact { device_id: String, property: String, value: Literal },
    #[serde(rename_all = "camelCase")]
    RequestExplanation {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        device_id: Option<String>,
    },
    /// Follow-up on the most recently delivered explanation.
    Query(String),
    /// Rates the most recently delivered explanation.
    Rate(RatingValue),
    /// The previous `interact` step was blocked.
    ExpectBlocked,
    #[serde(rename_all = "camelCase")]
    ExpectTask { task_id: String, status: TaskStatus },
    /// The most recently delivered explanation has exactly this text.
    ExpectExplanation(String),
    Complete,
}

#[derive(Debug, Error)]
pub enum BotError {
    #[error("bot script is not valid JSON: {0}")]
    Parse(String),
    #[error("bot script: {0}")]
    Script(String),
    #[error("driver error: {0}")]
    Driver(String),
}

impl From<crate::session::ServiceError> for BotError {
    fn from(e: crate::session::ServiceError) -> Self {
        BotError::Driver(e.to_string())
    }
}

impl BotScript {
    pub fn parse(bytes: &[u8]) -> Result<BotScript, BotError> {
        let de = &mut serde_json::Deserializer::from_slice(bytes);
        let script: BotScript = serde_path_to_error::deserialize(de).map_err(|e| BotError::Parse(e.to_string()))?;
        script.check()?;
        Ok(script)
    }

    /// `complete` must appear exactly once, as the last step.
    pub fn check(&self) -> Result<(), BotError> {
        let completes = self.steps.iter().filter(|s| **s == BotStep::Complete).count();
        if completes != 1 || self.steps.last() != Some(&BotStep::Complete) {
            return Err(BotError::Script("`complete` must appear exactly once, as the last step".into()));
        }
        Ok(())
    }
}

/// Transport between a bot and a session service.
#[async_trait]
pub trait BotDriver: Send {
    async fn create(&mut self, request: CreateSessionRequest) -> Result<String, BotError>;
    /// Sends one client event and returns the server events it caused.
    async fn send(&mut self, event: WireEvent) -> Result<Vec<WireEvent>, BotError>;
    async fn advance(&mut self, to_ms: u64) -> Result<Vec<WireEvent>, BotError>;
    async fn state(&mut self) -> Result<SessionView, BotError>;
    async fn complete(&mut self) -> Result<SessionSummary, BotError>;
}

/// Calls the service directly.
pub struct InProcessDriver {
    service: Arc<SessionService>,
    session_id: Option<String>,
}

impl InProcessDriver {
    pub fn new(service: Arc<SessionService>) -> Self {
        InProcessDriver { service, session_id: None }
    }

    fn id(&self) -> Result<&str, BotError> {
        self.session_id.as_deref().ok_or_else(|| BotError::Driver("no session".into()))
    }
}

#[async_trait]
impl BotDriver for InProcessDriver {
    async fn create(&mut self, request: CreateSessionRequest) -> Result<String, BotError> {
        let created = self.service.create_session(request).await?;
        self.session_id = Some(created.session_id.clone());
        Ok(created.session_id)
    }

    async fn send(&mut self, event: WireEvent) -> Result<Vec<WireEvent>, BotError> {
        Ok(self.service.handle_client_event(self.id()?, event).await?)
    }

    async fn advance(&mut self, to_ms: u64) -> Result<Vec<WireEvent>, BotError> {
        Ok(self.service.advance(self.id()?, to_ms).await?)
    }

    async fn state(&mut self) -> Result<SessionView, BotError> {
        Ok(self.service.get_state(self.id()?).await?)
    }

    async fn complete(&mut self) -> Result<SessionSummary, BotError> {
        Ok(self.service.complete_session(self.id()?).await?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepFailure {
    /// Zero-based index into `steps`.
    pub index: usize,
    pub step: BotStep,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BotReport {
    pub session_id: String,
    pub failure: Option<StepFailure>,
    pub summary: SessionSummary,
    pub final_state: SessionView,
}

impl BotReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Default)]
struct Observed {
    last_blocked: Option<bool>,
    last_explanation: Option<(String, String)>,
}

impl Observed {
    fn absorb(&mut self, events: &[WireEvent]) {
        for e in events {
            if e.event_type == server::EXPLANATION {
                if let Ok(m) = serde_json::from_value::<wire::ExplanationMessage>(e.payload.clone()) {
                    self.last_explanation = Some((m.instance_id, m.text));
                }
            }
        }
    }
}

/// Runs a script against `scenario_id`. `mode` overrides the script's
/// delivery mode. The first failed expectation stops the steps; the
/// session is completed either way.
pub async fn run_bot(
    driver: &mut dyn BotDriver,
    scenario_id: &str,
    script: &BotScript,
    mode: Option<DeliveryMode>,
) -> Result<BotReport, BotError> {
    script.check()?;
    let mut params = script.context.clone().unwrap_or_default();
    if mode.is_some() {
        params.delivery_mode = mode;
    }
    let session_id = driver
        .create(CreateSessionRequest {
            scenario_id: scenario_id.to_string(),
            participant_id: script.participant_id.clone().unwrap_or_else(|| "bot".into()),
            context: Some(encode_context_param(&params)),
        })
        .await?;
    let mut seen = Observed::default();
    let mut clock = 0u64;
    let mut client_seq = 0u64;
    let mut failure = None;
    let mut summary = None;
    for (index, step) in script.steps.iter().enumerate() {
        let fail = |message: String| StepFailure { index, step: step.clone(), message };
        let mut send = |event: ClientEvent| {
            client_seq += 1;
            event.into_wire(&session_id, client_seq)
        };
        match step {
            BotStep::WaitVirtual(ms) => {
                clock += ms;
                let events = driver.advance(clock).await?;
                seen.absorb(&events);
            }
            BotStep::Interact { device_id, property, value } => {
                let event = send(ClientEvent::DeviceInteraction(wire::DeviceInteraction {
                    device_id: device_id.clone(),
                    property: property.clone(),
                    value: value.clone(),
                }));
                let events = driver.send(event).await?;
                seen.last_blocked = Some(events.iter().any(|e| e.event_type == server::INTERACTION_BLOCKED));
                seen.absorb(&events);
            }
            BotStep::RequestExplanation { device_id } => {
                let event = send(ClientEvent::ExplanationRequest(wire::ExplanationRequest { device_id: device_id.clone() }));
                let events = driver.send(event).await?;
                seen.absorb(&events);
            }
            BotStep::Query(text) => {
                let event = send(ClientEvent::ExplanationQuery(wire::ExplanationQuery { instance_id: None, text: text.clone() }));
                let events = driver.send(event).await?;
                seen.absorb(&events);
            }
            BotStep::Rate(value) => {
                let Some((instance_id, _)) = seen.last_explanation.clone() else {
                    failure = Some(fail("no explanation has been delivered to rate".into()));
                    break;
                };
                let event = send(ClientEvent::ExplanationRating(wire::ExplanationRating { instance_id, value: *value }));
                driver.send(event).await?;
            }
            BotStep::ExpectBlocked => {
                if seen.last_blocked != Some(true) {
                    failure = Some(fail("previous interaction was not blocked".into()));
                    break;
                }
            }
            BotStep::ExpectTask { task_id, status } => {
                let view = driver.state().await?;
                let actual = view.snapshot.tasks.get(task_id).map(|t| t.status);
                if actual != Some(*status) {
                    let got = actual.map_or("missing".to_string(), |s| format!("{s:?}").to_lowercase());
                    failure = Some(fail(format!("task `{task_id}` is {got}")));
                    break;
                }
            }
            BotStep::ExpectExplanation(text) => {
                let got = seen.last_explanation.as_ref().map(|(_, t)| t.as_str());
                if got != Some(text.as_str()) {
                    failure = Some(fail(format!("last explanation was {got:?}")));
                    break;
                }
            }
            BotStep::Complete => summary = Some(driver.complete().await?),
        }
    }
    let summary = match summary {
        Some(s) => s,
        None => driver.complete().await?,
    };
    let final_state = driver.state().await?;
    Ok(BotReport { session_id, failure, summary, final_state })
}
