use std::collections::BTreeMap;
use std::sync::{Arc, Mutex as StdMutex};

use chrono::{DateTime, Utc};
use dashmap::DashMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::{broadcast, Mutex};
use tokio::time::Instant;

use super::params::{decode_context_param, ParamError};
use super::wire::{self, server, ClientEvent, WireEvent};
use super::SessionSummary;
use crate::explain::{
    deliver, fetch_external, handle_query, render_template, select_explanation, DeliveryDecision, ExplainError,
    ExplanationBook, ExplanationCause, ExplanationEngine, ExplanationInstance, ExplanationSource, ExternalOutcome,
    ExternalRequest, RatingValue,
};
use crate::log::{
    export_session, CascadeTruncatedPayload, DeviceInteractionPayload, EndReason, ErrorPayload, ExplanationCreatedPayload,
    ExplanationDeliveredPayload, ExplanationQueryPayload, ExplanationRatedPayload, ExplanationRequestedPayload,
    ExportError, ExportFormat, ExternalEngineFallbackPayload, InteractionBlockedPayload, InteractionResult, LogEvent,
    LogPayload, RuleFiredPayload, SessionEndPayload, SessionRecord, SessionStartPayload, SessionStatus, StorageDriver,
    StorageError, TaskPayload, TimeMode, TriggerFiredPayload,
};
use crate::scenario::{CompiledScenario, DeliveryMode, EngineEndpoint, SlotTarget};
use crate::sim::{
    abort_task, advance_clock, init_world, interact, snapshot, InteractionOutcome, SimError, SimEvent, StateDelta,
    StateSnapshot, TaskStatus, WorldState,
};

/// Sessions without client events for this long expire.
pub const DEFAULT_IDLE_TIMEOUT_MS: u64 = 60 * 60 * 1000;

const BROADCAST_CAPACITY: usize = 1024;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// `Live`: the session clock follows the wall clock. `Injected`: it only
    /// moves through [`SessionService::advance`], wall times are derived
    /// from `epoch` and ids from `seed`.
    pub time_mode: TimeMode,
    pub seed: u64,
    /// Prefix of the WebSocket URL handed to clients, e.g. `ws://host:port`.
    pub ws_base: String,
    pub idle_timeout_ms: u64,
    pub epoch: DateTime<Utc>,
}

impl ServiceConfig {
    pub fn live(ws_base: impl Into<String>) -> Self {
        ServiceConfig {
            time_mode: TimeMode::Live,
            seed: 0,
            ws_base: ws_base.into(),
            idle_timeout_ms: DEFAULT_IDLE_TIMEOUT_MS,
            epoch: DateTime::UNIX_EPOCH,
        }
    }

    pub fn injected(seed: u64) -> Self {
        ServiceConfig {
            time_mode: TimeMode::Injected,
            seed,
            ws_base: "ws://localhost".into(),
            idle_timeout_ms: DEFAULT_IDLE_TIMEOUT_MS,
            epoch: DateTime::from_timestamp(1_700_000_000, 0).expect("valid epoch"),
        }
    }
}

/// Supplies engine clients for the endpoints scenarios configure.
pub trait EngineProvider: Send + Sync {
    fn engine(&self, endpoint: &EngineEndpoint) -> Option<Arc<dyn ExplanationEngine>>;
}

impl<F> EngineProvider for F
where
    F: Fn(&EngineEndpoint) -> Option<Arc<dyn ExplanationEngine>> + Send + Sync,
{
    fn engine(&self, endpoint: &EngineEndpoint) -> Option<Arc<dyn ExplanationEngine>> {
        self(endpoint)
    }
}

/// No engine clients; external explanations always fall back.
pub struct NoEngines;

impl EngineProvider for NoEngines {
    fn engine(&self, _: &EngineEndpoint) -> Option<Arc<dyn ExplanationEngine>> {
        None
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session token rejected")]
    Unauthorized,
    #[error("session `{0}` has expired")]
    Expired(String),
    #[error("session `{0}` has ended")]
    NotActive(String),
    #[error("virtual time can only be advanced in injected time mode")]
    NotInjected,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Export(#[from] ExportError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CreateSessionRequest {
    pub scenario_id: String,
    pub participant_id: String,
    /// Base64url-encoded [`super::SessionContextParams`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CreatedSession {
    pub session_id: String,
    pub ws_url: String,
    pub token: String,
}

/// An explanation as listed by [`SessionService::get_state`]; held
/// instances carry no text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExplanationView {
    pub instance_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub cause: ExplanationCause,
    pub source: ExplanationSource,
    pub created_at_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delivered_at_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_instance_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<RatingValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionView {
    pub session_id: String,
    pub scenario_id: String,
    pub participant_id: String,
    pub status: SessionStatus,
    pub delivery_mode: DeliveryMode,
    pub last_seq: u64,
    pub snapshot: StateSnapshot,
    pub explanations: Vec<ExplanationView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<SessionSummary>,
}

/// A live event feed; `initial` is a full-snapshot state_update.
pub struct Subscription {
    pub initial: WireEvent,
    pub events: broadcast::Receiver<WireEvent>,
}

struct Session {
    participant_id: String,
    mode: DeliveryMode,
    user_context: BTreeMap<String, serde_json::Value>,
    world: WorldState,
    book: ExplanationBook,
    status: SessionStatus,
    created_at: DateTime<Utc>,
    started: Instant,
    last_seq: u64,
    next_instance: u64,
    last_client_ms: u64,
    interactions: u64,
    blocked: u64,
    queries: u64,
    summary: Option<SessionSummary>,
}

struct SessionHandle {
    id: String,
    token: String,
    scenario: Arc<CompiledScenario>,
    tx: broadcast::Sender<WireEvent>,
    inner: Mutex<Session>,
}

/// Registry and event router for all sessions of one server.
pub struct SessionService {
    scenarios: BTreeMap<String, Arc<CompiledScenario>>,
    sessions: DashMap<String, Arc<SessionHandle>>,
    storage: Arc<dyn StorageDriver>,
    engines: Arc<dyn EngineProvider>,
    config: ServiceConfig,
    rng: StdMutex<ChaCha20Rng>,
}

impl SessionService {
    pub fn new(
        scenarios: impl IntoIterator<Item = Arc<CompiledScenario>>,
        storage: Arc<dyn StorageDriver>,
        engines: Arc<dyn EngineProvider>,
        config: ServiceConfig,
    ) -> Self {
        let rng = match config.time_mode {
            TimeMode::Injected => ChaCha20Rng::seed_from_u64(config.seed),
            TimeMode::Live => ChaCha20Rng::from_os_rng(),
        };
        SessionService {
            scenarios: scenarios.into_iter().map(|s| (s.id().to_string(), s)).collect(),
            sessions: DashMap::new(),
            storage,
            engines,
            config,
            rng: StdMutex::new(rng),
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn storage(&self) -> &Arc<dyn StorageDriver> {
        &self.storage
    }

    pub fn scenario(&self, id: &str) -> Option<&Arc<CompiledScenario>> {
        self.scenarios.get(id)
    }

    pub fn scenario_ids(&self) -> impl Iterator<Item = &str> {
        self.scenarios.keys().map(String::as_str)
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.iter().map(|e| e.key().clone()).collect();
        ids.sort();
        ids
    }

    fn handle(&self, session_id: &str) -> Result<Arc<SessionHandle>, ServiceError> {
        self.sessions
            .get(session_id)
            .map(|h| Arc::clone(h.value()))
            .ok_or_else(|| ServiceError::UnknownSession(session_id.to_string()))
    }

    fn random_hex(&self, words: usize) -> String {
        let mut rng = self.rng.lock().expect("rng lock poisoned");
        (0..words).map(|_| format!("{:016x}", rng.random::<u64>())).collect()
    }

    fn wall(&self, t_ms: u64) -> DateTime<Utc> {
        match self.config.time_mode {
            TimeMode::Live => Utc::now(),
            TimeMode::Injected => self.config.epoch + chrono::Duration::milliseconds(t_ms as i64),
        }
    }

    pub fn authorize(&self, session_id: &str, token: &str) -> Result<(), ServiceError> {
        let h = self.handle(session_id)?;
        if h.token == token {
            Ok(())
        } else {
            Err(ServiceError::Unauthorized)
        }
    }

    /// Registers a session, initializes its world and logs SESSION_START.
    pub async fn create_session(&self, request: CreateSessionRequest) -> Result<CreatedSession, ServiceError> {
        let scenario = Arc::clone(
            self.scenarios
                .get(&request.scenario_id)
                .ok_or_else(|| ServiceError::UnknownScenario(request.scenario_id.clone()))?,
        );
        if request.participant_id.trim().is_empty() {
            return Err(ServiceError::InvalidRequest("participantId must not be empty".into()));
        }
        let params = decode_context_param(request.context.as_deref().unwrap_or(""))?;
        params.check(&scenario)?;
        let mode = params.delivery_mode.unwrap_or(scenario.spec().explanation_config.default_delivery_mode);
        let (world, events) = init_world(Arc::clone(&scenario), &params.context_vars)?;

        let id = format!("s-{}", self.random_hex(1));
        let token = self.random_hex(2);
        let created_at = self.wall(0);
        let session = Session {
            participant_id: request.participant_id.clone(),
            mode,
            user_context: params.user_context.clone(),
            world,
            book: ExplanationBook::new(),
            status: SessionStatus::Active,
            created_at,
            started: Instant::now(),
            last_seq: 0,
            next_instance: 0,
            last_client_ms: 0,
            interactions: 0,
            blocked: 0,
            queries: 0,
            summary: None,
        };
        let (tx, _) = broadcast::channel(BROADCAST_CAPACITY);
        let handle = Arc::new(SessionHandle { id: id.clone(), token: token.clone(), scenario, tx, inner: Mutex::new(session) });
        {
            let mut guard = handle.inner.lock().await;
            let mut step = Step::new(self, &handle, &mut guard);
            let start = LogPayload::SessionStart(SessionStartPayload {
                scenario_id: request.scenario_id.clone(),
                participant_id: request.participant_id.clone(),
                delivery_mode: mode,
                context_vars: params.context_vars.clone(),
                user_context: params.user_context.clone(),
                time_mode: self.config.time_mode,
                changes: Vec::new(),
            });
            step.record(Some((0, start)), events, 0).await?;
            self.storage.put_session(&SessionRecord {
                session_id: id.clone(),
                scenario_id: request.scenario_id.clone(),
                participant_id: request.participant_id,
                delivery_mode: mode,
                user_context: params.user_context,
                status: SessionStatus::Active,
                created_at,
                ended_at: None,
                summary: None,
            })?;
        }
        self.sessions.insert(id.clone(), Arc::clone(&handle));
        let ws_url = format!("{}/ws/{}?token={}", self.config.ws_base.trim_end_matches('/'), id, token);
        Ok(CreatedSession { session_id: id, ws_url, token })
    }

    /// Decodes and dispatches one raw client frame.
    pub async fn handle_client_text(&self, session_id: &str, text: &str) -> Result<Vec<WireEvent>, ServiceError> {
        match serde_json::from_str::<WireEvent>(text) {
            Ok(event) => self.handle_client_event(session_id, event).await,
            Err(e) => {
                let h = self.handle(session_id)?;
                let mut guard = h.inner.lock().await;
                let mut step = Step::new(self, &h, &mut guard);
                if step.s.status == SessionStatus::Active {
                    step.client_error(None, "bad_request", &format!("malformed event envelope: {e}"))?;
                } else {
                    step.ended_error(None);
                }
                Ok(step.finish())
            }
        }
    }

    /// Dispatches one client event and returns the resulting server events,
    /// which are also broadcast to subscribers.
    pub async fn handle_client_event(&self, session_id: &str, event: WireEvent) -> Result<Vec<WireEvent>, ServiceError> {
        let h = self.handle(session_id)?;
        let mut guard = h.inner.lock().await;
        let mut step = Step::new(self, &h, &mut guard);
        if step.s.status != SessionStatus::Active {
            step.ended_error(Some(event.seq));
            return Ok(step.finish());
        }
        step.settle_live().await?;
        if step.s.status != SessionStatus::Active {
            step.ended_error(Some(event.seq));
            return Ok(step.finish());
        }
        step.s.last_client_ms = step.s.world.clock_ms();
        if event.session_id != h.id {
            step.client_error(Some(event.seq), "session_mismatch", "event addressed to another session")?;
        } else {
            match ClientEvent::decode(&event) {
                Ok(decoded) => step.on_client(event.seq, decoded).await?,
                Err(message) => step.client_error(Some(event.seq), "bad_request", &message)?,
            }
        }
        Ok(step.finish())
    }

    /// Ends the session. Completing twice returns the first summary.
    pub async fn complete_session(&self, session_id: &str) -> Result<SessionSummary, ServiceError> {
        let h = self.handle(session_id)?;
        let mut guard = h.inner.lock().await;
        let mut step = Step::new(self, &h, &mut guard);
        if step.s.status == SessionStatus::Active {
            step.settle_live().await?;
        }
        match step.s.status {
            SessionStatus::Completed => {}
            SessionStatus::Expired => {
                step.finish();
                return Err(ServiceError::Expired(session_id.to_string()));
            }
            SessionStatus::Active => step.end(EndReason::Completed)?,
        }
        let summary = step.s.summary.clone().expect("ended sessions have a summary");
        step.finish();
        Ok(summary)
    }

    /// Moves an injected-time session's clock forward to `to_ms`.
    pub async fn advance(&self, session_id: &str, to_ms: u64) -> Result<Vec<WireEvent>, ServiceError> {
        if self.config.time_mode != TimeMode::Injected {
            return Err(ServiceError::NotInjected);
        }
        let h = self.handle(session_id)?;
        let mut guard = h.inner.lock().await;
        if guard.status != SessionStatus::Active {
            return Err(ServiceError::NotActive(session_id.to_string()));
        }
        let from = guard.world.clock_ms();
        if to_ms < from {
            return Err(SimError::ClockRegression { from, to: to_ms }.into());
        }
        let mut step = Step::new(self, &h, &mut guard);
        step.settle_to(to_ms).await?;
        Ok(step.finish())
    }

    /// Live mode: fires due triggers and timeouts and expires idle sessions.
    pub async fn tick_all(&self) -> Result<(), ServiceError> {
        if self.config.time_mode != TimeMode::Live {
            return Ok(());
        }
        let handles: Vec<Arc<SessionHandle>> = self.sessions.iter().map(|e| Arc::clone(e.value())).collect();
        for h in handles {
            let mut guard = h.inner.lock().await;
            if guard.status != SessionStatus::Active {
                continue;
            }
            let mut step = Step::new(self, &h, &mut guard);
            step.settle_live().await?;
            step.finish();
        }
        Ok(())
    }

    pub async fn get_state(&self, session_id: &str) -> Result<SessionView, ServiceError> {
        let h = self.handle(session_id)?;
        let s = h.inner.lock().await;
        let ratings = s.book.ratings();
        let explanations = s
            .book
            .instances()
            .iter()
            .map(|i| ExplanationView {
                instance_id: i.instance_id.clone(),
                spec_id: i.spec_id.clone(),
                text: i.delivered_at_ms.map(|_| i.text.clone()),
                cause: i.cause.clone(),
                source: i.source,
                created_at_ms: i.created_at_ms,
                delivered_at_ms: i.delivered_at_ms,
                parent_instance_id: i.parent_instance_id.clone(),
                rating: ratings.get(&i.instance_id).map(|r| r.value),
            })
            .collect();
        Ok(SessionView {
            session_id: h.id.clone(),
            scenario_id: h.scenario.id().to_string(),
            participant_id: s.participant_id.clone(),
            status: s.status,
            delivery_mode: s.mode,
            last_seq: s.last_seq,
            snapshot: snapshot(&s.world),
            explanations,
            summary: s.summary.clone(),
        })
    }

    /// Opens an event feed; the first event is a full snapshot.
    pub async fn subscribe(&self, session_id: &str, token: &str) -> Result<Subscription, ServiceError> {
        self.authorize(session_id, token)?;
        let h = self.handle(session_id)?;
        let s = h.inner.lock().await;
        let events = h.tx.subscribe();
        Ok(Subscription { initial: snapshot_event(&h.id, &s), events })
    }

    /// A full-snapshot state_update, for subscribers that fell behind.
    pub async fn resync(&self, session_id: &str) -> Result<WireEvent, ServiceError> {
        let h = self.handle(session_id)?;
        let s = h.inner.lock().await;
        Ok(snapshot_event(&h.id, &s))
    }

    pub fn export(&self, session_id: &str, format: ExportFormat) -> Result<Vec<u8>, ServiceError> {
        Ok(export_session(self.storage.as_ref(), session_id, format)?)
    }
}

fn snapshot_event(id: &str, s: &Session) -> WireEvent {
    let snap = snapshot(&s.world);
    WireEvent::new(
        server::STATE_UPDATE,
        id,
        s.last_seq,
        wire::StateUpdate { clock_ms: snap.clock_ms, changes: Vec::new(), snapshot: Some(snap) },
    )
}

fn set_in_snapshot(snap: &mut StateSnapshot, target: &SlotTarget, value: &crate::Literal) {
    match target {
        SlotTarget::Device { device_id, property } => {
            snap.devices.entry(device_id.clone()).or_default().insert(property.clone(), value.clone());
        }
        SlotTarget::Context { name } => {
            snap.context.insert(name.clone(), value.clone());
        }
    }
}

fn task_payload(from: TaskStatus, to: TaskStatus, task_id: String) -> LogPayload {
    let p = TaskPayload { task_id, from, to };
    match to {
        TaskStatus::Completed => LogPayload::TaskCompleted(p),
        TaskStatus::TimedOut => LogPayload::TaskTimeout(p),
        TaskStatus::Aborted => LogPayload::TaskAborted(p),
        TaskStatus::Active | TaskStatus::Locked => LogPayload::TaskStarted(p),
    }
}

fn explain_error_code(e: &ExplainError) -> &'static str {
    match e {
        ExplainError::UnknownInstance(_) => "unknown_instance",
        ExplainError::NotDelivered(_) => "not_delivered",
        ExplainError::NotInteractive(_) => "not_interactive",
        ExplainError::NothingToExplain => "no_explanation",
    }
}

/// One handler invocation on a locked session: appends rows, collects the
/// server events and broadcasts them on `finish`.
struct Step<'a> {
    svc: &'a SessionService,
    h: &'a SessionHandle,
    s: &'a mut Session,
    out: Vec<WireEvent>,
    pending: Vec<StateDelta>,
    pending_seq: u64,
    pending_clock: u64,
}

/// A row whose change list is still being filled, with the cause to
/// explain once it is written.
type OpenRow = (u64, LogPayload, Option<ExplanationCause>);

impl<'a> Step<'a> {
    fn new(svc: &'a SessionService, h: &'a SessionHandle, s: &'a mut Session) -> Self {
        Step { svc, h, s, out: Vec::new(), pending: Vec::new(), pending_seq: 0, pending_clock: 0 }
    }

    fn finish(mut self) -> Vec<WireEvent> {
        self.flush();
        for e in &self.out {
            let _ = self.h.tx.send(e.clone());
        }
        self.out
    }

    fn row(&mut self, t_ms: u64, body: LogPayload) -> Result<u64, StorageError> {
        let seq = self.s.last_seq + 1;
        let event = LogEvent { session_id: self.h.id.clone(), seq, t_ms, wall_time: self.svc.wall(t_ms), body };
        self.svc.storage.append(&event)?;
        self.s.last_seq = seq;
        Ok(seq)
    }

    fn flush(&mut self) {
        if self.pending.is_empty() {
            return;
        }
        let update = wire::StateUpdate { clock_ms: self.pending_clock, changes: std::mem::take(&mut self.pending), snapshot: None };
        self.out.push(WireEvent::new(server::STATE_UPDATE, &self.h.id, self.pending_seq, update));
    }

    fn emit(&mut self, kind: &str, seq: u64, payload: impl Serialize) {
        self.flush();
        self.out.push(WireEvent::new(kind, &self.h.id, seq, payload));
    }

    fn client_error(&mut self, client_seq: Option<u64>, code: &str, message: &str) -> Result<(), StorageError> {
        let t = self.s.world.clock_ms();
        let seq = self.row(t, LogPayload::Error(ErrorPayload { code: code.into(), message: message.into() }))?;
        self.emit(server::ERROR, seq, wire::ErrorMessage { code: code.into(), message: message.into(), client_seq });
        Ok(())
    }

    /// Rejection of an event sent after the session ended; not logged.
    fn ended_error(&mut self, client_seq: Option<u64>) {
        let seq = self.s.last_seq;
        let message = format!("session is {}", serde_json::to_value(self.s.status).expect("status serializes"));
        self.emit(server::ERROR, seq, wire::ErrorMessage { code: "session_ended".into(), message, client_seq });
    }

    fn next_instance_id(&mut self) -> String {
        self.s.next_instance += 1;
        format!("{}-e{}", self.h.id, self.s.next_instance)
    }

    async fn settle_live(&mut self) -> Result<(), ServiceError> {
        if self.svc.config.time_mode != TimeMode::Live {
            return Ok(());
        }
        let now = (self.s.started.elapsed().as_millis() as u64).max(self.s.world.clock_ms());
        self.settle_to(now).await
    }

    /// Advances the clock, expiring the session at its idle deadline.
    async fn settle_to(&mut self, to_ms: u64) -> Result<(), ServiceError> {
        let expiry = self.s.last_client_ms.saturating_add(self.svc.config.idle_timeout_ms);
        let target = to_ms.min(expiry);
        let before = self.s.world.clock_ms();
        let events = advance_clock(&mut self.s.world, target)?;
        self.record(None, events, before).await?;
        if to_ms >= expiry {
            self.end(EndReason::Expired)?;
        }
        Ok(())
    }

    fn summary(&self, reason: EndReason) -> SessionSummary {
        let book = &self.s.book;
        SessionSummary {
            session_id: self.h.id.clone(),
            scenario_id: self.h.scenario.id().to_string(),
            participant_id: self.s.participant_id.clone(),
            delivery_mode: self.s.mode,
            reason,
            duration_ms: self.s.world.clock_ms(),
            tasks: snapshot(&self.s.world).tasks,
            interactions: self.s.interactions,
            blocked_interactions: self.s.blocked,
            explanations_created: book.instances().len() as u64,
            explanations_delivered: book.delivered_count() as u64,
            queries: self.s.queries,
            ratings: book.rating_events() as u64,
            rated_instances: book.ratings().len() as u64,
        }
    }

    fn end(&mut self, reason: EndReason) -> Result<(), ServiceError> {
        let summary = self.summary(reason);
        let value = serde_json::to_value(&summary).expect("summary serializes");
        let t = self.s.world.clock_ms();
        let seq = self.row(t, LogPayload::SessionEnd(SessionEndPayload { reason, summary: Some(value.clone()) }))?;
        let status = match reason {
            EndReason::Completed => SessionStatus::Completed,
            EndReason::Expired => SessionStatus::Expired,
        };
        self.s.status = status;
        self.s.summary = Some(summary.clone());
        self.svc.storage.put_session(&SessionRecord {
            session_id: self.h.id.clone(),
            scenario_id: self.h.scenario.id().to_string(),
            participant_id: self.s.participant_id.clone(),
            delivery_mode: self.s.mode,
            user_context: self.s.user_context.clone(),
            status,
            created_at: self.s.created_at,
            ended_at: Some(self.svc.wall(t)),
            summary: Some(value),
        })?;
        self.emit(server::SESSION_END, seq, wire::SessionEnd { reason, summary: Some(summary) });
        Ok(())
    }

    /// Logs a simulation event stream. `base` collects the deltas that
    /// precede the first rule or trigger firing.
    async fn record(&mut self, base: Option<(u64, LogPayload)>, events: Vec<SimEvent>, clock_before: u64) -> Result<(), ServiceError> {
        if base.is_none() && events.is_empty() {
            return Ok(());
        }
        let mut shadow = snapshot(&self.s.world);
        for d in events.iter().rev().filter_map(SimEvent::as_delta) {
            set_in_snapshot(&mut shadow, &d.target, &d.old_value);
        }
        shadow.clock_ms = clock_before;
        let mut open: Option<OpenRow> = base.map(|(t, p)| (t, p, None));
        for event in events {
            if let SimEvent::Changed(d) = event {
                set_in_snapshot(&mut shadow, &d.target, &d.new_value);
                let changes = open
                    .as_mut()
                    .and_then(|(_, p, _)| p.changes_mut())
                    .expect("deltas follow the row that causes them");
                changes.push(d);
                continue;
            }
            self.close(open.take(), &shadow).await?;
            match event {
                SimEvent::RuleFired { rule_id, depth } => {
                    let payload = LogPayload::RuleFired(RuleFiredPayload { rule_id: rule_id.clone(), depth, changes: Vec::new() });
                    open = Some((shadow.clock_ms, payload, Some(ExplanationCause::RuleFired { rule_id })));
                }
                SimEvent::TriggerFired { trigger_id, deadline_ms } => {
                    shadow.clock_ms = shadow.clock_ms.max(deadline_ms);
                    let payload =
                        LogPayload::TriggerFired(TriggerFiredPayload { trigger_id: trigger_id.clone(), deadline_ms, changes: Vec::new() });
                    open = Some((shadow.clock_ms, payload, Some(ExplanationCause::TriggerFired { trigger_id })));
                }
                SimEvent::TaskChanged(c) => {
                    shadow.clock_ms = shadow.clock_ms.max(c.at_ms);
                    let seq = self.row(c.at_ms, task_payload(c.from, c.to, c.task_id.clone()))?;
                    self.emit(server::TASK_UPDATE, seq, wire::TaskUpdate { task_id: c.task_id, from: c.from, to: c.to, at_ms: c.at_ms });
                }
                SimEvent::CascadeTruncated { depth } => {
                    self.row(shadow.clock_ms, LogPayload::CascadeTruncated(CascadeTruncatedPayload { depth }))?;
                }
                SimEvent::Changed(_) => unreachable!("handled above"),
            }
        }
        self.close(open, &shadow).await
    }

    async fn close(&mut self, open: Option<OpenRow>, state: &StateSnapshot) -> Result<(), ServiceError> {
        let Some((t, payload, cause)) = open else { return Ok(()) };
        let changes = payload.changes().to_vec();
        let seq = self.row(t, payload)?;
        if !changes.is_empty() {
            self.pending.extend(changes);
            self.pending_seq = seq;
            self.pending_clock = t;
        }
        if let Some(cause) = cause {
            self.explain(cause, state, false).await?;
        }
        Ok(())
    }

    /// Creates, logs and delivers the explanation attached to `cause`, if
    /// any. `requested` forces immediate delivery in every mode.
    async fn explain(&mut self, cause: ExplanationCause, state: &StateSnapshot, requested: bool) -> Result<Option<String>, ServiceError> {
        let scenario = Arc::clone(&self.h.scenario);
        let Some(spec) = select_explanation(&cause, &scenario, &self.s.book) else { return Ok(None) };
        let at = state.clock_ms;
        let fallback = render_template(&scenario, spec, state);
        let config = &scenario.spec().explanation_config;
        let (text, source) = match (spec.external, &config.engine_endpoint) {
            (true, Some(endpoint)) => {
                let outcome = match self.svc.engines.engine(endpoint) {
                    Some(engine) => {
                        let request = ExternalRequest {
                            session_id: self.h.id.clone(),
                            cause: cause.clone(),
                            state: state.into(),
                            user_context: self.s.user_context.clone(),
                        };
                        fetch_external(engine.as_ref(), &request, config, &fallback).await
                    }
                    None => ExternalOutcome {
                        text: fallback.clone(),
                        source: ExplanationSource::ExternalFallback,
                        failure: Some(format!("no engine client for {}", endpoint.url)),
                        response: None,
                    },
                };
                if outcome.source == ExplanationSource::ExternalFallback {
                    self.row(
                        at,
                        LogPayload::ExternalEngineFallback(ExternalEngineFallbackPayload {
                            spec_id: spec.id.clone(),
                            failure: outcome.failure.clone().unwrap_or_default(),
                            response: outcome.response.clone(),
                        }),
                    )?;
                }
                (outcome.text, outcome.source)
            }
            _ => (fallback, ExplanationSource::Internal),
        };
        let instance = ExplanationInstance {
            instance_id: self.next_instance_id(),
            spec_id: Some(spec.id.clone()),
            text,
            mode: self.s.mode,
            cause,
            created_at_ms: at,
            delivered_at_ms: None,
            source,
            parent_instance_id: None,
            chain: vec![spec.id.clone()],
            decision: None,
        };
        let id = instance.instance_id.clone();
        self.publish(instance, requested)?;
        Ok(Some(id))
    }

    /// Runs the delivery decision, stores the instance, logs it and emits
    /// the explanation or its availability notice.
    fn publish(&mut self, mut instance: ExplanationInstance, requested: bool) -> Result<(), ServiceError> {
        let at = instance.created_at_ms;
        let decision = if requested {
            let d = DeliveryDecision::SendNow { chat_enabled: self.s.mode == DeliveryMode::Interactive };
            instance.delivered_at_ms = Some(at);
            instance.decision = Some(d);
            d
        } else {
            let notify = self.h.scenario.spec().explanation_config.notify_availability;
            deliver(&mut instance, self.s.mode, notify, at)
        };
        let scenario = Arc::clone(&self.h.scenario);
        let stored = self.s.book.insert(&scenario, instance).clone();
        let created = self.row(at, LogPayload::ExplanationCreated(ExplanationCreatedPayload { instance: stored.clone() }))?;
        match decision {
            DeliveryDecision::SendNow { chat_enabled } => self.send_explanation(&stored, chat_enabled)?,
            DeliveryDecision::Hold { notify: true } => {
                self.emit(
                    server::EXPLANATION_AVAILABLE,
                    created,
                    wire::ExplanationAvailable { instance_id: stored.instance_id.clone(), cause: stored.cause.clone() },
                );
            }
            DeliveryDecision::Hold { notify: false } => {}
        }
        Ok(())
    }

    fn send_explanation(&mut self, inst: &ExplanationInstance, chat_enabled: bool) -> Result<(), ServiceError> {
        let at = inst.delivered_at_ms.unwrap_or(inst.created_at_ms);
        let seq = self.row(
            at,
            LogPayload::ExplanationDelivered(ExplanationDeliveredPayload { instance_id: inst.instance_id.clone(), mode: self.s.mode }),
        )?;
        self.emit(
            server::EXPLANATION,
            seq,
            wire::ExplanationMessage {
                instance_id: inst.instance_id.clone(),
                spec_id: inst.spec_id.clone(),
                text: inst.text.clone(),
                mode: self.s.mode,
                source: inst.source,
                cause: inst.cause.clone(),
                parent_instance_id: inst.parent_instance_id.clone(),
                chat_enabled,
            },
        );
        Ok(())
    }

    async fn on_client(&mut self, client_seq: u64, event: ClientEvent) -> Result<(), ServiceError> {
        let clock = self.s.world.clock_ms();
        match event {
            ClientEvent::DeviceInteraction(p) => self.on_interaction(client_seq, p).await,
            ClientEvent::ExplanationRequest(p) => self.on_request(client_seq, p).await,
            ClientEvent::ExplanationQuery(p) => self.on_query(client_seq, p),
            ClientEvent::ExplanationRating(p) => {
                match self.s.book.record_rating(&p.instance_id, p.value, clock) {
                    Ok((rating, revision)) => {
                        self.row(
                            clock,
                            LogPayload::ExplanationRated(ExplanationRatedPayload {
                                instance_id: rating.instance_id,
                                value: rating.value,
                                revision,
                            }),
                        )?;
                    }
                    Err(e) => self.client_error(Some(client_seq), explain_error_code(&e), &e.to_string())?,
                }
                Ok(())
            }
            ClientEvent::ClientTelemetry(map) => {
                self.row(clock, LogPayload::ClientTelemetry(map))?;
                Ok(())
            }
            ClientEvent::AbortTask(p) => {
                match abort_task(&mut self.s.world, &p.task_id) {
                    Ok(change) => self.record(None, vec![SimEvent::TaskChanged(change)], clock).await?,
                    Err(e) => self.client_error(Some(client_seq), "task_rejected", &e.to_string())?,
                }
                Ok(())
            }
        }
    }

    async fn on_interaction(&mut self, client_seq: u64, p: wire::DeviceInteraction) -> Result<(), ServiceError> {
        let clock = self.s.world.clock_ms();
        let event_id = self.s.last_seq + 1;
        let (outcome, settle) = match interact(&mut self.s.world, &p.device_id, &p.property, p.value.clone(), event_id) {
            Ok(r) => r,
            Err(e) => return Ok(self.client_error(Some(client_seq), "interaction_rejected", &e.to_string())?),
        };
        self.s.interactions += 1;
        let base = |outcome| {
            LogPayload::DeviceInteraction(DeviceInteractionPayload {
                device_id: p.device_id.clone(),
                property: p.property.clone(),
                value: p.value.clone(),
                outcome,
                changes: Vec::new(),
                client_seq: Some(client_seq),
            })
        };
        match outcome {
            InteractionOutcome::Committed(mut events) => {
                let result = if events.is_empty() { InteractionResult::Noop } else { InteractionResult::Committed };
                events.extend(settle);
                self.record(Some((clock, base(result))), events, clock).await
            }
            InteractionOutcome::Blocked { rule_id, explanation_id } => {
                self.s.blocked += 1;
                self.record(Some((clock, base(InteractionResult::Blocked))), Vec::new(), clock).await?;
                let blocked = InteractionBlockedPayload {
                    device_id: p.device_id.clone(),
                    property: p.property.clone(),
                    attempted_value: p.value.clone(),
                    rule_id: rule_id.clone(),
                    explanation_id: explanation_id.clone(),
                };
                let seq = self.row(clock, LogPayload::InteractionBlocked(blocked))?;
                self.emit(
                    server::INTERACTION_BLOCKED,
                    seq,
                    wire::InteractionBlocked {
                        device_id: p.device_id.clone(),
                        property: p.property.clone(),
                        attempted_value: p.value.clone(),
                        rule_id: rule_id.clone(),
                        explanation_id,
                    },
                );
                let cause = ExplanationCause::BlockedInteraction {
                    rule_id,
                    device_id: p.device_id,
                    property: p.property,
                    attempted_value: p.value,
                };
                let state = snapshot(&self.s.world);
                self.explain(cause, &state, false).await?;
                self.record(None, settle, clock).await
            }
        }
    }

    async fn on_request(&mut self, client_seq: u64, p: wire::ExplanationRequest) -> Result<(), ServiceError> {
        let clock = self.s.world.clock_ms();
        let scenario = Arc::clone(&self.h.scenario);
        let held = self
            .s
            .book
            .held_for(&scenario, p.device_id.as_deref())
            .map(|i| i.instance_id.clone());
        let requested = |instance_id| {
            LogPayload::ExplanationRequested(ExplanationRequestedPayload { device_id: p.device_id.clone(), instance_id })
        };
        if let Some(id) = held {
            self.row(clock, requested(Some(id.clone())))?;
            self.s.book.mark_delivered(&id, clock).map_err(|e| ServiceError::InvalidRequest(e.to_string()))?;
            let inst = self.s.book.get(&id).expect("held instance exists").clone();
            return self.send_explanation(&inst, self.s.mode == DeliveryMode::Interactive);
        }
        let seq = self.row(clock, requested(None))?;
        let state = snapshot(&self.s.world);
        let cause = ExplanationCause::UserRequest { device_id: p.device_id.clone() };
        if self.explain(cause, &state, true).await?.is_none() {
            let e = ExplainError::NothingToExplain;
            self.emit(
                server::ERROR,
                seq,
                wire::ErrorMessage { code: explain_error_code(&e).into(), message: e.to_string(), client_seq: Some(client_seq) },
            );
        }
        Ok(())
    }

    fn on_query(&mut self, client_seq: u64, p: wire::ExplanationQuery) -> Result<(), ServiceError> {
        let parent = match &p.instance_id {
            Some(id) => self.s.book.get(id),
            None => self.s.book.instances().iter().rev().find(|i| i.delivered_at_ms.is_some()),
        };
        let parent = match parent {
            Some(i) if i.delivered_at_ms.is_some() => i.clone(),
            Some(i) => {
                let e = ExplainError::NotDelivered(i.instance_id.clone());
                return Ok(self.client_error(Some(client_seq), explain_error_code(&e), &e.to_string())?);
            }
            None => {
                let e = match p.instance_id {
                    Some(id) => ExplainError::UnknownInstance(id),
                    None => ExplainError::NothingToExplain,
                };
                return Ok(self.client_error(Some(client_seq), explain_error_code(&e), &e.to_string())?);
            }
        };
        let scenario = Arc::clone(&self.h.scenario);
        let state = snapshot(&self.s.world);
        let id = format!("{}-e{}", self.h.id, self.s.next_instance + 1);
        match handle_query(&p.text, &parent, &scenario, &state, self.s.mode, id) {
            Ok((instance, matched)) => {
                self.s.next_instance += 1;
                self.s.queries += 1;
                self.row(
                    state.clock_ms,
                    LogPayload::ExplanationQuery(ExplanationQueryPayload {
                        parent_instance_id: parent.instance_id.clone(),
                        text: p.text,
                        matched,
                        instance_id: instance.instance_id.clone(),
                    }),
                )?;
                self.publish(instance, false)
            }
            Err(e) => Ok(self.client_error(Some(client_seq), explain_error_code(&e), &e.to_string())?),
        }
    }
}
