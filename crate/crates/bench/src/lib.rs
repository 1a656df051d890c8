//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use serde_json::json;
use shine_core::log::{LogEvent, MemoryStore, StorageDriver};
use shine_core::scenario::{compile, parse_scenario, CompiledScenario};
use shine_core::session::{CreateSessionRequest, NoEngines, ServiceConfig, SessionService, WireEvent};

pub const HEATER_WINDOW: &[u8] = include_bytes!("../../../scenarios/heater-window.scenario.json");

pub fn heater_window() -> Arc<CompiledScenario> {
    Arc::new(compile(parse_scenario(HEATER_WINDOW).expect("bundled scenario parses")).expect("bundled scenario is valid"))
}

pub fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_current_thread().enable_all().build().expect("runtime starts")
}

pub fn interaction(session_id: &str, seq: u64, device: &str, property: &str, value: serde_json::Value) -> WireEvent {
    WireEvent {
        event_type: "device_interaction".into(),
        session_id: session_id.into(),
        seq,
        payload: json!({"deviceId": device, "property": property, "value": value}),
    }
}

pub fn service(store: Arc<MemoryStore>) -> SessionService {
    let storage: Arc<dyn StorageDriver> = store;
    SessionService::new([heater_window()], storage, Arc::new(NoEngines), ServiceConfig::injected(1))
}

pub async fn open_session(svc: &SessionService) -> String {
    svc.create_session(CreateSessionRequest { scenario_id: "heater-window".into(), participant_id: "bench".into(), context: None })
        .await
        .expect("session starts")
        .session_id
}

/// A completed session with `interactions` light and window toggles, one
/// second apart.
pub fn recorded_session(interactions: u64) -> Vec<LogEvent> {
    let store = Arc::new(MemoryStore::new());
    let svc = service(store.clone());
    runtime().block_on(async {
        let id = open_session(&svc).await;
        for seq in 1..=interactions {
            svc.advance(&id, seq * 1000).await.expect("clock moves forward");
            let (device, property) = if seq % 3 == 0 { ("window", "open") } else { ("light", "power") };
            svc.handle_client_event(&id, interaction(&id, seq, device, property, json!(seq % 2 == 0)))
                .await
                .expect("interaction handled");
        }
        svc.complete_session(&id).await.expect("session completes");
        store.read_session(&id).expect("log readable")
    })
}
