mod support;

use std::sync::Arc;

use serde_json::{json, Value};
use shine_core::bot::{run_bot, BotDriver, BotScript, InProcessDriver};
use shine_core::log::{export_events, ExportFormat, MemoryStore, StorageDriver};
use shine_core::session::{CreateSessionRequest, NoEngines, ServiceConfig, SessionService, WireEvent};
use shine_server::NetworkDriver;
use support::{heater_window, start_default};

fn types(events: &[WireEvent]) -> Vec<&str> {
    events.iter().map(|e| e.event_type.as_str()).collect()
}

fn frame(id: &str, seq: u64, kind: &str, payload: Value) -> String {
    json!({"type": kind, "sessionId": id, "seq": seq, "payload": payload}).to_string()
}

async fn open(server: &support::Server) -> (NetworkDriver, String) {
    let mut driver = NetworkDriver::new(server.base());
    let id = driver
        .create(CreateSessionRequest { scenario_id: "heater-window".into(), participant_id: "p1".into(), context: None })
        .await
        .unwrap();
    (driver, id)
}

#[tokio::test]
async fn socket_rejects_a_bad_token() {
    let server = start_default().await;
    let (_driver, id) = open(&server).await;
    let url = format!("ws://{}/ws/{id}?token=nope", server.addr);
    let err = tokio_tungstenite::connect_async(url).await.unwrap_err();
    assert!(err.to_string().contains("401"), "{err}");
}

#[tokio::test]
async fn full_event_chain_over_the_socket() {
    let server = start_default().await;
    let (mut driver, id) = open(&server).await;
    let first = driver.received[0].clone();
    assert_eq!(first.event_type, "state_update");
    assert_eq!(first.payload["snapshot"]["devices"]["window"]["open"], false);

    let out = driver
        .send_text(&frame(&id, 1, "device_interaction", json!({"deviceId": "window", "property": "open", "value": true})))
        .await
        .unwrap();
    // air-room completes, which starts the dependent heater-off task.
    assert_eq!(types(&out), ["state_update", "task_update", "task_update"]);
    assert_eq!(out[1].payload["taskId"], "air-room");
    assert_eq!(out[2].payload["taskId"], "heater-off");

    driver.advance(61_000).await.unwrap();
    let out = driver
        .send_text(&frame(&id, 2, "device_interaction", json!({"deviceId": "heater", "property": "power", "value": false})))
        .await
        .unwrap();
    assert_eq!(types(&out)[..2], ["interaction_blocked", "explanation"]);
    assert_eq!(out[1].payload["text"], "The indoor temperature is lower than 15°C.");

    // Every server event carries the seq of the log row it reports.
    let log = server.store.read_session(&id).unwrap();
    for e in driver.received.iter().skip(1) {
        let row = &log[e.seq as usize - 1];
        assert_eq!(row.seq, e.seq);
    }
    let blocked = &log[out[0].seq as usize - 1];
    assert_eq!(blocked.event_type().as_str(), "INTERACTION_BLOCKED");
}

#[tokio::test]
async fn malformed_frames_get_error_events() {
    let server = start_default().await;
    let (mut driver, id) = open(&server).await;
    let out = driver.send_text("not json").await.unwrap();
    assert_eq!(types(&out), ["error"]);
    assert_eq!(out[0].payload["code"], "bad_request");

    let out = driver.send_text(&frame("s-other", 5, "device_interaction", json!({}))).await.unwrap();
    assert_eq!(out[0].payload["code"], "session_mismatch");

    let out = driver
        .send_text(&frame(&id, 6, "device_interaction", json!({"deviceId": "thermostat", "property": "indoor_temp", "value": 3})))
        .await
        .unwrap();
    assert_eq!(out[0].payload["code"], "interaction_rejected");
    assert_eq!(out[0].payload["clientSeq"], 6);
}

#[tokio::test]
async fn reconnect_receives_current_snapshot_and_broadcasts() {
    let server = start_default().await;
    let (mut first, id) = open(&server).await;
    first
        .send_text(&frame(&id, 1, "device_interaction", json!({"deviceId": "window", "property": "open", "value": true})))
        .await
        .unwrap();

    let mut second = NetworkDriver::new(server.base());
    let snapshot = second.connect(first.ws_url().unwrap()).await.unwrap();
    assert_eq!(snapshot.payload["snapshot"]["devices"]["window"]["open"], true);

    first
        .send_text(&frame(&id, 2, "device_interaction", json!({"deviceId": "light", "property": "power", "value": true})))
        .await
        .unwrap();
    let mirrored = second.send_text(&frame(&id, 3, "client_telemetry", json!({"kind": "focus"}))).await.unwrap();
    assert_eq!(mirrored[0].event_type, "state_update");
    assert_eq!(mirrored[0].payload["changes"][0]["target"]["deviceId"], "light");
}

#[tokio::test]
async fn network_bot_matches_in_process_bot() {
    let script = BotScript::parse(include_bytes!("../../../bots/walkthrough.bot.json")).unwrap();

    let server = start_default().await;
    let mut network = NetworkDriver::new(server.base());
    let report = run_bot(&mut network, "heater-window", &script, None).await.unwrap();
    assert!(report.passed(), "{:?}", report.failure);
    assert!(types(&network.received).contains(&"session_end"));
    let over_network = export_events(&server.store.read_session(&report.session_id).unwrap(), ExportFormat::Jsonl);

    let store = Arc::new(MemoryStore::new());
    let storage: Arc<dyn StorageDriver> = store.clone();
    let svc = Arc::new(SessionService::new([Arc::new(heater_window())], storage, Arc::new(NoEngines), ServiceConfig::injected(11)));
    let local = run_bot(&mut InProcessDriver::new(svc), "heater-window", &script, None).await.unwrap();
    assert!(local.passed());
    let in_process = export_events(&store.read_session(&local.session_id).unwrap(), ExportFormat::Jsonl);
    assert_eq!(over_network, in_process);
}
