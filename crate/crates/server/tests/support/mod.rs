#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use shine_core::log::{MemoryStore, StorageDriver};
use shine_core::scenario::{compile, parse_scenario, CompiledScenario};
use shine_core::session::{EngineProvider, NoEngines, ServiceConfig, SessionService};
use shine_server::{router, AppState};
use tokio::net::TcpListener;

pub const RESEARCH_TOKEN: &str = "research-secret";

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn heater_window() -> CompiledScenario {
    let bytes = std::fs::read(scenario_dir().join("heater-window.scenario.json")).unwrap();
    compile(parse_scenario(&bytes).unwrap()).unwrap()
}

pub struct Server {
    pub addr: SocketAddr,
    pub service: Arc<SessionService>,
    pub store: Arc<MemoryStore>,
}

impl Server {
    pub fn http(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    pub fn base(&self) -> String {
        format!("http://{}", self.addr)
    }
}

/// Serves `scenarios` on an OS-assigned port with injected time.
pub async fn start(scenarios: Vec<CompiledScenario>, engines: Arc<dyn EngineProvider>) -> Server {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let store = Arc::new(MemoryStore::new());
    let mut config = ServiceConfig::injected(11);
    config.ws_base = format!("ws://{addr}");
    let storage: Arc<dyn StorageDriver> = store.clone();
    let service = Arc::new(SessionService::new(scenarios.into_iter().map(Arc::new), storage, engines, config));
    let app = router(AppState { service: service.clone(), research_token: Some(RESEARCH_TOKEN.into()) });
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    Server { addr, service, store }
}

pub async fn start_default() -> Server {
    start(vec![heater_window()], Arc::new(NoEngines)).await
}
