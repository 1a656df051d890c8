use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use shine_core::bot::{run_bot, BotDriver, BotError, BotScript, InProcessDriver};
use shine_core::log::{
    export_events, export_session, open_storage, ExportError, ExportFormat, MemoryStore, StorageDriver, StorageError,
    StorageKind,
};
use shine_core::scenario::{compile, parse_scenario, validate_scenario, CompileError, CompiledScenario, DeliveryMode};
use shine_core::session::{NoEngines, ServiceConfig, SessionService};
use shine_server::{load_scenario_dir, AppState, NetworkDriver, NetworkEngines, RESEARCH_TOKEN_ENV};
use tokio::net::TcpListener;

pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    /// Exit 1: the input was read but did not hold up.
    fn failed(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }

    /// Exit 2: I/O, parse or configuration problems.
    fn fatal(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }
}

type CmdResult = Result<ExitCode, CliError>;

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::fatal(format!("cannot read {}: {e}", path.display())))
}

fn runtime() -> Result<tokio::runtime::Runtime, CliError> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::fatal(format!("cannot start runtime: {e}")))
}

/// Flags win over SHINE_STORAGE / SHINE_STORAGE_URL.
fn storage(kind: Option<StorageKind>, url: Option<String>) -> Result<Arc<dyn StorageDriver>, CliError> {
    let kind = match kind {
        Some(k) => k,
        None => std::env::var("SHINE_STORAGE")
            .unwrap_or_else(|_| "memory".into())
            .parse()
            .map_err(|e: StorageError| CliError::fatal(e.to_string()))?,
    };
    let url = url.or_else(|| std::env::var("SHINE_STORAGE_URL").ok());
    open_storage(kind, url.as_deref()).map_err(|e| CliError::fatal(e.to_string()))
}

pub fn validate(path: &Path, json: bool) -> CmdResult {
    let bytes = read(path)?;
    let spec = parse_scenario(&bytes).map_err(|e| CliError::fatal(format!("{}: {e}", path.display())))?;
    let report = validate_scenario(&spec);
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("reports serialize"));
    } else {
        print!("{}", report.render());
    }
    Ok(if report.ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

pub fn serve(dir: &Path, host: &str, port: u16, kind: Option<StorageKind>, url: Option<String>) -> CmdResult {
    let load = load_scenario_dir(dir).map_err(|e| CliError::fatal(format!("cannot read {}: {e}", dir.display())))?;
    for skipped in &load.skipped {
        eprintln!("warning: skipping {}: {}", skipped.path.display(), skipped.reason.trim_end());
    }
    if load.loaded.is_empty() {
        return Err(CliError::fatal(format!("no valid scenarios in {}", dir.display())));
    }
    let storage = storage(kind, url)?;
    let research_token = std::env::var(RESEARCH_TOKEN_ENV).ok().filter(|t| !t.is_empty());
    if research_token.is_none() {
        eprintln!("warning: {RESEARCH_TOKEN_ENV} is not set; log export over HTTP is disabled");
    }
    runtime()?.block_on(async move {
        let listener = TcpListener::bind((host, port))
            .await
            .map_err(|e| CliError::fatal(format!("cannot listen on {host}:{port}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| CliError::fatal(e.to_string()))?;
        let service = Arc::new(SessionService::new(
            load.loaded,
            storage,
            Arc::new(NetworkEngines::new()),
            ServiceConfig::live(format!("ws://{addr}")),
        ));
        for id in service.scenario_ids() {
            eprintln!("loaded scenario {id}");
        }
        println!("listening on http://{addr}");
        let _ = std::io::stdout().flush();
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        shine_server::serve(listener, AppState { service, research_token }, shutdown)
            .await
            .map_err(|e| CliError::fatal(format!("server error: {e}")))?;
        Ok(ExitCode::SUCCESS)
    })
}

pub struct SimulateArgs {
    pub scenario: PathBuf,
    pub bot: PathBuf,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: ExportFormat,
    pub mode: Option<DeliveryMode>,
    pub via_network: bool,
}

fn load_scenario(path: &Path) -> Result<CompiledScenario, CliError> {
    let spec = parse_scenario(&read(path)?).map_err(|e| CliError::fatal(format!("{}: {e}", path.display())))?;
    compile(spec).map_err(|CompileError::Invalid(report)| {
        CliError::fatal(format!("{} is not a valid scenario:\n{}", path.display(), report.render().trim_end()))
    })
}

fn bot_error(e: BotError) -> CliError {
    CliError::fatal(e.to_string())
}

pub fn simulate(args: SimulateArgs) -> CmdResult {
    let scenario = Arc::new(load_scenario(&args.scenario)?);
    let script = BotScript::parse(&read(&args.bot)?).map_err(bot_error)?;
    script.check().map_err(bot_error)?;
    let store = Arc::new(MemoryStore::new());
    let scenario_id = scenario.id().to_string();

    let report = runtime()?.block_on(async {
        let storage: Arc<dyn StorageDriver> = store.clone();
        if args.via_network {
            let listener = TcpListener::bind("127.0.0.1:0").await.map_err(|e| CliError::fatal(e.to_string()))?;
            let addr = listener.local_addr().map_err(|e| CliError::fatal(e.to_string()))?;
            let mut config = ServiceConfig::injected(args.seed);
            config.ws_base = format!("ws://{addr}");
            let service = Arc::new(SessionService::new([scenario], storage, Arc::new(NetworkEngines::new()), config));
            let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
            let server = tokio::spawn(shine_server::serve(listener, AppState { service, research_token: None }, async {
                let _ = stopped.await;
            }));
            let mut driver = NetworkDriver::new(format!("http://{addr}"));
            let report = drive(&mut driver, &scenario_id, &script, args.mode).await;
            let _ = stop.send(());
            let _ = server.await;
            report
        } else {
            let service = Arc::new(SessionService::new([scenario], storage, Arc::new(NoEngines), ServiceConfig::injected(args.seed)));
            drive(&mut InProcessDriver::new(service), &scenario_id, &script, args.mode).await
        }
    })?;

    if let Some(out) = &args.out {
        let log = store.read_session(&report.session_id).map_err(|e| CliError::fatal(e.to_string()))?;
        std::fs::write(out, export_events(&log, args.format))
            .map_err(|e| CliError::fatal(format!("cannot write {}: {e}", out.display())))?;
    }
    let snapshot = serde_json::to_string_pretty(&report.final_state.snapshot).expect("snapshots serialize");
    // A closed stdout (e.g. piped into `head`) must not mask the exit code.
    let _ = writeln!(std::io::stdout(), "{snapshot}");
    match report.failure {
        None => Ok(ExitCode::SUCCESS),
        Some(f) => {
            let step = serde_json::to_string(&f.step).expect("steps serialize");
            Err(CliError::failed(format!("step {} {step} failed: {}", f.index, f.message)))
        }
    }
}

async fn drive(
    driver: &mut dyn BotDriver,
    scenario_id: &str,
    script: &BotScript,
    mode: Option<DeliveryMode>,
) -> Result<shine_core::bot::BotReport, CliError> {
    run_bot(driver, scenario_id, script, mode).await.map_err(bot_error)
}

pub fn export(
    session_id: &str,
    format: ExportFormat,
    kind: Option<StorageKind>,
    url: Option<String>,
    out: Option<&Path>,
) -> CmdResult {
    let storage = storage(kind, url)?;
    let bytes = export_session(storage.as_ref(), session_id, format).map_err(|e| match e {
        ExportError::Storage(StorageError::UnknownSession(_)) => CliError::failed(format!("unknown session `{session_id}`")),
        other => CliError::fatal(other.to_string()),
    })?;
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| CliError::fatal(format!("cannot write {}: {e}", path.display())))?,
        None => std::io::stdout().write_all(&bytes).map_err(|e| CliError::fatal(e.to_string()))?,
    }
    Ok(ExitCode::SUCCESS)
}
