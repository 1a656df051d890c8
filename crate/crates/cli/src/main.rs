//! `shinectl`: validate scenarios, serve studies, run bot sessions and
//! export logs.
//!
//! Exit codes: 0 success, 1 validation or assertion failure, 2 I/O,
//! parse or configuration errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use shine_core::log::{ExportFormat, StorageKind};
use shine_core::scenario::DeliveryMode;

#[derive(Parser)]
#[command(name = "shinectl", version, about = "Smart-home explanation study tooling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and print its validation report.
    Validate {
        path: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Serve the REST and WebSocket study API.
    Serve {
        #[arg(long, default_value = "scenarios")]
        scenario_dir: PathBuf,
        /// 0 picks a free port; the chosen address is printed.
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Overrides SHINE_STORAGE.
        #[arg(long)]
        storage: Option<StorageKind>,
        /// Docstore directory; overrides SHINE_STORAGE_URL.
        #[arg(long)]
        storage_url: Option<String>,
    },
    /// Run a bot script against a scenario under virtual time.
    Simulate {
        scenario: PathBuf,
        bot: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the session log here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "jsonl", value_parser = parse_format)]
        format: ExportFormat,
        /// Overrides the script's delivery mode.
        #[arg(long)]
        mode: Option<Mode>,
        /// Drive the session through a local HTTP/WebSocket server.
        #[arg(long)]
        via_network: bool,
    },
    /// Export a stored session log.
    Export {
        session_id: String,
        #[arg(long, default_value = "jsonl", value_parser = parse_format)]
        format: ExportFormat,
        #[arg(long)]
        storage: Option<StorageKind>,
        #[arg(long)]
        storage_url: Option<String>,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Push,
    Pull,
    Interactive,
}

impl From<Mode> for DeliveryMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Push => DeliveryMode::Push,
            Mode::Pull => DeliveryMode::Pull,
            Mode::Interactive => DeliveryMode::Interactive,
        }
    }
}

fn parse_format(s: &str) -> Result<ExportFormat, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { path, json } => commands::validate(&path, json),
        Command::Serve { scenario_dir, port, host, storage, storage_url } => {
            commands::serve(&scenario_dir, &host, port, storage, storage_url)
        }
        Command::Simulate { scenario, bot, seed, out, format, mode, via_network } => commands::simulate(commands::SimulateArgs {
            scenario,
            bot,
            seed,
            out,
            format,
            mode: mode.map(Into::into),
            via_network,
        }),
        Command::Export { session_id, format, storage, storage_url, out } => {
            commands::export(&session_id, format, storage, storage_url, out.as_deref())
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("shinectl: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
